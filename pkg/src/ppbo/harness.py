"""Benchmark loop: simulated oracle, query budget, incumbent tracking.

Per seed: D coordinate initialization queries with random references,
then fit / acquire / ask until the budget is spent, recording the
incumbent (the predictive-mean maximizer) after every fit. Every random
draw comes from a stream keyed by (seed, purpose, iteration), so any
iteration is a pure function of the seed and the history.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .acquisition import AcquisitionConfig, select_next_query
from .geometry import Domain, ProjectiveQuery, coordinate_projection, denormalize_point
from .gp import (
    FitError,
    Hyperparameters,
    ModelState,
    NumericalError,
    TgnSchedule,
    fit_map,
    make_observation,
    posterior_mean_argmax,
)
from .oracles import eval_test_function, make_test_function, projective_feedback

# Stream tags for the per-iteration generators.
_INIT, _FEEDBACK, _BETAS, _ARGMAX, _ACQUIRE = range(5)


def stream(seed: int, tag: int, index: int = 0) -> np.random.Generator:
    """Deterministic generator for one purpose at one iteration."""
    return np.random.default_rng(np.random.SeedSequence((seed, tag, index)))


@dataclass(frozen=True)
class BenchmarkConfig:
    """One benchmark batch: function, strategy, budget, seeds."""

    function: str
    strategy: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    budget: int = 100
    seeds: tuple = (0,)
    hyper: Hyperparameters | None = None
    schedule: TgnSchedule | None = None
    m: int = 25
    noise_sd: float | None = None
    restarts: int = 20
    output_path: str | None = None
    record_timing: bool = True
    workers: int = 1

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("need at least one seed")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.m < 1:
            raise ValueError("need m >= 1 pseudo-observations")

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkConfig":
        d = dict(d)
        if "strategy" in d and isinstance(d["strategy"], (dict, str)):
            raw = d["strategy"]
            d["strategy"] = AcquisitionConfig.from_dict(
                raw if isinstance(raw, dict) else {"strategy": raw}
            )
        if isinstance(d.get("hyper"), dict):
            d["hyper"] = Hyperparameters.from_dict(d["hyper"])
        if isinstance(d.get("schedule"), dict):
            d["schedule"] = TgnSchedule.from_dict(d["schedule"])
        if isinstance(d.get("seeds"), int):
            d["seeds"] = tuple(range(d["seeds"]))
        return cls(**d)


@dataclass(frozen=True)
class ConvergenceRecord:
    """Incumbent snapshot after one fit."""

    seed: int
    iteration: int
    x_opt: np.ndarray  # native units
    f_true: float  # noiseless objective at x_opt
    wall_ms: float


@dataclass(frozen=True)
class BenchmarkResult:
    records: tuple
    failed: dict  # seed -> error message

    @property
    def ok(self) -> bool:
        return not self.failed

    def final_per_seed(self) -> dict:
        out = {}
        for rec in self.records:
            cur = out.get(rec.seed)
            if cur is None or rec.iteration > cur.iteration:
                out[rec.seed] = rec
        return out


def initial_queries(dim: int, rng: np.random.Generator) -> list[ProjectiveQuery]:
    """One query per coordinate, each with a fresh uniform reference."""
    out = []
    for d in range(dim):
        x = rng.uniform(size=dim)
        x[d] = 0.0
        out.append(ProjectiveQuery(coordinate_projection(dim, d), x))
    return out


def _resolved(cfg: BenchmarkConfig, dim: int):
    hyper = cfg.hyper or Hyperparameters.default(dim)
    schedule = cfg.schedule or TgnSchedule.default(dim)
    return hyper, schedule


def run_seed(cfg: BenchmarkConfig, seed: int) -> list[ConvergenceRecord]:
    """One full optimization run; raises on unrecoverable fit failures."""
    tf = make_test_function(cfg.function, noise_sd=cfg.noise_sd)
    domain = tf.domain
    dim = domain.dim
    if cfg.budget <= dim:
        raise ValueError(f"budget {cfg.budget} must exceed the dimension {dim}")
    hyper, schedule = _resolved(cfg, dim)

    records: list[ConvergenceRecord] = []
    dataset = []
    t0 = time.perf_counter()

    def record(iteration: int, model: ModelState):
        nonlocal t0
        x_star, _ = posterior_mean_argmax(model, cfg.restarts, stream(seed, _ARGMAX, iteration))
        x_native = denormalize_point(domain, x_star)
        f_true = eval_test_function(tf, x_native, None)
        t1 = time.perf_counter()
        wall = (t1 - t0) * 1e3 if cfg.record_timing else 0.0
        t0 = t1
        records.append(
            ConvergenceRecord(
                seed=seed,
                iteration=iteration,
                x_opt=x_native,
                f_true=f_true,
                wall_ms=wall,
            )
        )
        return x_star

    for i, query in enumerate(initial_queries(dim, stream(seed, _INIT))):
        answer = projective_feedback(tf, query, stream(seed, _FEEDBACK, i))
        dataset.append(
            make_observation(query, answer.alpha_star, cfg.m, schedule, i, stream(seed, _BETAS, i))
        )
    model = fit_map(dataset, hyper, schedule, seed, dim=dim)
    x_star = record(dim, model)

    for it in range(dim, cfg.budget):
        query = select_next_query(
            model,
            cfg.strategy,
            iteration=it - dim,
            rng=stream(seed, _ACQUIRE, it),
            dim=dim,
            x_star=x_star,
        )
        answer = projective_feedback(tf, query, stream(seed, _FEEDBACK, it))
        dataset.append(
            make_observation(query, answer.alpha_star, cfg.m, schedule, it, stream(seed, _BETAS, it))
        )
        model = fit_map(
            dataset, hyper, schedule, seed, dim=dim, warm_start=model.f_map
        )
        x_star = record(it + 1, model)
    return records


def run_benchmark(cfg: BenchmarkConfig) -> BenchmarkResult:
    """Run all seeds, isolate failures, optionally write the CSV."""
    records: list[ConvergenceRecord] = []
    failed: dict[int, str] = {}
    if cfg.workers > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {seed: pool.submit(run_seed, cfg, seed) for seed in cfg.seeds}
            for seed, fut in futures.items():
                try:
                    records.extend(fut.result())
                except (FitError, NumericalError, ValueError) as exc:
                    failed[seed] = str(exc)
    else:
        for seed in cfg.seeds:
            try:
                records.extend(run_seed(cfg, seed))
            except (FitError, NumericalError, ValueError) as exc:
                failed[seed] = str(exc)
    records.sort(key=lambda r: (r.seed, r.iteration))
    result = BenchmarkResult(records=tuple(records), failed=failed)
    if cfg.output_path:
        write_csv(result.records, cfg.output_path)
    return result


def write_csv(records, path) -> None:
    """Stable text format: floats are written with shortest round-trip repr."""
    if not records:
        with open(path, "w", newline="") as fh:
            fh.write("seed,iteration,f_true,wall_ms\n")
        return
    dim = records[0].x_opt.size
    header = "seed,iteration,f_true,wall_ms," + ",".join(f"x_opt_{d}" for d in range(dim))
    lines = [header]
    for rec in records:
        cells = [str(rec.seed), str(rec.iteration), repr(rec.f_true), repr(rec.wall_ms)]
        cells += [repr(float(v)) for v in rec.x_opt]
        lines.append(",".join(cells))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def load_config(path) -> BenchmarkConfig:
    with open(path) as fh:
        return BenchmarkConfig.from_dict(json.load(fh))


def config_with(cfg: BenchmarkConfig, **kwargs) -> BenchmarkConfig:
    return replace(cfg, **kwargs)
