"""Selection of the next query to ask the oracle.

All strategies emit a valid query (sup-norm-normalized nonnegative
projection, reference zeroed on its support). The sampling strategies
score a candidate query by drawing joint realizations of the posterior
along the candidate segment (discrete Thompson samples on a fixed grid)
and reducing their maxima: the expected positive gap over the incumbent
mean, or the variance of the maxima for pure exploration.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import (
    ProjectiveQuery,
    as_unit_point,
    coordinate_projection,
    make_projection,
    query_with_reference,
)
from .gp import ModelState, NumericalError, posterior_mean_argmax, predict

STRATEGIES = ("ei", "ext", "exr", "pcd", "rand", "ei-ext", "ei-rand")


@dataclass(frozen=True)
class AcquisitionConfig:
    """Strategy name plus the Monte-Carlo and search constants.

    K: posterior realizations per score; J: grid points per segment;
    restarts: random starts for the query-space search; R: reference
    samples for the integrated criterion; coordinate_only restricts
    projections to the standard unit vectors.
    """

    strategy: str = "ei"
    K: int = 100
    J: int = 50
    restarts: int = 20
    coordinate_only: bool = False
    R: int = 50

    def __post_init__(self):
        object.__setattr__(self, "strategy", self.strategy.lower())
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choices: {STRATEGIES}")
        if self.K < 1 or self.J < 2 or self.restarts < 1 or self.R < 1:
            raise ValueError("need K >= 1, J >= 2, restarts >= 1, R >= 1")

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "K": self.K,
            "J": self.J,
            "restarts": self.restarts,
            "coordinate_only": self.coordinate_only,
            "R": self.R,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AcquisitionConfig":
        return cls(**d)


@dataclass(frozen=True)
class AcquisitionResult:
    query: ProjectiveQuery
    score: float
    evaluations: int


def _slice_moments(model: ModelState, q: ProjectiveQuery, J: int):
    """Predictive mean and covariance factor on a J-point segment grid."""
    grid = np.linspace(0.0, 1.0, J)
    pts = grid[:, None] * q.xi.values[None, :] + q.x[None, :]
    mu, cov = predict(model, pts)
    scale = max(float(np.max(np.diag(cov))), model.hyper.sigma_f**2)
    bump = 0.0
    for _ in range(8):
        try:
            L = np.linalg.cholesky(cov if bump == 0.0 else cov + bump * np.eye(J))
            return mu, L
        except np.linalg.LinAlgError:
            bump = 1e-12 * scale if bump == 0.0 else bump * 10.0
    raise NumericalError("segment covariance could not be factorized")


def _max_of_draws(mu: np.ndarray, L: np.ndarray, normals: np.ndarray) -> np.ndarray:
    """Maxima of joint posterior draws; ``normals`` has shape (J, K)."""
    return (mu[:, None] + L @ normals).max(axis=0)


def thompson_max_sample(
    model: ModelState, q: ProjectiveQuery, J: int, rng: np.random.Generator
) -> float:
    """One draw of the segment's posterior maximum on a J-point grid."""
    mu, L = _slice_moments(model, q, J)
    return float(_max_of_draws(mu, L, rng.standard_normal((J, 1)))[0])


def expected_improvement(
    model: ModelState,
    q: ProjectiveQuery,
    cfg: AcquisitionConfig,
    mu_star: float,
    rng: np.random.Generator,
) -> float:
    """Average positive gap between segment maxima and the incumbent mean."""
    normals = rng.standard_normal((cfg.J, cfg.K))
    return _ei_given_normals(model, q, normals, mu_star)


def _ei_given_normals(model, q, normals, mu_star) -> float:
    mu, L = _slice_moments(model, q, normals.shape[0])
    z = _max_of_draws(mu, L, normals)
    return float(np.mean(np.clip(z - mu_star, 0.0, None)))


def explore_score(
    model: ModelState,
    q: ProjectiveQuery,
    cfg: AcquisitionConfig,
    rng: np.random.Generator,
) -> float:
    """Sample variance of the segment's posterior maxima."""
    normals = rng.standard_normal((cfg.J, cfg.K))
    return _variance_given_normals(model, q, normals)


def _variance_given_normals(model, q, normals) -> float:
    mu, L = _slice_moments(model, q, normals.shape[0])
    z = _max_of_draws(mu, L, normals)
    return float(np.var(z, ddof=1)) if z.size > 1 else 0.0


def _random_projection(dim: int, rng: np.random.Generator):
    """Random sparse nonnegative direction, sup-norm normalized.

    The support size is drawn from {1, .., dim-1} so the reference
    vector keeps free coordinates to place the segment.
    """
    size = int(rng.integers(1, dim)) if dim > 2 else 1
    support = np.sort(rng.choice(dim, size=size, replace=False))
    raw = np.zeros(dim)
    raw[support] = rng.uniform(0.1, 1.0, size=size)
    return make_projection(raw)


def optimize_acquisition(
    model: ModelState,
    cfg: AcquisitionConfig,
    rng: np.random.Generator,
    dim: int | None = None,
) -> AcquisitionResult:
    """Maximize an EI or exploration score over candidate queries.

    Projections are the coordinate vectors (``coordinate_only``) or
    ``restarts`` random sparse directions; for each projection the
    reference is searched by random multi-start plus one sweep of
    per-coordinate refinement over the free coordinates. All candidates
    share one block of normal draws so score comparisons are low-noise
    and the argmax is stable under the seed.
    """
    if cfg.strategy not in ("ei", "exr"):
        raise ValueError(f"optimize_acquisition handles ei/exr, not {cfg.strategy!r}")
    dim = model.dim if dim is None else dim
    if dim is None:
        raise ValueError("model has no dimension; pass dim explicitly")

    normals = rng.standard_normal((cfg.J, cfg.K))
    if cfg.strategy == "ei":
        x_star, mu_star = posterior_mean_argmax(model, cfg.restarts, rng)

        def score(q):
            return _ei_given_normals(model, q, normals, mu_star)

    else:
        x_star = posterior_mean_argmax(model, cfg.restarts, rng)[0] if not model.is_empty else None

        def score(q):
            return _variance_given_normals(model, q, normals)

    if cfg.coordinate_only:
        xis = [coordinate_projection(dim, d) for d in range(dim)]
    else:
        xis = [_random_projection(dim, rng) for _ in range(cfg.restarts)]

    evaluations = 0
    best: tuple[float, ProjectiveQuery] | None = None
    refine_grid = np.linspace(0.0, 1.0, 7)
    for xi in xis:
        references = list(rng.uniform(size=(cfg.restarts, dim)))
        if x_star is not None:
            references.insert(0, np.asarray(x_star))
        best_local = None
        for ref in references:
            q = query_with_reference(xi, ref)
            s = score(q)
            evaluations += 1
            if best_local is None or s > best_local[0]:
                best_local = (s, q)
        s_loc, q_loc = best_local
        free = [d for d in range(dim) if d not in set(xi.support.tolist())]
        x_cur = np.array(q_loc.x)
        for d in free:
            for v in refine_grid:
                if v == x_cur[d]:
                    continue
                x_try = x_cur.copy()
                x_try[d] = v
                q_try = ProjectiveQuery(xi, x_try)
                s_try = score(q_try)
                evaluations += 1
                if s_try > s_loc:
                    s_loc, q_loc = s_try, q_try
                    x_cur = x_try
        if best is None or s_loc > best[0]:
            best = (s_loc, q_loc)
    return AcquisitionResult(query=best[1], score=best[0], evaluations=evaluations)


def next_query_exploit(
    model: ModelState,
    rng: np.random.Generator,
    x_star: np.ndarray | None = None,
    support=None,
) -> ProjectiveQuery:
    """Query whose segment passes through the incumbent mean maximizer.

    The projection restricts the incumbent to the chosen support
    (a single uniformly random coordinate by default) rescaled to
    sup-norm 1; the reference is the incumbent with the support zeroed.
    Entirely zero incumbent coordinates fall back to a unit projection,
    keeping the segment through the incumbent at alpha = 0.
    """
    if x_star is None:
        x_star, _ = posterior_mean_argmax(model, rng=rng)
    x_star = np.asarray(x_star, dtype=float)
    dim = x_star.size
    if support is None:
        support = [int(rng.integers(dim))]
    support = np.asarray(sorted(support), dtype=int)
    vals = x_star[support]
    raw = np.zeros(dim)
    if vals.max() > 0.0:
        raw[support] = vals
    else:
        raw[support[0]] = 1.0
    xi = make_projection(raw)
    x = x_star.copy()
    x[support] = 0.0
    return ProjectiveQuery(xi, x)


def next_query_pcd(
    model: ModelState, iteration: int, x_star: np.ndarray | None = None
) -> ProjectiveQuery:
    """Coordinate projection rotated cyclically, anchored at the incumbent.

    Iteration i uses coordinate ``i mod D``; the reference is the
    incumbent mean maximizer with that coordinate zeroed (cube center
    for an empty model).
    """
    if x_star is None:
        if model.is_empty:
            if model.dim is None:
                raise ValueError("empty model has unknown dimension")
            x_star = np.full(model.dim, 0.5)
        else:
            x_star, _ = posterior_mean_argmax(model, rng=np.random.default_rng(0))
    x_star = np.asarray(x_star, dtype=float)
    d = iteration % x_star.size
    xi = coordinate_projection(x_star.size, d)
    x = x_star.copy()
    x[d] = 0.0
    return ProjectiveQuery(xi, x)


def next_query_random(
    dim: int, cfg: AcquisitionConfig, rng: np.random.Generator
) -> ProjectiveQuery:
    """Uniformly random projection and reference."""
    if cfg.coordinate_only:
        xi = coordinate_projection(dim, int(rng.integers(dim)))
    else:
        xi = _random_projection(dim, rng)
    return query_with_reference(xi, rng.uniform(size=dim))


def next_query_integrated_ei(
    model: ModelState,
    cfg: AcquisitionConfig,
    rng: np.random.Generator,
    dim: int | None = None,
) -> ProjectiveQuery:
    """Coordinate with the largest reference-averaged improvement score.

    The integral over references is estimated with R shared uniform
    draws (common random numbers across coordinates). The reference of
    the returned query is the incumbent (``ei-ext``) or uniform
    (``ei-rand``) with the chosen coordinate zeroed.
    """
    if cfg.strategy not in ("ei-ext", "ei-rand"):
        raise ValueError(f"integrated criterion requires ei-ext/ei-rand, not {cfg.strategy!r}")
    dim = model.dim if dim is None else dim
    if dim is None:
        raise ValueError("model has no dimension; pass dim explicitly")
    normals = rng.standard_normal((cfg.J, cfg.K))
    refs = rng.uniform(size=(cfg.R, dim))
    x_star, mu_star = posterior_mean_argmax(model, cfg.restarts, rng)
    scores = np.zeros(dim)
    for d in range(dim):
        xi = coordinate_projection(dim, d)
        total = 0.0
        for r in range(cfg.R):
            q = query_with_reference(xi, refs[r])
            total += _ei_given_normals(model, q, normals, mu_star)
        scores[d] = total / cfg.R
    d_best = int(np.argmax(scores))
    xi = coordinate_projection(dim, d_best)
    if cfg.strategy == "ei-ext":
        return query_with_reference(xi, x_star)
    return query_with_reference(xi, rng.uniform(size=dim))


def select_next_query(
    model: ModelState,
    cfg: AcquisitionConfig,
    iteration: int,
    rng: np.random.Generator,
    dim: int | None = None,
    x_star: np.ndarray | None = None,
) -> ProjectiveQuery:
    """Dispatch to the configured strategy.

    ``iteration`` counts acquisition rounds from zero (used by the
    cyclic strategy); ``x_star`` lets callers reuse an incumbent they
    already computed.
    """
    dim = model.dim if dim is None else dim
    s = cfg.strategy
    if s in ("ei", "exr"):
        return optimize_acquisition(model, cfg, rng, dim=dim).query
    if s == "ext":
        return next_query_exploit(model, rng, x_star=x_star)
    if s == "pcd":
        return next_query_pcd(model, iteration, x_star=x_star)
    if s == "rand":
        return next_query_random(dim, cfg, rng)
    if s in ("ei-ext", "ei-rand"):
        return next_query_integrated_ei(model, cfg, rng, dim=dim)
    raise ValueError(f"unknown strategy {s!r}")


def with_strategy(cfg: AcquisitionConfig, strategy: str) -> AcquisitionConfig:
    return replace(cfg, strategy=strategy.lower())
