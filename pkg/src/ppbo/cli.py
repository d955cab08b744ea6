"""Command-line entry points: benchmark runs and the elicitation service."""

from __future__ import annotations

import json
import sys

import click

from .acquisition import STRATEGIES, AcquisitionConfig
from .harness import BenchmarkConfig, load_config, run_benchmark


@click.group()
def main():
    """Preference-based Bayesian optimization from line-optimum feedback."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON benchmark config; flags override its fields.")
@click.option("--function", default=None, help="Test function name (e.g. camel2d).")
@click.option("--strategy", default=None, type=click.Choice(STRATEGIES, case_sensitive=False))
@click.option("--budget", default=None, type=int, help="Total query budget.")
@click.option("--seeds", default=None,
              help="Seed count (e.g. 10) or comma-separated list (e.g. 0,3,7).")
@click.option("--out", "output_path", default=None, type=click.Path(),
              help="CSV output path.")
@click.option("--noise-sd", default=None, type=float,
              help="Oracle noise (default: 1% of the function's sampled value spread).")
@click.option("--m", default=None, type=int, help="Pseudo-observations per answer.")
@click.option("--coordinate-only/--free-projections", default=None,
              help="Restrict projections to coordinate vectors.")
@click.option("--workers", default=None, type=int, help="Parallel seed workers.")
@click.option("--no-timing", is_flag=True,
              help="Write wall_ms as 0 so repeated runs are byte-identical.")
def bench(config_path, function, strategy, budget, seeds, output_path,
          noise_sd, m, coordinate_only, workers, no_timing):
    """Run a simulated-oracle benchmark and write a convergence CSV."""
    if config_path:
        cfg = load_config(config_path)
    elif function:
        cfg = BenchmarkConfig(function=function)
    else:
        raise click.UsageError("pass --config or --function")

    updates = {}
    if function:
        updates["function"] = function
    if strategy:
        acq = cfg.strategy.to_dict()
        acq["strategy"] = strategy.lower()
        updates["strategy"] = AcquisitionConfig.from_dict(acq)
    if coordinate_only is not None:
        acq = updates.get("strategy", cfg.strategy).to_dict()
        acq["coordinate_only"] = coordinate_only
        updates["strategy"] = AcquisitionConfig.from_dict(acq)
    if budget is not None:
        updates["budget"] = budget
    if seeds is not None:
        updates["seeds"] = (
            tuple(int(s) for s in seeds.split(","))
            if "," in seeds
            else tuple(range(int(seeds)))
        )
    if output_path is not None:
        updates["output_path"] = output_path
    if noise_sd is not None:
        updates["noise_sd"] = noise_sd
    if m is not None:
        updates["m"] = m
    if workers is not None:
        updates["workers"] = workers
    if no_timing:
        updates["record_timing"] = False
    if updates:
        from dataclasses import replace

        cfg = replace(cfg, **updates)

    result = run_benchmark(cfg)
    finals = result.final_per_seed()
    for seed in cfg.seeds:
        if seed in result.failed:
            click.echo(f"seed {seed}: FAILED ({result.failed[seed]})")
        elif seed in finals:
            rec = finals[seed]
            click.echo(f"seed {seed}: f_true={rec.f_true:.6g} after {rec.iteration} queries")
    if cfg.output_path:
        click.echo(f"wrote {cfg.output_path}")
    if result.failed:
        sys.exit(1)


@main.command()
@click.option("--port", default=8000, type=int, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", default="./sessions", type=click.Path(), show_default=True,
              help="Directory for the per-session JSON files.")
def serve(port, host, data_dir):
    """Run the elicitation HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(data_dir), host=host, port=port)


@main.command("show-config")
@click.argument("path", type=click.Path(exists=True))
def show_config(path):
    """Validate and echo a benchmark config file."""
    cfg = load_config(path)
    click.echo(json.dumps(
        {
            "function": cfg.function,
            "strategy": cfg.strategy.to_dict(),
            "budget": cfg.budget,
            "seeds": list(cfg.seeds),
            "m": cfg.m,
            "noise_sd": cfg.noise_sd,
            "output_path": cfg.output_path,
        },
        indent=2,
    ))


if __name__ == "__main__":
    main()
