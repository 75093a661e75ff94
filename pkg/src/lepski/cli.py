"""Command-line front end.

Subcommands: simulate, estimate, tail-risk, rates, verify-stability.
Every command takes --config PATH plus optional --seed, --out, --jobs and
--format overrides (environment: LEPSKI_SEED, LEPSKI_JOBS).  Exit codes:
0 success, 2 config error, 3 acceptance-red, 4 IO failure.
"""

from __future__ import annotations

import os
import sys

import click

from .errors import ConfigError, InsufficientOmegaPrime, LepskiError
from . import campaign

EXIT_CONFIG = 2
EXIT_RED = 3
EXIT_IO = 4


def _common(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(exists=False), help="Campaign JSON document.")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="Master seed override (env: LEPSKI_SEED).")(fn)
    fn = click.option("--out", type=click.Path(), default=None,
                      help="Output directory override.")(fn)
    fn = click.option("--jobs", type=int, default=None,
                      help="Worker count (env: LEPSKI_JOBS); output is byte-identical for any value.")(fn)
    fn = click.option("--format", "fmt", type=click.Choice(["csv", "json"]),
                      default="csv", show_default=True)(fn)
    return fn


def _resolve(seed, jobs):
    if seed is None and os.environ.get("LEPSKI_SEED"):
        seed = int(os.environ["LEPSKI_SEED"])
    if jobs is None:
        jobs = int(os.environ.get("LEPSKI_JOBS", "1"))
    if jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    return seed, jobs


def _load(config_path, seed, out, fmt):
    cfg = campaign.load_campaign(config_path, seed=seed, out=out)
    cfg.formats = [fmt]
    return cfg


def _run(body):
    try:
        body()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except InsufficientOmegaPrime as exc:
        click.echo(f"acceptance-red: {exc}", err=True)
        sys.exit(EXIT_RED)
    except OSError as exc:
        click.echo(f"io error: {exc}", err=True)
        sys.exit(EXIT_IO)
    except LepskiError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


@click.group()
def main():
    """Adaptive kernel regression campaigns and stability verification."""


@main.command()
@_common
def simulate(config_path, seed, out, jobs, fmt):
    """Write one sample CSV per (n, rep) cell."""

    def body():
        s, j = _resolve(seed, jobs)
        cfg = _load(config_path, s, out, fmt)
        paths = campaign.run_simulate(cfg, j)
        click.echo(f"wrote {len(paths)} sample files to {cfg.outputs}")

    _run(body)


@main.command()
@_common
def estimate(config_path, seed, out, jobs, fmt):
    """Run selection and rate diagnostics for every replication."""

    def body():
        s, j = _resolve(seed, jobs)
        cfg = _load(config_path, s, out, fmt)
        res = campaign.run_estimate(cfg, j)
        click.echo(f"wrote {len(res['rows'])} estimate rows to {cfg.outputs}")

    _run(body)


@main.command("tail-risk")
@_common
def tail_risk(config_path, seed, out, jobs, fmt):
    """Empirical tail of the risk against the random rate over the config's t_grid."""

    def body():
        s, j = _resolve(seed, jobs)
        cfg = _load(config_path, s, out, fmt)
        res = campaign.run_tail_risk(cfg, j)
        click.echo(f"wrote tail table ({len(res['rows'])} thresholds) to {cfg.outputs}")

    _run(body)


@main.command()
@_common
def rates(config_path, seed, out, jobs, fmt):
    """Deterministic-rate ladder with containment frequencies and scaling fit."""

    def body():
        s, j = _resolve(seed, jobs)
        cfg = _load(config_path, s, out, fmt)
        res = campaign.run_rates(cfg, j)
        if res["fit"]:
            click.echo(
                f"slope(h_w)={res['fit']['slope_hw']:.4f} "
                f"slope(rate)={res['fit']['slope_rate']:.4f}"
            )
        click.echo(f"wrote {len(res['rows'])} ladder rows to {cfg.outputs}")

    _run(body)


@main.command("verify-stability")
@_common
def verify_stability(config_path, seed, out, jobs, fmt):
    """Run the stability bound matrix; nonzero exit when any cell is red."""

    def body():
        s, _ = _resolve(seed, jobs)
        import json

        try:
            with open(config_path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        res = campaign.run_verify_stability(doc, seed=s, out=out, fmt=fmt)
        n_red = sum(1 for r in res["rows"] if not r["pass"])
        click.echo(f"wrote {len(res['rows'])} stability rows to {res['path']}")
        if n_red:
            click.echo(f"acceptance-red: {n_red} cells violate their bound", err=True)
            sys.exit(EXIT_RED)

    _run(body)


if __name__ == "__main__":
    main()
