from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import click

import settings
from models.config import ALGOS, RunConfig
from models.errors import BanditError, InvalidConfigError
from services.harness import aggregate, expand_grid, parse_value, run_seeds, validate_config
from services.verification import raise_on_failure, run_verification, verify_config
from utils.output import reports_frame, write_csv, write_json

logger = logging.getLogger(__name__)


# -----------------------------------------------------------------------------
# Helper functions
# -----------------------------------------------------------------------------
def handle_errors(fn):
    """Turn package errors into their exit codes instead of tracebacks."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except BanditError as e:
            logger.error("%s: %s", type(e).__name__, e.detail)
            click.echo(f"error: {e.detail}", err=True)
            sys.exit(e.exit_code)

    return wrapper


def _read_config_file(path: Optional[Path]) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise InvalidConfigError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise InvalidConfigError(f"{path} must hold a JSON object")
    return data


def _json_flag(name: str, text: Optional[str]):
    if text is None:
        return None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidConfigError(f"--{name} must be a JSON object: {e}") from e


def load_config(path: Optional[Path], **overrides) -> RunConfig:
    """Config file first, then every flag that was given; validated once at the end."""
    data = _read_config_file(path)
    seeds, seed_base = overrides.pop("seeds", None), overrides.pop("seed_base", None)
    if seeds is not None:
        data["seeds"] = {"count": seeds, "base": seed_base or 0}
    elif seed_base is not None:
        raise InvalidConfigError("--seed_base needs --seeds")
    for key in ("adversary", "delays"):
        if overrides.get(key) is not None:
            overrides[key] = _json_flag(key, overrides[key])
    if overrides.get("checkpoints") is not None:
        overrides["checkpoints"] = [int(c) for c in overrides["checkpoints"].split(",") if c.strip()]
    data.update({k: v for k, v in overrides.items() if v is not None})
    return validate_config(data)


def parse_grid(items: List[str]) -> Dict[str, list]:
    grid: Dict[str, list] = {}
    for item in items:
        field, sep, values = item.partition("=")
        if not sep or not field or not values:
            raise InvalidConfigError(f"grid entry {item!r} must look like field=v1,v2")
        grid[field.strip()] = [parse_value(v.strip()) for v in values.split(",")]
    return grid


def _workers(config: RunConfig, flag: Optional[int]) -> int:
    """--workers wins; otherwise the larger of the config value and BANDIT_WORKERS."""
    return flag or max(config.workers, settings.WORKERS)


def _log_summary(summary) -> None:
    logger.info(
        "%s: n=%d mean regret %.3f (stderr %.3f); bound violations %s",
        summary.algo, summary.n, summary.mean, summary.stderr,
        {k: round(v, 3) for k, v in summary.violation_fraction.items()},
    )


def config_options(fn):
    """Flags shared by `run` and `sweep`; each overrides the config-file field of the same name."""
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
                     help="JSON file mirroring RunConfig"),
        click.option("--algo", type=click.Choice(ALGOS)),
        click.option("--K", "K", type=int, help="Number of arms"),
        click.option("--T", "T", type=int, help="Horizon"),
        click.option("--delta", type=float, help="Confidence of high-probability bounds"),
        click.option("--d_bound", type=int, help="A priori maximum delay (deda-bound)"),
        click.option("--seeds", type=int, help="Number of seeds"),
        click.option("--seed_base", type=int, help="First seed"),
        click.option("--adversary", help='Loss descriptor as JSON, e.g. \'{"kind": "constant", "c": 0}\''),
        click.option("--delays", help='Delay descriptor as JSON, e.g. \'{"kind": "constant", "d": 5}\''),
        click.option("--checkpoints", help="Comma-separated rounds for prefix regret"),
        click.option("--csv", type=click.Path(dir_okay=False, path_type=Path)),
        click.option("--json", "json_path", type=click.Path(dir_okay=False, path_type=Path)),
        click.option("--trace_dir", type=click.Path(file_okay=False, path_type=Path)),
        click.option("--workers", type=int),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


# -----------------------------------------------------------------------------
# Commands
# -----------------------------------------------------------------------------
@click.group()
@click.option("--log-level", default=None, help="Overrides BANDIT_LOG_LEVEL")
def cli(log_level: Optional[str]):
    """Delay-adaptive Exp3 experiments."""
    settings.configure_logging(log_level)


@cli.command()
@config_options
@handle_errors
def run(config_path, json_path, **overrides):
    """One configuration over many seeds."""
    config = load_config(config_path, json=json_path, **overrides)
    logger.info("=" * 60)
    logger.info("run %s K=%d T=%d adversary=%s delays=%s", config.algo, config.K, config.T,
                config.adversary.kind, config.delays.kind)
    logger.info("=" * 60)

    reports = run_seeds(config, _workers(config, overrides.get("workers")))
    summary = aggregate(reports, config.delta)
    _log_summary(summary)
    if config.csv:
        write_csv(reports, config.csv)
    else:
        click.echo(reports_frame(reports).to_csv(index=False), nl=False)
    if config.json_path:
        write_json(reports, config.json_path, summary)


@cli.command()
@config_options
@click.option("--grid", "grid", multiple=True, help="field=v1,v2 (dotted fields reach into descriptors)")
@handle_errors
def sweep(config_path, json_path, grid, **overrides):
    """Cartesian grid over config fields; all rows go to one CSV."""
    base = load_config(config_path, json=json_path, **overrides).model_dump(mode="json", by_alias=True)
    configs = expand_grid(base, parse_grid(list(grid)))
    logger.info("=" * 60)
    logger.info("sweep over %d configurations", len(configs))
    logger.info("=" * 60)

    out = Path(base["csv"]) if base.get("csv") else Path(settings.OUTPUT_DIR) / "sweep.csv"
    all_reports = []
    for i, config in enumerate(configs):
        reports = run_seeds(config, _workers(config, overrides.get("workers")))
        summary = aggregate(reports, config.delta)
        _log_summary(summary)
        write_csv(reports, out, append=i > 0)
        all_reports.extend(reports)
    if base.get("json"):
        write_json(all_reports, Path(base["json"]))
    click.echo(str(out))


@cli.command()
@click.option("--instances", type=int, default=None, help="Random instances per check (BANDIT_VERIFY_INSTANCES)")
@click.option("--seed", type=int, default=0)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Also check this configuration (determinism, and the DeDa oracles for deda runs)")
@handle_errors
def verify(instances, seed, config_path):
    """Randomised self-checks; exits 2 if any fails."""
    instances = instances or settings.VERIFY_INSTANCES
    logger.info("=" * 60)
    logger.info("verification: %d instances per check, seed %d", instances, seed)
    logger.info("=" * 60)
    results = run_verification(instances, seed)
    if config_path is not None:
        results += verify_config(load_config(config_path))
    for r in results:
        click.echo(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  {r.detail}")
    raise_on_failure(results)


def main() -> None:
    try:
        cli.main(standalone_mode=False)
    except click.ClickException as e:
        e.show()
        sys.exit(InvalidConfigError.exit_code)
    except click.Abort:
        sys.exit(1)


if __name__ == "__main__":
    main()
