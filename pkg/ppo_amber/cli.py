"""Command-line entry points: run, sweep, diag-isweight and evaluate."""

import argparse
import csv
import itertools
import logging
import sys
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

import colorlog
import yaml
from pydantic import ValidationError

from .const import (
    CHECKPOINT_FILE,
    CONF_ADAPTIVE,
    CONF_BATCH_DROP,
    CONF_BOOTSTRAP_ON_TIMEOUT,
    CONF_CLIP,
    CONF_ENV,
    CONF_EPISODIC_MINIBATCH,
    CONF_EPOCHS,
    CONF_FIXED_MINIBATCH,
    CONF_GAMMA,
    CONF_HORIZON,
    CONF_LAMBDA,
    CONF_MINIBATCH,
    CONF_NORMALIZE_ADVANTAGES,
    CONF_REPLAY_LENGTH,
    CONF_SEED,
    CONF_STEP_SIZE,
    CONF_TOTAL_STEPS,
    CONF_VALUE_COEF,
    DEFAULT_SEED,
    DIAG_ACTION_DIMS,
    NAME,
    SCORES_FILE,
    SUMMARY_FILE,
)
from .diagnostics import run_action_dims, run_isweight
from .exceptions import AmberError, ConfigFileError
from .helpers import sanitize_name
from .metrics import rank_configs
from .models import ScoreCell, ScoreTable, TrainConfig
from .trainer import evaluate, train

_LOGGER = logging.getLogger(__name__)

LOG_FORMAT = (
    "%(log_color)s%(asctime)s %(levelname)-8s%(reset)s %(name)s: %(message)s"
)

# (config key, type); booleans get --flag/--no-flag
CONFIG_FLAGS: tuple[tuple[str, type], ...] = (
    (CONF_ENV, str),
    (CONF_TOTAL_STEPS, int),
    (CONF_HORIZON, int),
    (CONF_MINIBATCH, int),
    (CONF_REPLAY_LENGTH, int),
    (CONF_EPOCHS, int),
    (CONF_GAMMA, float),
    (CONF_LAMBDA, float),
    (CONF_STEP_SIZE, float),
    (CONF_CLIP, float),
    (CONF_BATCH_DROP, float),
    (CONF_VALUE_COEF, float),
    (CONF_ADAPTIVE, bool),
    (CONF_SEED, int),
    (CONF_FIXED_MINIBATCH, bool),
    (CONF_EPISODIC_MINIBATCH, bool),
    (CONF_NORMALIZE_ADVANTAGES, bool),
    (CONF_BOOTSTRAP_ON_TIMEOUT, bool),
)
CONFIG_KEYS: frozenset[str] = frozenset(key for key, _ in CONFIG_FLAGS)
# manifest entries that are not config keys
MANIFEST_ONLY_KEYS: frozenset[str] = frozenset(
    {"manifest_schema", "metrics_schema", "score_normalization"}
)

SCORE_COLUMNS = (
    "task",
    "config",
    "seed",
    "final_score",
    "speed_score",
    "status",
    "error",
)
SUMMARY_COLUMNS = ("config", "final_ans", "speed_ans", "runs")


def setup_logging(verbose: bool = False) -> None:
    """Attach one colored console handler to the root logger."""
    handler = colorlog.StreamHandler()
    handler.setFormatter(colorlog.ColoredFormatter(LOG_FORMAT))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO)
    logging.getLogger(NAME).setLevel(logging.DEBUG if verbose else logging.INFO)


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "config", nargs="?", type=Path, help="Flat YAML config file (or a manifest)"
    )
    group = parser.add_argument_group("config overrides")
    for key, kind in CONFIG_FLAGS:
        flag = "--" + key.replace("_", "-")
        if kind is bool:
            group.add_argument(
                flag,
                dest=key,
                action=argparse.BooleanOptionalAction,
                default=argparse.SUPPRESS,
            )
        else:
            group.add_argument(flag, dest=key, type=kind, default=argparse.SUPPRESS)
    parser.add_argument("--out-dir", type=Path, help="Output directory")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")


def build_parser() -> argparse.ArgumentParser:
    """Parser with one subcommand per entry point."""
    parser = argparse.ArgumentParser(
        prog="ppo-amber",
        description="PPO with (adaptive) multi-batch experience replay.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Train one configuration")
    _add_config_arguments(run)
    run.set_defaults(handler=cmd_run)

    sweep = commands.add_parser("sweep", help="Train every cell of a grid")
    _add_config_arguments(sweep)
    sweep.add_argument(
        "--grid",
        action="append",
        default=[],
        metavar="KEY=V1,V2",
        help="Values to sweep for one config key (repeatable)",
    )
    sweep.add_argument("--jobs", type=int, default=1, help="Parallel processes")
    sweep.set_defaults(handler=cmd_sweep)

    diag = commands.add_parser(
        "diag-isweight", help="Train while recording IS-weight diagnostics"
    )
    _add_config_arguments(diag)
    diag.add_argument(
        "--action-dims",
        nargs="?",
        const=",".join(str(k) for k in DIAG_ACTION_DIMS),
        metavar="K1,K2",
        help="Run synth-K for each K and summarize R' at lag 1",
    )
    diag.set_defaults(handler=cmd_diag_isweight)

    evaluate_cmd = commands.add_parser(
        "evaluate", help="Mean return of a policy without updates"
    )
    _add_config_arguments(evaluate_cmd)
    evaluate_cmd.add_argument("--episodes", type=int, default=10)
    evaluate_cmd.add_argument("--checkpoint", type=Path)
    evaluate_cmd.add_argument("--deterministic", action="store_true")
    evaluate_cmd.set_defaults(handler=cmd_evaluate)

    return parser


def read_config_file(path: Path | None) -> dict[str, Any]:
    """Flat mapping from a YAML config file; manifest-only keys are ignored."""
    if path is None:
        return {}
    try:
        with path.open(encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except (OSError, yaml.YAMLError) as err:
        raise ConfigFileError(f"Cannot read config file {path}: {err}") from err
    if not isinstance(data, dict):
        raise ConfigFileError(
            f"Config file {path} must hold a mapping, got {type(data).__name__}"
        )
    return {k: v for k, v in data.items() if k not in MANIFEST_ONLY_KEYS}


def config_overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Config keys given on the command line."""
    given = vars(args)
    return {key: given[key] for key in CONFIG_KEYS if key in given}


def load_config(args: argparse.Namespace) -> TrainConfig:
    """File values overridden by flags, validated."""
    return TrainConfig.model_validate(
        {**read_config_file(args.config), **config_overrides(args)}
    )


def default_run_dir(config: TrainConfig, root: str = "runs") -> Path:
    """``runs/<env>_seed<seed>``."""
    return Path(root) / sanitize_name(f"{config.env}_seed{config.seed}")


def cmd_run(args: argparse.Namespace) -> int:
    """Train one configuration."""
    config = load_config(args)
    out_dir = args.out_dir or default_run_dir(config)
    records = train(config, out_dir)
    final = records[-1].mean_return_100
    _LOGGER.info(
        "Run written to %s (final mean return %s)",
        out_dir,
        "n/a" if final is None else round(final, 3),
    )
    return 0


def parse_grid(specs: Sequence[str]) -> dict[str, list[str]]:
    """``KEY=V1,V2`` specs as an ordered key -> values mapping."""
    grid: dict[str, list[str]] = {}
    for spec in specs:
        key, sep, raw = spec.partition("=")
        key = key.strip().replace("-", "_")
        values = [v.strip() for v in raw.split(",") if v.strip()]
        if not sep or not values:
            raise ConfigFileError(f"Grid spec '{spec}' is not KEY=V1,V2,...")
        if key not in CONFIG_KEYS:
            raise ConfigFileError(
                f"Grid key '{key}' is not a config key; known keys: "
                f"{', '.join(sorted(CONFIG_KEYS))}"
            )
        if key in grid:
            raise ConfigFileError(f"Grid key '{key}' given twice")
        grid[key] = values
    return grid


def grid_cells(grid: dict[str, list[str]]) -> list[dict[str, str]]:
    """Cartesian product of the grid, first key varying slowest."""
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*grid.values())]


def cell_label(cell: dict[str, str]) -> str:
    """Config label of a cell: every swept key except env and seed."""
    parts = [f"{k}={v}" for k, v in cell.items() if k not in (CONF_ENV, CONF_SEED)]
    return ",".join(parts) or "base"


def cell_dir_name(cell: dict[str, str]) -> str:
    """Run directory name of a cell."""
    return sanitize_name("_".join(f"{k}-{v}" for k, v in cell.items()) or "base")


def run_cell(settings: dict[str, Any], run_dir: str) -> tuple[float, float]:
    """Train one grid cell; returns (final-100 mean, all-episode mean)."""
    config = TrainConfig.model_validate(settings)
    records = train(config, Path(run_dir))
    last = records[-1]
    if last.mean_return_100 is None or last.mean_return_all is None:
        raise AmberError(f"No episode completed in {config.iterations} iterations")
    return last.mean_return_100, last.mean_return_all


def _write_csv(path: Path, header: Sequence[str], rows: list[dict[str, Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {k: repr(v) if isinstance(v, float) else v for k, v in row.items()}
            )


def cmd_sweep(args: argparse.Namespace) -> int:
    """Train every grid cell, then write scores and the ANS summary."""
    if args.jobs < 1:
        raise ConfigFileError(f"--jobs must be at least 1, got {args.jobs}")
    base = {**read_config_file(args.config), **config_overrides(args)}
    cells = grid_cells(parse_grid(args.grid))
    out_dir = args.out_dir or Path("sweeps")
    jobs = [
        ({**base, **cell}, str(out_dir / cell_dir_name(cell))) for cell in cells
    ]
    _LOGGER.info("Sweeping %d cells with %d process(es)", len(cells), args.jobs)

    if args.jobs == 1:
        outcomes = [_capture(run_cell, *job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as executor:
            futures = [executor.submit(run_cell, *job) for job in jobs]
            outcomes = [_capture(future.result) for future in futures]

    table = ScoreTable()
    rows: list[dict[str, Any]] = []
    for cell, (settings, _), (scores, error) in zip(cells, jobs, outcomes):
        row = {
            "task": str(settings.get(CONF_ENV, "")),
            "config": cell_label(cell),
            "seed": settings.get(CONF_SEED, DEFAULT_SEED),
            "final_score": "",
            "speed_score": "",
            "status": "ok",
            "error": "",
        }
        if error is not None:
            _LOGGER.warning("Cell %s failed: %s", cell_dir_name(cell), error)
            row.update(status="failed", error=error)
        else:
            final, speed = scores
            row.update(final_score=final, speed_score=speed)
            table.cells.append(
                ScoreCell(
                    task=row["task"],
                    config=row["config"],
                    seed=int(row["seed"]),
                    final_score=final,
                    speed_score=speed,
                )
            )
        rows.append(row)

    _write_csv(out_dir / SCORES_FILE, SCORE_COLUMNS, rows)
    summary = rank_configs(table) if table.cells else []
    _write_csv(out_dir / SUMMARY_FILE, SUMMARY_COLUMNS, summary)
    failed = sum(1 for row in rows if row["status"] == "failed")
    _LOGGER.info(
        "Sweep finished: %d ok, %d failed; summary in %s",
        len(rows) - failed,
        failed,
        out_dir / SUMMARY_FILE,
    )
    return 0 if not failed else 1


def _capture(func: Any, *args: Any) -> tuple[Any, str | None]:
    try:
        return func(*args), None
    except ValidationError as err:
        return None, "; ".join(_format_validation_error(err))
    except Exception as err:
        return None, f"{type(err).__name__}: {err}"


def cmd_diag_isweight(args: argparse.Namespace) -> int:
    """IS-weight diagnostics, optionally across synth action dimensions."""
    config = load_config(args)
    out_dir = args.out_dir or default_run_dir(config, "diagnostics")
    if args.action_dims:
        try:
            dims = [int(v) for v in args.action_dims.split(",") if v.strip()]
        except ValueError as err:
            raise ConfigFileError(
                f"--action-dims expects comma-separated integers: {err}"
            ) from err
        run_action_dims(config, dims, out_dir)
    else:
        run_isweight(config, out_dir)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    """Print the mean return of a trained (or untrained) policy."""
    config = load_config(args)
    checkpoint = args.checkpoint
    if checkpoint is None and args.out_dir is not None:
        candidate = args.out_dir / CHECKPOINT_FILE
        checkpoint = candidate if candidate.exists() else None
    mean_return = evaluate(
        config, args.episodes, checkpoint, deterministic=args.deterministic
    )
    print(repr(mean_return))
    return 0


def _format_validation_error(err: ValidationError) -> list[str]:
    lines = []
    for error in err.errors():
        field = ".".join(str(part) for part in error["loc"]) or "config"
        lines.append(f"{field}: {error['msg']}")
    return lines


def main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, dispatch, and map failures to exit codes."""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        return args.handler(args)
    except ValidationError as err:
        for line in _format_validation_error(err):
            _LOGGER.error("Invalid config: %s", line)
        return 2
    except ConfigFileError as err:
        _LOGGER.error("%s", err)
        return 2
    except AmberError as err:
        _LOGGER.error("Run failed: %s", err)
        return 1


if __name__ == "__main__":
    sys.exit(main())
