"""Command line for repairing, injecting, evaluating and sweeping."""
from __future__ import annotations

import asyncio
from collections.abc import Callable, Sequence
import json
import logging
from pathlib import Path
from typing import Any

import click
import numpy as np

from .behavior import fit_models
from .config import RepairConfigError, RunConfig, load_config
from .const import (
    BLOCK_LAMBDA_RANGE,
    CONF_BLOCK_LAMBDA,
    CONF_JACCARD_MIN,
    CONF_LEN1,
    CONF_LEN2,
    CONF_MATCHER,
    CONF_MAX_WORKERS,
    CONF_MERGE_THRESHOLD,
    CONF_PROTECT_LONG_BLOCKS,
    CONF_SEED,
    CONF_SIZE_THRESHOLD,
    CONF_SUPPORT_THRESHOLD,
    CONF_VARIANCE_FLOOR,
    CONF_VARIANT,
    CONF_WINDOW_LEN,
    CORRUPTED_FILE,
    DEFAULT_INSTANCE_COUNT,
    DEFAULT_LENGTH_MAX,
    DEFAULT_LENGTH_MIN,
    DEFAULT_MAX_INCONSISTENT_DIMS,
    DEFAULT_MAX_ORDER,
    DOMAIN,
    EXIT_DATA,
    EXIT_OK,
    EXIT_USAGE,
    MATCHERS,
    REPAIRED_FILE,
    REPORT_FILE,
    RESULTS_FILE,
    REVIEW_FILE,
    SCHEMAS_FILE,
    SCORES_CSV_FILE,
    SCORES_FILE,
    TRUTH_FILE,
    VARIANT_BLOCK,
    VARIANTS,
)
from .coordinator import RepairCoordinator
from .core import RepairStructureError
from .evaluation import InjectionSpec, SweepCell, async_run_sweep, inject, score
from .files import (
    RepairDataError,
    permuted_cells,
    read_models,
    read_report,
    read_series,
    read_truth,
    write_jsonl,
    write_models,
    write_report,
    write_results,
    write_scores,
    write_series,
    write_truth,
)

_LOGGER = logging.getLogger(__name__)

_PACKAGE_DIR = Path(__file__).parent
STRINGS: dict[str, Any] = json.loads((_PACKAGE_DIR / "strings.json").read_text(encoding="utf-8"))
VERSION: str = json.loads((_PACKAGE_DIR / "manifest.json").read_text(encoding="utf-8"))["version"]

LOG_LEVELS = [logging.WARNING, logging.INFO, logging.DEBUG]


class AxisMismatchError(RepairStructureError):
    """Exception raised when a report and a ground truth cover different time axes."""

    code = "axis_mismatch"


class VerifyError(RepairDataError):
    """Exception raised when a restored series differs from the clean one."""

    code = "verify_failed"


# Flags named after the config keys; unset flags keep the file or default value
CONFIG_FLAGS: list[tuple[str, Any, str]] = [
    (CONF_WINDOW_LEN, int, "Sliding window length."),
    (CONF_SUPPORT_THRESHOLD, float, "Model support threshold."),
    (CONF_VARIANCE_FLOOR, float, "Lower bound of the model variance."),
    (CONF_SIZE_THRESHOLD, int, "Largest repairable dimension count per tuple."),
    (CONF_MATCHER, click.Choice(MATCHERS), "Matching algorithm."),
    (CONF_LEN1, int, "Minimum repair unit support."),
    (CONF_LEN2, int, "Minimum inconsistent interval length."),
    (CONF_MERGE_THRESHOLD, float, "Block merge threshold."),
    (CONF_VARIANT, click.Choice(VARIANTS), "Repair variant."),
    (CONF_BLOCK_LAMBDA, float, "Chunk length factor of the Block variant."),
    (CONF_JACCARD_MIN, float, "Minimum Jaccard of a correct detection."),
    (CONF_SEED, int, "Random seed."),
    (CONF_MAX_WORKERS, int, "Sweep cells run in parallel."),
]

INJECTION_FLAGS: list[tuple[str, int | None, str]] = [
    ("instance_count", DEFAULT_INSTANCE_COUNT, "Number of injected instances."),
    ("length_min", DEFAULT_LENGTH_MIN, "Shortest injected interval."),
    ("length_max", DEFAULT_LENGTH_MAX, "Longest injected interval."),
    ("max_order", DEFAULT_MAX_ORDER, "Largest rotation order."),
    ("max_inconsistent_dims", DEFAULT_MAX_INCONSISTENT_DIMS, "Most dimensions per instance."),
    ("clean_prefix", None, "Rows kept clean at the start [default: window_len]."),
    ("min_gap", None, "Clean rows between instances [default: 2 x length_max]."),
]


def _config_options(command: Callable[..., Any]) -> Callable[..., Any]:
    """Add --config and one flag per config key."""
    for key, flag_type, help_text in reversed(CONFIG_FLAGS):
        command = click.option(f"--{key}", type=flag_type, help=help_text)(command)
    command = click.option(
        f"--{CONF_PROTECT_LONG_BLOCKS}/--no-{CONF_PROTECT_LONG_BLOCKS}",
        default=None,
        help="Never absorb 1-blocks of at least len2 points.",
    )(command)
    return click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        help="Flat JSON config file.",
    )(command)


def _injection_options(command: Callable[..., Any]) -> Callable[..., Any]:
    """Add one flag per injection setting."""
    for key, default, help_text in reversed(INJECTION_FLAGS):
        command = click.option(
            f"--{key}", type=int, default=default, show_default=default is not None, help=help_text
        )(command)
    return command


def _injection_spec(config: RunConfig, options: dict[str, Any]) -> InjectionSpec:
    """Build the injection settings; an unset clean prefix takes the window length."""
    return InjectionSpec(
        instance_count=options["instance_count"],
        length_min=options["length_min"],
        length_max=options["length_max"],
        max_order=options["max_order"],
        max_inconsistent_dims=options["max_inconsistent_dims"],
        seed=config.seed,
        clean_prefix=(
            config.window_len if options["clean_prefix"] is None else options["clean_prefix"]
        ),
        min_gap=options["min_gap"],
    )


def _split_options(kwargs: dict[str, Any], keys: Sequence[str]) -> dict[str, Any]:
    return {key: kwargs.pop(key) for key in keys}


INJECTION_KEYS = [key for key, _default, _help in INJECTION_FLAGS]

_output_dir = click.option(
    "--output-dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=Path("."),
    show_default=True,
    help="Directory for the output files.",
)


def _parse_list(cast: Callable[[str], Any]) -> Callable[[click.Context, click.Parameter, str], list[Any]]:
    def parse(_ctx: click.Context, param: click.Parameter, value: str) -> list[Any]:
        try:
            return [cast(item.strip()) for item in value.split(",") if item.strip()]
        except ValueError as err:
            raise click.BadParameter(str(err), param=param) from err

    return parse


@click.group()
@click.version_option(VERSION, prog_name=DOMAIN)
@click.option("-v", "--verbose", count=True, help="-v for INFO, -vv for DEBUG logging.")
def cli(verbose: int) -> None:
    """Detect and repair misplaced subsequences in multivariate time series."""
    logging.basicConfig(
        level=LOG_LEVELS[min(verbose, len(LOG_LEVELS) - 1)],
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@_output_dir
@click.option(
    "--history",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Clean history CSV to fit the models on.",
)
@click.option(
    "--models-in",
    "models_in",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Model snapshots to start from.",
)
@click.option(
    "--models-out",
    "models_out",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Write the final model snapshots here.",
)
@_config_options
def repair(
    input_path: Path,
    output_dir: Path,
    history: Path | None,
    models_in: Path | None,
    models_out: Path | None,
    config_path: Path | None,
    **overrides: Any,
) -> None:
    """Repair INPUT_PATH and write the repaired series, report and review queue."""
    config = load_config(config_path, overrides)
    source = read_series(input_path)
    series = source.series

    models = None
    if models_in is not None:
        models = read_models(models_in)
    elif history is not None:
        past = read_series(history).series
        start = max(0, past.length - config.window_len)
        models = fit_models(past, slice(start, past.length), config.model_config)
    if models is not None and len(models) != series.dim_count:
        raise RepairStructureError(
            f"Got {len(models)} models for {series.dim_count} dimensions"
        )

    result = RepairCoordinator(config, models).run(series)

    output_dir.mkdir(parents=True, exist_ok=True)
    write_series(output_dir / REPAIRED_FILE, source, permuted_cells(source, result.report.applied))
    review_path = output_dir / REVIEW_FILE
    write_jsonl(review_path, (entry.as_dict() for entry in result.review_queue))
    write_jsonl(
        output_dir / SCHEMAS_FILE,
        (schema.as_dict() for schema in result.schemas if schema.rotations),
    )
    write_report(output_dir / REPORT_FILE, result.report, series, review_path)
    if models_out is not None:
        write_models(models_out, result.models)

    click.echo(
        STRINGS["summary"]["repair"].format(
            instances=len(result.report.instances), review=len(result.review_queue)
        )
    )


@cli.command(name="inject")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@_output_dir
@_injection_options
@_config_options
def inject_command(
    input_path: Path, output_dir: Path, config_path: Path | None, **kwargs: Any
) -> None:
    """Corrupt the clean INPUT_PATH and write the corrupted series and ground truth."""
    injection = _split_options(kwargs, INJECTION_KEYS)
    config = load_config(config_path, kwargs)
    source = read_series(input_path)
    corrupted, truth = inject(source.series, _injection_spec(config, injection))

    inverses = [
        (instance.interval, rotation.inverse())
        for instance in truth.instances
        for rotation in instance.rotations
    ]
    output_dir.mkdir(parents=True, exist_ok=True)
    write_series(output_dir / CORRUPTED_FILE, source, permuted_cells(source, inverses))
    write_truth(output_dir / TRUTH_FILE, truth, corrupted)
    click.echo(STRINGS["summary"]["inject"].format(instances=len(truth.instances)))


@cli.command()
@click.argument("corrupted_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("truth_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("clean_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
def verify(corrupted_path: Path, truth_path: Path, clean_path: Path) -> None:
    """Apply TRUTH_PATH to CORRUPTED_PATH and compare with CLEAN_PATH cell by cell."""
    corrupted = read_series(corrupted_path)
    clean = read_series(clean_path)
    truth, _axis = read_truth(truth_path)
    if corrupted.cells.shape != clean.cells.shape:
        raise VerifyError(
            f"shapes differ: {corrupted.cells.shape} and {clean.cells.shape}"
        )
    restored = permuted_cells(
        corrupted,
        [(instance.interval, rotation) for instance in truth.instances for rotation in instance.rotations],
    )
    differing = np.argwhere(restored != clean.cells)
    if differing.size:
        row, column = differing[0]
        raise VerifyError(f"first difference at line {row + 2}, column {column + 1}")
    click.echo(STRINGS["summary"]["verify"])


@cli.command()
@click.argument("report_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("truth_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@_output_dir
@click.option(f"--{CONF_JACCARD_MIN}", type=float, default=None, help="Minimum Jaccard of a correct detection.")
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Flat JSON config file.",
)
def evaluate(
    report_path: Path,
    truth_path: Path,
    output_dir: Path,
    jaccard_min: float | None,
    config_path: Path | None,
) -> None:
    """Score REPORT_PATH against TRUTH_PATH."""
    config = load_config(config_path, {CONF_JACCARD_MIN: jaccard_min})
    report, report_axis = read_report(report_path)
    truth, truth_axis = read_truth(truth_path)
    if report_axis != truth_axis:
        raise AxisMismatchError(f"report {report_axis}, truth {truth_axis}")

    scores = score(report, truth, config.jaccard_min)
    output_dir.mkdir(parents=True, exist_ok=True)
    write_scores(output_dir / SCORES_FILE, output_dir / SCORES_CSV_FILE, scores)

    click.echo(f"{'metric':<8}{'value':>8}")
    for metric in ("p_d", "r_d", "p_r", "r_r"):
        flag = " (0/0)" if metric in scores.undefined else ""
        click.echo(f"{metric:<8}{getattr(scores, metric):>8.4f}{flag}")
    click.echo(
        f"detections={scores.detections} correct={scores.correct_detections} "
        f"true={scores.true_intervals} repaired={scores.correct_repairs}"
    )


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@_output_dir
@click.option(
    "--lengths",
    callback=_parse_list(int),
    default="",
    help="Comma-separated series lengths [default: whole input].",
)
@click.option(
    "--attrs",
    callback=_parse_list(int),
    default=str(DEFAULT_MAX_INCONSISTENT_DIMS),
    show_default=True,
    help="Comma-separated inconsistent dimension counts.",
)
@click.option(
    "--variants",
    callback=_parse_list(str),
    default=",".join(VARIANTS),
    show_default=True,
    help="Comma-separated variants.",
)
@click.option(
    "--lambdas",
    callback=_parse_list(float),
    default="",
    help="Comma-separated block_lambda values for the Block variant.",
)
@_injection_options
@_config_options
def sweep(
    input_path: Path,
    output_dir: Path,
    lengths: list[int],
    attrs: list[int],
    variants: list[str],
    lambdas: list[float],
    config_path: Path | None,
    **kwargs: Any,
) -> None:
    """Inject, repair and score the clean INPUT_PATH over a grid of settings."""
    injection = _split_options(kwargs, INJECTION_KEYS)
    kwargs.pop(CONF_VARIANT, None)
    config = load_config(config_path, kwargs)
    unknown = sorted(set(variants) - set(VARIANTS))
    if unknown:
        raise click.BadParameter(f"unknown variants {unknown}", param_hint="--variants")
    low, high = BLOCK_LAMBDA_RANGE
    if any(not low <= value <= high for value in lambdas):
        raise click.BadParameter(f"values must lie in [{low}, {high}]", param_hint="--lambdas")

    clean = read_series(input_path).series
    block_lambdas = lambdas or [config.block_lambda]
    cells = [
        SweepCell(length, attr, variant, block_lambda)
        for length in lengths or [clean.length]
        for attr in attrs
        for variant in variants
        for block_lambda in (block_lambdas if variant == VARIANT_BLOCK else [config.block_lambda])
    ]
    rows = asyncio.run(
        async_run_sweep(clean, cells, config, _injection_spec(config, injection))
    )
    output_dir.mkdir(parents=True, exist_ok=True)
    write_results(output_dir / RESULTS_FILE, rows)
    click.echo(STRINGS["summary"]["sweep"].format(cells=len(rows)))


def _report_error(code: str, **details: Any) -> None:
    """Log and print the user-facing text of an error code."""
    message = STRINGS["error"][code].format(**details)
    _LOGGER.error("%s", message)
    click.secho(message, fg="red", err=True)


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line and return the exit code."""
    try:
        result = cli.main(args=argv, prog_name=DOMAIN, standalone_mode=False)
    except click.exceptions.Exit as err:
        return err.exit_code
    except click.ClickException as err:
        err.show()
        return EXIT_USAGE
    except click.Abort:
        return EXIT_USAGE
    except RepairConfigError as err:
        _report_error(err.code, key=err.key, detail=err)
        return EXIT_USAGE
    except RepairDataError as err:
        _report_error(getattr(err, "code", "data_error"), detail=err)
        return EXIT_DATA
    except RepairStructureError as err:
        _report_error(getattr(err, "code", "structure_error"), detail=err)
        return EXIT_DATA
    return result if isinstance(result, int) else EXIT_OK
