"""Main script.

This module provides basic CLI entrypoint.

"""
import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import pandas as pd
import typer
from click.core import ParameterSource
from typer import FileText

from quadlink import log
from quadlink.config import Config, get_config
from quadlink.errors import QuadlinkError
from quadlink.experiment import (
    ExperimentConfig,
    ExperimentResult,
    LambdaWindow,
    level_means,
    run_experiment,
)
from quadlink.forecast import ForecastKind
from quadlink.ingest import (
    STOOQ_ENDPOINT,
    ReturnSeries,
    fetch_remote_csv,
    parse_price_csv,
    read_price_file,
    split,
    to_log_returns,
    write_price_file,
)
from quadlink.metrics import kappa_hat
from quadlink.report import output_paths, render_plot, write_table
from quadlink.volatility import filter_oos, fit_garch11

cli = typer.Typer()  # this is actually callable and thus can be an entry point

logger = logging.getLogger(__name__)


def _fraction(value: float) -> float:
    if not 0 < value < 1:
        raise typer.BadParameter("has to lie strictly between 0 and 1.")
    return value


def _optional_fraction(value: Optional[float]) -> Optional[float]:
    return value if value is None else _fraction(value)


def _kinds(value: str) -> str:
    try:
        kinds = [ForecastKind.parse(v) for v in value.split(",")]
    except ValueError as e:
        raise typer.BadParameter(str(e)) from e
    return ",".join(kind.value for kind in kinds)


InputArgument = typer.Argument(
    ...,
    exists=True,
    dir_okay=False,
    readable=True,
    help="Price file with Date and Close columns.",
)
SplitOption = typer.Option(
    0.8,
    "--split",
    callback=_fraction,
    help="Share of returns used for fitting.",
)
ToleranceOption = typer.Option(
    1e-8, "--tolerance", min=0, help="Optimizer convergence tolerance."
)
DemeanOption = typer.Option(
    False, "--demean", help="Fit on returns minus their in-sample mean."
)
ConfigFileOption = typer.Option(
    None, "--config-file", "-C", dir_okay=False, help="Configuration file."
)
ConfigOption = typer.Option(
    None, "--config", "-c", help="Configuration entries."
)


def _explicit(ctx: typer.Context, mapping: Dict[str, str]) -> Dict[str, Any]:
    """Collects flags given on the command line under their config keys."""
    flags = {}
    for name, key in mapping.items():
        if ctx.get_parameter_source(name) is ParameterSource.COMMANDLINE:
            value = ctx.params[name]
            if isinstance(value, LambdaWindow):
                value = value.value
            flags[key] = value
    return flags


def _load_config(
    config_file: Optional[FileText],
    entries: Optional[List[str]],
    flags: Dict[str, Any],
) -> Config:
    logger.info("Loading config...")
    config = get_config(config_file, entries, flags)
    logger.info("Config loaded!")
    return config


def _load_returns(path: Path) -> ReturnSeries:
    prices = read_price_file(path)
    returns = to_log_returns(prices)
    logger.info(f"Read {len(prices)} prices from {path}.")
    return returns


def _guarded(action: Callable[[], None]) -> None:
    try:
        action()
    except QuadlinkError as e:
        logger.error(e.describe())
        raise typer.Exit(1)


@cli.callback()
def main(
    verbosity: log.Verbosity = typer.Option(
        "INFO", "--verbosity", "-v", help="Verbosity level."
    ),
) -> None:
    """Command line interface for quadlink."""

    log.configure(verbosity)


@cli.command()
def fetch(
    ctx: typer.Context,
    symbol: str = typer.Argument(..., help="Ticker symbol, e.g. ^spx."),
    out: Path = typer.Option(
        ..., "--out", "-o", dir_okay=False, help="Destination file."
    ),
    endpoint: str = typer.Option(
        STOOQ_ENDPOINT,
        "--endpoint",
        help="URL template with a {symbol} placeholder.",
    ),
    timeout: float = typer.Option(
        30.0, "--timeout", min=0, help="Request timeout in seconds."
    ),
    force: bool = typer.Option(
        False, "--force", help="Overwrite an existing destination."
    ),
    cache: bool = typer.Option(
        False, "--cache", help="Keep a copy in the cache directory."
    ),
    config_file: Optional[FileText] = ConfigFileOption,
    config: Optional[List[str]] = ConfigOption,
) -> None:
    """Downloads a daily price history to a local file."""

    if out.exists() and not force:
        logger.error(f"{out} already exists, use --force to overwrite it.")
        raise typer.Exit(1)

    def action() -> None:
        flags = _explicit(
            ctx, {"endpoint": "fetch.endpoint", "timeout": "fetch.timeout"}
        )
        settings = _load_config(config_file, config, flags).fetch
        text = fetch_remote_csv(
            symbol,
            endpoint=settings.endpoint,
            cache_dir=settings.cache_directory if cache else None,
            timeout=settings.timeout,
        )
        prices = parse_price_csv(text)
        write_price_file(out, text)
        logger.info(f"Saved {len(prices)} prices to {out}.")

    _guarded(action)


@cli.command()
def returns(
    input: Path = InputArgument,
    split_fraction: Optional[float] = typer.Option(
        None,
        "--split",
        callback=_optional_fraction,
        help="Also report the window sizes for this share.",
    ),
) -> None:
    """Prints dated log returns."""

    def action() -> None:
        series = _load_returns(input)
        if split_fraction is not None:
            windows = split(series, split_fraction)
            logger.info(
                f"In-sample: {len(windows.in_sample)}, "
                f"out-of-sample: {windows.t_oos}."
            )
        frame = pd.DataFrame(
            {
                "Date": pd.to_datetime(series.dates).strftime("%Y-%m-%d"),
                "Return": series.returns,
            }
        )
        table = frame.to_csv(
            index=False, float_format="%.10g", lineterminator="\n"
        )
        typer.echo(table, nl=False)

    _guarded(action)


@cli.command()
def fit(
    input: Path = InputArgument,
    split_fraction: float = SplitOption,
    tolerance: float = ToleranceOption,
    demean: bool = DemeanOption,
) -> None:
    """Fits GARCH(1,1) on the in-sample window and prints the fit."""

    def action() -> None:
        windows = split(_load_returns(input), split_fraction)
        result = fit_garch11(
            windows.in_sample, tolerance=tolerance, demean=demean
        )
        typer.echo(result.document().json(indent=2))

    _guarded(action)


@cli.command()
def kappa(
    input: Path = InputArgument,
    split_fraction: float = SplitOption,
    tolerance: float = ToleranceOption,
    demean: bool = DemeanOption,
) -> None:
    """Prints the shape parameter of the out-of-sample window."""

    def action() -> None:
        windows = split(_load_returns(input), split_fraction)
        result = fit_garch11(
            windows.in_sample, tolerance=tolerance, demean=demean
        )
        oos = filter_oos(
            result.params,
            result.terminal_state,
            windows.out_sample,
            mean=result.mean,
        )
        estimate = kappa_hat(windows.out_sample.returns, oos.sigma)
        document = {
            "kappa_hat": estimate.kappa_hat,
            "z_bar": estimate.z_bar,
            "t_oos": estimate.t_oos,
            "gaussian_ratio": estimate.gaussian_ratio,
        }
        typer.echo(json.dumps(document, indent=2))

    _guarded(action)


def _summarize(result: ExperimentResult) -> None:
    kinds = [kind.value for kind in result.config.kinds]
    typer.echo(f"kappa_hat\t{result.kappa.kappa_hat:.6f}")
    typer.echo("\t".join(["level", "target_p", *kinds]))
    targets = {a.level_index: a.target_p for a in result.aggregates}
    for level, means in sorted(level_means(result).items()):
        cells = [f"{means[kind]:.6f}" for kind in kinds]
        typer.echo("\t".join([str(level), f"{targets[level]:.4f}", *cells]))


SIMULATE_FLAGS = {
    "dataset": "experiment.dataset",
    "levels": "experiment.levels",
    "reps": "experiment.reps",
    "seed": "experiment.seed",
    "split_fraction": "experiment.split_fraction",
    "types": "experiment.kinds",
    "lambda_window": "experiment.lambda_window",
    "tolerance": "experiment.tolerance",
    "demean": "experiment.demean",
}


@cli.command()
def simulate(
    ctx: typer.Context,
    input: Path = InputArgument,
    levels: int = typer.Option(20, "--levels", min=2, help="Accuracy levels."),
    reps: int = typer.Option(
        100, "--reps", min=1, help="Replications per level."
    ),
    seed: int = typer.Option(42, "--seed", min=0, help="Root random seed."),
    split_fraction: float = SplitOption,
    types: str = typer.Option(
        "1,2,3",
        "--types",
        callback=_kinds,
        help="Comma-separated forecast kinds.",
    ),
    lambda_window: LambdaWindow = typer.Option(
        LambdaWindow.IN_SAMPLE.value,
        "--lambda-window",
        help="Window the scaling factor is estimated on.",
    ),
    tolerance: float = ToleranceOption,
    demean: bool = DemeanOption,
    dataset: Optional[str] = typer.Option(
        None, "--dataset", help="Dataset label, the input name by default."
    ),
    out: Path = typer.Option(
        Path("results.csv"), "--out", "-o", dir_okay=False, help="Table file."
    ),
    plot: Optional[Path] = typer.Option(
        None, "--plot", dir_okay=False, help="Optional SVG plot file."
    ),
    jobs: int = typer.Option(1, "--jobs", "-j", min=1, help="Worker count."),
    config_file: Optional[FileText] = ConfigFileOption,
    config: Optional[List[str]] = ConfigOption,
) -> None:
    """Runs the Monte Carlo experiment and writes its results."""

    written: List[Path] = []

    def action() -> None:
        destinations = output_paths(out, plot)
        flags = _explicit(ctx, SIMULATE_FLAGS)
        if "experiment.kinds" in flags:
            flags["experiment.kinds"] = flags["experiment.kinds"].split(",")
        settings = _load_config(config_file, config, flags).experiment
        if settings.dataset == ExperimentConfig.__fields__["dataset"].default:
            settings = settings.copy(update={"dataset": input.stem})

        result = run_experiment(_load_returns(input), settings, jobs=jobs)

        written.extend(destinations)
        write_table(result, out)
        if plot is not None:
            render_plot(result, plot)
        _summarize(result)

    try:
        _guarded(action)
    except (typer.Exit, KeyboardInterrupt):
        for path in written:
            path.unlink(missing_ok=True)
        raise


if __name__ == "__main__":
    # entry point for "python -m"
    cli()
