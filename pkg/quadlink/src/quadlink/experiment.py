import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from itertools import groupby
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Extra, confloat, conint, validator

from quadlink.errors import QuadlinkError
from quadlink.forecast import (
    ForecastKind,
    build_forecast,
    estimate_lambda,
)
from quadlink.ingest import ReturnSeries, split
from quadlink.metrics import (
    KappaEstimate,
    MetricPoint,
    directional_accuracy,
    kappa_hat,
    r2_oos,
    theoretical_r2,
)
from quadlink.signgen import accuracy_grid, gen_sign_path, realized_sign
from quadlink.volatility import GarchFit, filter_oos, fit_garch11

logger = logging.getLogger(__name__)

IN_SAMPLE_STREAM = 0
OUT_SAMPLE_STREAM = 1


class ExperimentError(QuadlinkError):
    pass


class CellFailure(ExperimentError):
    def __init__(
        self, level: int, replication: int, kind: str, reason: str
    ) -> None:
        super().__init__(
            f"cell (level={level}, replication={replication}, kind={kind}) "
            f"failed: {reason}"
        )
        self.level = level
        self.replication = replication
        self.kind = kind
        self.reason = reason

    def __reduce__(self):
        # keeps the coordinates when raised inside a worker process
        return type(self), (
            self.level,
            self.replication,
            self.kind,
            self.reason,
        )


class EmptyInput(ExperimentError, ValueError):
    pass


class LambdaWindow(str, Enum):
    IN_SAMPLE = "in_sample"
    ORACLE = "oracle"


class ExperimentConfig(BaseModel):
    dataset: str = "dataset"
    levels: conint(ge=2) = 20
    reps: conint(ge=1) = 100
    split_fraction: confloat(gt=0, lt=1) = 0.8
    seed: conint(ge=0) = 42
    kinds: List[ForecastKind] = list(ForecastKind)
    lambda_window: LambdaWindow = LambdaWindow.IN_SAMPLE
    tolerance: confloat(gt=0) = 1e-8
    demean: bool = False

    class Config:
        extra = Extra.forbid
        allow_mutation = False

    @validator("kinds", pre=True)
    def _parse_kinds(cls, value: Any) -> List[ForecastKind]:
        if isinstance(value, (str, int)):
            value = str(value).split(",")
        kinds = sorted({ForecastKind.parse(v) for v in value})
        if not kinds:
            raise ValueError("At least one forecast kind is required.")
        return kinds


@dataclass(frozen=True)
class Summary:
    mean: float
    min: float
    max: float
    q05: float
    q95: float

    @classmethod
    def of(cls, values: Iterable[float]) -> "Summary":
        # sorted first so the result does not depend on input order
        ordered = np.sort(np.fromiter(values, dtype=float))
        return cls(
            mean=float(np.mean(ordered)),
            min=float(ordered[0]),
            max=float(ordered[-1]),
            q05=float(np.quantile(ordered, 0.05)),
            q95=float(np.quantile(ordered, 0.95)),
        )


@dataclass(frozen=True)
class Aggregate:
    level_index: int
    target_p: float
    kind: str
    count: int
    da: Summary
    r2_oos: Summary
    negative_share: float
    benchmark_gap: Optional[float] = None


@dataclass(frozen=True)
class ExperimentResult:
    points: List[MetricPoint]
    kappa: KappaEstimate
    aggregates: List[Aggregate]
    config: ExperimentConfig
    garch: GarchFit

    def theoretical(self, da: float) -> float:
        return theoretical_r2(da, self.kappa.kappa_hat)


@dataclass(frozen=True)
class _Context:
    """Everything a worker needs to evaluate grid cells."""

    config: ExperimentConfig
    grid: Tuple[float, ...]
    in_returns: np.ndarray
    in_signs: np.ndarray
    in_vols: np.ndarray
    out_returns: np.ndarray
    out_signs: np.ndarray
    out_vols: np.ndarray


def cell_generators(
    seed: int, level: int, replication: int
) -> Tuple[np.random.Generator, np.random.Generator]:
    """Derives the in-sample and out-of-sample streams of one grid cell.

    The streams are keyed on (seed, level, replication) through
    ``SeedSequence.spawn_key``, so a cell draws the same numbers no matter
    which other cells run or in which order.
    """

    def stream(index: int) -> np.random.Generator:
        sequence = np.random.SeedSequence(
            entropy=seed, spawn_key=(level, replication, index)
        )
        return np.random.default_rng(sequence)

    return stream(IN_SAMPLE_STREAM), stream(OUT_SAMPLE_STREAM)


def _run_cell(
    context: _Context, level: int, replication: int
) -> List[MetricPoint]:
    config = context.config
    p = context.grid[level]
    in_rng, out_rng = cell_generators(config.seed, level, replication)
    in_path = gen_sign_path(context.in_signs, p, in_rng)
    out_path = gen_sign_path(context.out_signs, p, out_rng)

    points = []
    for kind in config.kinds:
        try:
            if config.lambda_window is LambdaWindow.ORACLE:
                lam = estimate_lambda(
                    kind, context.out_returns, out_path, context.out_vols
                )
            else:
                lam = estimate_lambda(
                    kind, context.in_returns, in_path, context.in_vols
                )
            forecast = build_forecast(kind, out_path, context.out_vols, lam)
            points.append(
                MetricPoint(
                    level_index=level,
                    target_p=p,
                    replication=replication,
                    kind=kind.value,
                    da=directional_accuracy(context.out_returns, forecast.mu),
                    r2_oos=r2_oos(context.out_returns, forecast.mu),
                )
            )
        except (QuadlinkError, ValueError) as e:
            reason = e.describe() if isinstance(e, QuadlinkError) else str(e)
            raise CellFailure(level, replication, kind.value, reason) from e
    return points


def _run_level(context: _Context, level: int) -> List[MetricPoint]:
    points = []
    for replication in range(context.config.reps):
        points.extend(_run_cell(context, level, replication))
    return points


def _log_level(points: Sequence[MetricPoint]) -> None:
    first = points[0]
    mean_r2 = float(np.mean([point.r2_oos for point in points]))
    logger.info(
        f"Level {first.level_index} (p={first.target_p:.4f}) done, "
        f"mean R2_OOS {mean_r2:.6f} over {len(points)} forecasts."
    )


def run_experiment(
    returns: ReturnSeries, config: ExperimentConfig, jobs: int = 1
) -> ExperimentResult:
    """Runs the accuracy-level x replication x kind grid on one dataset.

    Volatility is fitted once on the in-sample window and filtered with fixed
    parameters through the out-of-sample window; the shape parameter comes
    from that window alone. Each grid cell then draws a fresh in-sample and
    out-of-sample sign path at its target accuracy, estimates the scaling
    factor on the configured window and scores the forecast out of sample.
    The result is the same for any number of jobs.
    """
    windows = split(returns, config.split_fraction)
    logger.info(
        f"Split {len(returns)} returns into {len(windows.in_sample)} "
        f"in-sample and {len(windows.out_sample)} out-of-sample."
    )

    fit = fit_garch11(
        windows.in_sample, tolerance=config.tolerance, demean=config.demean
    )
    oos = filter_oos(
        fit.params, fit.terminal_state, windows.out_sample, mean=fit.mean
    )
    kappa = kappa_hat(windows.out_sample.returns, oos.sigma)
    logger.info(
        f"kappa_hat={kappa.kappa_hat:.6f}, z_bar={kappa.z_bar:.6f}, "
        f"T={kappa.t_oos}."
    )

    context = _Context(
        config=config,
        grid=tuple(accuracy_grid(config.levels)),
        in_returns=np.asarray(windows.in_sample.returns),
        in_signs=realized_sign(windows.in_sample),
        in_vols=np.asarray(fit.sigma),
        out_returns=np.asarray(windows.out_sample.returns),
        out_signs=realized_sign(windows.out_sample),
        out_vols=np.asarray(oos.sigma),
    )

    levels = range(config.levels)
    points: List[MetricPoint] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = pool.map(_run_level, [context] * config.levels, levels)
            for level_points in outcomes:
                _log_level(level_points)
                points.extend(level_points)
    else:
        for level in levels:
            level_points = _run_level(context, level)
            _log_level(level_points)
            points.extend(level_points)

    return ExperimentResult(
        points=points,
        kappa=kappa,
        aggregates=aggregate(points, kappa=kappa.kappa_hat),
        config=config,
        garch=fit,
    )


def _group_key(point: MetricPoint) -> Tuple[int, str]:
    return point.level_index, point.kind


def aggregate(
    points: Sequence[MetricPoint], kappa: Optional[float] = None
) -> List[Aggregate]:
    """Summarizes points per (level, kind), ordered by level then kind.

    With a shape parameter given, each group also reports how far realized
    R2_OOS sits above the quadratic benchmark on average.
    """
    if not points:
        raise EmptyInput("Nothing to aggregate.")

    aggregates = []
    for (level, kind), group in groupby(
        sorted(points, key=_group_key), key=_group_key
    ):
        group = list(group)
        r2 = Summary.of(point.r2_oos for point in group)
        gap = None
        if kappa is not None:
            gaps = (
                point.r2_oos - theoretical_r2(point.da, kappa)
                for point in group
            )
            gap = Summary.of(gaps).mean
        aggregates.append(
            Aggregate(
                level_index=level,
                target_p=group[0].target_p,
                kind=kind,
                count=len(group),
                da=Summary.of(point.da for point in group),
                r2_oos=r2,
                negative_share=sum(p.r2_oos < 0 for p in group) / len(group),
                benchmark_gap=gap,
            )
        )
    return aggregates


def level_means(result: ExperimentResult) -> Dict[int, Dict[str, float]]:
    means: Dict[int, Dict[str, float]] = {}
    for item in result.aggregates:
        means.setdefault(item.level_index, {})[item.kind] = item.r2_oos.mean
    return means
