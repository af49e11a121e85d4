import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union
from xml.sax.saxutils import escape

import numpy as np
import pandas as pd
from pydantic import BaseModel

from quadlink.errors import QuadlinkError
from quadlink.experiment import ExperimentResult
from quadlink.files import write_atomic
from quadlink.forecast import ForecastKind
from quadlink.metrics import MetricPoint, theoretical_r2

logger = logging.getLogger(__name__)

TABLE_COLUMNS = [
    "level_index",
    "target_p",
    "replication",
    "kind",
    "da",
    "r2_oos",
    "theo_r2",
]
FLOAT_FORMAT = "%.10g"

WIDTH = 760
HEIGHT = 500
MARGIN_LEFT = 80
MARGIN_RIGHT = 210
MARGIN_TOP = 50
MARGIN_BOTTOM = 60
CURVE_SAMPLES = 201
KIND_COLORS = {
    ForecastKind.TYPE1: "#1f77b4",
    ForecastKind.TYPE2: "#d62728",
    ForecastKind.TYPE3: "#2ca02c",
}


class ReportError(QuadlinkError):
    pass


class ReportIOError(ReportError):
    pass


class EmptyResult(ReportError, ValueError):
    pass


class NonFiniteValue(ReportError, ValueError):
    pass


class GarchSummary(BaseModel):
    omega: float
    alpha: float
    beta: float


class ResultMetadata(BaseModel):
    dataset: str
    kappa_hat: float
    z_bar: float
    t_oos: int
    seed: int
    levels: int
    reps: int
    split_fraction: float
    kinds: List[str]
    lambda_window: str
    garch: GarchSummary

    @classmethod
    def of(cls, result: ExperimentResult) -> "ResultMetadata":
        config = result.config
        params = result.garch.params
        return cls(
            dataset=config.dataset,
            kappa_hat=result.kappa.kappa_hat,
            z_bar=result.kappa.z_bar,
            t_oos=result.kappa.t_oos,
            seed=config.seed,
            levels=config.levels,
            reps=config.reps,
            split_fraction=config.split_fraction,
            kinds=[kind.value for kind in config.kinds],
            lambda_window=config.lambda_window.value,
            garch=GarchSummary(
                omega=params.omega, alpha=params.alpha, beta=params.beta
            ),
        )


def metadata_path(destination: Union[str, Path]) -> Path:
    return Path(destination).with_suffix(".json")


def output_paths(
    table: Union[str, Path], plot: Optional[Union[str, Path]] = None
) -> List[Path]:
    """Lists the files a run writes and rejects any that would collide."""
    paths = [Path(table), metadata_path(table)]
    if plot is not None:
        paths.append(Path(plot))
    resolved = [path.resolve() for path in paths]
    if len(set(resolved)) != len(resolved):
        names = ", ".join(str(path) for path in paths)
        raise ReportIOError(f"Output files overlap: {names}.")
    return paths


def _ordered(points: Sequence[MetricPoint]) -> List[MetricPoint]:
    return sorted(
        points, key=lambda p: (p.level_index, p.replication, p.kind)
    )


def _write(destination: Union[str, Path], data: bytes) -> int:
    try:
        return write_atomic(destination, data)
    except OSError as e:
        raise ReportIOError(f"Can't write {destination}: {e}") from e


def render_table(result: ExperimentResult) -> str:
    kappa = result.kappa.kappa_hat
    points = _ordered(result.points)
    frame = pd.DataFrame(
        {
            "level_index": [p.level_index for p in points],
            "target_p": [p.target_p for p in points],
            "replication": [p.replication for p in points],
            "kind": [p.kind for p in points],
            "da": [p.da for p in points],
            "r2_oos": [p.r2_oos for p in points],
            "theo_r2": [theoretical_r2(p.da, kappa) for p in points],
        },
        columns=TABLE_COLUMNS,
    )
    numbers = frame[["target_p", "da", "r2_oos", "theo_r2"]].to_numpy()
    if not np.all(np.isfinite(numbers)):
        raise NonFiniteValue("Refusing to serialize non-finite values.")
    return frame.to_csv(
        index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
    )


def write_table(
    result: ExperimentResult, destination: Union[str, Path]
) -> int:
    """Writes the per-forecast table and its sibling JSON metadata.

    Returns the byte count of the table.
    """
    if not result.points:
        raise EmptyResult("Result holds no points.")
    _, sibling = output_paths(destination)
    table = render_table(result).encode("utf-8")
    metadata = ResultMetadata.of(result).json(indent=2) + "\n"
    written = _write(destination, table)
    _write(sibling, metadata.encode("utf-8"))
    logger.info(f"Wrote {len(result.points)} rows to {destination}.")
    return written


def read_table(source: Union[str, Path]) -> List[MetricPoint]:
    frame = pd.read_csv(source, dtype={"kind": str})
    if list(frame.columns) != TABLE_COLUMNS:
        raise ReportError(f"Unexpected header {list(frame.columns)}.")
    return [
        MetricPoint(
            level_index=int(row.level_index),
            target_p=float(row.target_p),
            replication=int(row.replication),
            kind=str(row.kind),
            da=float(row.da),
            r2_oos=float(row.r2_oos),
        )
        for row in frame.itertuples(index=False)
    ]


def read_metadata(source: Union[str, Path]) -> ResultMetadata:
    return ResultMetadata.parse_file(source)


def curve_points(
    kappa: float, x_lo: float, x_hi: float, samples: int = CURVE_SAMPLES
) -> List[Tuple[float, float]]:
    xs = np.linspace(x_lo, x_hi, samples)
    return [(float(x), kappa * (2 * float(x) - 1) ** 2) for x in xs]


@dataclass(frozen=True)
class PlotFrame:
    """Maps data coordinates onto the drawing area."""

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    @classmethod
    def of(cls, result: ExperimentResult) -> "PlotFrame":
        kappa = result.kappa.kappa_hat
        das = [p.da for p in result.points]
        r2s = [p.r2_oos for p in result.points]
        x_lo = min(0.5, math.floor(min(das) * 20) / 20)
        top = max(max(r2s), kappa)
        bottom = min(min(r2s), 0.0)
        pad = 0.05 * (top - bottom)
        return cls(x_lo=x_lo, x_hi=1.0, y_lo=bottom - pad, y_hi=top + pad)

    @property
    def width(self) -> float:
        return WIDTH - MARGIN_LEFT - MARGIN_RIGHT

    @property
    def height(self) -> float:
        return HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def x_px(self, x: float) -> float:
        share = (x - self.x_lo) / (self.x_hi - self.x_lo)
        return MARGIN_LEFT + share * self.width

    def y_px(self, y: float) -> float:
        share = (y - self.y_lo) / (self.y_hi - self.y_lo)
        return MARGIN_TOP + (1 - share) * self.height


def _num(value: float) -> str:
    return f"{value:.2f}"


def _marker(kind: ForecastKind, x: float, y: float) -> str:
    color = KIND_COLORS[kind]
    if kind is ForecastKind.TYPE1:
        return (
            f'<circle cx="{_num(x)}" cy="{_num(y)}" r="3" fill="none" '
            f'stroke="{color}"/>'
        )
    if kind is ForecastKind.TYPE2:
        return (
            f'<rect x="{_num(x - 3)}" y="{_num(y - 3)}" width="6" '
            f'height="6" fill="none" stroke="{color}"/>'
        )
    corners = [(x, y - 3.5), (x - 3.5, y + 3), (x + 3.5, y + 3)]
    joined = " ".join(f"{_num(cx)},{_num(cy)}" for cx, cy in corners)
    return f'<polygon points="{joined}" fill="none" stroke="{color}"/>'


def _axes(frame: PlotFrame) -> List[str]:
    left, right = MARGIN_LEFT, MARGIN_LEFT + frame.width
    top, bottom = MARGIN_TOP, MARGIN_TOP + frame.height
    parts = [
        f'<rect x="{left}" y="{top}" width="{_num(frame.width)}" '
        f'height="{_num(frame.height)}" fill="none" stroke="#333333"/>'
    ]
    for x in np.arange(math.ceil(frame.x_lo * 10), 11) / 10:
        px = _num(frame.x_px(float(x)))
        parts.append(
            f'<line x1="{px}" y1="{bottom}" x2="{px}" y2="{bottom + 5}" '
            f'stroke="#333333"/>'
        )
        parts.append(
            f'<text x="{px}" y="{bottom + 20}" font-size="12" '
            f'text-anchor="middle">{float(x):.1f}</text>'
        )
    for y in np.linspace(frame.y_lo, frame.y_hi, 6):
        py = _num(frame.y_px(float(y)))
        parts.append(
            f'<line x1="{left - 5}" y1="{py}" x2="{left}" y2="{py}" '
            f'stroke="#333333"/>'
        )
        parts.append(
            f'<text x="{left - 8}" y="{py}" font-size="12" '
            f'text-anchor="end" dominant-baseline="middle">'
            f"{float(y):.2f}</text>"
        )
    zero = _num(frame.y_px(0.0))
    parts.append(
        f'<line x1="{left}" y1="{zero}" x2="{_num(right)}" y2="{zero}" '
        f'stroke="#888888" stroke-dasharray="4 3"/>'
    )
    parts.append(
        f'<text x="{_num(left + frame.width / 2)}" y="{HEIGHT - 15}" '
        f'font-size="14" text-anchor="middle">Directional accuracy</text>'
    )
    middle = _num(top + frame.height / 2)
    parts.append(
        f'<text x="20" y="{middle}" font-size="14" text-anchor="middle" '
        f'transform="rotate(-90 20 {middle})">Out-of-sample R²</text>'
    )
    return parts


def _legend(kinds: Sequence[ForecastKind]) -> List[str]:
    x = WIDTH - MARGIN_RIGHT + 20
    y = MARGIN_TOP + 10
    parts = []
    for kind in kinds:
        parts.append(_marker(kind, x, y))
        parts.append(
            f'<text x="{x + 12}" y="{y}" font-size="12" '
            f'dominant-baseline="middle">{escape(kind.label)}</text>'
        )
        y += 22
    parts.append(
        f'<line x1="{x - 6}" y1="{y}" x2="{x + 6}" y2="{y}" '
        f'stroke="#000000" stroke-width="1.5"/>'
    )
    parts.append(
        f'<text x="{x + 12}" y="{y}" font-size="12" '
        f'dominant-baseline="middle">Benchmark κ̂(2DA − 1)²</text>'
    )
    return parts


def render_svg(result: ExperimentResult) -> str:
    """Scatter of realized (DA, R2_OOS) per forecast over the benchmark."""
    if not result.points:
        raise EmptyResult("Nothing to plot.")
    kappa = result.kappa.kappa_hat
    frame = PlotFrame.of(result)
    title = (
        f"{result.config.dataset}: out-of-sample R² vs directional accuracy "
        f"(κ̂ = {kappa:.4f})"
    )

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" '
        f'fill="#ffffff"/>',
        f'<text x="{WIDTH / 2}" y="28" font-size="16" '
        f'text-anchor="middle">{escape(title)}</text>',
    ]
    parts.extend(_axes(frame))

    groups: Dict[ForecastKind, List[str]] = {}
    for point in _ordered(result.points):
        kind = ForecastKind.parse(point.kind)
        groups.setdefault(kind, []).append(
            _marker(kind, frame.x_px(point.da), frame.y_px(point.r2_oos))
        )
    for kind in sorted(groups):
        parts.append(f'<g class="{kind.value}">')
        parts.extend(groups[kind])
        parts.append("</g>")

    curve = " ".join(
        f"{_num(frame.x_px(x))},{_num(frame.y_px(y))}"
        for x, y in curve_points(kappa, frame.x_lo, frame.x_hi)
    )
    parts.append(
        f'<polyline class="benchmark" points="{curve}" fill="none" '
        f'stroke="#000000" stroke-width="1.5"/>'
    )
    parts.extend(_legend(result.config.kinds))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_plot(
    result: ExperimentResult, destination: Union[str, Path]
) -> int:
    data = render_svg(result).encode("utf-8")
    written = _write(destination, data)
    logger.info(f"Wrote plot to {destination}.")
    return written
