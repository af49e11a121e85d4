import math
from dataclasses import dataclass

import numpy as np

from quadlink.errors import QuadlinkError

# E|z| ** 2 for a standard normal z
GAUSSIAN_KAPPA = 2 / math.pi


class MetricsError(QuadlinkError):
    pass


class LengthMismatch(MetricsError, ValueError):
    pass


class DegenerateDenominator(MetricsError, ValueError):
    pass


class ZeroVolatility(MetricsError, ValueError):
    pass


@dataclass(frozen=True)
class MetricPoint:
    level_index: int
    target_p: float
    replication: int
    kind: str
    da: float
    r2_oos: float

    def __post_init__(self) -> None:
        if not 0 <= self.da <= 1:
            raise ValueError(f"Accuracy {self.da} is outside [0, 1].")
        if not self.r2_oos <= 1:
            raise ValueError(f"R2 {self.r2_oos} is above 1.")


@dataclass(frozen=True)
class KappaEstimate:
    kappa_hat: float
    z_bar: float
    t_oos: int

    @property
    def gaussian_ratio(self) -> float:
        return self.kappa_hat / GAUSSIAN_KAPPA


def zero_positive_sign(values: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(values) >= 0, 1, -1)


def _aligned(actual, forecast) -> tuple:
    actual = np.asarray(actual, dtype=float)
    forecast = np.asarray(forecast, dtype=float)
    if actual.shape != forecast.shape:
        raise LengthMismatch(
            f"Got {actual.shape[0]} values against {forecast.shape[0]}."
        )
    if actual.size < 1:
        raise LengthMismatch("Need at least one value.")
    return actual, forecast


def directional_accuracy(actual, mu) -> float:
    actual, mu = _aligned(actual, mu)
    hits = zero_positive_sign(actual) == zero_positive_sign(mu)
    return float(np.mean(hits))


def mse(actual, mu) -> float:
    actual, mu = _aligned(actual, mu)
    return float(np.mean((actual - mu) ** 2))


def r2_oos(actual, mu) -> float:
    """R2 against the zero-drift random walk, whose return forecast is 0."""
    actual, mu = _aligned(actual, mu)
    baseline = float(np.sum(actual**2))
    if baseline == 0:
        raise DegenerateDenominator("All actual returns are zero.")
    return 1 - float(np.sum((actual - mu) ** 2)) / baseline


def kappa_hat(actual, vols) -> KappaEstimate:
    actual, vols = _aligned(actual, vols)
    if np.any(vols <= 0):
        raise ZeroVolatility("Volatility must be positive at every date.")
    energy = float(np.sum(actual**2))
    if energy == 0:
        raise DegenerateDenominator("All actual returns are zero.")
    z_bar = float(np.mean(np.abs(actual) / vols))
    kappa = float(np.sum((vols * z_bar) ** 2)) / energy
    return KappaEstimate(kappa_hat=kappa, z_bar=z_bar, t_oos=len(actual))


def theoretical_r2(da: float, kappa: float) -> float:
    if not 0 <= da <= 1:
        raise ValueError(f"Accuracy {da} is outside [0, 1].")
    if not kappa > 0:
        raise ValueError(f"Shape parameter must be positive, got {kappa}.")
    return kappa * (2 * da - 1) ** 2
