"""Point forecasts built from a sign path and a volatility path.

All three kinds share the shape ``mu = lambda * dhat * sigma * w``:

* type1 scales by the least-squares factor, ``w = 1``,
* type2 scales by the ratio of mean absolute return to mean volatility,
  ``w = 1``,
* type3 scales by the least-squares factor and weights correct dates by 1.5
  and wrong ones by 0.5, which gives it market timing ability.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from quadlink.errors import QuadlinkError
from quadlink.signgen import SignPath

CORRECT_WEIGHT = 1.5
WRONG_WEIGHT = 0.5


class ForecastError(QuadlinkError):
    pass


class ZeroRegressor(ForecastError, ValueError):
    pass


class ZeroVolatility(ForecastError, ValueError):
    pass


class MisalignedInputs(ForecastError, ValueError):
    pass


class ForecastKind(str, Enum):
    TYPE1 = "type1"
    TYPE2 = "type2"
    TYPE3 = "type3"

    @classmethod
    def parse(cls, value) -> "ForecastKind":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        if text.isdigit():
            text = f"type{text}"
        return cls(text)

    @property
    def label(self) -> str:
        return {
            ForecastKind.TYPE1: "Type 1 (OLS scaling)",
            ForecastKind.TYPE2: "Type 2 (constant scaling)",
            ForecastKind.TYPE3: "Type 3 (timing weights)",
        }[self]

    @property
    def weighted(self) -> bool:
        return self is ForecastKind.TYPE3


@dataclass(frozen=True)
class ForecastSeries:
    mu: np.ndarray
    kind: ForecastKind
    lam: float
    weights: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.mu)


def timing_weights(correct: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(correct) == 1, CORRECT_WEIGHT, WRONG_WEIGHT)


def _check_aligned(path: SignPath, vols: np.ndarray) -> np.ndarray:
    vols = np.asarray(vols, dtype=float)
    if vols.shape != path.dhat.shape:
        raise MisalignedInputs(
            f"{len(path)} signs against {vols.shape[0]} volatilities."
        )
    return vols


def regressor(kind: ForecastKind, path: SignPath, vols) -> np.ndarray:
    vols = _check_aligned(path, vols)
    values = path.dhat * vols
    if kind.weighted:
        values = values * timing_weights(path.correct)
    return values


def lambda_ols(targets, regressor_values) -> float:
    """No-intercept least-squares coefficient of targets on the regressor."""
    targets = np.asarray(targets, dtype=float)
    regressor_values = np.asarray(regressor_values, dtype=float)
    if targets.shape != regressor_values.shape:
        raise MisalignedInputs(
            f"{targets.shape[0]} targets against "
            f"{regressor_values.shape[0]} regressor values."
        )
    energy = float(np.sum(regressor_values**2))
    if energy == 0:
        raise ZeroRegressor("Regressor is identically zero.")
    return float(np.sum(targets * regressor_values)) / energy


def lambda_const(abs_returns, vols) -> float:
    mean_vol = float(np.mean(vols))
    if not mean_vol > 0:
        raise ZeroVolatility("Mean volatility must be positive.")
    return float(np.mean(abs_returns)) / mean_vol


def estimate_lambda(
    kind: ForecastKind, returns, path: SignPath, vols
) -> float:
    returns = np.asarray(returns, dtype=float)
    if returns.shape != path.dhat.shape:
        raise MisalignedInputs(
            f"{returns.shape[0]} returns against {len(path)} signs."
        )
    if kind is ForecastKind.TYPE2:
        return lambda_const(np.abs(returns), _check_aligned(path, vols))
    return lambda_ols(returns, regressor(kind, path, vols))


def build_forecast(
    kind: ForecastKind, path: SignPath, vols, lam: float
) -> ForecastSeries:
    mu = lam * regressor(kind, path, vols)
    weights = timing_weights(path.correct) if kind.weighted else None
    return ForecastSeries(mu=mu, kind=kind, lam=lam, weights=weights)
