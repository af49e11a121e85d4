"""Zero-mean GARCH(1,1) fitting, filtering and simulation.

The variance recursion is

    sigma2[t] = omega + alpha * r[t-1] ** 2 + beta * sigma2[t-1]

seeded by a pre-sample state ``(r2, sigma2)``. When fitting, both entries of
the pre-sample state equal the in-sample mean square, so filtering the
in-sample window from that state reproduces the fitted path exactly.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel
from scipy.optimize import minimize
from scipy.signal import lfilter
from scipy.special import expit, logit

from quadlink.errors import QuadlinkError
from quadlink.ingest import ReturnSeries

logger = logging.getLogger(__name__)

STATIONARITY_MARGIN = 1e-6
MIN_OBSERVATIONS = 20
RECOMMENDED_OBSERVATIONS = 100
BURN_IN = 500
RESTARTS = 2
LOG_2PI = math.log(2 * math.pi)

State = Tuple[float, float]


class VolatilityError(QuadlinkError):
    pass


class InvalidParams(VolatilityError, ValueError):
    pass


class InsufficientData(VolatilityError, ValueError):
    pass


class AllZeroReturns(VolatilityError, ValueError):
    pass


class OptimizerFailure(VolatilityError):
    pass


@dataclass(frozen=True)
class GarchParams:
    omega: float
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not self.omega > 0:
            raise InvalidParams(f"omega must be positive, got {self.omega}.")
        if self.alpha < 0 or self.beta < 0:
            raise InvalidParams(
                f"alpha and beta must be non-negative, "
                f"got {self.alpha} and {self.beta}."
            )
        if self.persistence >= 1:
            raise InvalidParams(
                f"alpha + beta must be below 1, got {self.persistence}."
            )

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1 - self.persistence)

    def to_unconstrained(self) -> np.ndarray:
        scale = self.persistence / (1 - STATIONARITY_MARGIN)
        share = self.alpha / self.persistence
        return np.array(
            [math.log(self.omega), logit(scale), logit(share)], dtype=float
        )


def _from_unconstrained(theta: np.ndarray) -> Tuple[float, float, float]:
    # omega = exp(a), alpha = s*u, beta = s*(1-u), s = (1-eps)*sigmoid(b)
    scale = (1 - STATIONARITY_MARGIN) * expit(theta[1])
    share = expit(theta[2])
    return math.exp(theta[0]), scale * share, scale * (1 - share)


class GarchDocument(BaseModel):
    omega: float
    alpha: float
    beta: float
    log_likelihood: float
    n_in_sample: int
    sigma0_sq: float


@dataclass(frozen=True)
class GarchFit:
    params: GarchParams
    sigma: np.ndarray
    z: np.ndarray
    residuals: np.ndarray
    log_likelihood: float
    sigma0_sq: float
    mean: float = 0.0

    def __post_init__(self) -> None:
        for name in ("sigma", "z", "residuals"):
            values = np.array(getattr(self, name), dtype=float, copy=True)
            values.setflags(write=False)
            object.__setattr__(self, name, values)
        if not np.all(np.isfinite(self.sigma)) or np.any(self.sigma <= 0):
            raise VolatilityError("Conditional volatility must be positive.")

    def __len__(self) -> int:
        return len(self.sigma)

    @property
    def initial_state(self) -> State:
        return self.sigma0_sq, self.sigma0_sq

    @property
    def terminal_state(self) -> State:
        """Last ``(r2, sigma2)`` pair, the seed for the following window."""
        return float(self.residuals[-1] ** 2), float(self.sigma[-1] ** 2)

    def document(self) -> GarchDocument:
        return GarchDocument(
            omega=self.params.omega,
            alpha=self.params.alpha,
            beta=self.params.beta,
            log_likelihood=self.log_likelihood,
            n_in_sample=len(self),
            sigma0_sq=self.sigma0_sq,
        )


def _variance_path(
    omega: float,
    alpha: float,
    beta: float,
    residuals: np.ndarray,
    state: State,
) -> np.ndarray:
    lagged = np.concatenate([[state[0]], residuals[:-1] ** 2])
    drive = omega + alpha * lagged
    sigma2, _ = lfilter([1.0], [1.0, -beta], drive, zi=[beta * state[1]])
    return sigma2


def _log_likelihood(sigma2: np.ndarray, residuals: np.ndarray) -> float:
    terms = LOG_2PI + np.log(sigma2) + residuals**2 / sigma2
    return float(-0.5 * np.sum(terms))


def garch_log_likelihood(
    params: GarchParams, residuals: np.ndarray, state: State
) -> float:
    residuals = np.asarray(residuals, dtype=float)
    sigma2 = _variance_path(
        params.omega, params.alpha, params.beta, residuals, state
    )
    return _log_likelihood(sigma2, residuals)


def _build_fit(
    params: GarchParams,
    returns: np.ndarray,
    state: State,
    mean: float,
) -> GarchFit:
    residuals = returns - mean
    sigma2 = _variance_path(
        params.omega, params.alpha, params.beta, residuals, state
    )
    sigma = np.sqrt(sigma2)
    return GarchFit(
        params=params,
        sigma=sigma,
        z=residuals / sigma,
        residuals=residuals,
        log_likelihood=_log_likelihood(sigma2, residuals),
        sigma0_sq=state[1],
        mean=mean,
    )


def fit_garch11(
    in_sample: ReturnSeries, tolerance: float = 1e-8, demean: bool = False
) -> GarchFit:
    """Fits GARCH(1,1) by Gaussian quasi maximum likelihood.

    The search runs unconstrained over a log/logit reparameterization that
    keeps omega positive and alpha + beta below one, starting from the
    variance-targeted point (alpha, beta) = (0.05, 0.90). Nelder-Mead is
    restarted from its own optimum once to shake off early stalls.
    """
    returns = in_sample.returns
    n = len(returns)
    if n < MIN_OBSERVATIONS:
        raise InsufficientData(
            f"Need at least {MIN_OBSERVATIONS} returns to fit, got {n}."
        )
    if n < RECOMMENDED_OBSERVATIONS:
        logger.warning(
            f"Fitting GARCH(1,1) on only {n} returns, "
            f"estimates will be noisy."
        )
    if np.all(returns == 0):
        raise AllZeroReturns("Can't fit volatility to all-zero returns.")

    mean = float(np.mean(returns)) if demean else 0.0
    residuals = returns - mean
    sigma0_sq = float(np.mean(residuals**2))
    state = (sigma0_sq, sigma0_sq)

    start = GarchParams(omega=sigma0_sq * 0.05, alpha=0.05, beta=0.90)
    start_ll = garch_log_likelihood(start, residuals, state)
    logger.debug(f"Starting point {start} with log-likelihood {start_ll}.")

    def objective(theta: np.ndarray) -> float:
        omega, alpha, beta = _from_unconstrained(theta)
        sigma2 = _variance_path(omega, alpha, beta, residuals, state)
        value = -_log_likelihood(sigma2, residuals)
        return value if math.isfinite(value) else math.inf

    theta = start.to_unconstrained()
    options = {
        "xatol": tolerance,
        "fatol": tolerance * n,
        "maxiter": 20000,
        "maxfev": 40000,
    }
    with np.errstate(all="ignore"):
        for _ in range(RESTARTS):
            result = minimize(
                objective, theta, method="Nelder-Mead", options=options
            )
            theta = result.x

    if not math.isfinite(result.fun):
        raise OptimizerFailure(f"Optimizer failed: {result.message}")
    if not result.success:
        logger.warning(f"Optimizer did not converge: {result.message}")

    omega, alpha, beta = _from_unconstrained(theta)
    try:
        params = GarchParams(omega=omega, alpha=alpha, beta=beta)
    except InvalidParams as e:
        raise OptimizerFailure(f"Optimizer left the feasible set: {e}") from e

    if -result.fun < start_ll:
        logger.warning("No improvement over the starting point.")
        params = start

    fit = _build_fit(params, returns, state, mean)
    logger.info(
        f"Fitted omega={params.omega:.6g}, alpha={params.alpha:.6g}, "
        f"beta={params.beta:.6g}, log-likelihood={fit.log_likelihood:.6f}."
    )
    return fit


def filter_oos(
    params: GarchParams,
    state: State,
    out_sample: ReturnSeries,
    mean: float = 0.0,
) -> GarchFit:
    """Runs the recursion with fixed parameters over a new window.

    Each sigma[t] uses returns strictly before t only.
    """
    if state[0] < 0 or not state[1] > 0:
        raise InvalidParams(f"State {state} must be positive.")
    return _build_fit(params, out_sample.returns, state, mean)


def simulate_garch(
    params: GarchParams,
    n: int,
    seed: int,
    burn_in: int = BURN_IN,
    start: str = "2000-01-03",
) -> ReturnSeries:
    """Draws a Gaussian GARCH(1,1) path dated on business days."""
    if n < 1:
        raise ValueError(f"Length must be at least 1, got {n}.")
    rng = np.random.default_rng(seed)
    total = n + burn_in
    shocks = rng.standard_normal(total)

    returns = np.empty(total, dtype=float)
    sigma2 = params.unconditional_variance
    previous = 0.0
    for t in range(total):
        if t > 0:
            sigma2 = params.omega + (
                params.alpha * previous**2 + params.beta * sigma2
            )
        previous = math.sqrt(sigma2) * shocks[t]
        returns[t] = previous

    dates = pd.bdate_range(start=start, periods=n).to_numpy()
    return ReturnSeries(dates=dates, returns=returns[burn_in:])
