"""Market model with GARCH(1,1) errors.

The mean equation regresses stock returns on market returns,

    r_t = alpha + beta * m_t + e_t,    e_t ~ N(0, s2_t),

and the conditional variance follows

    s2_t = psi0 + psi1 * s2_{t-1} + psi2 * e_{t-1}**2.

Both equations are estimated jointly by Gaussian maximum likelihood. The
recursion is started from a pre-sample value ``s2_0 = e2_0 = mean(e**2)``
so that the first in-sample variance is ``psi0 + (psi1 + psi2) * s2_0``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import optimize, signal
from scipy.special import expit, logit

from .errors import (
    DegenerateData,
    NonConvergence,
    NonPositiveVariance,
    NonStationaryParams,
    TooShortSeries,
    WindowOutOfRange,
)

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)

INIT_PSI1 = 0.85
INIT_PSI2 = 0.10


@dataclass(frozen=True)
class GarchParams:
    alpha: float
    beta: float
    psi0: float
    psi1: float
    psi2: float

    def validate(self) -> "GarchParams":
        if not (self.psi0 > 0 and self.psi1 >= 0 and self.psi2 >= 0):
            raise NonStationaryParams(
                f"need psi0 > 0 and psi1, psi2 >= 0, got {self.psi0}, {self.psi1}, {self.psi2}"
            )
        if not self.psi1 + self.psi2 < 1:
            raise NonStationaryParams(
                f"psi1 + psi2 = {self.psi1 + self.psi2} is not below 1"
            )
        return self

    @property
    def persistence(self) -> float:
        return self.psi1 + self.psi2

    @property
    def unconditional_variance(self) -> float:
        return self.psi0 / (1.0 - self.persistence)

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.psi0, self.psi1, self.psi2])


@dataclass(frozen=True)
class GarchFit:
    """Result of :func:`fit`.

    ``terminal_state`` holds the conditional variance and residual of the
    last estimation day; it is all a forecast needs. ``sample_end`` is the
    panel index of that day when the fit came from :func:`fit_range`.
    """

    params: GarchParams
    log_likelihood: float
    init_log_likelihood: float
    terminal_sigma2: float
    terminal_resid: float
    converged: bool
    iterations: int
    nobs: int
    message: str = ""
    sample_end: Optional[int] = None
    sigma2_path: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    @property
    def terminal_state(self) -> tuple[float, float]:
        return self.terminal_sigma2, self.terminal_resid

    def to_dict(self) -> dict:
        out = {
            "params": asdict(self.params),
            "log_likelihood": self.log_likelihood,
            "init_log_likelihood": self.init_log_likelihood,
            "terminal_state": {
                "sigma2": self.terminal_sigma2,
                "resid": self.terminal_resid,
            },
            "converged": self.converged,
            "iterations": self.iterations,
            "nobs": self.nobs,
            "message": self.message,
            "sample_end": self.sample_end,
        }
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "GarchFit":
        return cls(
            params=GarchParams(**data["params"]),
            log_likelihood=data["log_likelihood"],
            init_log_likelihood=data["init_log_likelihood"],
            terminal_sigma2=data["terminal_state"]["sigma2"],
            terminal_resid=data["terminal_state"]["resid"],
            converged=data["converged"],
            iterations=data["iterations"],
            nobs=data["nobs"],
            message=data.get("message", ""),
            sample_end=data.get("sample_end"),
        )

    @classmethod
    def from_json(cls, text: str) -> "GarchFit":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class VarianceForecast:
    horizon: int
    value: float


def residuals(params: GarchParams, stock, market) -> np.ndarray:
    stock = np.asarray(stock, dtype=float)
    market = np.asarray(market, dtype=float)
    return stock - params.alpha - params.beta * market


def variance_path(params: GarchParams, resid, sigma2_0: Optional[float] = None) -> np.ndarray:
    """Conditional variances for each observation of ``resid``.

    ``sigma2_0`` is the pre-sample variance and squared residual; it defaults
    to ``mean(resid**2)``.
    """
    resid = np.asarray(resid, dtype=float)
    if sigma2_0 is None:
        sigma2_0 = float(np.mean(resid**2))
    e2 = np.empty_like(resid)
    e2[0] = sigma2_0
    e2[1:] = resid[:-1] ** 2
    drive = params.psi0 + params.psi2 * e2
    zi = np.array([params.psi1 * sigma2_0])
    out, _ = signal.lfilter([1.0], [1.0, -params.psi1], drive, zi=zi)
    return out


def gaussian_loglik(resid, sigma2) -> float:
    """Sum of normal log densities of ``resid`` with variances ``sigma2``."""
    resid = np.asarray(resid, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    if np.any(~(sigma2 > 0)):
        raise NonPositiveVariance("conditional variance underflowed to zero")
    return float(-0.5 * np.sum(LOG_2PI + np.log(sigma2) + resid**2 / sigma2))


def log_likelihood(params: GarchParams, stock, market, sigma2_0: Optional[float] = None) -> float:
    """Gaussian log-likelihood of the market model with GARCH(1,1) errors."""
    params.validate()
    resid = residuals(params, stock, market)
    if resid.size == 0:
        raise TooShortSeries("log-likelihood of an empty sample")
    return gaussian_loglik(resid, variance_path(params, resid, sigma2_0))


# -- estimation -------------------------------------------------------------
#
# The optimizer works on standardized data (stock and market each divided by
# their sample standard deviation) and on the unconstrained vector
#
#     u = (alpha, beta, log psi0, logit(psi1 + psi2), logit(psi1 / (psi1 + psi2)))
#
# which keeps psi0 > 0, psi1, psi2 > 0 and psi1 + psi2 < 1 automatically.


def _to_params(u) -> GarchParams:
    p = expit(u[3])
    w = expit(u[4])
    return GarchParams(float(u[0]), float(u[1]), float(math.exp(u[2])),
                       float(p * w), float(p * (1.0 - w)))


def _to_unconstrained(params: GarchParams) -> np.ndarray:
    p = params.persistence
    return np.array([params.alpha, params.beta, math.log(params.psi0),
                     logit(p), logit(params.psi1 / p)])


def _negloglik_and_grad(u, stock, market):
    """Mean negative log-likelihood and its gradient in ``u`` coordinates."""
    n = stock.size
    prm = _to_params(u)
    a, b, psi0, psi1, psi2 = prm.as_array()
    e = stock - a - b * market
    s0 = float(np.mean(e * e))
    s2 = variance_path(prm, e, s0)
    if np.any(~(s2 > 0)) or not np.all(np.isfinite(s2)):
        return np.inf, np.zeros_like(u)
    ll = -0.5 * np.sum(LOG_2PI + np.log(s2) + e * e / s2)

    # d s2_t / d theta obeys D_t = g_t + psi1 * D_{t-1}, D_1 = g_1
    g = np.empty((5, n))
    pers = psi1 + psi2
    g[0, 0] = pers * (-2.0 * np.mean(e))
    g[1, 0] = pers * (-2.0 * np.mean(e * market))
    g[0, 1:] = -2.0 * psi2 * e[:-1]
    g[1, 1:] = -2.0 * psi2 * e[:-1] * market[:-1]
    g[2, :] = 1.0
    g[3, 0] = s0
    g[3, 1:] = s2[:-1]
    g[4, 0] = s0
    g[4, 1:] = e[:-1] ** 2
    d = signal.lfilter([1.0], [1.0, -psi1], g, axis=1)

    with np.errstate(over="ignore", invalid="ignore"):
        w_s2 = -0.5 * (1.0 - e * e / s2) / s2
        grad = d @ w_s2
        grad[0] += np.sum(e / s2)
        grad[1] += np.sum(e * market / s2)
    if not (np.isfinite(ll) and np.all(np.isfinite(grad))):
        # far outside the useful region; tell the line search to back off
        return np.inf, np.zeros_like(u)

    # chain rule to u
    p = expit(u[3])
    w = expit(u[4])
    gu = np.empty(5)
    gu[0] = grad[0]
    gu[1] = grad[1]
    gu[2] = grad[2] * psi0
    dp = p * (1.0 - p)
    dw = w * (1.0 - w)
    gu[3] = grad[3] * dp * w + grad[4] * dp * (1.0 - w)
    gu[4] = (grad[3] - grad[4]) * p * dw
    return -ll / n, -gu / n


def initial_params(stock, market) -> GarchParams:
    """OLS mean equation, psi1 = 0.85, psi2 = 0.10 and variance targeting."""
    stock = np.asarray(stock, dtype=float)
    market = np.asarray(market, dtype=float)
    mc = market - market.mean()
    sxx = float(mc @ mc)
    if sxx <= 0:
        raise DegenerateData("market returns have zero variance")
    beta = float(mc @ (stock - stock.mean())) / sxx
    alpha = float(stock.mean() - beta * market.mean())
    resid = stock - alpha - beta * market
    s2 = float(np.mean(resid**2))
    if not s2 > 0:
        raise DegenerateData("mean-equation residuals have zero variance")
    return GarchParams(alpha, beta, s2 * (1.0 - INIT_PSI1 - INIT_PSI2), INIT_PSI1, INIT_PSI2)


def fit(
    stock,
    market,
    *,
    min_obs: int = 100,
    ftol: float = 1e-8,
    maxiter: int = 500,
) -> GarchFit:
    """Maximum likelihood fit of the market model with GARCH(1,1) errors.

    Terminates when the relative change of the log-likelihood drops below
    ``ftol`` or after ``maxiter`` iterations. A fit that stops for any other
    reason is returned with ``converged=False`` and a logged warning.
    """
    stock = np.asarray(stock, dtype=float)
    market = np.asarray(market, dtype=float)
    n = stock.size
    if market.size != n:
        raise ValueError("stock and market must have equal length")
    if n < min_obs:
        raise TooShortSeries(f"fit needs at least {min_obs} observations, got {n}")
    if not (np.all(np.isfinite(stock)) and np.all(np.isfinite(market))):
        raise DegenerateData("returns must be finite")
    c_s = float(np.std(stock))
    c_m = float(np.std(market))
    if np.ptp(stock) == 0 or not c_s > 0:
        raise DegenerateData("stock returns have zero variance")
    if np.ptp(market) == 0 or not c_m > 0:
        raise DegenerateData("market returns have zero variance")

    zs = stock / c_s
    zm = market / c_m
    start = initial_params(zs, zm)
    u0 = _to_unconstrained(start)
    f0, _ = _negloglik_and_grad(u0, zs, zm)

    res = optimize.minimize(
        _negloglik_and_grad,
        u0,
        args=(zs, zm),
        jac=True,
        method="L-BFGS-B",
        options={"ftol": ftol, "gtol": 1e-10, "maxiter": maxiter, "maxcor": 20},
    )
    u = res.x
    if not res.fun <= f0:
        u = u0
    std_params = _to_params(u)
    params = GarchParams(
        alpha=std_params.alpha * c_s,
        beta=std_params.beta * c_s / c_m,
        psi0=std_params.psi0 * c_s * c_s,
        psi1=std_params.psi1,
        psi2=std_params.psi2,
    )
    resid = residuals(params, stock, market)
    s2 = variance_path(params, resid)
    ll = gaussian_loglik(resid, s2)
    init_ll = -f0 * n - n * math.log(c_s)
    converged = bool(res.success)
    if not converged:
        logger.warning("GARCH fit did not converge: %s", res.message)
    return GarchFit(
        params=params,
        log_likelihood=ll,
        init_log_likelihood=float(init_ll),
        terminal_sigma2=float(s2[-1]),
        terminal_resid=float(resid[-1]),
        converged=converged,
        iterations=int(res.nit),
        nobs=n,
        message=str(res.message),
        sigma2_path=s2,
    )


def fit_range(panel, rng: range, **kwargs) -> GarchFit:
    """Fit on ``panel[rng]`` and remember where the sample ends."""
    result = fit(panel.stock[rng.start:rng.stop], panel.market[rng.start:rng.stop], **kwargs)
    return replace(result, sample_end=rng.stop - 1)


# -- forecasting ------------------------------------------------------------


def _check_forecastable(fit_: GarchFit, allow_unconverged: bool) -> None:
    if not fit_.converged and not allow_unconverged:
        raise NonConvergence("cannot forecast from a fit that did not converge")
    fit_.params.validate()


def forecast_path(fit_: GarchFit, horizon: int, *, allow_unconverged: bool = False) -> np.ndarray:
    """Variance forecasts for horizons ``1..horizon``.

    One step ahead is ``psi0 + psi1 * s2_T + psi2 * e_T**2``; further steps
    decay geometrically, at rate ``psi1 + psi2``, towards the unconditional
    variance.
    """
    if horizon < 1:
        raise ValueError("forecast horizon must be at least 1")
    _check_forecastable(fit_, allow_unconverged)
    p = fit_.params
    one_step = p.psi0 + p.psi1 * fit_.terminal_sigma2 + p.psi2 * fit_.terminal_resid**2
    return _decay(p, np.asarray([one_step]), horizon)[0]


def _decay(p: GarchParams, one_step: np.ndarray, horizon: int) -> np.ndarray:
    lr = p.unconditional_variance
    k = np.arange(horizon)
    decay = p.persistence ** k
    return lr + decay[None, :] * (one_step[:, None] - lr)


def forecast_variance(fit_: GarchFit, k: int, *, allow_unconverged: bool = False) -> VarianceForecast:
    if k < 1:
        raise ValueError("forecast horizon must be at least 1")
    value = float(forecast_path(fit_, k, allow_unconverged=allow_unconverged)[-1])
    if not value > 0:
        raise NonPositiveVariance(f"forecast at horizon {k} is {value}")
    return VarianceForecast(k, value)


def forecast_from_states(params: GarchParams, sigma2_next, horizon: int) -> np.ndarray:
    """Forecast paths for many origins at once.

    ``sigma2_next`` holds one-step-ahead variances (one per origin); the
    result has shape ``(len(sigma2_next), horizon)``.
    """
    return _decay(params.validate(), np.asarray(sigma2_next, dtype=float), horizon)


@dataclass(frozen=True)
class WindowResiduals:
    resid: np.ndarray
    variance: np.ndarray
    horizons: np.ndarray

    @property
    def standardized(self) -> np.ndarray:
        return self.resid / np.sqrt(self.variance)


def window_residuals(fit_: GarchFit, panel, window: range, *, allow_unconverged: bool = False) -> WindowResiduals:
    """Window residuals paired with their forecast variances.

    The first window day is horizon 1 from the end of the estimation sample.
    """
    if fit_.sample_end is not None and window.start != fit_.sample_end + 1:
        raise WindowOutOfRange(
            f"window starts at {window.start} but the estimation sample ends at "
            f"{fit_.sample_end}"
        )
    if window.stop > len(panel.stock) or window.start < 0:
        raise WindowOutOfRange("window extends beyond the panel")
    L = len(window)
    stock = panel.stock[window.start:window.stop]
    market = panel.market[window.start:window.stop]
    resid = residuals(fit_.params, stock, market)
    variance = forecast_path(fit_, L, allow_unconverged=allow_unconverged)
    return WindowResiduals(resid, variance, np.arange(1, L + 1))
