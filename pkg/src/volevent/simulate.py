"""Synthetic event-study datasets from the market-model/GARCH(1,1) process.

Each case draws from its own seed stream, so a case's path does not depend
on how many other cases are generated or in which order.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .garch import GarchParams
from .marketdata import (
    AlignedPanel,
    EventCase,
    OutcomeGroup,
    PricePoint,
    WindowSpec,
    write_cases,
    write_prices,
)

DEFAULT_PARAMS = GarchParams(alpha=0.0, beta=1.0, psi0=1e-5, psi1=0.90, psi2=0.05)


@dataclass(frozen=True)
class SimSpec:
    """Parameters of a simulated study.

    ``params`` is either one :class:`GarchParams` shared by all cases or a
    sequence with one entry per case. ``injected_M`` multiplies the residual
    variance inside each case's announcement window (1 is the null).
    ``feature_effects`` adds ``sum(coef * covariate)`` to the log multiplier
    of each case and implies ``covariates=True``.
    """

    K: int = 10
    T: int = 1200
    window: WindowSpec = WindowSpec(1, 1, "week")
    params: GarchParams | Sequence[GarchParams] = DEFAULT_PARAMS
    injected_M: float = 1.0
    seed: int = 0
    market_sd: float = 0.01
    burn_in: int = 1000
    estimation_length: int = 500
    groups: Sequence[str] = ("investor", "state", "settled")
    market_ticker: str = "MKT"
    start_date: dt.date = dt.date(2000, 1, 3)
    covariates: bool = False
    feature_effects: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be positive")
        if self.injected_M < 0:
            raise ValueError("injected_M must be nonnegative")
        need = self.estimation_length + self.window.length + 1
        if self.T <= need:
            raise ValueError(f"T = {self.T} must exceed {need} (estimation + window)")
        if not isinstance(self.params, GarchParams) and len(self.params) != self.K:
            raise ValueError("need one GarchParams per case")

    def case_params(self, i: int) -> GarchParams:
        p = self.params if isinstance(self.params, GarchParams) else self.params[i]
        return p.validate()


@dataclass
class SimulatedStudy:
    spec: SimSpec
    dates: np.ndarray           # price dates, length T
    market_returns: np.ndarray  # length T - 1, dated dates[1:]
    stock_returns: np.ndarray   # (K, T - 1)
    innovations: np.ndarray     # (K, T - 1) GARCH residuals after injection
    sigma2: np.ndarray          # (K, T - 1) conditional variances (pre-injection)
    outcome_index: np.ndarray   # (K,) return-calendar index of each outcome day
    multipliers: np.ndarray     # (K,) true variance multiplier in the window
    cases: list[EventCase]

    @property
    def tickers(self) -> list[str]:
        return [c.ticker for c in self.cases]

    def panel(self, i: int) -> AlignedPanel:
        return AlignedPanel(self.dates[1:], self.stock_returns[i], self.market_returns)

    def panels(self) -> dict[str, AlignedPanel]:
        return {c.ticker: self.panel(i) for i, c in enumerate(self.cases)}

    def prices(self) -> dict[str, list[PricePoint]]:
        days = [d.item() for d in self.dates]

        def path(returns):
            levels = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(returns)]))
            return [PricePoint(d, float(p)) for d, p in zip(days, levels)]

        out = {self.spec.market_ticker: path(self.market_returns)}
        for i, c in enumerate(self.cases):
            out[c.ticker] = path(self.stock_returns[i])
        return out

    def write(self, out_dir, prices_name="prices.csv", cases_name="cases.csv") -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        price_path = out_dir / prices_name
        case_path = out_dir / cases_name
        write_prices(price_path, self.prices())
        write_cases(case_path, self.cases)
        return price_path, case_path


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def garch_innovations(params: GarchParams, z: np.ndarray, burn_in: int) -> tuple[np.ndarray, np.ndarray]:
    """Run the GARCH(1,1) recursion on standard normal draws.

    ``z`` has shape ``(K, burn_in + n)``; the first ``burn_in`` columns are
    discarded. Returns residuals and conditional variances of shape ``(K, n)``.
    """
    K, total = z.shape
    s2 = np.full(K, params.unconditional_variance)
    e2 = s2.copy()
    eps = np.empty((K, total))
    var = np.empty((K, total))
    for t in range(total):
        s2 = params.psi0 + params.psi1 * s2 + params.psi2 * e2
        e = z[:, t] * np.sqrt(s2)
        e2 = e * e
        eps[:, t] = e
        var[:, t] = s2
    return eps[:, burn_in:], var[:, burn_in:]


def simulate_panel(spec: SimSpec) -> SimulatedStudy:
    n = spec.T - 1
    w = spec.window
    days = np.busday_offset(np.datetime64(spec.start_date, "D"), 0, roll="forward")
    dates = np.busday_offset(days, np.arange(spec.T), roll="forward")

    market = _stream(spec.seed, 0).normal(0.0, spec.market_sd, n)
    stock = np.empty((spec.K, n))
    innov = np.empty((spec.K, n))
    sigma2 = np.empty((spec.K, n))
    outcome = np.empty(spec.K, dtype=int)
    mult = np.empty(spec.K)
    cases = []
    lo = spec.estimation_length + w.n_before
    hi = n - 1 - w.n_after
    groups = [OutcomeGroup.parse(g) for g in spec.groups]
    use_covariates = spec.covariates or bool(spec.feature_effects)
    for i in range(spec.K):
        rng = _stream(spec.seed, 1, i)
        p = spec.case_params(i)
        z = rng.standard_normal((1, spec.burn_in + n))
        e, s2 = garch_innovations(p, z, spec.burn_in)
        e, s2 = e[0], s2[0]
        idx = int(rng.integers(lo, hi + 1))
        covs = _draw_covariates(rng) if use_covariates else {}
        log_m = sum(coef * _feature_value(covs, name) for name, coef in spec.feature_effects.items())
        m_i = spec.injected_M * float(np.exp(log_m))
        win = slice(idx - w.n_before, idx + w.n_after + 1)
        e = e.copy()
        e[win] *= np.sqrt(m_i)
        stock[i] = p.alpha + p.beta * market + e
        innov[i] = e
        sigma2[i] = s2
        outcome[i] = idx
        mult[i] = m_i
        group = groups[i % len(groups)]
        claimed = awarded = None
        extra = {}
        if use_covariates:
            claimed = covs.pop("amount_claimed")
            awarded = covs.pop("amount_awarded")
            extra = covs
        out_date = dates[1:][idx].item()
        cases.append(
            EventCase(
                case_id=f"C{i + 1:03d}",
                ticker=f"S{i + 1:03d}",
                outcome_date=out_date,
                outcome_group=group,
                registration_date=out_date - dt.timedelta(days=3 * 365),
                amount_claimed=claimed,
                amount_awarded=awarded,
                covariates=extra,
            )
        )
    return SimulatedStudy(spec, dates, market, stock, innov, sigma2, outcome, mult, cases)


def _draw_covariates(rng: np.random.Generator) -> dict:
    claimed = float(np.round(np.exp(rng.normal(5.0, 1.0)), 2))
    share = float(rng.uniform(0.0, 1.0))
    return {
        "amount_claimed": claimed,
        "amount_awarded": float(np.round(claimed * share, 2)),
        "PIC": float(rng.normal()),
        "RL": float(rng.normal()),
        "AR": float(rng.integers(0, 2)),
        "CO": float(rng.integers(0, 2)),
        "IE": float(rng.integers(0, 2)),
    }


def _feature_value(covs: Mapping[str, float], name: str) -> float:
    if name == "SA":
        claimed = covs["amount_claimed"]
        return covs["amount_awarded"] / claimed if claimed > 0 else 0.0
    if name == "PIC*RL":
        return covs["PIC"] * covs["RL"]
    return covs[name]
