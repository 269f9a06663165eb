"""Case-level abnormal volatility and its regression on dispute features."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import (
    InsufficientObservations,
    MissingFeature,
    SingularDesign,
    TooShortWindow,
    ZeroPreEventVariance,
)
from .marketdata import EventCase, OutcomeGroup

logger = logging.getLogger(__name__)

FEATURES = ("SA", "PIC", "RL", "PIC*RL", "AR", "CO", "IE")
COLUMNS = ("Intercept",) + FEATURES
INDICATORS = ("AR", "CO", "IE")


def abnormal_volatility(event_returns, pre_returns) -> float:
    """Log ratio of event-window to pre-event return variance (ddof=1)."""
    event = np.asarray(event_returns, dtype=float)
    pre = np.asarray(pre_returns, dtype=float)
    if event.size < 2 or pre.size < 2:
        raise TooShortWindow("both windows need at least 2 returns")
    v_pre = float(np.var(pre, ddof=1))
    if not v_pre > 0:
        raise ZeroPreEventVariance("pre-event returns have zero variance")
    v_event = float(np.var(event, ddof=1))
    return float(np.log(v_event / v_pre))


@dataclass(frozen=True)
class CaseFeatures:
    SA: float
    PIC: float
    RL: float
    AR: float
    CO: float
    IE: float

    def __post_init__(self):
        for name in INDICATORS:
            if getattr(self, name) not in (0.0, 1.0):
                raise ValueError(f"{name} must be 0 or 1")
        if self.SA < 0:
            raise ValueError("SA must be nonnegative")

    def row(self, extra: Sequence[float] = ()) -> list[float]:
        return [1.0, self.SA, self.PIC, self.RL, self.PIC * self.RL,
                self.AR, self.CO, self.IE, *extra]


def case_features(case: EventCase) -> CaseFeatures:
    """Regressors of one case; SA is awarded over claimed."""
    missing = []
    if case.amount_claimed is None or case.amount_awarded is None:
        missing.append("SA")
    elif case.amount_claimed == 0:
        missing.append("SA")
    values = {}
    for name in ("PIC", "RL", "AR", "CO", "IE"):
        v = case.covariates.get(name)
        if v is None or not np.isfinite(v):
            missing.append(name)
        else:
            values[name] = float(v)
    if missing:
        raise MissingFeature(f"case {case.case_id}: missing {', '.join(missing)}")
    try:
        return CaseFeatures(SA=case.amount_awarded / case.amount_claimed, **values)
    except ValueError as exc:
        raise MissingFeature(f"case {case.case_id}: {exc}") from None


@dataclass(frozen=True)
class Design:
    X: np.ndarray
    y: np.ndarray
    names: tuple
    case_ids: tuple
    excluded: tuple = ()


def build_design(
    cases: Sequence[EventCase],
    response: Mapping[str, float],
    extra: Sequence[str] = (),
    decided_only: bool = True,
    skip_incomplete: bool = False,
) -> Design:
    """Design matrix ``[1, SA, PIC, RL, PIC*RL, AR, CO, IE, *extra]``.

    Settled or discontinued cases are left out when ``decided_only``. A case
    with a missing feature raises :class:`MissingFeature` unless
    ``skip_incomplete``, in which case it is excluded with a warning.
    """
    rows, ys, ids, excluded = [], [], [], []
    for case in cases:
        if decided_only and case.outcome_group == OutcomeGroup.SETTLED:
            continue
        if case.case_id not in response:
            excluded.append((case.case_id, "no abnormal volatility"))
            continue
        try:
            feats = case_features(case)
            extra_values = []
            for name in extra:
                v = case.covariates.get(name)
                if v is None:
                    raise MissingFeature(f"case {case.case_id}: missing {name}")
                extra_values.append(float(v))
        except MissingFeature as exc:
            if not skip_incomplete:
                raise
            logger.warning("excluding %s", exc)
            excluded.append((case.case_id, str(exc)))
            continue
        rows.append(feats.row(extra_values))
        ys.append(float(response[case.case_id]))
        ids.append(case.case_id)
    k = len(COLUMNS) + len(extra)
    X = np.array(rows, dtype=float).reshape(-1, k)
    return Design(X, np.array(ys), COLUMNS + tuple(extra), tuple(ids), tuple(excluded))


@dataclass(frozen=True)
class RegressionResult:
    names: tuple
    estimates: np.ndarray
    std_errors: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    r2: float
    adj_r2: float
    n: int
    k: int
    cov_type: str = "nonrobust"

    @property
    def df_resid(self) -> int:
        return self.n - self.k

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "estimates": self.estimates.tolist(),
            "std_errors": self.std_errors.tolist(),
            "t_values": self.t_values.tolist(),
            "p_values": self.p_values.tolist(),
            "r2": self.r2,
            "adj_r2": self.adj_r2,
            "n": self.n,
            "k": self.k,
            "cov_type": self.cov_type,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def table(self) -> str:
        """Text table with Estimate, Std. Error, t value, P-val and stars."""
        width = max(len(n) for n in self.names) + 2
        lines = [f"{'':<{width}}{'Estimate':>10}{'Std. Error':>12}{'t value':>10}{'P-val':>8}"]
        for i, name in enumerate(self.names):
            lines.append(
                f"{name:<{width}}{self.estimates[i]:>10.3f}{self.std_errors[i]:>12.3f}"
                f"{self.t_values[i]:>10.3f}{self.p_values[i]:>8.3f}  {stars(self.p_values[i])}".rstrip()
            )
        lines.append(f"{'adj R^2':<{width}}{self.adj_r2:>40.4f}")
        lines.append(f"n = {self.n}, k = {self.k}, standard errors: {self.cov_type}")
        return "\n".join(lines) + "\n"


def stars(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.10:
        return "*"
    return ""


def fit_ols(X, y, names: Optional[Sequence[str]] = None, robust: bool = False) -> RegressionResult:
    """Least squares with homoskedastic (or HC1 when ``robust``) errors.

    ``X`` must contain the intercept column if one is wanted. R-squared is
    computed around the mean of ``y``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("X must be (n, k) and y must be (n,)")
    n, k = X.shape
    if n <= k:
        raise InsufficientObservations(f"need more observations than coefficients (n={n}, k={k})")
    Q, R = np.linalg.qr(X)
    diag = np.abs(np.diag(R))
    if diag.min() <= max(n, k) * np.finfo(float).eps * diag.max():
        raise SingularDesign("design matrix is not of full column rank")
    beta = np.linalg.solve(R, Q.T @ y)
    resid = y - X @ beta
    ssr = float(resid @ resid)
    df = n - k
    r_inv = np.linalg.inv(R)
    xtx_inv = r_inv @ r_inv.T
    if robust:
        meat = (X * resid[:, None] ** 2).T @ X
        cov = xtx_inv @ meat @ xtx_inv * n / df
        cov_type = "HC1"
    else:
        cov = xtx_inv * (ssr / df)
        cov_type = "nonrobust"
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / se
    p = 2.0 * stats.t.sf(np.abs(t), df)
    centered = y - y.mean()
    tss = float(centered @ centered)
    r2 = 1.0 - ssr / tss if tss > 0 else 0.0
    adj = 1.0 - (1.0 - r2) * (n - 1) / df
    if names is None:
        names = tuple(f"x{i}" for i in range(k))
    return RegressionResult(tuple(names), beta, se, t, p, r2, adj, n, k, cov_type)
