"""Cross-sectional announcement-volatility multiplier, CAV and its tests.

For window day ``t`` with residuals ``e_i`` and forecast variances ``v_i`` of
``K`` cases the multiplier is

    M_t = 1/(K-1) * sum_i (K e_i - sum_j e_j)**2 / (K (K-2) v_i + sum_j v_j)

and the cumulative abnormal volatility over a window of ``L`` days is
``sum_t M_t - L``.

Under independent normal residuals each summand has expectation one, so the
estimator above has null mean ``K/(K-1)``. ``normalization="unbiased"``
divides by ``K`` instead, which gives null mean one and makes
``(K-1) * sum_t M_t`` exactly chi-square with ``(K-1) L`` degrees of freedom
when the forecast variances are correct.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from . import garch
from .errors import (
    EmptyWindow,
    NoEligibleDates,
    TooFewCases,
    VolEventError,
)
from .marketdata import (
    AlignedPanel,
    EventCase,
    OutcomeGroup,
    WindowSpec,
    history_before,
    resolve_window,
)

logger = logging.getLogger(__name__)

NORMALIZATIONS = ("printed", "unbiased")
BOOTSTRAP_BLOCK = 250


# -- estimator ----------------------------------------------------------------


@dataclass(frozen=True)
class CrossSection:
    """Window residuals and forecast variances, shape ``(K, L)``."""

    resid: np.ndarray
    variance: np.ndarray
    case_ids: tuple = ()

    def __post_init__(self):
        resid = np.asarray(self.resid, dtype=float)
        variance = np.asarray(self.variance, dtype=float)
        if resid.ndim != 2 or resid.shape != variance.shape:
            raise ValueError("resid and variance must be equal-shape (K, L) arrays")
        if resid.shape[0] < 3:
            raise TooFewCases(f"need at least 3 cases, got {resid.shape[0]}")
        if np.any(~(variance > 0)):
            raise ValueError("forecast variances must be positive")
        object.__setattr__(self, "resid", resid)
        object.__setattr__(self, "variance", variance)

    @property
    def K(self) -> int:
        return self.resid.shape[0]

    @property
    def L(self) -> int:
        return self.resid.shape[1]


def multipliers(resid, variance, normalization: str = "printed") -> np.ndarray:
    """Multiplier for every day; cases run along axis ``-2``.

    Accepts any leading batch dimensions, e.g. ``(R, K, L)`` for bootstrap
    replications.
    """
    resid = np.asarray(resid, dtype=float)
    variance = np.asarray(variance, dtype=float)
    K = resid.shape[-2]
    if K < 3:
        raise TooFewCases(f"need at least 3 cases, got {K}")
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
    total = resid.sum(axis=-2, keepdims=True)
    total_var = variance.sum(axis=-2, keepdims=True)
    terms = (K * resid - total) ** 2 / (K * (K - 2) * variance + total_var)
    divisor = K - 1 if normalization == "printed" else K
    return terms.sum(axis=-2) / divisor


def multiplier(cross_section: CrossSection, t: int, normalization: str = "printed") -> float:
    cs = cross_section
    return float(
        multipliers(cs.resid[:, t:t + 1], cs.variance[:, t:t + 1], normalization)[0]
    )


def cav(m_hat) -> float:
    m_hat = np.asarray(m_hat, dtype=float)
    if m_hat.size == 0:
        raise EmptyWindow("CAV of an empty window")
    return float(m_hat.sum() - m_hat.size)


def pct_vol(cav_value: float, L: int) -> float:
    if L < 1:
        raise EmptyWindow("window length must be at least 1")
    return cav_value / L


@dataclass(frozen=True)
class Chi2Test:
    statistic: float
    df: int
    p_upper: float
    p_lower: float


def chi2_test(m_hat, K: int) -> Chi2Test:
    """``(K-1) * sum(M_t)`` against chi-square with ``(K-1) L`` df."""
    if K < 3:
        raise TooFewCases(f"need at least 3 cases, got {K}")
    m_hat = np.asarray(m_hat, dtype=float)
    L = m_hat.size
    if L == 0:
        raise EmptyWindow("chi-square test over an empty window")
    stat = (K - 1) * float(m_hat.sum())
    df = (K - 1) * L
    return Chi2Test(stat, df, float(stats.chi2.sf(stat, df)), float(stats.chi2.cdf(stat, df)))


# -- bootstrap --------------------------------------------------------------


@dataclass(frozen=True)
class PseudoWindows:
    """All eligible placebo windows of one case.

    ``resid`` and ``variance`` have shape ``(n_eligible, L)``; ``starts`` are
    the panel indices where each placebo window opens.
    """

    case_id: str
    starts: np.ndarray
    resid: np.ndarray
    variance: np.ndarray


def pseudo_windows(
    fit: garch.GarchFit,
    panel: AlignedPanel,
    L: int,
    exclude: Optional[range] = None,
    min_start: int = 0,
    case_id: str = "",
) -> PseudoWindows:
    """Placebo windows of length ``L`` using the case's own fitted model.

    The fitted variance recursion is run over the whole panel; a window opening
    at ``s`` is forecast from the state at ``s - 1``, exactly as the real
    window is forecast from the end of its estimation sample. Windows that
    overlap ``exclude`` are skipped.
    """
    p = fit.params
    e = garch.residuals(p, panel.stock, panel.market)
    s2 = garch.variance_path(p, e)
    n = e.size
    starts = np.arange(max(min_start, 1), n - L + 1)
    if exclude is not None and len(exclude):
        keep = (starts + L - 1 < exclude.start) | (starts >= exclude.stop)
        starts = starts[keep]
    if starts.size == 0:
        raise NoEligibleDates(f"case {case_id}: no placebo window of length {L} fits")
    idx = starts[:, None] + np.arange(L)[None, :]
    variance = garch.forecast_from_states(p, s2[starts], L)
    return PseudoWindows(case_id, starts, e[idx], variance)


@dataclass(frozen=True)
class BootstrapResult:
    replications: int
    distribution: np.ndarray
    p_upper: float
    p_lower: float
    seed: int
    stream: tuple = ()


def _bootstrap_block(pools, K, L, n, seed_seq, normalization):
    rng = np.random.default_rng(seed_seq)
    sizes = np.array([p.starts.size for p in pools])
    which = rng.integers(0, len(pools), size=(n, K))
    pos = np.floor(rng.random((n, K)) * sizes[which]).astype(np.int64)
    resid = np.empty((n, K, L))
    variance = np.empty((n, K, L))
    for c, pool in enumerate(pools):
        mask = which == c
        if mask.any():
            resid[mask] = pool.resid[pos[mask]]
            variance[mask] = pool.variance[pos[mask]]
    m = multipliers(resid, variance, normalization)
    return m.sum(axis=-1) - L


def bootstrap(
    pools: Sequence[PseudoWindows],
    K: int,
    observed_cav: float,
    replications: int = 5000,
    seed: int = 0,
    stream: tuple = (),
    workers: int = 1,
    normalization: str = "printed",
) -> BootstrapResult:
    """Null distribution of CAV from randomly drawn (case, date) pairs.

    Each replication draws ``K`` cases with replacement and, for each, a
    placebo window uniformly from that case's eligible dates. Replications
    are generated in fixed blocks whose random streams are keyed by
    ``(seed, *stream, block)``, so the result does not depend on ``workers``.
    """
    if replications < 1:
        raise ValueError("replications must be at least 1")
    if K < 3:
        raise TooFewCases(f"need at least 3 cases, got {K}")
    if not pools:
        raise NoEligibleDates("bootstrap needs at least one case with placebo windows")
    L = pools[0].resid.shape[1]
    blocks = []
    for b, lo in enumerate(range(0, replications, BOOTSTRAP_BLOCK)):
        n = min(BOOTSTRAP_BLOCK, replications - lo)
        ss = np.random.SeedSequence(seed, spawn_key=tuple(stream) + (b,))
        blocks.append((n, ss))

    def run(block):
        n, ss = block
        return _bootstrap_block(pools, K, L, n, ss, normalization)

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    draws = np.concatenate(parts)
    p_upper = float(np.count_nonzero(draws >= observed_cav)) / replications
    p_lower = float(np.count_nonzero(draws <= observed_cav)) / replications
    return BootstrapResult(replications, np.sort(draws), p_upper, p_lower, seed, tuple(stream))


# -- study pipeline ---------------------------------------------------------


@dataclass(frozen=True)
class StudyConfig:
    estimation_length: int = 500
    replications: int = 5000
    seed: int = 0
    workers: int = 1
    normalization: str = "printed"
    min_obs: int = 100
    bootstrap: bool = True


@dataclass(frozen=True)
class CaseFit:
    case: EventCase
    panel: AlignedPanel
    window: range
    estimation: range
    fit: garch.GarchFit
    window_resid: garch.WindowResiduals


@dataclass(frozen=True)
class CaseFailure:
    case_id: str
    reason: str


def fit_case(case: EventCase, panel: AlignedPanel, spec: WindowSpec, config: StudyConfig = StudyConfig()) -> CaseFit:
    window = resolve_window(panel, case.outcome_date, spec)
    est = history_before(window.start, config.estimation_length)
    fit = garch.fit_range(panel, est, min_obs=config.min_obs)
    if not fit.converged:
        raise garch.NonConvergence(f"GARCH fit did not converge ({fit.message})")
    wr = garch.window_residuals(fit, panel, window)
    return CaseFit(case, panel, window, est, fit, wr)


def fit_cases(
    cases: Sequence[EventCase],
    panels: Mapping[str, AlignedPanel],
    spec: WindowSpec,
    config: StudyConfig = StudyConfig(),
) -> tuple[list[CaseFit], list[CaseFailure]]:
    """Fit every case; failures are collected rather than raised."""

    def one(case):
        panel = panels.get(case.ticker)
        if panel is None:
            return CaseFailure(case.case_id, f"no price data for ticker {case.ticker}")
        try:
            return fit_case(case, panel, spec, config)
        except VolEventError as exc:
            return CaseFailure(case.case_id, f"{type(exc).__name__}: {exc}")

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as ex:
            results = list(ex.map(one, cases))
    else:
        results = [one(c) for c in cases]
    fits = [r for r in results if isinstance(r, CaseFit)]
    failures = [r for r in results if isinstance(r, CaseFailure)]
    for f in failures:
        logger.warning("dropping case %s: %s", f.case_id, f.reason)
    return fits, failures


@dataclass
class CavResult:
    group: str
    window: WindowSpec
    case_ids: list
    m_hat: np.ndarray
    cav: float
    pct_vol: float
    chi2_stat: float
    chi2_df: int
    p_asymptotic: float
    p_asymptotic_lower: float
    p_boot_upper: Optional[float] = None
    p_boot_lower: Optional[float] = None
    replications: int = 0
    seed: int = 0
    normalization: str = "printed"
    abnormal_return: np.ndarray = field(default_factory=lambda: np.empty(0))
    variance_ratios: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.case_ids)

    @property
    def L(self) -> int:
        return self.m_hat.size

    @property
    def day_offsets(self) -> np.ndarray:
        return np.arange(-self.window.n_before, self.window.n_after + 1)

    @property
    def cumulative_path(self) -> np.ndarray:
        """Running CAV through each window day."""
        return np.cumsum(self.m_hat - 1.0)

    @property
    def median_variance_ratio(self) -> float:
        return float(np.median(list(self.variance_ratios.values())))

    @property
    def p_table(self) -> float:
        """Asymptotic p-value in the direction of the observed CAV."""
        return self.p_asymptotic if self.cav >= 0 else self.p_asymptotic_lower

    @property
    def p_boot_table(self) -> Optional[float]:
        if self.p_boot_upper is None:
            return None
        return self.p_boot_upper if self.cav >= 0 else self.p_boot_lower

    def to_dict(self) -> dict:
        return {
            "group": self.group,
            "window": self.window.label,
            "window_key": self.window.key,
            "K": self.K,
            "L": self.L,
            "case_ids": list(self.case_ids),
            "m_hat": [float(x) for x in self.m_hat],
            "cav": self.cav,
            "pct_vol": self.pct_vol,
            "chi2_stat": self.chi2_stat,
            "chi2_df": self.chi2_df,
            "p_asymptotic": self.p_asymptotic,
            "p_asymptotic_lower": self.p_asymptotic_lower,
            "p_boot_upper": self.p_boot_upper,
            "p_boot_lower": self.p_boot_lower,
            "replications": self.replications,
            "seed": self.seed,
            "normalization": self.normalization,
            "abnormal_return": [float(x) for x in self.abnormal_return],
            "variance_ratios": {k: float(v) for k, v in self.variance_ratios.items()},
            "median_variance_ratio": self.median_variance_ratio if self.variance_ratios else None,
            "failures": [{"case_id": f.case_id, "reason": f.reason} for f in self.failures],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def table_row(self) -> dict:
        boot = self.p_boot_table
        return {
            "group": self.group,
            "window": self.window.label,
            "CAV": f"{self.cav:.3f}",
            "pct_vol": f"{self.pct_vol:.3f}",
            "p_val": f"{self.p_table:.3f}",
            "p_val_boot": "" if boot is None else f"{boot:.3f}",
        }


TABLE_COLUMNS = ("group", "window", "CAV", "pct_vol", "p_val", "p_val_boot")


def table_csv(results: Sequence[CavResult]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in results:
        writer.writerow(r.table_row())
    return buf.getvalue()


def path_csv(results: Sequence[CavResult]) -> str:
    """Tidy ``group,window,day_offset,cav`` rows for plotting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["group", "window", "day_offset", "cav"])
    for r in results:
        for off, value in zip(r.day_offsets, r.cumulative_path):
            writer.writerow([r.group, r.window.key, int(off), repr(float(value))])
    return buf.getvalue()


def _group_ordinal(group: str) -> int:
    order = [g.value for g in OutcomeGroup]
    return order.index(group) if group in order else len(order)


def cav_from_fits(
    group_fits: Sequence[CaseFit],
    spec: WindowSpec,
    group: str,
    config: StudyConfig = StudyConfig(),
    pools: Optional[Sequence[PseudoWindows]] = None,
    failures: Sequence[CaseFailure] = (),
    stream: tuple = (),
) -> CavResult:
    K = len(group_fits)
    if K < 3:
        raise TooFewCases(f"group {group}: {K} usable case(s), need at least 3")
    cs = CrossSection(
        np.stack([f.window_resid.resid for f in group_fits]),
        np.stack([f.window_resid.variance for f in group_fits]),
        tuple(f.case.case_id for f in group_fits),
    )
    m_hat = multipliers(cs.resid, cs.variance, config.normalization)
    total = cav(m_hat)
    test = chi2_test(m_hat, K)
    ratios = {
        f.case.case_id: float(np.mean(f.window_resid.resid**2 / f.window_resid.variance))
        for f in group_fits
    }
    result = CavResult(
        group=group,
        window=spec,
        case_ids=list(cs.case_ids),
        m_hat=m_hat,
        cav=total,
        pct_vol=pct_vol(total, cs.L),
        chi2_stat=test.statistic,
        chi2_df=test.df,
        p_asymptotic=test.p_upper,
        p_asymptotic_lower=test.p_lower,
        normalization=config.normalization,
        abnormal_return=cs.resid.mean(axis=0),
        variance_ratios=ratios,
        failures=list(failures),
        seed=config.seed,
    )
    if config.bootstrap and config.replications > 0:
        if pools is None:
            pools = build_pools(group_fits, spec, config)
        boot = bootstrap(
            pools,
            K,
            total,
            replications=config.replications,
            seed=config.seed,
            stream=stream,
            workers=config.workers,
            normalization=config.normalization,
        )
        result.p_boot_upper = boot.p_upper
        result.p_boot_lower = boot.p_lower
        result.replications = boot.replications
    return result


def build_pools(fits: Sequence[CaseFit], spec: WindowSpec, config: StudyConfig = StudyConfig()) -> list[PseudoWindows]:
    pools = []
    for f in fits:
        try:
            pools.append(
                pseudo_windows(
                    f.fit,
                    f.panel,
                    spec.length,
                    exclude=f.window,
                    min_start=config.estimation_length,
                    case_id=f.case.case_id,
                )
            )
        except NoEligibleDates as exc:
            logger.warning("%s", exc)
    if not pools:
        raise NoEligibleDates("no case has an eligible placebo window")
    return pools


def run_study(
    cases: Sequence[EventCase],
    panels: Mapping[str, AlignedPanel],
    spec: WindowSpec,
    config: StudyConfig = StudyConfig(),
    groups: Optional[Sequence[str]] = None,
) -> dict[str, CavResult]:
    """Per-group CAV results for one window.

    All usable cases of the dataset form the bootstrap pool, whichever group
    they belong to. Groups with fewer than three usable cases are skipped
    with a warning.
    """
    fits, failures = fit_cases(cases, panels, spec, config)
    pools = build_pools(fits, spec, config) if (config.bootstrap and fits) else None
    if groups is None:
        groups = [g.value for g in OutcomeGroup if any(c.outcome_group == g for c in cases)]
    out = {}
    for group in groups:
        group_fits = [f for f in fits if f.case.outcome_group.value == group]
        group_ids = {c.case_id for c in cases if c.outcome_group.value == group}
        group_failures = [f for f in failures if f.case_id in group_ids]
        try:
            out[group] = cav_from_fits(
                group_fits, spec, group, config, pools, group_failures,
                stream=(_group_ordinal(group), spec.n_before, spec.n_after),
            )
        except TooFewCases as exc:
            logger.warning("skipping group: %s", exc)
    return out


def run_group_study(
    cases: Sequence[EventCase],
    panels: Mapping[str, AlignedPanel],
    group: str,
    spec: WindowSpec,
    config: StudyConfig = StudyConfig(),
) -> CavResult:
    """Full pipeline for one outcome group; raises TooFewCases if K < 3."""
    group = OutcomeGroup.parse(group).value
    results = run_study(cases, panels, spec, config, groups=[group])
    if group not in results:
        n = sum(1 for c in cases if c.outcome_group.value == group)
        raise TooFewCases(f"group {group}: fewer than 3 usable cases out of {n}")
    return results[group]
