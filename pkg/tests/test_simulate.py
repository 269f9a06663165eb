import numpy as np
import pytest
from scipy import stats

from volevent import eventstudy as es
from volevent.garch import GarchParams
from volevent.marketdata import WindowSpec, compute_log_returns
from volevent.simulate import SimSpec, garch_innovations, simulate_panel


def test_null_window_variance_matches_forecast():
    w = WindowSpec(25, 24, "day")
    study = simulate_panel(SimSpec(K=20, T=900, window=w, seed=1, groups=("state",)))
    fits, failures = es.fit_cases(study.cases, study.panels(), w)
    assert not failures
    ratio = np.mean([np.mean(f.window_resid.resid**2 / f.window_resid.variance) for f in fits])
    assert 0.7 <= ratio <= 1.4


def test_injected_variance_lln():
    w = WindowSpec(50, 49, "day")
    p = GarchParams(0.0, 1.0, 2e-4, 0.0, 0.0)
    study = simulate_panel(SimSpec(K=10, T=900, window=w, params=p, injected_M=2.0, seed=2))
    windows = [
        study.innovations[i, idx - w.n_before: idx + w.n_after + 1]
        for i, idx in enumerate(study.outcome_index)
    ]
    assert all(x.size == 100 for x in windows)
    ratio = np.mean([np.var(x, ddof=1) for x in windows]) / p.psi0
    assert ratio == pytest.approx(2.0, abs=0.3)


def test_deterministic():
    spec = SimSpec(K=4, T=700, seed=5)
    a, b = simulate_panel(spec), simulate_panel(spec)
    assert a.stock_returns.tobytes() == b.stock_returns.tobytes()
    assert a.market_returns.tobytes() == b.market_returns.tobytes()
    assert a.cases == b.cases


def test_case_streams_independent_of_K():
    small = simulate_panel(SimSpec(K=3, T=700, seed=8))
    large = simulate_panel(SimSpec(K=9, T=700, seed=8))
    np.testing.assert_array_equal(small.stock_returns, large.stock_returns[:3])


def test_long_run_variance():
    p = GarchParams(0.0, 1.0, 0.05, 0.90, 0.05)
    z = np.random.default_rng(0).standard_normal((1, 1000 + 100_000))
    e, _ = garch_innovations(p, z, 1000)
    assert np.var(e) == pytest.approx(p.unconditional_variance, rel=0.05)


def test_fat_tails():
    p = GarchParams(0.0, 1.0, 0.05, 0.85, 0.10)
    z = np.random.default_rng(1).standard_normal((1, 1000 + 50_000))
    e, _ = garch_innovations(p, z, 1000)
    assert stats.kurtosis(e[0], fisher=False) > 3.0


def test_recursion():
    p = GarchParams(0.0, 1.0, 0.05, 0.90, 0.05)
    z = np.random.default_rng(2).standard_normal((2, 60))
    e, s2 = garch_innovations(p, z, 10)
    for t in range(1, 50):
        assert s2[0, t] == pytest.approx(p.psi0 + p.psi1 * s2[0, t - 1] + p.psi2 * e[0, t - 1] ** 2, rel=1e-14)
    np.testing.assert_allclose(e, z[:, 10:] * np.sqrt(s2))


def test_prices_reproduce_returns():
    study = simulate_panel(SimSpec(K=2, T=700, seed=3))
    prices = study.prices()
    assert len(prices) == 3 and all(len(v) == 700 for v in prices.values())
    r = compute_log_returns(prices[study.cases[1].ticker])
    np.testing.assert_allclose(r.returns, study.stock_returns[1], atol=1e-12)


def test_windows_fit_inside_data():
    w = WindowSpec(1, 2, "month")
    study = simulate_panel(SimSpec(K=30, T=800, window=w, seed=4))
    assert np.all(study.outcome_index - w.n_before >= 500)
    assert np.all(study.outcome_index + w.n_after <= 798)


def test_spec_validation():
    with pytest.raises(ValueError):
        SimSpec(T=400)
    with pytest.raises(ValueError):
        SimSpec(injected_M=-1.0)


def test_feature_effects_scale_multiplier():
    study = simulate_panel(SimSpec(K=6, T=700, seed=6, feature_effects={"IE": np.log(3.0)}))
    for c, m in zip(study.cases, study.multipliers):
        assert m == pytest.approx(3.0 if c.covariates["IE"] == 1.0 else 1.0)
