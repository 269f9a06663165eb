import numpy as np
import pytest

from volevent.garch import GarchParams
from volevent.marketdata import WindowSpec
from volevent.simulate import SimSpec, garch_innovations, simulate_panel


def garch_sample(n, params, seed, market_sd=1.0, burn_in=1000):
    """Stock and market returns from the market model with GARCH errors."""
    rng = np.random.default_rng(seed)
    market = rng.normal(0.0, market_sd, n)
    z = rng.standard_normal((1, burn_in + n))
    e, _ = garch_innovations(params, z, burn_in)
    return params.alpha + params.beta * market + e[0], market


@pytest.fixture
def unit_params():
    return GarchParams(alpha=0.0, beta=1.0, psi0=0.05, psi1=0.90, psi2=0.05)


@pytest.fixture(scope="session")
def small_study():
    spec = SimSpec(K=8, T=800, window=WindowSpec(1, 1, "week"), seed=11, groups=("state",))
    return simulate_panel(spec)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for n in sorted(verdicts):
            terminalreporter.write_line(verdicts[n])
