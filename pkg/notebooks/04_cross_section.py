"""Regressing case-level abnormal volatility on dispute features.

Simulates cases whose variance multiplier depends on two features, computes
each case's log variance ratio (window against the estimation range) and
fits the linear model with plain and heteroskedasticity-robust errors.

    python3 notebooks/04_cross_section.py
"""

from volevent import crosssection as cx
from volevent.cli import abnormal_volatilities
from volevent.marketdata import WindowSpec
from volevent.simulate import SimSpec, simulate_panel

window = WindowSpec(1, 2, "month")
study = simulate_panel(SimSpec(K=120, T=1100, window=window, seed=3, market_sd=1e-4,
                               groups=("investor", "state"), covariates=True,
                               feature_effects={"IE": 0.7, "CO": -0.5}))

av = abnormal_volatilities(study.cases, study.panels(), window, 500)
design = cx.build_design(study.cases, av, skip_incomplete=True)
print(f"{len(design.case_ids)} cases, columns {', '.join(design.names)}")

print(cx.fit_ols(design.X, design.y, design.names).table())
print(cx.fit_ols(design.X, design.y, design.names, robust=True).table())
