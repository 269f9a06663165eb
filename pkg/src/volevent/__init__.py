"""Abnormal stock-return volatility around dated corporate events.

Modules
-------
marketdata   price/case files, log returns, calendar alignment, windows
garch        market model with GARCH(1,1) errors: likelihood, fit, forecasts
eventstudy   cross-sectional variance multiplier, CAV, chi-square and bootstrap
crosssection case-level abnormal volatility and its OLS regression
simulate     synthetic datasets with a known announcement effect
cli          command-line front end
"""

__version__ = "0.1.0"

from . import crosssection, errors, eventstudy, garch, marketdata, simulate  # noqa: E402
from .garch import GarchFit, GarchParams  # noqa: E402
from .marketdata import EventCase, OutcomeGroup, WindowSpec  # noqa: E402

__all__ = [
    "crosssection",
    "errors",
    "eventstudy",
    "garch",
    "marketdata",
    "simulate",
    "GarchFit",
    "GarchParams",
    "EventCase",
    "OutcomeGroup",
    "WindowSpec",
]
