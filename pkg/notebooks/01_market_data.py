"""Price files, log returns and announcement windows.

Writes a small synthetic price file, reads it back, builds the aligned
stock/market panel for one ticker and locates a window around a date that
falls on a weekend (it snaps forward to the next trading day).

    python3 notebooks/01_market_data.py
"""

import tempfile
from pathlib import Path

import numpy as np

from volevent.marketdata import (
    WindowSpec,
    build_panel,
    estimation_range,
    read_prices,
    resolve_window,
)
from volevent.simulate import SimSpec, simulate_panel

study = simulate_panel(SimSpec(K=3, T=900, seed=1))
tmp = Path(tempfile.mkdtemp())
price_path, case_path = study.write(tmp)
print(f"wrote {price_path}")

prices = read_prices(price_path)
print({t: len(v) for t, v in prices.items()})

panel = build_panel(prices, "S001", "MKT")
print(f"{len(panel)} aligned log returns, first date {panel.dates[0]}, last {panel.dates[-1]}")

# Saturday: the window centre moves to the following Monday
event = np.datetime64("2002-06-01")
for label in ("-2d,+2d", "(-1 week,1 week)", "-1m,+2m"):
    spec = WindowSpec.parse(label)
    window = resolve_window(panel, event, spec)
    est = estimation_range(panel, event, spec)
    print(f"{spec.label:<22} L={spec.length:<3} window days {window.start}..{window.stop - 1}"
          f"  estimation {est.start}..{est.stop - 1}")
