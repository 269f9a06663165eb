"""Market model with GARCH(1,1) errors: fitting and forecasting.

Simulates one long series with known parameters, fits it by maximum
likelihood and compares the forecast path with the unconditional variance.

    python3 notebooks/02_garch_fit.py
"""

import numpy as np

from volevent.garch import GarchParams, fit, forecast_path
from volevent.simulate import garch_innovations

true = GarchParams(alpha=0.0002, beta=1.1, psi0=2e-6, psi1=0.88, psi2=0.09)
rng = np.random.default_rng(0)
market = rng.normal(0.0, 0.01, 3000)
e, _ = garch_innovations(true, rng.standard_normal((1, 4000)), burn_in=1000)
stock = true.alpha + true.beta * market + e[0]

f = fit(stock, market)
print("true  ", np.round(true.as_array(), 6))
print("fitted", np.round(f.params.as_array(), 6))
print(f"log-likelihood {f.log_likelihood:.2f} (start {f.init_log_likelihood:.2f}), "
      f"converged={f.converged} after {f.iterations} iterations")

path = forecast_path(f, 250)
print(f"one-step {path[0]:.3e}, 20-step {path[19]:.3e}, 250-step {path[-1]:.3e}, "
      f"unconditional {f.params.unconditional_variance:.3e}")
