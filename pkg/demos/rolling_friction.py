"""Estimate an object's motion from noisy position samples and extrapolate it."""

import numpy as np

from impactplan.sim import fit_rolling_friction

rng = np.random.default_rng(3)
t = np.linspace(0.0, 0.5, 51)
truth = 0.1 + 0.06 * t - 0.5 * 0.05 * t**2
fit = fit_rolling_friction(np.column_stack([t, truth + rng.normal(0.0, 0.005, t.size)]))

print(f"v0 {fit.v0:.4f} m/s (true 0.06), decel {fit.decel:.4f} m/s^2 (true 0.05), r^2 {fit.r_squared:.3f}")
for tq in (0.6, 1.0, 2.0):
    print(f"  t = {tq:.1f} s: predicted {float(fit.predict(tq)):.4f} m")
