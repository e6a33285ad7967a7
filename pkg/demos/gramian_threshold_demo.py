"""Numerical certification that the minimal time is sharp.

The smallest eigenvalue of the observability Gramian stays at zero for
horizons below the formula value and turns on right above it.
"""

import numpy as np

from hypctrl import (ControlDomain, CouplingSpec, Grid, SourceTerm,
                     SpeedProfile, SystemSpec, detect_threshold,
                     minimal_control_time, sigma_min_sweep)

spec = SystemSpec(SpeedProfile.constant([-1.0, 1.0]), SourceTerm.zero(2),
                  CouplingSpec([[1.0]], [[1.0]]), ControlDomain.of((0.25, 0.75)))

formula = minimal_control_time(spec).value
print(f"formula value: {formula}")

grid = Grid(0.0, 1.0, 120)
horizons = np.round(np.arange(0.30, 0.701, 0.05), 10)
sweep = sigma_min_sweep(spec, horizons, spec.omega, grid)

print("T      sigma_min")
for t, s in sweep.points:
    print(f"{t:.2f}   {s:.6e}")

print(f"detected threshold: {detect_threshold(sweep)}")
