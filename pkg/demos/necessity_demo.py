"""Why invertible boundary couplings are necessary.

With a rank-deficient coupling at x=0 the adjoint system admits final data
whose negative components vanish identically while the ratio
|z(T)|^2 / integral |z|^2 grows like nu + 1: no observability constant can
exist, so the system is not exactly controllable in any time.
"""

from hypctrl import (ControlDomain, CouplingSpec, Grid, SourceTerm,
                     SpeedProfile, SystemSpec, kernel_vector, necessity_sweep)

spec = SystemSpec(SpeedProfile.constant([-1.0, 1.0]), SourceTerm.zero(2),
                  CouplingSpec([[0.0]], [[1.0]]), ControlDomain.of((0.0, 1.0)))

eta = kernel_vector(spec.couplings.q0, spec.speeds)
print("kernel direction at x=0:", eta)

sweep = necessity_sweep(spec, [1, 2, 4, 8, 16], 2.0, Grid(0.0, 1.0, 1000))
print("nu   ratio (analytic value nu + 1)")
for nu, ratio in sweep.points:
    print(f"{nu:3d}  {ratio:.4f}")
print(f"blow-up factor across the sweep: {sweep.blowup_factor:.2f}")
