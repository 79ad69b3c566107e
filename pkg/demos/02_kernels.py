"""
==================
Gain kernels
==================

The controller kernels live on the triangle 0 <= xi <= x <= 1 and are
computed by marching along characteristics.  A small case with an exact
answer comes first, then the fast channel.
"""
import sys
from pathlib import Path

import numpy as np

from sve_backstepping import AbstractCoefficients, solve_controller_kernels, solve_observer_kernels
from sve_backstepping.kernels import kernel_residual, observer_gains
from sve_backstepping.model import EquilibriumSetup, PhysicalParams
from sve_backstepping.report import kernel_heatmaps, line_plot

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "kernels"
out.mkdir(parents=True, exist_ok=True)

# unit speeds, theta1 = 2, q1 = 1 -> k1 = k3 = -exp(x - xi), k2 = 0
c = AbstractCoefficients.constant(1.0, 1.0, 1.0, theta1=2.0, q1=1.0)
print("exact case, max node error:")
for n in (26, 51, 101, 201):
    kf = solve_controller_kernels(c, n)
    x = kf.grid.x
    X, XI = np.meshgrid(x, x, indexing="ij")
    m = kf.grid.mask
    err = np.abs(kf["k1"] + np.exp(X - XI))[m].max()
    print(f"  n={n:4d}  {err:.2e}  iterations={kf.iterations}")

# the fast channel
setup = EquilibriumSetup(PhysicalParams(Ag=0.003), 1.0, 5.0, 0.4, 1.0, 1.5, 1.0, 1.2)
coeffs = AbstractCoefficients.from_setup(setup)
kf = solve_controller_kernels(coeffs)
of = solve_observer_kernels(coeffs)
for field in (kf, of):
    r = kernel_residual(field, coeffs)
    print(f"{field.role.value:10s} iterations={field.iterations:3d}  residual sup={r.sup_max:.2e}  "
          f"boundary={r.boundary:.1e}")

print("controller gains at x = 1 (xi = 0, 0.5, 1):")
for name in kf.names:
    print(" ", name, np.round(kf.at_one(name, [0.0, 0.5, 1.0]), 4))

g = observer_gains(of, coeffs.mu)
line_plot(out / "gains.svg", g.x, [("p1", g.p1), ("p2", g.p2), ("p3", g.p3)],
          title="observer gains", xlabel="x", ylabel="p_i(x)")
kernel_heatmaps(kf, out)
kernel_heatmaps(of, out, prefix="observer")
print("plots in", out)
