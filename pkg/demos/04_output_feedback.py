"""
=========================
Observer-based feedback
=========================

Only w(t, 0) is measured.  An observer started from zero reconstructs
the state, and the control law uses the estimate.  Two questions are
looked at along the way: the sign of the output injection, and whether
the reflection terms use measured or estimated boundary values.
"""
import sys
from pathlib import Path

import numpy as np

from sve_backstepping.model import EquilibriumSetup, PhysicalParams
from sve_backstepping.report import line_plot, settle_time
from sve_backstepping.simulation import SimConfig, build, init_state, run

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "output"
out.mkdir(parents=True, exist_ok=True)

setup = EquilibriumSetup(PhysicalParams(Ag=0.003, pg=0.002, Cf=0.1), 1.0, 5.0, 0.4,
                         rho1=1.0, rho2=1.5, q1=1.0, q2=1.2)
cfg = SimConfig(setup, cfl=0.9, t_final=8.0, controller="output")
res = run(cfg)
tr = res.trace
print("plant norm ratio  ", f"{tr.norm[-1] / tr.norm[0]:.2e}")
print("observer error    ", f"{tr['obs_err'][-1] / tr['obs_err'][0]:.2e}")
print("y below 1% after t", round(settle_time(tr["t"], tr["y"]), 3))

# injection sign: p_i = mu m_i(x, 0) goes with +p_i (y - w_hat(0))
loop, _, _ = build(cfg)
x0 = init_state(cfg)
errs = {}
for sign in (+1.0, -1.0):
    loop.injection_sign = sign
    errs[sign] = loop.run(x0, 8.0, n_snapshots=0).trace
    e = errs[sign]["obs_err"]
    print(f"injection sign {sign:+.0f}: error at t=4 {e[np.searchsorted(errs[sign]['t'], 4.0)] / e[0]:.1e}")

est = run(SimConfig(setup, cfl=0.9, t_final=8.0, controller="output", boundary_terms="estimated"))
print("estimated reflection terms: norm ratio", f"{est.trace.norm[-1] / est.trace.norm[0]:.2e}")

with np.errstate(divide="ignore"):
    line_plot(out / "errors.svg", tr["t"],
              [("+ injection", np.log10(errs[1.0]["obs_err"])),
               ("- injection", np.log10(errs[-1.0]["obs_err"]))],
              title="log10 observer error", xlabel="t")
line_plot(out / "output.svg", tr["t"], [("y", tr["y"])], title="measured output", xlabel="t")
line_plot(out / "control.svg", tr["t"], [("measured", tr["U"]), ("estimated", est.trace["U"])],
          title="control", xlabel="t")
print("plots in", out)
