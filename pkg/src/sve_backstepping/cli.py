"""Command line entry point: ``eigen``, ``kernels`` and ``simulate``.

Exit codes: 0 success, 2 bad input, 3 kernel iteration did not converge,
4 simulation failure.
"""

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import report
from .characteristics import char_coefficients, characteristic_polynomial, spectrum
from .config import bundled_scenario, load_scenario, sim_config
from .errors import ConfigError, ConvergenceError, DomainError, SVEError
from .kernels import (kernel_residual, observer_gains, solve_controller_kernels,
                      solve_observer_kernels)
from .model import froude

EXIT_OK, EXIT_PARSE, EXIT_CONVERGENCE, EXIT_SIMULATION = 0, 2, 3, 4

log = logging.getLogger("sve_backstepping")


def _resolve(path):
    p = Path(path)
    if p.exists() or p.suffix:
        return p
    return bundled_scenario(path)


def _scenario(args, path):
    sc = load_scenario(_resolve(path))
    kw = dict(cells=getattr(args, "cells", None), cfl=getattr(args, "cfl", None),
              controller=getattr(args, "controller", None),
              boundary_terms=getattr(args, "boundary_terms", None),
              kernel_n=getattr(args, "kernel_n", None))
    return sc.override(**kw)


def _outdir(args, sc, multiple):
    base = Path(args.out) if args.out else Path(sc["out_dir"] or Path("out") / sc.name)
    if multiple and args.out:
        base = base / sc.name
    base.mkdir(parents=True, exist_ok=True)
    return base


def vieta_residuals(setup, lam):
    """Relative residuals of the three Vieta identities."""
    _, c2, c1, c0 = characteristic_polynomial(setup)
    l1, l2, l3 = lam
    pairs = l1 * l2 + l1 * l3 + l2 * l3
    scale = lambda ref: max(1.0, abs(ref))
    return (abs((l1 + l2 + l3) + c2) / scale(c2),
            abs(pairs - c1) / scale(c1),
            abs(l1 * l2 * l3 + c0) / scale(c0))


def eigen_summary(setup):
    spec = spectrum(setup)
    cc = char_coefficients(setup, spec)
    lam = spec.lam
    poly = characteristic_polynomial(setup)
    res = np.abs(np.polyval(poly, lam))
    lines = [
        f"lambda = ({lam[0]:.6f}, {lam[1]:.6f}, {lam[2]:.6f})",
        f"Fr = {froude(setup.Hstar, setup.Vstar, setup.g):.6f}",
        f"regime = {spec.regime.value}",
        f"mu = {cc.mu:.6f}  gamma1 = {cc.gamma1:.6f}  gamma2 = {cc.gamma2:.6f}",
        f"alpha1 = {cc.alpha1:.6g}  eta = ({cc.eta1:.6g}, {cc.eta2:.6g})",
        "vieta residuals = ({:.2e}, {:.2e}, {:.2e})".format(*vieta_residuals(setup, lam)),
        f"cubic residual max = {res.max():.2e}",
    ]
    return lines


def cmd_eigen(args):
    for path in args.config:
        sc = _scenario(args, path)
        print(f"[{sc.name}]")
        for line in eigen_summary(sc.setup()):
            print(line)
    return EXIT_OK


def _kernel_report(kf, coeffs, label):
    res = kernel_residual(kf, coeffs)
    return (f"{label}: {kf.iterations} Picard iterations, last update {kf.updates[-1]:.2e}, "
            f"interior residual sup {res.sup_max:.3e}, boundary residual {res.boundary:.1e}")


def cmd_kernels(args):
    for path in args.config:
        sc = _scenario(args, path)
        out = _outdir(args, sc, len(args.config) > 1)
        coeffs = sc.coefficients()
        n, tol = sc["kernel_n"], sc["kernel_tol"]
        kf = solve_controller_kernels(coeffs, n, tol)
        kf.to_csv(out / "kernels.csv")
        report.kernel_heatmaps(kf, out)
        print(_kernel_report(kf, coeffs, "controller kernels"))
        if sc["controller"] == "output":
            of = solve_observer_kernels(coeffs, n, tol)
            of.to_csv(out / "observer_kernels.csv")
            gains = observer_gains(of, coeffs.mu)
            gains.to_csv(out / "gains.csv")
            report.kernel_heatmaps(of, out, prefix="observer")
            report.line_plot(out / "gains.svg", gains.x,
                             [("p1", gains.p1), ("p2", gains.p2), ("p3", gains.p3)],
                             title="observer gains", xlabel="x", ylabel="p_i(x)")
            print(_kernel_report(of, coeffs, "observer kernels"))
        print(f"wrote {out}")
    return EXIT_OK


class _FieldRecorder:
    """Collects space-time samples of the plant for heatmaps."""

    def __init__(self, every, stride):
        self.every, self.stride, self.k = every, stride, 0
        self.t, self.rows = [], {"u1": [], "u2": [], "w": []}

    def __call__(self, plant, obs, U):
        if self.k % self.every == 0:
            self.t.append(plant.t)
            for name in self.rows:
                self.rows[name].append(getattr(plant, name)[::self.stride].copy())
        self.k += 1


def simulate_scenario(sc, out):
    """Run one physical scenario and write its report bundle; returns the summary lines."""
    from .simulation import run
    if sc.model != "physical":
        raise ConfigError(f"{sc.name}: simulate needs a physical scenario")
    cfg = sim_config(sc)
    speed = float(np.max(np.abs(spectrum(cfg.setup).lam)))
    n_steps = math.ceil(cfg.t_final * speed * cfg.cells / cfg.cfl)
    rec = _FieldRecorder(every=max(1, n_steps // 120), stride=max(1, cfg.cells // 50))
    res = run(cfg, callback=rec)
    tr = res.trace
    files = []

    tr.to_csv(out / "trace.csv")
    files.append("trace.csv")
    snapdir = out / "snapshots"
    snapdir.mkdir(exist_ok=True)
    for k, s in enumerate(res.snapshots):
        name = f"snapshots/snap_{k:02d}_t{s.t:.3f}.csv"
        report.write_snapshot(out / name, res.grid.x, s.plant, s.v, s.physical, s.observer)
        files.append(name)
    if res.controller_kernels is not None:
        res.controller_kernels.to_csv(out / "kernels.csv")
        files.append("kernels.csv")
        files += [p.name for p in report.kernel_heatmaps(res.controller_kernels, out)]
    if res.gains is not None:
        res.gains.to_csv(out / "gains.csv")
        files.append("gains.csv")

    t = tr["t"]
    report.line_plot(out / "control.svg", t, [("U(t)", tr["U"])], "control input", "t", "U")
    report.line_plot(out / "output.svg", t, [("y(t)", tr["y"])], "measured output", "t", "y")
    with np.errstate(divide="ignore"):
        series = [(k, np.log10(tr[k])) for k in ("norm_u1", "norm_u2", "norm_w")]
        series.append(("total", np.log10(tr.norm)))
        if np.any(np.isfinite(tr["obs_err"])):
            series.append(("observer error", np.log10(tr["obs_err"])))
    report.line_plot(out / "norms.svg", t, series, "L2 norms", "t", "log10 norm")
    files += ["control.svg", "output.svg", "norms.svg"]
    tt = np.asarray(rec.t)
    for name, rows in rec.rows.items():
        p = f"field_{name}.svg"
        report.heatmap(out / p, np.asarray(rows), (0.0, 1.0), (float(tt[0]), float(tt[-1])),
                       title=f"{name}(t, x)", xlabel="x", ylabel="t")
        files.append(p)

    n0, n1 = tr.norm[0], tr.norm[-1]
    umax = float(np.max(np.abs(tr["U"])))
    lines = eigen_summary(cfg.setup) + [
        f"controller = {cfg.controller.value}  boundary_terms = {cfg.boundary_terms.value}",
        f"cells = {cfg.cells}  cfl = {cfg.cfl}  dt = {res.grid.dt:.4e}  steps = {len(tr) - 1}",
        f"initial norm = {n0:.6e}",
        f"final norm = {n1:.6e}",
        f"decay ratio = {n1 / n0:.3e}",
        f"max |U| = {umax:.6e}",
        f"U 1% settle time = {report.settle_time(t, tr['U']):.3f}",
        f"y 1% settle time = {report.settle_time(t, tr['y']):.3f}",
    ]
    if np.any(np.isfinite(tr["obs_err"])):
        e = tr["obs_err"]
        lines.append(f"observer error ratio = {e[-1] / e[0]:.3e}")
    if np.any(np.isfinite(tr["V1"])):
        lines.append(f"V1: {tr['V1'][0]:.4e} -> {tr['V1'][-1]:.4e}")
    if np.any(np.isfinite(tr["V2"])):
        lines.append(f"V2: {tr['V2'][0]:.4e} -> {tr['V2'][-1]:.4e}")
    lines.append("files:")
    lines += [f"  {f}" for f in files]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    return lines


def cmd_simulate(args):
    for path in args.config:
        sc = _scenario(args, path)
        out = _outdir(args, sc, len(args.config) > 1)
        lines = simulate_scenario(sc, out)
        print(f"[{sc.name}]")
        for line in lines:
            if line == "files:":
                break
            print(line)
        print(f"wrote {out}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="sve-backstepping",
                                description="Backstepping control of a linearized sediment channel")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, sim=False):
        sp.add_argument("--config", action="append", required=True,
                        help="scenario file or bundled name (table1, table2, analytic, zero); repeatable")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--kernel-n", type=int, help="kernel grid points per side")
        sp.add_argument("--controller", choices=("none", "state", "output"))
        if sim:
            sp.add_argument("--cells", type=int, help="number of spatial cells")
            sp.add_argument("--cfl", type=float, help="Courant number")
            sp.add_argument("--boundary-terms", choices=("measured", "estimated"))

    sp = sub.add_parser("eigen", help="eigenvalues, Froude number and regime")
    sp.add_argument("--config", action="append", required=True)
    sp.set_defaults(func=cmd_eigen)
    sp = sub.add_parser("kernels", help="solve kernel equations and write CSV/plots")
    common(sp)
    sp.set_defaults(func=cmd_kernels)
    sp = sub.add_parser("simulate", help="closed-loop simulation with report")
    common(sp, sim=True)
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConvergenceError as exc:
        print(f"error: {exc} (residual {exc.residual}, iterations {exc.iterations})",
              file=sys.stderr)
        return EXIT_CONVERGENCE
    except SVEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION


if __name__ == "__main__":
    sys.exit(main())
