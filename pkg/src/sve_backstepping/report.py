"""CSV and SVG output for kernel and simulation runs.

Plots are written as plain SVG (polylines and rectangle rasters), so the
same data always produce byte-identical files.
"""

import csv
import math
from pathlib import Path

import numpy as np

# 16-step diverging ramp, blue (negative) to red (positive)
RAMP = (
    "#053061", "#1a4f8a", "#2f6eb0", "#4a8ec4", "#74aed3", "#a2cce3", "#cbe2ee", "#ebf2f6",
    "#f9efe9", "#fbd9c6", "#f5b799", "#e8896c", "#d45a4a", "#b8283a", "#8a0b2b", "#67001f",
)

W, H = 640, 400
PAD_L, PAD_R, PAD_T, PAD_B = 70, 20, 30, 50


def _fmt(v):
    return f"{v:.4g}"


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


def _frame(title, xlabel, ylabel, xlim, ylim):
    x0, x1 = xlim
    y0, y1 = ylim
    pw, ph = W - PAD_L - PAD_R, H - PAD_T - PAD_B
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="13">{title}</text>',
        f'<rect x="{PAD_L}" y="{PAD_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{PAD_L + pw / 2}" y="{H - 10}" text-anchor="middle">{xlabel}</text>',
        f'<text x="14" y="{PAD_T + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 14 {PAD_T + ph / 2})">{ylabel}</text>',
    ]
    for t in _ticks(x0, x1):
        px = PAD_L + (t - x0) / (x1 - x0 or 1.0) * pw
        out.append(f'<line x1="{px:.2f}" y1="{PAD_T + ph}" x2="{px:.2f}" y2="{PAD_T + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{PAD_T + ph + 16}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(y0, y1):
        py = PAD_T + ph - (t - y0) / (y1 - y0 or 1.0) * ph
        out.append(f'<line x1="{PAD_L - 4}" y1="{py:.2f}" x2="{PAD_L}" y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{PAD_L - 6}" y="{py + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    return out


def _limits(arrays):
    vals = np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrays])
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        return 0.0, 1.0
    lo, hi = float(vals.min()), float(vals.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def line_plot(path, x, series, title="", xlabel="", ylabel=""):
    """Write an SVG with one polyline per ``(label, y)`` in ``series``."""
    colors = ("#1f4e99", "#b8283a", "#2a8a3e", "#7a4f9a", "#c77c0e")
    x = np.asarray(x, dtype=float)
    xlim = (float(x.min()), float(x.max())) if x.size else (0.0, 1.0)
    if xlim[0] == xlim[1]:
        xlim = (xlim[0], xlim[0] + 1.0)
    ylim = _limits([y for _, y in series])
    pw, ph = W - PAD_L - PAD_R, H - PAD_T - PAD_B
    out = _frame(title, xlabel, ylabel, xlim, ylim)
    for k, (label, y) in enumerate(series):
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(y)
        px = PAD_L + (x[ok] - xlim[0]) / (xlim[1] - xlim[0]) * pw
        py = PAD_T + ph - (y[ok] - ylim[0]) / (ylim[1] - ylim[0]) * ph
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        col = colors[k % len(colors)]
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.2" points="{pts}"/>')
        out.append(f'<text x="{PAD_L + 8}" y="{PAD_T + 14 + 13 * k}" fill="{col}">{label}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


def heatmap(path, F, xlim, ylim, title="", xlabel="", ylabel=""):
    """Rectangle raster of ``F[row, col]`` (rows along y, cols along x).

    The ramp is symmetric about zero; ``nan`` cells are left blank.
    """
    F = np.asarray(F, dtype=float)
    ny, nx = F.shape
    pw, ph = W - PAD_L - PAD_R, H - PAD_T - PAD_B
    out = _frame(title, xlabel, ylabel, xlim, ylim)
    finite = F[np.isfinite(F)]
    vmax = float(np.max(np.abs(finite))) if finite.size else 0.0
    cw, chh = pw / nx, ph / ny
    for i in range(ny):
        for j in range(nx):
            v = F[i, j]
            if not np.isfinite(v):
                continue
            s = 0.5 if vmax == 0 else 0.5 + 0.5 * v / vmax
            col = RAMP[min(len(RAMP) - 1, int(s * len(RAMP)))]
            px = PAD_L + j * cw
            py = PAD_T + ph - (i + 1) * chh
            out.append(f'<rect x="{px:.2f}" y="{py:.2f}" width="{cw + 0.05:.2f}" '
                       f'height="{chh + 0.05:.2f}" fill="{col}"/>')
    out.append(f'<text x="{W - PAD_R}" y="{PAD_T - 6}" text-anchor="end">|max| = {_fmt(vmax)}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


def kernel_heatmaps(kf, outdir, prefix="kernel", max_cells=60):
    """One heatmap per kernel component, subsampled to at most ``max_cells``."""
    outdir = Path(outdir)
    step = max(1, math.ceil((kf.grid.n - 1) / max_cells))
    files = []
    for name in kf.names:
        F = kf[name][::step, ::step].T      # rows: xi, cols: x
        p = outdir / f"{prefix}_{name}.svg"
        heatmap(p, F, (0.0, 1.0), (0.0, 1.0), title=f"{name}(x, xi)", xlabel="x", ylabel="xi")
        files.append(p)
    return files


def write_snapshot(path, x, plant, v=None, physical=None, observer=None):
    cols = {"x": x, "u1": plant.u1, "u2": plant.u2, "w": plant.w}
    nan = np.full_like(np.asarray(x, dtype=float), np.nan)
    cols["v"] = nan if v is None else v
    h, u, b = (nan, nan, nan) if physical is None else physical
    cols.update(h=h, u=u, b=b)
    if observer is not None:
        cols.update(u1_hat=observer.u1, u2_hat=observer.u2, w_hat=observer.w)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(cols)
        for row in zip(*cols.values()):
            wr.writerow(["" if not np.isfinite(val) else repr(float(val)) for val in row])


def settle_time(t, y, frac=0.01):
    """First time after which ``|y|`` stays below ``frac * max|y|``."""
    t, a = np.asarray(t), np.abs(np.asarray(y))
    if a.size == 0 or a.max() == 0:
        return 0.0
    above = np.nonzero(a >= frac * a.max())[0]
    if above[-1] == a.size - 1:
        return math.inf
    return float(t[above[-1] + 1])
