"""Closed-loop simulation of the characteristic ``(u1, u2, w)`` system.

The plant::

    u1_t + gamma1 u1_x = s11 u1 + s12 u2 + alpha(x) w
    u2_t + gamma2 u2_x = s21 u1 + s22 u2 + alpha(x) w
    w_t  - mu w_x      = theta1(x) u1 + theta2(x) u2

    u_i(t, 0) = q_i w(t, 0),   w(t, 1) = rho1 u1(t, 1) + rho2 u2(t, 1) + U(t)

is advanced with first-order upwind differences on the nodes
``x_j = j / N`` and explicit Euler sources.  The measured output is
``y(t) = w(t, 0)``.  Controllers are the full-state backstepping law and
the observer-based output feedback law; the observer is a copy of the
plant with output injection ``p_i(x) (y - w_hat(t, 0))``.
"""

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .characteristics import (CharField, char_coefficients, from_characteristic,
                              rescale_w, spectrum, to_characteristic, unrescale_w)
from .errors import CFLError, DomainError, SVEError
from .kernels import (DEFAULT_N, DEFAULT_TOL, AbstractCoefficients, inverse_observer_kernels,
                      observer_gains, solve_controller_kernels, solve_observer_kernels,
                      tri_interp)

log = logging.getLogger(__name__)

CFL_SLACK = 1e-12


class Controller(enum.Enum):
    NONE = "none"
    FULL_STATE = "state"
    OUTPUT_FEEDBACK = "output"


class BoundaryTerms(enum.Enum):
    MEASURED = "measured"
    ESTIMATED = "estimated"


@dataclass(frozen=True)
class LyapunovWeights:
    a1: float = 1.0
    delta1: float = 1.0
    a2: float = 1.0
    delta2: float = 2.0
    b: float = 1.0

    def __post_init__(self):
        for name in ("a1", "delta1", "a2", "delta2", "b"):
            if not getattr(self, name) > 0:
                raise DomainError(f"Lyapunov weight {name} must be positive")


@dataclass(frozen=True)
class SimConfig:
    setup: object
    cells: int = 100
    cfl: float = 0.9
    t_final: float = 8.0
    controller: Controller = Controller.FULL_STATE
    boundary_terms: BoundaryTerms = BoundaryTerms.MEASURED
    kernel_n: int = DEFAULT_N
    kernel_tol: float = DEFAULT_TOL
    weights: LyapunovWeights = field(default_factory=LyapunovWeights)
    observer_init: str = "zero"
    n_snapshots: int = 10

    def __post_init__(self):
        if self.cells < 10:
            raise DomainError(f"need at least 10 cells, got {self.cells}")
        if not 0 < self.cfl <= 1:
            raise DomainError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.t_final > 0:
            raise DomainError(f"t_final must be positive, got {self.t_final}")
        if self.observer_init not in ("zero", "plant"):
            raise DomainError(f"observer_init must be 'zero' or 'plant'")
        object.__setattr__(self, "controller", Controller(self.controller))
        object.__setattr__(self, "boundary_terms", BoundaryTerms(self.boundary_terms))


@dataclass
class PlantState:
    """Characteristic state at time ``t`` on the simulation nodes."""

    t: float
    u1: np.ndarray
    u2: np.ndarray
    w: np.ndarray

    def copy(self):
        return PlantState(self.t, self.u1.copy(), self.u2.copy(), self.w.copy())

    def scaled(self, s):
        return PlantState(self.t, s * self.u1, s * self.u2, s * self.w)

    def __sub__(self, other):
        return PlantState(self.t, self.u1 - other.u1, self.u2 - other.u2, self.w - other.w)


class Grid:
    """Simulation nodes plus the coefficient arrays sampled on them."""

    def __init__(self, coeffs, cells, cfl=0.9):
        self.coeffs = coeffs
        self.cells = int(cells)
        self.x = np.linspace(0.0, 1.0, self.cells + 1)
        self.dx = 1.0 / self.cells
        self.cfl = cfl
        c = coeffs
        self.max_speed = max(c.gamma1, c.gamma2, c.mu)
        self.dt = cfl * self.dx / self.max_speed
        self.alpha = c.alpha(self.x)
        self.theta1 = c.theta1(self.x)
        self.theta2 = c.theta2(self.x)
        self.sigma = np.asarray(c.sigma, dtype=float)
        self.trap = np.full(self.x.size, self.dx)
        self.trap[[0, -1]] *= 0.5

    def integrate(self, f):
        return float(self.trap @ f)

    def l2(self, *fields):
        return math.sqrt(max(0.0, sum(self.integrate(f * f) for f in fields)))

    def check_dt(self, dt):
        if dt * self.max_speed / self.dx > 1.0 + CFL_SLACK:
            raise CFLError(f"dt={dt:.3e} exceeds CFL bound {self.dx / self.max_speed:.3e}")


def _advance_interior(grid, state, dt, injection=None):
    """Upwind update of all non-inflow nodes; inflow nodes are left unset (nan)."""
    grid.check_dt(dt)
    c = grid.coeffs
    u1, u2, w = state.u1, state.u2, state.w
    s = grid.sigma
    src1 = s[0, 0] * u1 + s[0, 1] * u2 + grid.alpha * w
    src2 = s[1, 0] * u1 + s[1, 1] * u2 + grid.alpha * w
    src3 = grid.theta1 * u1 + grid.theta2 * u2
    if injection is not None:
        src1 = src1 + injection[0]
        src2 = src2 + injection[1]
        src3 = src3 + injection[2]
    r = dt / grid.dx
    n1, n2, n3 = np.empty_like(u1), np.empty_like(u2), np.empty_like(w)
    # convex-combination form: a unit Courant number gives an exact shift
    c1, c2, c3 = c.gamma1 * r, c.gamma2 * r, c.mu * r
    n1[1:] = (1.0 - c1) * u1[1:] + c1 * u1[:-1] + dt * src1[1:]
    n2[1:] = (1.0 - c2) * u2[1:] + c2 * u2[:-1] + dt * src2[1:]
    n3[:-1] = (1.0 - c3) * w[:-1] + c3 * w[1:] + dt * src3[:-1]
    n1[0] = n2[0] = n3[-1] = np.nan
    return PlantState(state.t + dt, n1, n2, n3)


def _close(grid, st, U, y=None):
    """Assign the inflow nodes; ``y`` replaces ``w(t, 0)`` at the left end."""
    c = grid.coeffs
    left = st.w[0] if y is None else y
    st.u1[0] = c.q1 * left
    st.u2[0] = c.q2 * left
    st.w[-1] = (c.rho1 * st.u1[-1] + c.rho2 * st.u2[-1]) + U
    return st


def step(grid, state, U, dt):
    """Advance the plant by ``dt`` with boundary input ``U`` at the new level.

    Raises
    ------
    CFLError
        If ``dt`` violates ``dt <= cfl dx / max speed`` with ``cfl = 1``.
    """
    return _close(grid, _advance_interior(grid, state, dt), U)


def error_step(grid, err, gains, dt, sign=1.0):
    """Advance the observer error ``plant - observer`` on its own.

    ``u~_i(t, 0) = 0``, ``w~(t, 1) = rho1 u~1(t, 1) + rho2 u~2(t, 1)`` and the
    injection enters with the opposite sign to :func:`observer_step`.
    """
    inj = tuple(-sign * p * err.w[0] for p in gains)
    return _close(grid, _advance_interior(grid, err, dt, injection=inj), 0.0, y=0.0)


def observer_step(grid, obs, y_now, y_next, U, gains, dt, sign=1.0):
    """Advance the observer by ``dt``.

    The injection ``sign * p_i(x) * (y - w_hat(t, 0))`` is evaluated at the
    current level; ``y_next`` feeds the inflow condition
    ``u_hat_i(t, 0) = q_i y``.  ``sign = +1`` with ``p_i = mu m_i(x, 0)``
    gives the error dynamics that the observer kernels are built for.
    """
    innov = y_now - obs.w[0]
    inj = tuple(sign * p * innov for p in gains)
    return _close(grid, _advance_interior(grid, obs, dt, injection=inj), U, y=y_next)


class FeedbackKernels:
    """Controller kernels resampled on the simulation nodes.

    ``A_i[a, b]`` holds trapezoid weight times ``k_i(x_a, x_b)`` so that
    ``int_0^{x_a} k_i(x_a, xi) f(xi) dxi = (A_i @ f)[a]``.
    """

    def __init__(self, kf, grid):
        x = grid.x
        n = x.size
        low = np.tri(n, dtype=bool)
        W = np.where(low, grid.dx, 0.0)
        W[:, 0] *= 0.5
        W[np.diag_indices(n)] *= 0.5
        W[0, 0] = 0.0
        X, XI = np.meshgrid(x, x, indexing="ij")
        self.A = []
        for name in kf.names:
            vals = np.zeros((n, n))
            vals[low] = tri_interp(kf[name], kf.grid, X[low], XI[low])
            self.A.append(W * vals)
        # last row: the control integral over [0, 1]
        self.row = [A[-1].copy() for A in self.A]
        self.kernel_field = kf

    def integral(self, u1, u2, w):
        return float(self.row[0] @ u1 + self.row[1] @ u2 + self.row[2] @ w)

    def target(self, u1, u2, w):
        """``chi = w - int k1 u1 - int k2 u2 - int k3 w`` on every node."""
        return w - self.A[0] @ u1 - self.A[1] @ u2 - self.A[2] @ w


def control_full_state(state, fk, rho1, rho2):
    """``U = -rho1 u1(1) - rho2 u2(1) + int_0^1 (k1 u1 + k2 u2 + k3 w)(1, xi) dxi``.

    ``fk`` is a :class:`FeedbackKernels`.
    """
    return -rho1 * state.u1[-1] - rho2 * state.u2[-1] + fk.integral(state.u1, state.u2, state.w)


def control_output_feedback(plant, obs, fk, rho1, rho2, boundary_terms=BoundaryTerms.MEASURED):
    """Output feedback law using observer integrands.

    With ``MEASURED`` the reflection terms use the plant values
    ``u_i(t, 1)``; with ``ESTIMATED`` they use ``u_hat_i(t, 1)``.
    """
    src = plant if BoundaryTerms(boundary_terms) is BoundaryTerms.MEASURED else obs
    return -rho1 * src.u1[-1] - rho2 * src.u2[-1] + fk.integral(obs.u1, obs.u2, obs.w)


def _solve_loop_full_state(grid, st, fk):
    """``U`` making ``chi(t, 1) = 0`` once ``w(t, 1)`` is closed with it."""
    c = grid.coeffs
    refl = c.rho1 * st.u1[-1] + c.rho2 * st.u2[-1]
    c3 = fk.row[2][-1]
    rest = fk.row[0] @ st.u1 + fk.row[1] @ st.u2 + fk.row[2][:-1] @ st.w[:-1]
    w_end = rest / (1.0 - c3)
    return w_end - refl


def _solve_loop_output(grid, plant, obs, fk, boundary_terms):
    c = grid.coeffs
    refl_hat = c.rho1 * obs.u1[-1] + c.rho2 * obs.u2[-1]
    if boundary_terms is BoundaryTerms.MEASURED:
        refl = c.rho1 * plant.u1[-1] + c.rho2 * plant.u2[-1]
    else:
        refl = refl_hat
    c3 = fk.row[2][-1]
    rest = fk.row[0] @ obs.u1 + fk.row[1] @ obs.u2 + fk.row[2][:-1] @ obs.w[:-1]
    w_hat_end = (refl_hat - refl + rest) / (1.0 - c3)
    return w_hat_end - refl_hat


def lyapunov_v1(x, psi1, psi2, chi, weights, gamma1, gamma2, mu):
    """Target-system functional
    ``int a1 e^{-d1 x} (psi1^2/g1 + psi2^2/g2) + int (1 + x) chi^2 / mu``."""
    wt = weights
    f = (wt.a1 * np.exp(-wt.delta1 * x) * (psi1**2 / gamma1 + psi2**2 / gamma2)
         + (1.0 + x) * chi**2 / mu)
    return _trapz(f, x)


def lyapunov_v2(x, pi1, pi2, phi, weights, gamma1, gamma2, mu):
    """Error target functional
    ``int a2 e^{-d2 x} (pi1^2/g1 + pi2^2/g2) + int e^{d2 x} phi^2 / mu``."""
    wt = weights
    f = (wt.a2 * np.exp(-wt.delta2 * x) * (pi1**2 / gamma1 + pi2**2 / gamma2)
         + np.exp(wt.delta2 * x) * phi**2 / mu)
    return _trapz(f, x)


def lyapunov_v(v1_hat, v2, weights):
    return v1_hat + weights.b * v2


def _trapz(f, x):
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    return float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(x)))


def to_target(state, fk):
    """Backstepping coordinates ``(psi1, psi2, chi)`` of a plant state."""
    return state.u1.copy(), state.u2.copy(), fk.target(state.u1, state.u2, state.w)


TRACE_COLUMNS = ("t", "U", "y", "norm_u1", "norm_u2", "norm_w", "V1", "V2", "obs_err", "chi_sup")


@dataclass
class Trace:
    """Per-step diagnostics; ``nan`` where a column does not apply."""

    columns: dict

    def __getitem__(self, key):
        return self.columns[key]

    def __len__(self):
        return len(self.columns["t"])

    @property
    def norm(self):
        """L2 norm of the full characteristic state ``(u1, u2, w)``."""
        c = self.columns
        return np.sqrt(c["norm_u1"] ** 2 + c["norm_u2"] ** 2 + c["norm_w"] ** 2)

    def to_csv(self, path):
        import csv
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(TRACE_COLUMNS)
            cols = [self.columns[k] for k in TRACE_COLUMNS]
            for row in zip(*cols):
                wr.writerow(["" if not np.isfinite(v) else repr(float(v)) for v in row])


@dataclass
class Snapshot:
    t: float
    plant: PlantState
    observer: PlantState | None = None
    physical: tuple | None = None
    v: np.ndarray | None = None


@dataclass
class RunResult:
    trace: Trace
    snapshots: list
    grid: Grid
    controller_kernels: object = None
    observer_kernels: object = None
    gains: object = None
    final: PlantState | None = None
    final_observer: PlantState | None = None


class ClosedLoop:
    """Plant, optional observer and feedback law on one grid.

    Parameters
    ----------
    coeffs : AbstractCoefficients
    cells, cfl : grid resolution and Courant number.
    controller : Controller
    controller_kernels, observer_kernels : KernelField, optional
        Required for ``FULL_STATE`` / ``OUTPUT_FEEDBACK``.
    injection_sign : float
        Sign of the output injection, see :func:`observer_step`.
    """

    def __init__(self, coeffs, cells=100, cfl=0.9, controller=Controller.NONE,
                 boundary_terms=BoundaryTerms.MEASURED, controller_kernels=None,
                 observer_kernels=None, weights=None, injection_sign=1.0, diagnostics=True):
        self.coeffs = coeffs
        self.grid = Grid(coeffs, cells, cfl)
        self.controller = Controller(controller)
        self.boundary_terms = BoundaryTerms(boundary_terms)
        self.weights = weights or LyapunovWeights()
        self.injection_sign = injection_sign
        self.diagnostics = diagnostics
        self.fk = None
        self.kf = controller_kernels
        self.of = observer_kernels
        if controller_kernels is not None:
            self.fk = FeedbackKernels(controller_kernels, self.grid)
        if self.controller is not Controller.NONE and self.fk is None:
            raise SVEError(f"{self.controller.value} control needs controller kernels")
        self.gains = None
        self.rk = None
        if observer_kernels is not None:
            g = observer_gains(observer_kernels, coeffs.mu)
            self.gains = g.at(self.grid.x)
            self.gains_obj = g
            if diagnostics:
                self.rk = FeedbackKernels.__new__(FeedbackKernels)
                r1, r2, r3 = inverse_observer_kernels(observer_kernels)
                fake = _ArrayKernels(observer_kernels.grid, (r1, r2, r3))
                FeedbackKernels.__init__(self.rk, fake, self.grid)
        if self.controller is Controller.OUTPUT_FEEDBACK and self.gains is None:
            raise SVEError("output feedback needs observer kernels")

    # --- one step -------------------------------------------------------
    def _control(self, plant_new, obs_new):
        if self.controller is Controller.NONE:
            return 0.0
        if self.controller is Controller.FULL_STATE:
            return _solve_loop_full_state(self.grid, plant_new, self.fk)
        return _solve_loop_output(self.grid, plant_new, obs_new, self.fk, self.boundary_terms)

    def advance(self, plant, obs, dt, offset=0.0):
        """One step of the coupled plant/observer loop; returns ``(plant, obs, U)``."""
        g = self.grid
        p_new = _advance_interior(g, plant, dt)
        # left inflow of the plant only needs w(t, 0), known after the interior update
        c = self.coeffs
        p_new.u1[0] = c.q1 * p_new.w[0]
        p_new.u2[0] = c.q2 * p_new.w[0]
        o_new = None
        if obs is not None:
            innov = plant.w[0] - obs.w[0]
            inj = tuple(self.injection_sign * p * innov for p in self.gains)
            o_new = _advance_interior(g, obs, dt, injection=inj)
            o_new.u1[0] = c.q1 * p_new.w[0]
            o_new.u2[0] = c.q2 * p_new.w[0]
        U = self._control(p_new, o_new) + offset
        p_new.w[-1] = (c.rho1 * p_new.u1[-1] + c.rho2 * p_new.u2[-1]) + U
        if o_new is not None:
            o_new.w[-1] = (c.rho1 * o_new.u1[-1] + c.rho2 * o_new.u2[-1]) + U
        return p_new, o_new, U

    # --- diagnostics ----------------------------------------------------
    def _record(self, rec, plant, obs, U):
        g, c, wt = self.grid, self.coeffs, self.weights
        rec["t"].append(plant.t)
        rec["U"].append(U)
        rec["y"].append(plant.w[0])
        rec["norm_u1"].append(g.l2(plant.u1))
        rec["norm_u2"].append(g.l2(plant.u2))
        rec["norm_w"].append(g.l2(plant.w))
        nan = float("nan")
        v1 = v2 = err = chi_sup = chi_end = nan
        if self.diagnostics and self.fk is not None:
            src = obs if (self.controller is Controller.OUTPUT_FEEDBACK and obs is not None) else plant
            chi = self.fk.target(src.u1, src.u2, src.w)
            chi_sup = float(np.max(np.abs(chi)))
            chi_end = float(chi[-1])
            v1 = lyapunov_v1(g.x, src.u1, src.u2, chi, wt, c.gamma1, c.gamma2, c.mu)
        if obs is not None:
            e = plant - obs
            err = g.l2(e.u1, e.u2, e.w)
            if self.rk is not None:
                phi = e.w + self.rk.A[2] @ e.w
                pi1 = e.u1 + self.rk.A[0] @ e.w
                pi2 = e.u2 + self.rk.A[1] @ e.w
                v2 = lyapunov_v2(g.x, pi1, pi2, phi, wt, c.gamma1, c.gamma2, c.mu)
        rec["V1"].append(v1)
        rec["V2"].append(v2)
        rec["obs_err"].append(err)
        rec["chi_sup"].append(chi_sup)
        rec["chi_end"].append(chi_end)

    def run(self, initial, t_final, observer_initial=None, offset=None, n_snapshots=10,
            callback=None):
        """Integrate from ``initial`` to ``t_final``.

        ``offset(t)``, if given, is added to the control at every step
        (plant and observer receive the same input).  ``callback(plant,
        observer, U)`` is called after every step.
        """
        g = self.grid
        plant = initial.copy()
        obs = None
        if self.gains is not None and self.controller is Controller.OUTPUT_FEEDBACK:
            obs = observer_initial.copy() if observer_initial is not None else PlantState(
                plant.t, np.zeros_like(plant.u1), np.zeros_like(plant.u2), np.zeros_like(plant.w))
        elif observer_initial is not None and self.gains is not None:
            obs = observer_initial.copy()
        keys = TRACE_COLUMNS + ("chi_end",)
        rec = {k: [] for k in keys}
        U0 = 0.0
        if self.controller is Controller.FULL_STATE:
            U0 = control_full_state(plant, self.fk, self.coeffs.rho1, self.coeffs.rho2)
        elif self.controller is Controller.OUTPUT_FEEDBACK:
            U0 = control_output_feedback(plant, obs, self.fk, self.coeffs.rho1,
                                         self.coeffs.rho2, self.boundary_terms)
        self._record(rec, plant, obs, U0)
        snap_times = np.linspace(plant.t, plant.t + t_final, n_snapshots) if n_snapshots else []
        snaps = []
        k_snap = 0

        def maybe_snap(force=False):
            nonlocal k_snap
            while k_snap < len(snap_times) and (plant.t >= snap_times[k_snap] - 1e-12 or force):
                snaps.append(Snapshot(plant.t, plant.copy(), None if obs is None else obs.copy()))
                k_snap += 1
                if force:
                    break

        maybe_snap()
        t_end = initial.t + t_final
        nsteps = max(1, int(math.ceil((t_final - 1e-12 * t_final) / g.dt)))
        for n in range(nsteps):
            dt = min(g.dt, t_end - plant.t)
            if dt <= 0:
                break
            off = 0.0 if offset is None else float(offset(plant.t + dt))
            plant, obs, U = self.advance(plant, obs, dt, off)
            if not (np.all(np.isfinite(plant.w)) and np.isfinite(U)):
                raise SVEError(f"non-finite state at t={plant.t:.4g}")
            self._record(rec, plant, obs, U)
            if callback is not None:
                callback(plant, obs, U)
            maybe_snap()
        if k_snap < len(snap_times):
            maybe_snap(force=True)
        trace = Trace({k: np.asarray(v, dtype=float) for k, v in rec.items()})
        return RunResult(trace=trace, snapshots=snaps, grid=g, controller_kernels=self.kf,
                         observer_kernels=self.of,
                         gains=getattr(self, "gains_obj", None), final=plant,
                         final_observer=obs)


class _ArrayKernels:
    """Minimal stand-in for a KernelField built from three arrays."""

    names = ("f1", "f2", "f3")

    def __init__(self, grid, arrays):
        self.grid = grid
        self._a = arrays

    def __getitem__(self, name):
        return self._a[self.names.index(name)]


def initial_profiles(x):
    """Physical initial data ``(H, V, B)`` used in the channel experiments.

    A Gaussian sediment bump of height 0.1 at mid-channel, constant free
    surface ``H + B = 2.5`` and discharge ``H V = 10 sin(pi x)``.
    """
    x = np.asarray(x, dtype=float)
    B = 0.4 * (1.0 + 0.25 * np.exp(-((x - 0.5) ** 2) / 0.003))
    H = 2.5 - B
    V = 10.0 * np.sin(np.pi * x) / H
    return H, V, B


def init_state(config):
    """Characteristic initial state ``(u1, u2, w)`` for a scenario."""
    setup = config.setup
    spec = spectrum(setup)
    cc = char_coefficients(setup, spec)
    x = np.linspace(0.0, 1.0, config.cells + 1)
    H, V, B = initial_profiles(x)
    cf = to_characteristic(setup, spec, H - setup.Hstar, V - setup.Vstar, B - setup.Bstar, x=x)
    cf = rescale_w(cf, cc.alpha1, cc.mu)
    return PlantState(0.0, cf.u1, cf.u2, cf.w)


def physical_fields(setup, spec, cc, state):
    """Reconstruct ``(v, h, u, b)`` from a characteristic state."""
    x = np.linspace(0.0, 1.0, state.w.size)
    cf = unrescale_w(CharField(x=x, u1=state.u1, u2=state.u2, w=state.w), cc.alpha1, cc.mu)
    h, u, b = from_characteristic(setup, spec, cf)
    return cf.v, h, u, b


def build(config):
    """Kernels and closed loop for a scenario; returns ``(loop, spec, cc)``."""
    setup = config.setup
    spec = spectrum(setup)
    cc = char_coefficients(setup, spec)
    coeffs = AbstractCoefficients.from_char(cc, setup)
    kf = of = None
    if config.controller is not Controller.NONE:
        kf = solve_controller_kernels(coeffs, config.kernel_n, config.kernel_tol)
    if config.controller is Controller.OUTPUT_FEEDBACK:
        of = solve_observer_kernels(coeffs, config.kernel_n, config.kernel_tol)
    loop = ClosedLoop(coeffs, config.cells, config.cfl, config.controller,
                      config.boundary_terms, kf, of, config.weights)
    return loop, spec, cc


def run(config, initial=None, offset=None, callback=None):
    """Simulate a scenario from ``t = 0`` to ``config.t_final``.

    Snapshots carry the reconstructed physical deviations ``(h, u, b)``
    and the unscaled leftward coordinate ``v``.
    """
    loop, spec, cc = build(config)
    init = init_state(config) if initial is None else initial
    obs0 = None
    if config.controller is Controller.OUTPUT_FEEDBACK and config.observer_init == "plant":
        obs0 = init.copy()
    res = loop.run(init, config.t_final, observer_initial=obs0, offset=offset,
                   n_snapshots=config.n_snapshots, callback=callback)
    for snap in res.snapshots:
        v, h, u, b = physical_fields(config.setup, spec, cc, snap.plant)
        snap.v = v
        snap.physical = (h, u, b)
    res.spectrum = spec
    res.char_coefficients = cc
    return res
