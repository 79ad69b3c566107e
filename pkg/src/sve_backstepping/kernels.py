"""Backstepping kernels on the triangle ``T = {0 <= xi <= x <= 1}``.

Controller kernels ``(k1, k2, k3)`` and observer kernels ``(m1, m2, m3)``
solve coupled first-order transport PDEs on ``T``.  Each field is marched
along its own characteristic with trapezoidal source integration and
linear interpolation at the foot points.  The three fields are coupled by
Picard sweeps: first ``k1, k2`` (or ``m1, m2``) from the diagonal, then the
third field from its edge, always using the freshest values.

Fields are stored as dense ``(n, n)`` arrays indexed ``[i, j]`` for the
node ``(x_i, xi_j)``; entries above the diagonal are ``nan``.

The module also provides the Volterra machinery built on the kernels:
resolvents (inverse transforms), the target-system coupling kernels
``kappa, c`` and ``h, g``, and a finite-difference residual check.
"""

import csv
import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .characteristics import char_coefficients, spectrum
from .errors import ConvergenceError, DomainError

log = logging.getLogger(__name__)

DEFAULT_N = 201
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200


class Role(enum.Enum):
    CONTROLLER = "controller"
    OBSERVER = "observer"


@dataclass(frozen=True)
class TriangleGrid:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise DomainError(f"triangle grid needs n >= 3 points per side, got {self.n}")

    @property
    def h(self):
        return 1.0 / (self.n - 1)

    @property
    def x(self):
        return np.linspace(0.0, 1.0, self.n)

    @property
    def mask(self):
        """Boolean ``(n, n)`` mask of the lattice nodes ``j <= i``."""
        return np.tri(self.n, dtype=bool)

    def nodes(self):
        """Node indices ``(i, j)`` ordered by ``i`` then ``j``."""
        i, j = np.nonzero(self.mask)
        return i, j


def _constant(value):
    return lambda x: np.full(np.shape(x), float(value))


@dataclass(frozen=True)
class AbstractCoefficients:
    """Coefficients of the ``(u1, u2, w)`` system and its boundary conditions.

    ``alpha``, ``theta1`` and ``theta2`` are vectorized callables on ``[0, 1]``.
    """

    mu: float
    gamma1: float
    gamma2: float
    sigma: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    alpha: object = field(default_factory=lambda: _constant(0.0))
    theta1: object = field(default_factory=lambda: _constant(0.0))
    theta2: object = field(default_factory=lambda: _constant(0.0))
    q1: float = 0.0
    q2: float = 0.0
    rho1: float = 0.0
    rho2: float = 0.0

    def __post_init__(self):
        if not (self.mu > 0 and self.gamma1 > 0 and self.gamma2 > 0):
            raise DomainError(
                f"speeds must be positive, got mu={self.mu}, "
                f"gamma=({self.gamma1}, {self.gamma2})")
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=float).reshape(2, 2))

    @classmethod
    def constant(cls, mu, gamma1, gamma2, sigma=None, alpha=0.0, theta1=0.0, theta2=0.0,
                 q1=0.0, q2=0.0, rho1=0.0, rho2=0.0):
        """Coefficients with constant ``alpha`` and ``theta_j``."""
        return cls(mu=mu, gamma1=gamma1, gamma2=gamma2,
                   sigma=np.zeros((2, 2)) if sigma is None else sigma,
                   alpha=_constant(alpha), theta1=_constant(theta1), theta2=_constant(theta2),
                   q1=q1, q2=q2, rho1=rho1, rho2=rho2)

    @classmethod
    def from_char(cls, cc, setup):
        return cls(mu=cc.mu, gamma1=cc.gamma1, gamma2=cc.gamma2, sigma=cc.sigma,
                   alpha=cc.alpha, theta1=cc.theta1, theta2=cc.theta2,
                   q1=setup.q1, q2=setup.q2, rho1=setup.rho1, rho2=setup.rho2)

    @classmethod
    def from_setup(cls, setup):
        return cls.from_char(char_coefficients(setup, spectrum(setup)), setup)

    def scaled(self, s):
        """Copy with ``alpha`` and ``theta_j`` multiplied by ``s``."""
        a, t1, t2 = self.alpha, self.theta1, self.theta2
        return AbstractCoefficients(
            mu=self.mu, gamma1=self.gamma1, gamma2=self.gamma2, sigma=self.sigma,
            alpha=lambda x: s * a(x), theta1=lambda x: s * t1(x), theta2=lambda x: s * t2(x),
            q1=self.q1, q2=self.q2, rho1=self.rho1, rho2=self.rho2)


_NAMES = {Role.CONTROLLER: ("k1", "k2", "k3"), Role.OBSERVER: ("m1", "m2", "m3")}


@dataclass
class KernelField:
    """Three kernel components sampled on a :class:`TriangleGrid`."""

    grid: TriangleGrid
    f1: np.ndarray = field(repr=False)
    f2: np.ndarray = field(repr=False)
    f3: np.ndarray = field(repr=False)
    role: Role = Role.CONTROLLER
    iterations: int = 0
    updates: list = field(default_factory=list, repr=False)
    corner_gap: float = 0.0

    @property
    def names(self):
        return _NAMES[self.role]

    def __getitem__(self, name):
        if name not in self.names:
            raise KeyError(f"{name!r} is not one of {self.names}")
        return self.components()[self.names.index(name)]

    def components(self):
        return self.f1, self.f2, self.f3

    def interpolate(self, which, x, xi):
        """Piecewise-linear interpolation of one component at points of ``T``."""
        return tri_interp(self[which] if isinstance(which, str) else which,
                          self.grid, x, xi)

    def at_one(self, which, xi):
        """Component restricted to the edge ``x = 1`` and evaluated at ``xi``."""
        F = self[which]
        return np.interp(xi, self.grid.x, F[-1, :])

    def to_csv(self, path):
        i, j = self.grid.nodes()
        x = self.grid.x
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "xi", *self.names])
            for a, b in zip(i, j):
                wr.writerow([repr(float(x[a])), repr(float(x[b])),
                             *(repr(float(F[a, b]) + 0.0) for F in self.components())])


def read_kernel_csv(path):
    """Load a file written by :meth:`KernelField.to_csv`."""
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        rows = np.array([[float(v) for v in r] for r in rd])
    role = Role.CONTROLLER if header[2] == "k1" else Role.OBSERVER
    m = rows.shape[0]
    n = int(round((np.sqrt(8 * m + 1) - 1) / 2))
    if n * (n + 1) // 2 != m:
        raise ValueError(f"{m} rows do not form a triangular lattice")
    grid = TriangleGrid(n)
    fields = [np.full((n, n), np.nan) for _ in range(3)]
    i, j = grid.nodes()
    for c in range(3):
        fields[c][i, j] = rows[:, 2 + c]
    return KernelField(grid, *fields, role=role)


def tri_interp(F, grid, x, xi):
    """Linear interpolation on the triangular lattice.

    Bilinear inside full lattice squares, barycentric on the half squares
    cut by the diagonal.  Exact for affine functions.
    """
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    x, xi = np.broadcast_arrays(x, xi)
    n, h = grid.n, grid.h
    xi = np.minimum(xi, x)
    fx = np.clip(x / h, 0.0, n - 1)
    fy = np.clip(xi / h, 0.0, n - 1)
    i = np.minimum(np.floor(fx).astype(int), n - 2)
    j = np.minimum(np.floor(fy).astype(int), n - 2)
    j = np.minimum(j, i)
    tx = fx - i
    ty = fy - j
    out = np.empty(x.shape)
    full = j < i
    ii, jj, a, b = i[full], j[full], tx[full], ty[full]
    out[full] = ((1 - a) * (1 - b) * F[ii, jj] + a * (1 - b) * F[ii + 1, jj]
                 + (1 - a) * b * F[ii, jj + 1] + a * b * F[ii + 1, jj + 1])
    # half square with vertices (i, i), (i+1, i), (i+1, i+1); ty <= tx there
    d = ~full
    ii, a, b = i[d], tx[d], ty[d]
    out[d] = (1 - a) * F[ii, ii] + (a - b) * F[ii + 1, ii] + b * F[ii + 1, ii + 1]
    return out


def _interp_row(row, pos):
    """Linear interpolation of ``row`` (node values) at fractional indices ``pos``."""
    k = np.minimum(np.floor(pos).astype(int), len(row) - 2)
    k = np.maximum(k, 0)
    t = pos - k
    return (1 - t) * row[k] + t * row[k + 1]


def _march_from_diagonal(F1, F2, third, x, h, speeds, diag, mix, couple):
    """One sweep of the two diagonal-data fields, increasing ``x``.

    Field ``f`` obeys ``a_f d/dx F_f - b_f d/dxi F_f = S_f`` with
    ``S_f = mix[f, 0] F1 + mix[f, 1] F2 + couple[f](x, xi) * third``.
    ``third`` is held fixed during the sweep.  Node sources are treated
    implicitly through a 2x2 solve per node.
    """
    n = len(x)
    (a1, b1), (a2, b2) = speeds
    F1[np.diag_indices(n)] = diag[0](x)
    F2[np.diag_indices(n)] = diag[1](x)
    for i in range(1, n):
        j = np.arange(i)
        xi_j = x[j]
        xi_i = np.full(i, x[i])
        t_node = third[i, :i]
        rhs = []
        steps = []
        for f, (a, b) in enumerate(((a1, b1), (a2, b2))):
            pos = j + b / a
            on_row = pos <= (i - 1) + 1e-12
            s = np.where(on_row, h / a, (x[i] - xi_j) / (a + b))
            # foot on row i-1
            p = np.where(on_row, pos, 0.0)
            xf_r = np.full(i, x[i - 1])
            xif_r = p * h
            if i >= 2:
                v1 = _interp_row(F1[i - 1, :i], p)
                v2 = _interp_row(F2[i - 1, :i], p)
                v3 = _interp_row(third[i - 1, :i], p)
            else:
                v1 = np.full(i, F1[0, 0])
                v2 = np.full(i, F2[0, 0])
                v3 = np.full(i, third[0, 0])
            # foot on the diagonal, between x_{i-1} and x_i
            xd = x[i] - a * np.where(on_row, 0.0, s)
            lam = (xd - x[i - 1]) / h
            d1 = diag[0](xd)
            d2 = diag[1](xd)
            d3 = (1 - lam) * third[i - 1, i - 1] + lam * third[i, i]
            xf = np.where(on_row, xf_r, xd)
            xif = np.where(on_row, xif_r, xd)
            g1 = np.where(on_row, v1, d1)
            g2 = np.where(on_row, v2, d2)
            g3 = np.where(on_row, v3, d3)
            foot_val = g1 if f == 0 else g2
            s_foot = mix[f, 0] * g1 + mix[f, 1] * g2 + couple[f](xf, xif) * g3
            rhs.append(foot_val + 0.5 * s * s_foot + 0.5 * s * couple[f](xi_i, xi_j) * t_node)
            steps.append(s)
        s1, s2 = steps
        m11 = 1 - 0.5 * s1 * mix[0, 0]
        m12 = -0.5 * s1 * mix[0, 1]
        m21 = -0.5 * s2 * mix[1, 0]
        m22 = 1 - 0.5 * s2 * mix[1, 1]
        det = m11 * m22 - m12 * m21
        F1[i, :i] = (m22 * rhs[0] - m12 * rhs[1]) / det
        F2[i, :i] = (m11 * rhs[1] - m21 * rhs[0]) / det


def _diagonals(n):
    for d in range(n):
        m = np.arange(n - d)
        yield d, d + m, m


def _sup(A):
    return float(np.nanmax(np.abs(A))) if A.size else 0.0


def _picard(sweep, n, tol, max_iter, label):
    F = [np.zeros((n, n)) for _ in range(3)]
    upper = ~np.tri(n, dtype=bool)
    updates = []
    for it in range(1, max_iter + 1):
        old = [A.copy() for A in F]
        sweep(*F)
        delta = max(_sup(A - B) for A, B in zip(F, old))
        updates.append(delta)
        log.debug("%s Picard iteration %d: update %.3e", label, it, delta)
        if not np.all(np.isfinite(F[0])):
            break
        if delta < tol:
            for A in F:
                A[upper] = np.nan
            return F, it, updates
    raise ConvergenceError(
        f"{label} kernels did not converge in {max_iter} iterations "
        f"(last update {updates[-1]:.3e})", residual=updates[-1], iterations=len(updates))


def solve_controller_kernels(coeffs, n=DEFAULT_N, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Kernels ``k1, k2, k3`` of the full-state backstepping transform.

    Solves, on ``T``::

        mu k1_x - gamma1 k1_xi = s11 k1 + s21 k2 + theta1(xi) k3
        mu k2_x - gamma2 k2_xi = s12 k1 + s22 k2 + theta2(xi) k3
        mu k3_x + mu k3_xi     = alpha(xi) (k1 + k2)

    with ``k_i(x, x) = -theta_i(x) / (gamma_i + mu)`` and
    ``mu k3(x, 0) = q1 gamma1 k1(x, 0) + q2 gamma2 k2(x, 0)``.

    Raises
    ------
    ConvergenceError
        When the sup-norm Picard update stays above ``tol``.
    """
    grid = TriangleGrid(n)
    x, h, c = grid.x, grid.h, coeffs
    mu, g1, g2 = c.mu, c.gamma1, c.gamma2
    s = c.sigma
    mix = np.array([[s[0, 0], s[1, 0]], [s[0, 1], s[1, 1]]])
    couple = (lambda X, XI: c.theta1(XI), lambda X, XI: c.theta2(XI))
    diag = (lambda X: -c.theta1(X) / (g1 + mu), lambda X: -c.theta2(X) / (g2 + mu))
    alpha_x = c.alpha(x)

    def sweep(K1, K2, K3):
        _march_from_diagonal(K1, K2, K3, x, h, ((mu, g1), (mu, g2)), diag, mix, couple)
        K3[:, 0] = (c.q1 * g1 * K1[:, 0] + c.q2 * g2 * K2[:, 0]) / mu
        for d, ii, jj in _diagonals(n):
            src = alpha_x[jj] * (K1[ii, jj] + K2[ii, jj]) / mu
            inc = 0.5 * h * (src[1:] + src[:-1])
            K3[ii[1:], jj[1:]] = K3[d, 0] + np.cumsum(inc)

    (K1, K2, K3), it, updates = _picard(sweep, n, tol, max_iter, "controller")
    diag_k3 = (c.q1 * g1 * K1[0, 0] + c.q2 * g2 * K2[0, 0]) / mu
    kf = KernelField(grid, K1, K2, K3, Role.CONTROLLER, it, updates,
                     corner_gap=abs(K3[0, 0] - diag_k3))
    log.info("controller kernels: n=%d, %d iterations, last update %.2e", n, it, updates[-1])
    return kf


def solve_observer_kernels(coeffs, n=DEFAULT_N, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Kernels ``m1, m2, m3`` of the observer error transform.

    Solves, on ``T``::

        gamma1 m1_x - mu m1_xi = s11 m1 + s12 m2 + alpha(x) m3
        gamma2 m2_x - mu m2_xi = s21 m1 + s22 m2 + alpha(x) m3
        mu m3_x + mu m3_xi     = -theta1(x) m1 - theta2(x) m2

    with ``m_i(x, x) = alpha(x) / (gamma_i + mu)`` and
    ``m3(1, xi) = rho1 m1(1, xi) + rho2 m2(1, xi)``; ``m3`` is marched
    backward from the edge ``x = 1``.
    """
    grid = TriangleGrid(n)
    x, h, c = grid.x, grid.h, coeffs
    mu, g1, g2 = c.mu, c.gamma1, c.gamma2
    mix = np.asarray(c.sigma, dtype=float)
    couple = (lambda X, XI: c.alpha(X), lambda X, XI: c.alpha(X))
    diag = (lambda X: c.alpha(X) / (g1 + mu), lambda X: c.alpha(X) / (g2 + mu))
    th1, th2 = c.theta1(x), c.theta2(x)

    def sweep(M1, M2, M3):
        _march_from_diagonal(M1, M2, M3, x, h, ((g1, mu), (g2, mu)), diag, mix, couple)
        M3[n - 1, :] = c.rho1 * M1[n - 1, :] + c.rho2 * M2[n - 1, :]
        for d, ii, jj in _diagonals(n):
            src = -(th1[ii] * M1[ii, jj] + th2[ii] * M2[ii, jj]) / mu
            inc = 0.5 * h * (src[1:] + src[:-1])
            # integrate backward from the node on x = 1
            back = np.cumsum(inc[::-1])[::-1]
            M3[ii[:-1], jj[:-1]] = M3[n - 1, n - 1 - d] - back

    (M1, M2, M3), it, updates = _picard(sweep, n, tol, max_iter, "observer")
    kf = KernelField(grid, M1, M2, M3, Role.OBSERVER, it, updates)
    log.info("observer kernels: n=%d, %d iterations, last update %.2e", n, it, updates[-1])
    return kf


@dataclass(frozen=True)
class ObserverGains:
    x: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray

    def at(self, xs):
        xs = np.asarray(xs, dtype=float)
        return tuple(np.interp(xs, self.x, p) for p in (self.p1, self.p2, self.p3))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "p1", "p2", "p3"])
            for row in zip(self.x, self.p1, self.p2, self.p3):
                wr.writerow([repr(float(v)) for v in row])


def observer_gains(kf, mu):
    """Output-injection gains ``p_i(x) = mu m_i(x, 0)``."""
    return ObserverGains(kf.grid.x.copy(), mu * kf.f1[:, 0], mu * kf.f2[:, 0], mu * kf.f3[:, 0])


def _lower(A):
    return np.where(np.tri(A.shape[0], dtype=bool), A, 0.0)


def trap_compose(A, B, h):
    """``C(x, xi) = int_xi^x A(x, s) B(s, xi) ds`` by the trapezoid rule on nodes."""
    Al, Bl = _lower(A), _lower(B)
    C = h * (Al @ Bl)
    dA = np.diag(Al)
    dB = np.diag(Bl)
    C -= 0.5 * h * (Al * dB[None, :] + dA[:, None] * Bl)
    return _mask_upper(C)


def _mask_upper(A):
    out = np.array(A, dtype=float)
    out[~np.tri(out.shape[0], dtype=bool)] = np.nan
    return out


def _solve_left_volterra(K, f, h):
    """``F(x, xi) = f(x, xi) - int_xi^x K(x, s) F(s, xi) ds``, column by column."""
    n = K.shape[0]
    Kl = _lower(K)
    fl = _lower(f)
    F = np.zeros((n, n))
    for j in range(n):
        m = n - j
        W = np.tril(np.full((m, m), h))
        W[:, 0] *= 0.5
        W[np.diag_indices(m)] *= 0.5
        W[0, 0] = 0.0
        A = np.eye(m) + W * Kl[j:, j:]
        F[j:, j] = solve_triangular(A, fl[j:, j], lower=True)
    return _mask_upper(F)


def _solve_right_volterra(K, f, h):
    """``F(x, xi) = f(x, xi) + int_xi^x F(x, s) K(s, xi) ds``, row by row."""
    n = K.shape[0]
    Kl = _lower(K)
    fl = _lower(f)
    F = np.zeros((n, n))
    for i in range(n):
        m = i + 1
        W = np.triu(np.full((m, m), h))
        W[:, m - 1] *= 0.5
        W[np.diag_indices(m)] *= 0.5
        W[m - 1, m - 1] = 0.0
        # U[j, s] = w * K(s, j) for j <= s <= i
        A = np.eye(m) - W * Kl[:m, :m].T
        F[i, :m] = solve_triangular(A, fl[i, :m], lower=False)
    return _mask_upper(F)


def volterra_resolvent(K, n=None):
    """Resolvent ``R`` of a kernel on ``T``: ``(I + K)^{-1} = I + R``.

    ``R(x, xi) = -K(x, xi) - int_xi^x K(x, s) R(s, xi) ds``.

    ``K`` is either an ``(n, n)`` array of node values or a callable
    ``K(x, xi)`` sampled on an ``n``-point grid.
    """
    if callable(K):
        if n is None:
            n = DEFAULT_N
        x = np.linspace(0.0, 1.0, n)
        K = K(x[:, None], x[None, :]) * np.ones((n, n))
    K = np.asarray(K, dtype=float)
    h = 1.0 / (K.shape[0] - 1)
    return _solve_left_volterra(K, -K, h)


def apply_volterra(K, f, h):
    """``(I + K) f`` with ``(K f)(x) = int_0^x K(x, xi) f(xi) dxi`` (trapezoid)."""
    return f + volterra_integral(K, f, h)


def volterra_integral(K, f, h):
    Kl = _lower(np.asarray(K, dtype=float))
    f = np.asarray(f, dtype=float)
    out = h * (Kl @ f) - 0.5 * h * (Kl[:, 0] * f[0] + np.diag(Kl) * f)
    return out


def coupling_kernels(kf, coeffs, alpha_at="x"):
    """Target-system couplings ``kappa_i`` and ``c_ij`` of the controller design.

    ``kappa(x, xi) = alpha(.) k3(x, xi) + int_xi^x kappa(x, s) k3(s, xi) ds``
    and ``c_ij = alpha(.) k_j + int_xi^x kappa_i(x, s) k_j(s, xi) ds``.
    ``alpha_at`` selects whether ``alpha`` is evaluated at ``x`` (the form
    that makes the transformed system match) or at ``xi``.

    Returns ``(kappa1, kappa2, c11, c12, c21, c22)``; both ``kappa_i`` and
    both rows of ``c`` coincide because the two ``u`` equations share
    ``alpha``.
    """
    grid = kf.grid
    x, h = grid.x, grid.h
    if alpha_at == "x":
        A = np.broadcast_to(coeffs.alpha(x)[:, None], (grid.n, grid.n))
    elif alpha_at == "xi":
        A = np.broadcast_to(coeffs.alpha(x)[None, :], (grid.n, grid.n))
    else:
        raise ValueError(f"alpha_at must be 'x' or 'xi', got {alpha_at!r}")
    k1, k2, k3 = kf.components()
    kappa = _solve_right_volterra(k3, A * _lower(k3), h)
    c1 = _mask_upper(A * _lower(k1) + _lower(trap_compose(kappa, k1, h)))
    c2 = _mask_upper(A * _lower(k2) + _lower(trap_compose(kappa, k2, h)))
    return kappa, kappa.copy(), c1, c2, c1.copy(), c2.copy()


def observer_coupling_kernels(kf, coeffs):
    """Target error-system couplings ``h_i`` and ``g_ij``.

    ``h_i = -theta_i(xi) m3 - int_xi^x m3(x, s) h_i(s, xi) ds`` and
    ``g_ij = -theta_j(xi) m_i - int_xi^x m_i(x, s) h_j(s, xi) ds``.

    Returns ``(h1, h2, g11, g12, g21, g22)``.
    """
    grid = kf.grid
    x, hh = grid.x, grid.h
    m1, m2, m3 = (_lower(F) for F in kf.components())
    th = (coeffs.theta1(x)[None, :], coeffs.theta2(x)[None, :])
    hs = [_solve_left_volterra(m3, -t * m3, hh) for t in th]
    g = {}
    for i, mi in ((1, m1), (2, m2)):
        for j in (1, 2):
            g[i, j] = _mask_upper(-th[j - 1] * mi - _lower(trap_compose(mi, hs[j - 1], hh)))
    return hs[0], hs[1], g[1, 1], g[1, 2], g[2, 1], g[2, 2]


def inverse_controller_kernels(kf):
    """Kernels ``l1, l2, l3`` of the inverse transform.

    ``w = chi + int l1 u1 + int l2 u2 + int l3 chi``, where ``l3`` is the
    resolvent of ``-k3`` and ``l_i = k_i + int_xi^x l3(x, s) k_i(s, xi) ds``.
    """
    h = kf.grid.h
    k1, k2, k3 = kf.components()
    l3 = volterra_resolvent(-_lower(k3))
    l1 = _mask_upper(_lower(k1) + _lower(trap_compose(l3, k1, h)))
    l2 = _mask_upper(_lower(k2) + _lower(trap_compose(l3, k2, h)))
    return l1, l2, l3


def inverse_observer_kernels(kf):
    """Kernels ``r1, r2, r3`` mapping the estimation error to target coordinates.

    ``phi = w + int r3 w`` and ``pi_i = u_i + int r_i w`` with
    ``r3`` the resolvent of ``m3`` and ``r_i = -m_i - int m_i(x, s) r3(s, xi) ds``.
    """
    h = kf.grid.h
    m1, m2, m3 = kf.components()
    r3 = volterra_resolvent(_lower(m3))
    r1 = _mask_upper(-_lower(m1) - _lower(trap_compose(m1, r3, h)))
    r2 = _mask_upper(-_lower(m2) - _lower(trap_compose(m2, r3, h)))
    return r1, r2, r3


@dataclass(frozen=True)
class KernelResidual:
    """Finite-difference residuals of the three kernel PDEs."""

    sup: tuple
    l2: tuple
    boundary: float

    @property
    def sup_max(self):
        return max(self.sup)

    @property
    def l2_max(self):
        return max(self.l2)


def kernel_residual(kf, coeffs):
    """Upwind finite-difference residual at strictly interior nodes.

    Interior means ``1 <= j <= i - 1`` and ``i <= n - 2``.  Derivatives are
    one-sided in the upwind direction of each field's characteristic, so
    the residual of a first-order accurate solution is ``O(h)``.  The
    boundary residual is the largest violation of the diagonal and edge
    conditions.
    """
    grid, c = kf.grid, coeffs
    n, h, x = grid.n, grid.h, grid.x
    F1, F2, F3 = kf.components()
    i, j = np.nonzero(np.tri(n, k=-1, dtype=bool))
    keep = (j >= 1) & (i <= n - 2)
    i, j = i[keep], j[keep]
    mu, g1, g2, s = c.mu, c.gamma1, c.gamma2, c.sigma
    X, XI = x[i], x[j]

    def dx_back(F):
        return (F[i, j] - F[i - 1, j]) / h

    def dxi_fwd(F):
        return (F[i, j + 1] - F[i, j]) / h

    if kf.role is Role.CONTROLLER:
        r1 = mu * dx_back(F1) - g1 * dxi_fwd(F1) - (
            s[0, 0] * F1[i, j] + s[1, 0] * F2[i, j] + c.theta1(XI) * F3[i, j])
        r2 = mu * dx_back(F2) - g2 * dxi_fwd(F2) - (
            s[0, 1] * F1[i, j] + s[1, 1] * F2[i, j] + c.theta2(XI) * F3[i, j])
        r3 = mu * (dx_back(F3) + (F3[i, j] - F3[i, j - 1]) / h) - c.alpha(XI) * (
            F1[i, j] + F2[i, j])
        bnd = max(
            _sup(F1[np.diag_indices(n)] + c.theta1(x) / (g1 + mu)),
            _sup(F2[np.diag_indices(n)] + c.theta2(x) / (g2 + mu)),
            _sup(mu * F3[:, 0] - c.q1 * g1 * F1[:, 0] - c.q2 * g2 * F2[:, 0]))
    else:
        r1 = g1 * dx_back(F1) - mu * dxi_fwd(F1) - (
            s[0, 0] * F1[i, j] + s[0, 1] * F2[i, j] + c.alpha(X) * F3[i, j])
        r2 = g2 * dx_back(F2) - mu * dxi_fwd(F2) - (
            s[1, 0] * F1[i, j] + s[1, 1] * F2[i, j] + c.alpha(X) * F3[i, j])
        r3 = mu * ((F3[i + 1, j] - F3[i, j]) / h + dxi_fwd(F3)) + (
            c.theta1(X) * F1[i, j] + c.theta2(X) * F2[i, j])
        bnd = max(
            _sup(F1[np.diag_indices(n)] - c.alpha(x) / (g1 + mu)),
            _sup(F2[np.diag_indices(n)] - c.alpha(x) / (g2 + mu)),
            _sup(F3[n - 1, :] - c.rho1 * F1[n - 1, :] - c.rho2 * F2[n - 1, :]))
    res = (r1, r2, r3)
    # L2 over T with node area h^2
    sup = tuple(_sup(r) for r in res)
    l2 = tuple(float(np.sqrt(h * h * np.sum(r * r))) for r in res)
    return KernelResidual(sup=sup, l2=l2, boundary=bnd)
