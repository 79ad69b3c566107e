"""Eigenstructure and characteristic (Riemann) coordinates.

The linearized model ``W_t + A W_x = B W`` is diagonalized by the left
eigenvectors of ``A``.  After scaling by ``r_k`` every characteristic
coordinate ``xi_k`` obeys ``xi_k,t + lambda_k xi_k,x = sum_s alpha_s xi_s``.
One eigenvalue is negative (the leftward wave, called ``v`` or ``w`` after
rescaling) and two are positive (``u1`` slower, ``u2`` faster).

Eigenvalues are stored in the index convention of the regime:

* subcritical:   lambda_1 < 0 < lambda_2 < lambda_3
* supercritical: lambda_2 < 0 < lambda_1 < lambda_3
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import CriticalFlowError, DegeneracyError, RegimeError, ScalingError
from .model import froude, linearize

ZERO_ROOT_TOL = 1e-9
NEWTON_STEPS = 5


class Regime(enum.Enum):
    SUBCRITICAL = "subcritical"
    SUPERCRITICAL = "supercritical"


def characteristic_polynomial(setup):
    """Coefficients ``(1, c2, c1, c0)`` of ``det(lambda I - A)``."""
    H, V, g, a = setup.Hstar, setup.Vstar, setup.g, setup.a
    return np.array([1.0, -2.0 * V, V**2 - g * H - g * a * V**2, g * a * V**3])


def cubic_roots(c2, c1, c0):
    """Three distinct real roots of ``x^3 + c2 x^2 + c1 x + c0``, ascending.

    Trigonometric branch of Cardano's formula on the depressed cubic,
    followed by a few Newton steps on the original polynomial.

    Raises
    ------
    DegeneracyError
        If the roots are complex or (numerically) repeated.
    """
    shift = c2 / 3.0
    p = c1 - c2 * c2 / 3.0
    q = 2.0 * c2**3 / 27.0 - c2 * c1 / 3.0 + c0
    scale = max(1.0, abs(c2), abs(c1) ** 0.5, abs(c0) ** (1.0 / 3.0))
    if p >= 0.0 or -(4.0 * p**3 + 27.0 * q * q) <= 1e-14 * scale**6:
        raise DegeneracyError(
            f"cubic with p={p:.6g}, q={q:.6g} has repeated or complex roots")
    m = 2.0 * np.sqrt(-p / 3.0)
    arg = np.clip(3.0 * q / (p * m), -1.0, 1.0)
    theta = np.arccos(arg) / 3.0
    roots = m * np.cos(theta - 2.0 * np.pi * np.arange(3) / 3.0) - shift

    poly = np.array([1.0, c2, c1, c0])
    dpoly = np.polyder(poly)
    for _ in range(NEWTON_STEPS):
        d = np.polyval(dpoly, roots)
        step = np.polyval(poly, roots) / d
        roots = roots - step
        if np.all(np.abs(step) <= 4e-16 * np.maximum(1.0, np.abs(roots))):
            break
    roots = np.sort(roots)
    if np.min(np.diff(roots)) <= 1e-9 * scale:
        raise DegeneracyError(f"repeated roots {roots}")
    return roots


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues in regime index convention, see the module docstring."""

    lam: np.ndarray
    regime: Regime

    @property
    def v_index(self):
        return 0 if self.regime is Regime.SUBCRITICAL else 1

    @property
    def u1_index(self):
        return 1 if self.regime is Regime.SUBCRITICAL else 0

    @property
    def u2_index(self):
        return 2

    @property
    def order(self):
        """Indices of ``(v, u1, u2)`` into ``lam``."""
        return (self.v_index, self.u1_index, self.u2_index)


def spectrum(setup):
    coeffs = characteristic_polynomial(setup)
    roots = cubic_roots(*coeffs[1:])
    if np.any(np.abs(roots) < ZERO_ROOT_TOL):
        raise CriticalFlowError(f"eigenvalue at zero: {roots}")
    neg = roots < 0
    if not (neg[0] and not neg[1] and not neg[2]):
        raise RegimeError(f"sign pattern of {roots} is not (-, +, +)")
    fr = froude(setup.Hstar, setup.Vstar, setup.g)
    if fr == 1.0:
        raise CriticalFlowError("Froude number is exactly 1")
    # water waves V -+ sqrt(gH) straddle zero iff Fr < 1; the other root is the bed wave
    if fr < 1.0:
        lam = np.array([roots[0], roots[1], roots[2]])
        regime = Regime.SUBCRITICAL
    else:
        lam = np.array([roots[1], roots[0], roots[2]])
        regime = Regime.SUPERCRITICAL
    lam.setflags(write=False)
    return Spectrum(lam=lam, regime=regime)


def _others(k):
    return [i for i in range(3) if i != k]


def _gaps(lam):
    d = np.empty(3)
    for k in range(3):
        i, j = _others(k)
        d[k] = (lam[k] - lam[i]) * (lam[k] - lam[j])
    if np.any(d == 0.0):
        raise DegeneracyError(f"repeated eigenvalues {lam}")
    return d


def left_eigenvectors(setup, spec):
    """Rows ``L_k`` with ``L_k^T A = lambda_k L_k^T`` (shape (3, 3))."""
    lam = np.asarray(spec.lam)
    H, V, g = setup.Hstar, setup.Vstar, setup.g
    d = _gaps(lam)
    L = np.empty((3, 3))
    for k in range(3):
        i, j = _others(k)
        L[k] = np.array([(V - lam[i]) * (V - lam[j]) + g * H, H * lam[k], g * H]) / d[k]
    return L


def scaling_factors(setup, spec):
    """``r_k = Cf (V*/H*) lambda_k / ((lambda_k - lambda_i)(lambda_k - lambda_j))``."""
    lam = np.asarray(spec.lam)
    return setup.params.Cf * setup.Vstar / setup.Hstar * lam / _gaps(lam)


@dataclass(frozen=True)
class CharCoefficients:
    """Speeds and coupling constants of the relabeled ``(u1, u2, v)`` system.

    ``alpha1`` multiplies ``v`` in every row; ``sigma`` has the two
    identical rows ``(eta1, eta2)``.
    """

    mu: float
    gamma1: float
    gamma2: float
    r: np.ndarray = field(repr=False)
    alphaK: np.ndarray = field(repr=False)
    alpha1: float = 0.0
    eta1: float = 0.0
    eta2: float = 0.0

    @property
    def sigma(self):
        return np.array([[self.eta1, self.eta2], [self.eta1, self.eta2]])

    def alpha(self, x):
        return self.alpha1 * np.exp(self.alpha1 * np.asarray(x, dtype=float) / self.mu)

    def theta1(self, x):
        return self.eta1 * np.exp(self.alpha1 * np.asarray(x, dtype=float) / self.mu)

    def theta2(self, x):
        return self.eta2 * np.exp(self.alpha1 * np.asarray(x, dtype=float) / self.mu)


def char_coefficients(setup, spec):
    if setup.params.Cf == 0.0:
        raise ScalingError("Cf = 0 makes every r_k vanish")
    lam = np.asarray(spec.lam)
    if np.any(lam == 0.0):
        raise CriticalFlowError(f"zero eigenvalue in {lam}")
    r = scaling_factors(setup, spec)
    alphaK = (3.0 * setup.Vstar - 2.0 * lam) * r
    iv, i1, i2 = spec.order
    mu = -lam[iv]
    gamma1, gamma2 = lam[i1], lam[i2]
    if not (mu > 0 and gamma1 > 0 and gamma2 > 0):
        raise RegimeError(f"speeds mu={mu}, gamma=({gamma1}, {gamma2}) not all positive")
    return CharCoefficients(mu=float(mu), gamma1=float(gamma1), gamma2=float(gamma2),
                            r=r, alphaK=alphaK, alpha1=float(alphaK[iv]),
                            eta1=float(alphaK[i1]), eta2=float(alphaK[i2]))


def transform_matrix(setup, spec):
    """``T`` with ``xi = T W`` (xi in regime index order)."""
    r = scaling_factors(setup, spec)
    if np.any(r == 0.0):
        raise ScalingError(f"zero scaling factor in r={r}")
    return left_eigenvectors(setup, spec) / r[:, None]


@dataclass
class CharField:
    """Characteristic state on a uniform grid of ``[0, 1]``.

    Either ``v`` (unscaled leftward coordinate) or ``w`` is set, or both.
    """

    x: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    v: np.ndarray | None = None
    w: np.ndarray | None = None


def to_characteristic(setup, spec, h, u, b, x=None):
    """Map physical deviations ``(h, u, b)`` to ``CharField(u1, u2, v)``."""
    W = np.vstack(np.broadcast_arrays(*(np.asarray(f, dtype=float) for f in (h, u, b))))
    xi = transform_matrix(setup, spec) @ W
    iv, i1, i2 = spec.order
    if x is None:
        x = np.linspace(0.0, 1.0, W.shape[1])
    return CharField(x=np.asarray(x, dtype=float), u1=xi[i1], u2=xi[i2], v=xi[iv])


def from_characteristic(setup, spec, cf):
    """Inverse of :func:`to_characteristic`; returns ``(h, u, b)``.

    Uses ``cf.v`` when present, otherwise reconstructs it from ``cf.w``.
    """
    if cf.v is None:
        raise ValueError("CharField has no v; apply unrescale_w first")
    T = transform_matrix(setup, spec)
    if np.linalg.cond(T) > 1e12:
        raise DegeneracyError("characteristic transform is singular")
    iv, i1, i2 = spec.order
    xi = np.empty((3, np.size(cf.u1)))
    xi[iv], xi[i1], xi[i2] = cf.v, cf.u1, cf.u2
    W = np.linalg.solve(T, xi)
    return W[0], W[1], W[2]


def rescale_w(cf, alpha1, mu):
    """``w = v exp(-alpha1 x / mu)``; returns a new field carrying both."""
    w = cf.v * np.exp(-alpha1 * cf.x / mu)
    return CharField(x=cf.x, u1=cf.u1, u2=cf.u2, v=cf.v, w=w)


def unrescale_w(cf, alpha1, mu):
    v = cf.w * np.exp(alpha1 * cf.x / mu)
    return CharField(x=cf.x, u1=cf.u1, u2=cf.u2, v=v, w=cf.w)
