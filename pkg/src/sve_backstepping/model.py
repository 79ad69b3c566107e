"""Physical layer of the linearized Saint-Venant-Exner channel model.

Parameters, steady states, the Froude number and the advection/source
matrices of the model linearized around a constant set point
``(H*, V*, B*)``.  Everything is SI and the channel is taken to be of
unit length.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError

STEADY_RTOL = 1e-9


def sediment_coefficient(Ag, pg):
    """Bed/flow interaction coefficient ``a = 3 Ag / (1 - pg)``."""
    if not pg < 1.0:
        raise DomainError(f"porosity pg={pg} must be < 1")
    if pg < 0.0 or Ag < 0.0:
        raise DomainError(f"need Ag >= 0 and pg >= 0, got Ag={Ag}, pg={pg}")
    return 3.0 * Ag / (1.0 - pg)


@dataclass(frozen=True)
class PhysicalParams:
    g: float = 9.81
    Cf: float = 0.1
    Ag: float = 0.008
    pg: float = 0.002
    Sb: float | None = None

    def __post_init__(self):
        if not self.g > 0:
            raise DomainError(f"gravity must be positive, got {self.g}")
        if self.Cf < 0:
            raise DomainError(f"friction Cf must be >= 0, got {self.Cf}")
        if self.Ag < 0:
            raise DomainError(f"Ag must be >= 0, got {self.Ag}")
        if not 0 <= self.pg < 1:
            raise DomainError(f"porosity must satisfy 0 <= pg < 1, got {self.pg}")

    @property
    def a(self):
        return sediment_coefficient(self.Ag, self.pg)


def equilibrium_slope(params, Hstar, Vstar):
    """Bottom slope for which ``(Hstar, Vstar)`` is a steady state.

    Solves ``g Sb H* = Cf V*^2`` for ``Sb``.
    """
    if not Hstar > 0:
        raise DomainError(f"Hstar must be positive, got {Hstar}")
    if not params.g > 0:
        raise DomainError(f"gravity must be positive, got {params.g}")
    return params.Cf * Vstar**2 / (params.g * Hstar)


def steady_residual(params, Hstar, Vstar, Sb):
    """Relative residual of ``g Sb H* - Cf V*^2``."""
    lhs = params.g * Sb * Hstar
    rhs = params.Cf * Vstar**2
    scale = max(abs(lhs), abs(rhs))
    if scale == 0.0:
        return 0.0
    return abs(lhs - rhs) / scale


@dataclass(frozen=True)
class EquilibriumSetup:
    """Set point plus the boundary reflection coefficients.

    ``params.Sb`` is filled in from the steady relation when left as
    ``None``; a user supplied slope that violates it is rejected.
    """

    params: PhysicalParams
    Hstar: float
    Vstar: float
    Bstar: float = 0.0
    rho1: float = 0.0
    rho2: float = 0.0
    q1: float = 0.0
    q2: float = 0.0

    def __post_init__(self):
        if not self.Hstar > 0:
            raise DomainError(f"Hstar must be positive, got {self.Hstar}")
        if not self.Vstar > 0:
            raise DomainError(f"Vstar must be positive, got {self.Vstar}")
        Sb = equilibrium_slope(self.params, self.Hstar, self.Vstar)
        if self.params.Sb is None:
            object.__setattr__(self, "params", replace(self.params, Sb=Sb))
        elif steady_residual(self.params, self.Hstar, self.Vstar, self.params.Sb) > STEADY_RTOL:
            raise DomainError(
                f"Sb={self.params.Sb} is not a steady state for H*={self.Hstar}, "
                f"V*={self.Vstar} (expected {Sb})")

    @property
    def a(self):
        return self.params.a

    @property
    def g(self):
        return self.params.g


def froude(Hstar, Vstar, g=9.81):
    if not Hstar > 0 or not g > 0:
        raise DomainError(f"need Hstar > 0 and g > 0, got Hstar={Hstar}, g={g}")
    return abs(Vstar) / np.sqrt(g * Hstar)


@dataclass(frozen=True)
class LinearizedMatrices:
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)


def linearize(setup):
    """Advection matrix ``A(W*)`` and source matrix ``B(W*)``.

    The deviation ``W = (h, u, b)`` obeys ``W_t + A W_x = B W``.
    """
    H, V, g, a, Cf = setup.Hstar, setup.Vstar, setup.g, setup.a, setup.params.Cf
    A = np.array([[V, H, 0.0],
                  [g, V, g],
                  [0.0, a * V**2, 0.0]])
    B = np.zeros((3, 3))
    B[1, 0] = Cf * V**2 / H**2
    B[1, 1] = -2.0 * Cf * V / H
    A.setflags(write=False)
    B.setflags(write=False)
    return LinearizedMatrices(A=A, B=B)
