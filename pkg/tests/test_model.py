import numpy as np
import pytest

from sve_backstepping.errors import DomainError
from sve_backstepping.model import (EquilibriumSetup, PhysicalParams, equilibrium_slope,
                                    froude, linearize, sediment_coefficient, steady_residual)


def test_sediment_coefficient_values():
    assert sediment_coefficient(0.008, 0.002) == pytest.approx(0.0240481, abs=1e-7)
    assert sediment_coefficient(0.003, 0.002) == pytest.approx(0.0090180, abs=1e-7)
    assert sediment_coefficient(0.0, 0.5) == 0.0


@pytest.mark.parametrize("pg", [1.0, 1.5])
def test_sediment_coefficient_porosity_singularity(pg):
    with pytest.raises(DomainError):
        sediment_coefficient(0.01, pg)


def test_equilibrium_slope():
    p = PhysicalParams(g=9.81, Cf=0.1)
    assert equilibrium_slope(p, 2.0, 3.0) == pytest.approx(0.0458716, abs=1e-7)
    assert equilibrium_slope(p, 1.0, 5.0) == pytest.approx(0.2548420, abs=1e-7)
    assert equilibrium_slope(PhysicalParams(Cf=0.0), 1.3, 4.0) == 0.0
    with pytest.raises(DomainError):
        equilibrium_slope(p, 0.0, 3.0)


def test_setup_fills_slope_and_satisfies_steady_relation(t1):
    p = t1.params
    assert steady_residual(p, t1.Hstar, t1.Vstar, p.Sb) < 1e-12


def test_setup_rejects_inconsistent_slope():
    with pytest.raises(DomainError):
        EquilibriumSetup(PhysicalParams(Sb=0.1), Hstar=2.0, Vstar=3.0)


@pytest.mark.parametrize("kw", [dict(g=0.0), dict(Cf=-1.0), dict(Ag=-0.1), dict(pg=1.0), dict(pg=-0.1)])
def test_params_invariants(kw):
    with pytest.raises(DomainError):
        PhysicalParams(**kw)


@pytest.mark.parametrize("H,V", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)])
def test_setup_invariants(H, V):
    with pytest.raises(DomainError):
        EquilibriumSetup(PhysicalParams(), Hstar=H, Vstar=V)


def test_froude():
    assert froude(1.0, 5.0) == pytest.approx(1.5964, abs=1e-4)
    assert froude(2.0, 3.0) == pytest.approx(3.0 / np.sqrt(19.62), rel=1e-15)
    assert froude(2.0, 3.0) == pytest.approx(0.67729, abs=1e-5)
    assert froude(1.0, 0.0) == 0.0
    with pytest.raises(DomainError):
        froude(0.0, 1.0)
    with pytest.raises(DomainError):
        froude(1.0, 1.0, g=0.0)


def test_linearize_entries_and_invariants(t1):
    m = linearize(t1)
    H, V, g, a, Cf = 2.0, 3.0, 9.81, t1.a, 0.1
    assert np.array_equal(m.A, [[V, H, 0], [g, V, g], [0, a * V**2, 0]])
    assert m.B[1, 0] == Cf * V**2 / H**2
    assert m.B[1, 1] == -2 * Cf * V / H
    assert np.count_nonzero(m.B) == 2
    assert np.trace(m.A) == pytest.approx(2 * V, rel=1e-12)
    assert np.linalg.det(m.A) == pytest.approx(-g * a * V**3, rel=1e-12)
    with pytest.raises(ValueError):
        m.A[0, 0] = 1.0
