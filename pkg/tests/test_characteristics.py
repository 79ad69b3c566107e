import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sve_backstepping.characteristics import (
    CharField, Regime, char_coefficients, characteristic_polynomial, cubic_roots,
    from_characteristic, left_eigenvectors, rescale_w, scaling_factors, spectrum,
    to_characteristic, transform_matrix, unrescale_w)
from sve_backstepping.errors import (CriticalFlowError, DegeneracyError, ScalingError)
from sve_backstepping.model import EquilibriumSetup, PhysicalParams, froude, linearize

setups = st.builds(
    lambda H, V, Ag, Cf: EquilibriumSetup(PhysicalParams(Cf=Cf, Ag=Ag, pg=0.002), H, V),
    st.floats(0.2, 5.0), st.floats(0.3, 8.0), st.floats(1e-4, 0.02), st.floats(0.01, 0.3))


def _regular(setup):
    fr = froude(setup.Hstar, setup.Vstar, setup.g)
    return abs(fr - 1.0) > 0.05


def test_cubic_roots_known():
    r = cubic_roots(-6.0, 11.0, -6.0)
    assert np.allclose(r, [1, 2, 3], atol=1e-14)


@pytest.mark.parametrize("c", [(0.0, 1.0, 0.0), (-3.0, 3.0, -1.0)])
def test_cubic_roots_degenerate(c):
    with pytest.raises(DegeneracyError):
        cubic_roots(*c)


def test_table1_spectrum(t1):
    sp = spectrum(t1)
    assert sp.regime is Regime.SUBCRITICAL
    assert sp.lam[0] < 0 < sp.lam[1] < sp.lam[2]
    assert np.allclose(sp.lam, [-1.99379, 0.42192, 7.57187], atol=1e-5)


def test_table2_spectrum(t2):
    sp = spectrum(t2)
    assert sp.regime is Regime.SUPERCRITICAL
    assert sp.lam[1] < 0 < sp.lam[0] < sp.lam[2]
    assert np.allclose(sp.lam, [2.31021, -0.57890, 8.26868], atol=1e-5)


@settings(max_examples=60, deadline=None)
@given(setups)
def test_vieta_and_sign_pattern(setup):
    if not _regular(setup):
        return
    sp = spectrum(setup)
    _, c2, c1, c0 = characteristic_polynomial(setup)
    l = sp.lam
    assert abs(l.sum() + c2) <= 1e-9 * max(1, abs(c2))
    assert abs(l[0] * l[1] + l[0] * l[2] + l[1] * l[2] - c1) <= 1e-9 * max(1, abs(c1))
    assert abs(np.prod(l) + c0) <= 1e-9 * max(1, abs(c0))
    assert np.sum(l < 0) == 1
    expected = Regime.SUBCRITICAL if froude(setup.Hstar, setup.Vstar) < 1 else Regime.SUPERCRITICAL
    assert sp.regime is expected
    assert l[sp.v_index] < 0


@settings(max_examples=40, deadline=None)
@given(setups)
def test_left_eigenvectors(setup):
    if not _regular(setup):
        return
    sp = spectrum(setup)
    A = linearize(setup).A
    L = left_eigenvectors(setup, sp)
    for k in range(3):
        assert np.allclose(L[k] @ A, sp.lam[k] * L[k], rtol=1e-9, atol=1e-9 * np.abs(A).max())


@settings(max_examples=40, deadline=None)
@given(setups)
def test_characteristic_form_coupling(setup):
    # xi_t + Lambda xi_x = M xi with every row of M equal to alphaK
    if not _regular(setup):
        return
    sp = spectrum(setup)
    cc = char_coefficients(setup, sp)
    T = transform_matrix(setup, sp)
    M = T @ linearize(setup).B @ np.linalg.inv(T)
    assert np.allclose(M, np.tile(cc.alphaK, (3, 1)), rtol=1e-7, atol=1e-9 * np.abs(M).max())
    assert np.allclose(T @ linearize(setup).A @ np.linalg.inv(T), np.diag(sp.lam),
                       atol=1e-8 * np.abs(sp.lam).max())


def test_char_coefficients_relabeling(t1, t2):
    for s in (t1, t2):
        sp = spectrum(s)
        cc = char_coefficients(s, sp)
        assert cc.mu == -sp.lam[sp.v_index]
        assert (cc.gamma1, cc.gamma2) == (sp.lam[sp.u1_index], sp.lam[sp.u2_index])
        assert 0 < cc.gamma1 < cc.gamma2
        assert cc.alpha1 == cc.alphaK[sp.v_index]
        x = np.linspace(0, 1, 5)
        assert np.allclose(cc.alpha(x), cc.alpha1 * np.exp(cc.alpha1 * x / cc.mu))
        assert np.allclose(cc.theta1(x), cc.eta1 * np.exp(cc.alpha1 * x / cc.mu))
        assert np.array_equal(cc.sigma[0], cc.sigma[1])


def test_scaling_factor_formula(t1):
    sp = spectrum(t1)
    r = scaling_factors(t1, sp)
    l = sp.lam
    assert r[0] == pytest.approx(0.1 * 1.5 * l[0] / ((l[0] - l[1]) * (l[0] - l[2])))


def test_frictionless_rejected():
    s = EquilibriumSetup(PhysicalParams(Cf=0.0), 2.0, 3.0)
    with pytest.raises(ScalingError):
        char_coefficients(s, spectrum(s))


def test_no_sediment_is_critical():
    # a = 0 puts one eigenvalue at zero
    s = EquilibriumSetup(PhysicalParams(Ag=0.0), 2.0, 3.0)
    with pytest.raises(CriticalFlowError):
        spectrum(s)


@settings(max_examples=40, deadline=None)
@given(setups, st.integers(0, 2**31 - 1))
def test_round_trip(setup, seed):
    if not _regular(setup):
        return
    rng = np.random.default_rng(seed)
    sp = spectrum(setup)
    cc = char_coefficients(setup, sp)
    h, u, b = rng.normal(size=(3, 21))
    cf = rescale_w(to_characteristic(setup, sp, h, u, b), cc.alpha1, cc.mu)
    back = unrescale_w(CharField(cf.x, cf.u1, cf.u2, w=cf.w), cc.alpha1, cc.mu)
    h2, u2, b2 = from_characteristic(setup, sp, back)
    scale = max(1.0, np.abs([h, u, b]).max())
    assert np.abs(np.array([h2 - h, u2 - u, b2 - b])).max() < 1e-12 * scale * np.linalg.cond(
        transform_matrix(setup, sp))


def test_from_characteristic_needs_v(t1):
    sp = spectrum(t1)
    with pytest.raises(ValueError):
        from_characteristic(t1, sp, CharField(np.zeros(3), np.zeros(3), np.zeros(3), w=np.zeros(3)))


def test_no_sediment_roots():
    # a = 0 factors as lambda ((lambda - V)^2 - g H)
    r = cubic_roots(-6.0, 9.0 - 9.81 * 2.0, 0.0)
    s = np.sqrt(9.81 * 2.0)
    assert np.allclose(r, [3 - s, 0.0, 3 + s], atol=1e-12)


def test_companion_matrix_oracle(t2):
    poly = characteristic_polynomial(t2)
    comp = np.diag(np.ones(2), -1)
    comp[:, -1] = -poly[:0:-1]
    ref = np.sort(np.linalg.eigvals(comp).real)
    assert np.allclose(np.sort(spectrum(t2).lam), ref, atol=1e-9)


def test_left_eigenvectors_null_space_oracle(t1, t2):
    for s in (t1, t2):
        sp = spectrum(s)
        A = linearize(s).A
        L = left_eigenvectors(s, sp)
        for k in range(3):
            _, _, vt = np.linalg.svd((A - sp.lam[k] * np.eye(3)).T)
            null = vt[-1]
            cosang = abs(null @ L[k]) / np.linalg.norm(L[k])
            assert cosang == pytest.approx(1.0, abs=1e-10)
            i, j = [m for m in range(3) if m != k]
            assert (sp.lam[k] - sp.lam[i]) * (sp.lam[k] - sp.lam[j]) * L[k, 2] == pytest.approx(9.81 * s.Hstar)


def test_alpha_profile_table2(t2):
    cc = char_coefficients(t2, spectrum(t2))
    assert cc.alpha(0.0) == cc.alpha1
    assert cc.alpha(0.5) / cc.alpha(0.0) == pytest.approx(np.exp(cc.alpha1 * 0.5 / cc.mu), rel=1e-14)


def test_impulse_maps_to_right_eigenvector(t2):
    sp = spectrum(t2)
    z = np.zeros(1)
    # unit impulse in the second characteristic coordinate (index order of the regime)
    xi = np.zeros(3)
    xi[1] = 1.0
    iv, i1, i2 = sp.order
    cf = CharField(z, u1=np.array([xi[i1]]), u2=np.array([xi[i2]]), v=np.array([xi[iv]]))
    W = np.array([f[0] for f in from_characteristic(t2, sp, cf)])
    A = linearize(t2).A
    assert np.allclose(A @ W, sp.lam[1] * W, atol=1e-12 * np.abs(W).max())
    assert np.allclose(np.linalg.solve(transform_matrix(t2, sp), xi), W)


def test_rescale_identities(rng):
    x = np.linspace(0, 1, 9)
    v = rng.normal(size=9)
    cf = CharField(x, v, v, v=v)
    assert np.array_equal(rescale_w(cf, 0.0, 2.0).w, v)
    out = rescale_w(cf, -0.3, 0.7)
    assert out.w[0] == v[0]
    back = unrescale_w(CharField(x, v, v, w=out.w), -0.3, 0.7)
    assert np.abs(back.v - v).max() < 1e-14


def test_zero_deviation_maps_to_zero(t1):
    sp = spectrum(t1)
    cf = to_characteristic(t1, sp, np.zeros(4), np.zeros(4), np.zeros(4))
    assert not np.any(cf.u1) and not np.any(cf.u2) and not np.any(cf.v)
