import numpy as np
import pytest

from sve_backstepping.characteristics import (CharField, char_coefficients, from_characteristic,
                                              spectrum, unrescale_w)
from sve_backstepping.errors import CFLError, DomainError, SVEError
from sve_backstepping.kernels import (AbstractCoefficients, KernelField, TriangleGrid,
                                      solve_controller_kernels, solve_observer_kernels)
from sve_backstepping.simulation import (
    BoundaryTerms, ClosedLoop, Controller, FeedbackKernels, Grid, LyapunovWeights, PlantState,
    SimConfig, control_full_state, control_output_feedback, error_step, init_state,
    initial_profiles, lyapunov_v, lyapunov_v1, lyapunov_v2, observer_step, run, step, to_target)


def _state(x, u1, u2, w, t=0.0):
    f = lambda v: np.broadcast_to(np.asarray(v, dtype=float), x.shape).copy()
    return PlantState(t, f(u1), f(u2), f(w))


def _const_kernels(n, k1, k2, k3):
    g = TriangleGrid(n)
    m = g.mask
    return KernelField(g, *(np.where(m, v, np.nan) for v in (k1, k2, k3)))


def _coupled():
    return AbstractCoefficients.constant(
        1.3, 0.8, 2.1, sigma=[[0.2, -0.1], [0.05, -0.3]], alpha=-0.4, theta1=0.6, theta2=-0.3,
        q1=0.7, q2=-0.5, rho1=0.9, rho2=0.4)


# --- initial data -------------------------------------------------------

def test_initial_profiles():
    H, V, B = initial_profiles(np.array([0.0, 0.5]))
    assert B[1] == pytest.approx(0.5, abs=1e-15)
    assert H[1] == pytest.approx(2.0, abs=1e-15)
    assert V[1] == pytest.approx(5.0, abs=1e-14)
    assert B[0] == pytest.approx(0.4, abs=1e-30)


@pytest.mark.parametrize("which", ["t1", "t2"])
def test_init_state_round_trip(which, request):
    setup = request.getfixturevalue(which)
    cfg = SimConfig(setup)
    st = init_state(cfg)
    sp = spectrum(setup)
    cc = char_coefficients(setup, sp)
    x = np.linspace(0, 1, cfg.cells + 1)
    cf = unrescale_w(CharField(x, st.u1, st.u2, w=st.w), cc.alpha1, cc.mu)
    h, u, b = from_characteristic(setup, sp, cf)
    H, V, B = initial_profiles(x)
    assert np.abs(h - (H - setup.Hstar)).max() < 1e-12
    assert np.abs(u - (V - setup.Vstar)).max() < 1e-12
    assert np.abs(b - (B - setup.Bstar)).max() < 1e-12


# --- plant step ---------------------------------------------------------

def test_zero_state_stays_zero():
    g = Grid(_coupled(), 20)
    st = _state(g.x, 0, 0, 0)
    new = step(g, st, 0.0, g.dt)
    assert not np.any(new.u1) and not np.any(new.u2) and not np.any(new.w)


def test_unit_courant_shift_is_exact():
    c = AbstractCoefficients.constant(1.0, 1.0, 1.0)
    g = Grid(c, 40, cfl=1.0)
    rng = np.random.default_rng(3)
    st = PlantState(0.0, *rng.normal(size=(3, 41)))
    new = step(g, st, 0.0, g.dt)
    assert np.array_equal(new.w[:-1], st.w[1:])
    assert np.array_equal(new.u1[1:], st.u1[:-1])
    assert np.array_equal(new.u2[1:], st.u2[:-1])


def test_cfl_violation():
    g = Grid(_coupled(), 20)
    st = _state(g.x, 0, 0, 0)
    with pytest.raises(CFLError):
        step(g, st, 0.0, 1.01 * g.dx / g.max_speed)


def _transport_error(cells):
    c = AbstractCoefficients.constant(1.0, 0.5, 0.8)
    g = Grid(c, cells, cfl=0.8)
    x = g.x
    bump = lambda s: np.exp(-80 * (s - 0.5) ** 2)
    st = _state(x, bump(x), bump(x), bump(x))
    T, t = 0.1, 0.0
    while t < T - 1e-14:
        dt = min(g.dt, T - t)
        st = step(g, st, 0.0, dt)
        t += dt
    err = [np.abs(st.u1 - bump(x - 0.5 * T)), np.abs(st.u2 - bump(x - 0.8 * T)),
           np.abs(st.w - bump(x + 1.0 * T))]
    return sum(g.integrate(e) for e in err)


def test_smooth_transport_first_order():
    e = [_transport_error(n) for n in (100, 200, 400)]
    orders = np.log2(np.array(e[:-1]) / np.array(e[1:]))
    assert np.all(orders >= 0.8)


def test_uncoupled_outflow_is_nonincreasing():
    c = AbstractCoefficients.constant(1.0, 0.6, 1.7)
    loop = ClosedLoop(c, cells=50, cfl=0.9)
    x = loop.grid.x
    # inflow values already zero, as the boundary conditions demand
    st = _state(x, np.sin(3 * x), x * np.cos(x), 1 - x)
    sups = []
    res = loop.run(st, 2.0, callback=lambda p, o, U: sups.append(
        max(np.abs(p.u1).max(), np.abs(p.u2).max(), np.abs(p.w).max())))
    assert np.all(np.diff(sups) <= 1e-15)
    for k in ("norm_u1", "norm_u2", "norm_w"):
        assert np.all(np.diff(res.trace[k]) <= 1e-15)


# --- control laws -------------------------------------------------------

def test_control_zero_kernels():
    g = Grid(_coupled(), 20)
    fk = FeedbackKernels(_const_kernels(11, 0.0, 0.0, 0.0), g)
    st = _state(g.x, 0, 0, 0)
    st.u1[-1], st.u2[-1] = 2.0, -1.0
    assert control_full_state(st, fk, 1.5, 1.5) == pytest.approx(-1.5)
    assert control_full_state(_state(g.x, 0, 0, 0), fk, 1.5, 1.5) == 0.0


def test_control_constant_kernels():
    g = Grid(_coupled(), 20)
    fk = FeedbackKernels(_const_kernels(11, -1.0, 0.0, -1.0), g)
    assert control_full_state(_state(g.x, 1, 0, 1), fk, 0.0, 0.0) == pytest.approx(-2.0, abs=1e-14)


def test_to_target_identity_for_zero_kernels():
    g = Grid(_coupled(), 20)
    fk = FeedbackKernels(_const_kernels(11, 0.0, 0.0, 0.0), g)
    st = _state(g.x, g.x, -g.x, np.sin(g.x))
    psi1, psi2, chi = to_target(st, fk)
    assert np.array_equal(chi, st.w) and np.array_equal(psi1, st.u1)


def test_output_feedback_laws():
    g = Grid(_coupled(), 20)
    fk = FeedbackKernels(_const_kernels(11, 0.3, -0.2, 0.5), g)
    x = g.x
    plant = _state(x, np.sin(x), np.cos(x), x**2)
    assert control_output_feedback(plant, plant, fk, 0.9, 0.4) == control_full_state(plant, fk, 0.9, 0.4)
    zero = _state(x, 0, 0, 0)
    p = _state(x, 0, 0, 0)
    p.u1[-1] = 1.0
    assert control_output_feedback(p, zero, fk, 1.0, 0.0, BoundaryTerms.MEASURED) == -1.0
    assert control_output_feedback(p, zero, fk, 1.0, 0.0, BoundaryTerms.ESTIMATED) == 0.0


# --- observer -----------------------------------------------------------

@pytest.fixture(scope="module")
def coupled_loop():
    c = _coupled()
    kf = solve_controller_kernels(c, 61)
    of = solve_observer_kernels(c, 61)
    return ClosedLoop(c, cells=60, cfl=0.9, controller=Controller.OUTPUT_FEEDBACK,
                      controller_kernels=kf, observer_kernels=of)


def _initial(x):
    return _state(x, np.sin(4 * x), 1 - x, np.cos(2 * x) * x)


def test_observer_started_at_plant_tracks_exactly(coupled_loop):
    x = coupled_loop.grid.x
    st = _initial(x)
    res = coupled_loop.run(st, 1.0, observer_initial=st)
    assert np.all(res.trace["obs_err"] == 0.0)
    assert np.array_equal(res.final.w, res.final_observer.w)


def test_observer_with_zero_gains_is_boundary_driven_copy():
    c = _coupled()
    g = Grid(c, 30)
    x = g.x
    obs = _state(x, 0.1, 0.2, 0.3)
    zero = (np.zeros_like(x),) * 3
    a = observer_step(g, obs, 5.0, 0.7, 0.25, zero, g.dt)
    b = step(g, obs, 0.25, g.dt)
    assert np.array_equal(a.u1[1:], b.u1[1:]) and np.array_equal(a.w[:-1], b.w[:-1])
    assert a.u1[0] == c.q1 * 0.7 and a.u2[0] == c.q2 * 0.7


def test_error_system_cross_check(coupled_loop):
    g = coupled_loop.grid
    x = g.x
    plant = _initial(x)
    obs = _state(x, 0, 0, 0)
    err = plant - obs
    for _ in range(100):
        plant, obs, U = coupled_loop.advance(plant, obs, g.dt)
        err = error_step(g, err, coupled_loop.gains, g.dt)
        d = plant - obs
        scale = max(1.0, np.abs(err.w).max())
        for a, b in ((d.u1, err.u1), (d.u2, err.u2), (d.w, err.w)):
            assert np.abs(a - b).max() < 1e-10 * scale


def test_error_independent_of_control(coupled_loop):
    x = coupled_loop.grid.x
    st = _initial(x)
    a = coupled_loop.run(st, 1.0)
    b = coupled_loop.run(st, 1.0, offset=lambda t: 3.0 * np.sin(7 * t) + 1.0)
    assert np.abs(a.trace["obs_err"] - b.trace["obs_err"]).max() < 1e-10
    assert np.abs(a.trace["U"] - b.trace["U"]).max() > 0.5


# --- Lyapunov functionals ----------------------------------------------

def test_lyapunov_values():
    x = np.linspace(0, 1, 2001)
    z, one = np.zeros_like(x), np.ones_like(x)
    wt = LyapunovWeights()
    assert lyapunov_v1(x, z, z, z, wt, 1.0, 1.0, 1.0) == 0.0
    assert lyapunov_v2(x, z, z, z, wt, 1.0, 1.0, 1.0) == 0.0
    assert lyapunov_v1(x, z, z, one, wt, 1.0, 1.0, 2.0) == pytest.approx(0.75, abs=1e-14)
    assert lyapunov_v1(x, one, z, z, wt, 2.0, 1.0, 1.0) == pytest.approx((1 - np.exp(-1)) / 2, abs=1e-7)
    assert lyapunov_v2(x, z, z, one, wt, 1.0, 1.0, 1.0) == pytest.approx((np.exp(2) - 1) / 2, abs=1e-6)
    assert lyapunov_v(1.0, 2.0, LyapunovWeights(b=0.5)) == 2.0


def test_lyapunov_weights_positive():
    with pytest.raises(DomainError):
        LyapunovWeights(delta2=0.0)


# --- configuration and full runs ---------------------------------------

@pytest.mark.parametrize("kw", [dict(cells=5), dict(cfl=0.0), dict(cfl=1.2), dict(t_final=0.0),
                                dict(observer_init="random")])
def test_sim_config_invariants(t1, kw):
    with pytest.raises(DomainError):
        SimConfig(t1, **kw)


def test_controller_needs_kernels():
    with pytest.raises(SVEError):
        ClosedLoop(_coupled(), controller=Controller.FULL_STATE)


@pytest.fixture(scope="module")
def t1_short(t1):
    return run(SimConfig(t1, cells=40, cfl=0.95, t_final=1.5, controller="state", kernel_n=81))


def test_boundary_identities_every_step(t1):
    cfg = SimConfig(t1, cells=40, cfl=0.95, t_final=1.0, controller="state", kernel_n=81)
    c = t1
    bad = []

    def check(p, o, U):
        bad.append(abs(p.u1[0] - c.q1 * p.w[0]) + abs(p.u2[0] - c.q2 * p.w[0]))
        scale = max(1.0, abs(U), abs(p.w[-1]))
        bad.append(abs(p.w[-1] - c.rho1 * p.u1[-1] - c.rho2 * p.u2[-1] - U) / scale)

    run(cfg, callback=check)
    assert max(bad) < 8 * np.finfo(float).eps


def test_chi_vanishes_at_actuated_end(t1_short):
    tr = t1_short.trace
    assert np.all(np.abs(tr["chi_end"][1:]) < 1e-10 * tr.norm[1:])
    assert np.array_equal(tr["y"], tr["y"])    # finite
    assert np.all(tr["norm_w"] >= 0)


def test_snapshots(t1_short):
    snaps = t1_short.snapshots
    assert len(snaps) == 10
    assert snaps[0].t == 0.0 and snaps[-1].t == pytest.approx(1.5)
    assert all(s.physical is not None and s.v is not None for s in snaps)


def test_trace_ends_on_t_final(t1_short):
    assert t1_short.trace["t"][-1] == pytest.approx(1.5, abs=1e-12)
    assert np.all(np.diff(t1_short.trace["t"]) > 0)


def test_deterministic(t1):
    cfg = SimConfig(t1, cells=30, cfl=0.95, t_final=0.5, controller="state", kernel_n=41)
    a, b = run(cfg).trace, run(cfg).trace
    for k in a.columns:
        assert np.array_equal(a[k], b[k], equal_nan=True)


@pytest.mark.parametrize("s", [2.0, 0.5, -4.0])
def test_linearity_power_of_two_exact(coupled_loop, s):
    x = coupled_loop.grid.x
    st = _initial(x)
    a = coupled_loop.run(st, 0.5)
    b = coupled_loop.run(st.scaled(s), 0.5)
    assert np.array_equal(b.trace["U"], s * a.trace["U"])
    assert np.array_equal(b.trace["y"], s * a.trace["y"])
    assert np.array_equal(b.final.w, s * a.final.w)
    assert np.array_equal(b.final_observer.u1, s * a.final_observer.u1)


def test_linearity_general_scale(coupled_loop):
    x = coupled_loop.grid.x
    st = _initial(x)
    a = coupled_loop.run(st, 0.5)
    b = coupled_loop.run(st.scaled(3.0), 0.5)
    assert np.allclose(b.trace["U"], 3.0 * a.trace["U"], rtol=1e-12, atol=1e-12)


def test_trace_csv(tmp_path, t1_short):
    p = tmp_path / "trace.csv"
    t1_short.trace.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,U,y,norm_u1,norm_u2,norm_w,V1,V2,obs_err,chi_sup"
    assert len(lines) == len(t1_short.trace) + 1
    first = lines[1].split(",")
    assert first[7] == "" and first[8] == ""     # no observer in a state-feedback run


def test_measured_and_estimated_both_stabilize(t2):
    a = run(SimConfig(t2, t_final=8.0, controller="output", boundary_terms="measured"))
    b = run(SimConfig(t2, t_final=8.0, controller="output", boundary_terms="estimated"))
    for r in (a, b):
        assert r.trace.norm[-1] < 1e-3 * r.trace.norm[0]
    # observer errors coincide: the reflection terms only change the plant input
    assert np.abs(a.trace["obs_err"] - b.trace["obs_err"]).max() < 1e-9 * a.trace["obs_err"][0]
    t = a.trace["t"]
    late = t > 4.0
    umax = np.abs(a.trace["U"]).max()
    assert np.abs(a.trace["U"][late] - b.trace["U"][late]).max() < 0.01 * umax
