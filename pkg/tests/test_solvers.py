import numpy as np
import pytest

from mlsw import ConfigError, DepthLoss, Grid, StateU, derive_params
from mlsw.changevar import u_to_v
from mlsw.solvers import (AcousticState, InitialRecipe, Mode, RigidLidState, SolverConfig,
                          acoustic_initialization, acoustic_norm_sq, acoustic_propagate,
                          build_initial_data, cfl_dt, compose_Uapp, fs_rhs_u, fs_rhs_v,
                          integrate, prepared_quantities, rigid_lid_initialization, rk4_step,
                          rl_constraint_residual, rl_pressure, rl_project, rl_rhs,
                          run_free_surface, total_flux, wellprepare)
from mlsw.spectral import spectral_ops

TWO_PI = 2 * np.pi
SQUARE = Grid(2, (TWO_PI, TWO_PI), (32, 32))
SMALL_RECIPE = InitialRecipe([
    Mode("zeta1", 1, (1, 0), 0.2), Mode("zeta", 2, (1, 1), 0.05, 0.3),
    Mode("ux", 1, (0, 1), 0.05), Mode("uy", 2, (1, 0), 0.05, 1.0)])


def two_layer(rho=0.2, d=2):
    return derive_params(2, d, [1, 1], [1], rho)


# ---------------------------------------------------------------- free surface

def test_rest_has_zero_tendency():
    p = two_layer()
    rest = np.zeros((p.nvar,) + SQUARE.n)
    assert not fs_rhs_u(p, SQUARE, rest).any()
    assert not fs_rhs_v(p, SQUARE, rest).any()
    assert not rl_rhs(p, SQUARE, rest).any()


def test_single_layer_matches_scalar_shallow_water():
    rho, depth = 0.3, 1.5
    p = derive_params(1, 1, [depth], [], rho)
    g = Grid(1, (TWO_PI,), (64,))
    x = g.coordinates()[0]
    s = 0.4 * np.cos(x) + 0.1 * np.sin(3 * x)
    u = 0.2 * np.sin(2 * x) - 0.05 * np.cos(x)
    k = np.fft.fftfreq(64, 1 / 64)

    def dx(f):
        return np.fft.ifft(1j * k * np.fft.fft(f)).real

    h = depth + rho * s
    # s = zeta/rho: s_t = -(hu)_x / rho, u_t = -u u_x - s_x / rho
    expected = np.stack([-dx(h * u) / rho, -u * dx(u) - dx(s) / rho])
    np.testing.assert_allclose(fs_rhs_u(p, g, np.stack([s, u])), expected, atol=1e-12)


def test_surface_tendency_is_flux_divergence():
    p = two_layer(0.1)
    U = build_initial_data(p, SQUARE, SMALL_RECIPE).to_array()
    ops = spectral_ops(SQUARE)
    w = total_flux(p, U)
    tend = fs_rhs_u(p, SQUARE, U)
    expected = -ops.filter(ops.div(w)) / p.rho
    np.testing.assert_allclose(tend[0], expected, atol=1e-11)


def test_linear_mode_dispersion():
    p = two_layer(0.1)
    eps = 1e-6
    U = np.zeros((p.nvar,) + SQUARE.n)
    x, y = SQUARE.coordinates()
    U[2] = eps * np.cos(2 * x + y)     # ux in layer 1
    ops = spectral_ops(SQUARE)
    w_hat = ops.fft(total_flux(p, U))
    growth = ops.fft(fs_rhs_u(p, SQUARE, U)[0])
    expected = -np.sum(1j * ops.kd * w_hat, axis=0) / p.rho
    np.testing.assert_allclose(growth, expected, atol=1e-9 * eps * 32 * 32)


def test_interface_tendencies_are_mean_free():
    p = derive_params(3, 2, [1, 1, 1], [0.5, 0.5], 0.2)
    rng = np.random.default_rng(3)
    U = spectral_ops(SQUARE).filter(0.05 * rng.normal(size=(p.nvar,) + SQUARE.n))
    tend = fs_rhs_u(p, SQUARE, U)
    assert np.abs(tend[:3].mean(axis=(1, 2))).max() < 1e-13


def test_normal_form_tendency_is_consistent():
    p = two_layer(0.2)
    U = build_initial_data(p, SQUARE, SMALL_RECIPE).to_array()
    V = u_to_v(p, U)
    fu, fv = fs_rhs_u(p, SQUARE, U), fs_rhs_v(p, SQUARE, V)

    def gap(dt):
        return np.abs(u_to_v(p, U + dt * fu) - (V + dt * fv)).max()
    e1, e2 = gap(1e-3), gap(5e-4)
    assert e1 < 1e-3
    assert np.log2(e1 / e2) == pytest.approx(2.0, abs=0.2)


def test_u_and_v_forms_agree():
    g = Grid(2, (TWO_PI, TWO_PI), (64, 64))
    p = two_layer(0.2)
    U0 = build_initial_data(p, g, SMALL_RECIPE).to_array()
    dt = cfl_dt(p, g, U0, 0.5)
    cfg = SolverConfig(0.5, 1.0, True, 0.5)
    a = run_free_surface(p, g, U0, cfg, "U", dt=dt)
    b = run_free_surface(p, g, U0, cfg, "V", dt=dt)
    for (ta, Ua), (tb, Ub) in zip(a, b):
        assert ta == tb
        assert np.sqrt(np.mean((Ua - Ub) ** 2)) < 1e-8


def test_depth_loss_is_raised():
    p = two_layer(0.2, d=1)
    g = Grid(1, (TWO_PI,), (16,))
    U = np.zeros((4, 16))
    U[1] = 1.2
    with pytest.raises(DepthLoss):
        fs_rhs_u(p, g, U)


# ---------------------------------------------------------------- time stepping

def test_cfl_rest_value():
    p = derive_params(1, 1, [1.0], [], 0.1)
    g = Grid(1, (TWO_PI,), (128,))
    dt = cfl_dt(p, g, np.zeros((2, 128)), 0.5)
    assert dt == pytest.approx(0.5 * (TWO_PI / 128) * 0.1)
    assert dt == pytest.approx(2.454e-3, rel=1e-3)
    assert cfl_dt(p.with_rho(0.05), g, np.zeros((2, 128)), 0.5) == pytest.approx(dt / 2, rel=1e-3)


def test_cfl_uniform_flow_adds_speed():
    p = two_layer(0.1)
    rest = np.zeros((p.nvar,) + SQUARE.n)
    moving = rest.copy()
    moving[2:4] = 0.7
    s0 = 0.5 * SQUARE.dx_min / cfl_dt(p, SQUARE, rest, 0.5)
    s1 = 0.5 * SQUARE.dx_min / cfl_dt(p, SQUARE, moving, 0.5)
    assert s1 - s0 == pytest.approx(0.7, rel=1e-12)


def test_solver_config_validation():
    for bad in [dict(cfl_number=0.0), dict(cfl_number=1.5), dict(end_time=-1.0),
                dict(scheme="euler")]:
        with pytest.raises(ConfigError):
            SolverConfig(**bad)


def test_rk4_single_step_is_fourth_order_series():
    lam, dt = -0.7, 0.4
    z = lam * dt
    out = rk4_step(lambda y: lam * y, np.array([1.0]), dt)
    assert out[0] == pytest.approx(1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24, abs=1e-15)


def _acoustic_rhs(p, grid):
    ops = spectral_ops(grid, False)
    def rhs(y):
        z, w = y[0], y[1]
        return np.stack([-ops.div(w[None]), -p.total_depth / p.rho**2 * ops.grad(z)[0]])
    return rhs


def test_rk4_global_order_on_acoustic_system():
    p = derive_params(1, 1, [1.0], [], 0.5)
    g = Grid(1, (TWO_PI,), (32,))
    x = g.coordinates()[0]
    z0 = 0.1 * np.cos(2 * x)
    exact = acoustic_propagate(p, g, AcousticState(z0, np.zeros((1, 32))), 1.0)
    errs = []
    for n in [40, 80, 160]:
        y = np.stack([z0, np.zeros(32)])
        for _ in range(n):
            y = rk4_step(_acoustic_rhs(p, g), y, 1.0 / n)
        errs.append(np.abs(y[0] - exact.zeta1).max())
    order = np.polyfit(np.log([40, 80, 160]), np.log(errs), 1)[0]
    assert -order == pytest.approx(4.0, abs=0.3)


def test_integrate_lands_on_samples():
    seen = []
    out = integrate(lambda y: -y, np.array([1.0]), 1.0, lambda y: 0.3, [0.25, 0.5, 0.75],
                    on_sample=lambda t, y: seen.append(t))
    assert [t for t, _ in out] == [0.0, 0.25, 0.5, 0.75, 1.0] == seen
    assert out[-1][1][0] == pytest.approx(np.exp(-1.0), rel=1e-4)


# ---------------------------------------------------------------- acoustic

def test_acoustic_standing_wave():
    rho, eps = 0.2, 0.01
    p = derive_params(2, 1, [0.6, 1.4], [1], rho)
    g = Grid(1, (TWO_PI,), (32,))
    x = g.coordinates()[0]
    st0 = AcousticState(eps * np.cos(3 * x), np.zeros((1, 32)))
    for t in [0.0, 0.013, 0.37, 1.0]:
        out = acoustic_propagate(p, g, st0, t)
        exact = eps * np.cos(3 * x) * np.cos(np.sqrt(2.0) * 3 * t / rho)
        np.testing.assert_allclose(out.zeta1, exact, atol=1e-12)


def _random_acoustic(rng, p, grid):
    ops = spectral_ops(grid)
    z = ops.filter(0.01 * rng.normal(size=grid.n))
    w = ops.leray(ops.filter(rng.normal(size=(grid.d,) + grid.n)))
    return AcousticState(z, w)


@pytest.mark.parametrize("d", [1, 2])
def test_acoustic_isometry_and_group(d, rng):
    p = derive_params(2, d, [1, 1], [1], 0.1)
    g = Grid(d, (TWO_PI,) * d, (32,) * d)
    st0 = _random_acoustic(rng, p, g)
    n0 = acoustic_norm_sq(p, g, st0)
    for t in [0.1, 0.77, 3.0]:
        fwd = acoustic_propagate(p, g, st0, t)
        assert abs(acoustic_norm_sq(p, g, fwd) - n0) < 1e-13 * n0
        back = acoustic_propagate(p, g, fwd, -t)
        np.testing.assert_allclose(back.zeta1, st0.zeta1, atol=1e-13)
        np.testing.assert_allclose(back.w, st0.w, atol=1e-13)
    two = acoustic_propagate(p, g, acoustic_propagate(p, g, st0, 0.3), 0.4)
    once = acoustic_propagate(p, g, st0, 0.7)
    np.testing.assert_allclose(two.zeta1, once.zeta1, atol=1e-13)


def test_acoustic_rejects_rotational_flux():
    p = two_layer(0.1)
    x, y = SQUARE.coordinates()
    w = np.stack([np.cos(y), np.zeros_like(y)])   # pure shear flow
    with pytest.raises(ConfigError):
        acoustic_propagate(p, SQUARE, AcousticState(np.zeros(SQUARE.n), w), 0.1)


# ---------------------------------------------------------------- rigid lid

def test_pressure_of_cellular_flow():
    # u = (cos y, cos x): div div (u u) = 2 sin x sin y, so p = sin x sin y
    p = derive_params(1, 2, [1.3], [], 0.1)
    x, y = SQUARE.coordinates()
    U = np.stack([np.zeros_like(x), np.cos(y), np.cos(x)])
    pres, resid = rl_pressure(p, SQUARE, U, return_residual=True)
    np.testing.assert_allclose(pres, np.sin(x) * np.sin(y), atol=1e-12)
    assert resid < 1e-12
    assert not rl_pressure(p, SQUARE, np.zeros_like(U)).any()


def test_projection_keeps_shear_and_enforces_constraint():
    p = two_layer(0.1)
    U = build_initial_data(p, SQUARE, SMALL_RECIPE).to_array()
    out = rl_project(p, SQUARE, U)
    assert not out[0].any()
    assert rl_constraint_residual(p, SQUARE, out) < 1e-12
    np.testing.assert_allclose(out[3] - out[2], U[3] - U[2], atol=1e-14)
    np.testing.assert_allclose(out[5] - out[4], U[5] - U[4], atol=1e-14)


def test_rigid_lid_preserves_constraint_short_run():
    p = two_layer(0.1)
    U = rl_project(p, SQUARE, build_initial_data(p, SQUARE, SMALL_RECIPE).to_array())
    ops = spectral_ops(SQUARE)
    for _ in range(50):
        U = rl_project(p, SQUARE, rk4_step(lambda y: rl_rhs(p, SQUARE, y, ops), U, 0.01))
    assert rl_constraint_residual(p, SQUARE, U) < 1e-10


def test_rigid_lid_state_roundtrip():
    p = two_layer(0.1)
    U = rl_project(p, SQUARE, build_initial_data(p, SQUARE, SMALL_RECIPE).to_array())
    st = RigidLidState.from_array(p, U)
    np.testing.assert_array_equal(st.to_array(p), U)
    np.testing.assert_allclose(rl_rhs(p, SQUARE, st).to_array(p), rl_rhs(p, SQUARE, U))


# ---------------------------------------------------------------- initial data

def test_empty_recipe_is_rest():
    p = two_layer()
    assert not build_initial_data(p, SQUARE, InitialRecipe()).to_array().any()


def test_single_mode_amplitude():
    p = two_layer()
    st = build_initial_data(p, SQUARE, InitialRecipe([Mode("uy", 2, (2, 1), 0.3)]))
    arr = st.to_array()
    assert arr[5].max() == pytest.approx(0.3)
    assert arr[5, 0, 0] == pytest.approx(0.3)
    assert np.count_nonzero(np.abs(arr).max(axis=(1, 2))) == 1


@pytest.mark.parametrize("mode", [
    Mode("zeta", 1, (1, 0), 0.1),     # interface 1 is the surface
    Mode("ux", 3, (1, 0), 0.1),       # no third layer
    Mode("ux", 1, (11, 0), 0.1),      # outside the dealiased band on 32 points
    Mode("ux", 1, (1,), 0.1),         # wrong index count
    Mode("vort", 1, (1, 0), 0.1),
    Mode("zeta", 2, (1, 0), 0.95),    # empties a layer below h0
    Mode("ux", 2, (1, 0), 1.1),       # shear 1.1 > 1/nu
])
def test_bad_recipes_rejected(mode):
    with pytest.raises(ConfigError):
        build_initial_data(two_layer(), SQUARE, InitialRecipe([mode]))


def test_uy_needs_two_dimensions():
    g = Grid(1, (TWO_PI,), (32,))
    with pytest.raises(ConfigError):
        build_initial_data(two_layer(d=1), g, InitialRecipe([Mode("uy", 1, (1,), 0.1)]))


def test_wellprepare_leaves_prepared_state_alone():
    p = two_layer(0.1)
    x, y = SQUARE.coordinates()
    U = np.zeros((p.nvar,) + SQUARE.n)
    U[2] = U[3] = np.cos(y)
    U[4] = U[5] = np.cos(x)
    out = wellprepare(p, SQUARE, U).to_array()
    assert np.abs(out - U).max() < 1e-12


def test_wellprepared_quantities_stay_bounded():
    q = []
    for rho in [0.2, 0.1, 0.05, 0.025]:
        p = two_layer(rho)
        U = wellprepare(p, SQUARE, build_initial_data(p, SQUARE, SMALL_RECIPE))
        q.append(prepared_quantities(p, SQUARE, U))
    q = np.array(q)
    assert q[:, 0].max() < 2 * q[0, 0]
    assert np.all(np.diff(q[:, 1]) <= 0)


def test_compose_with_zero_parts():
    p = two_layer(0.1)
    U = rl_project(p, SQUARE, build_initial_data(p, SQUARE, SMALL_RECIPE).to_array())
    rl = RigidLidState.from_array(p, U)
    pres = rl_pressure(p, SQUARE, U)
    quiet = AcousticState(np.zeros(SQUARE.n), np.zeros((2,) + SQUARE.n))
    out = compose_Uapp(p, SQUARE, rl, pres, quiet).to_array()
    np.testing.assert_allclose(out[0], p.rho * pres)
    np.testing.assert_allclose(out[1:], U[1:])

    x, y = SQUARE.coordinates()
    w = np.stack([np.sin(x), np.zeros_like(x)])
    ac = AcousticState(0.01 * np.cos(x), w)
    still = RigidLidState(np.zeros((1,) + SQUARE.n), np.zeros((2, 2) + SQUARE.n))
    out = compose_Uapp(p, SQUARE, still, np.zeros(SQUARE.n), ac).to_array()
    np.testing.assert_allclose(out[0], 0.01 * np.cos(x) / p.rho)
    for row in (2, 3):
        np.testing.assert_allclose(out[row], np.sin(x) / p.total_depth, atol=1e-14)


def test_initial_mismatch_is_order_rho():
    ratios = []
    for rho in [0.2, 0.1, 0.05]:
        p = two_layer(rho)
        U = build_initial_data(p, SQUARE, SMALL_RECIPE).to_array()
        rl = rigid_lid_initialization(p, SQUARE, U)
        ac = acoustic_initialization(p, SQUARE, U)
        pres = rl_pressure(p, SQUARE, rl)
        diff = compose_Uapp(p, SQUARE, rl, pres, ac).to_array() - U
        ratios.append(spectral_ops(SQUARE).l2(diff) / rho)
    assert max(ratios) / min(ratios) < 1.5
