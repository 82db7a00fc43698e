import numpy as np
import pytest
from hypothesis import given, strategies as st

from flockgame.dynamics import (IntegrationError, IntegratorSpec, integrate, measured_perturbation, rhs_full,
                                rhs_opinion, rhs_velocity_only, rk4_path, speed_bound)
from flockgame.model import FlockState, Kernel, SystemParams
from flockgame.nash import OpinionGame

KERNELS = [Kernel.uniform(1.3), Kernel.smooth_power(1.0, 1.0), Kernel.truncated_power(1.5, 0.3)]


def random_state(seed, N=5, n=3):
    rng = np.random.default_rng(seed)
    return FlockState(rng.standard_normal((N, n)), rng.standard_normal((N, n)),
                      rng.uniform(0.5, 2.0, N), rng.uniform(0.2, 1.5, N))


def numpy_rk4(state, params, dt, n_steps):
    """Reference route: classical RK4 on the numpy right-hand side."""
    x, v, th = np.array(state.x), np.array(state.v), np.array(state.theta)

    def f(x, v, th):
        d = rhs_full(FlockState(x, v, th, state.m), params)
        return d.dx, d.dv, d.dtheta

    for _ in range(n_steps):
        k1 = f(x, v, th)
        k2 = f(*(a + 0.5 * dt * k for a, k in zip((x, v, th), k1)))
        k3 = f(*(a + 0.5 * dt * k for a, k in zip((x, v, th), k2)))
        k4 = f(*(a + dt * k for a, k in zip((x, v, th), k3)))
        x, v, th = (a + dt / 6 * (p + 2 * q + 2 * r + s) for a, p, q, r, s in zip((x, v, th), k1, k2, k3, k4))
    return x, v, th


@given(st.integers(0, 10_000), st.sampled_from(KERNELS), st.floats(0, 0.5), st.sampled_from([1.0, 2.0, 3.0]))
def test_compiled_stepper_matches_numpy_reference(seed, kernel, kappa, p):
    state = random_state(seed)
    params = SystemParams(sigma=0.7, kappa=kappa, p=p, kernel=kernel)
    tr = integrate(state, params, IntegratorSpec(dt=1e-2, t_final=0.2, record_every=20), probes=())
    x, v, th = numpy_rk4(state, params, 1e-2, 20)
    np.testing.assert_allclose(tr.x[-1], x, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(tr.v[-1], v, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(tr.theta[-1], th, rtol=1e-12, atol=1e-12)


def test_rk4_fourth_order_on_full_system():
    state = random_state(3)
    params = SystemParams(sigma=1.0, kappa=0.2, p=2.0, kernel=Kernel.smooth_power(1.0, 1.0))
    ref = integrate(state, params, IntegratorSpec(1e-4, 1.0, 10_000), probes=()).v[-1]
    errs = [np.abs(integrate(state, params, IntegratorSpec(dt, 1.0, 1000), probes=()).v[-1] - ref).max()
            for dt in (0.04, 0.02)]
    assert 12 < errs[0] / errs[1] < 20


def test_rk4_path_order():
    errs = []
    for dt in (0.1, 0.05):
        t, Y = rk4_path(lambda t, y: -y, [1.0], dt, int(round(2 / dt)), 1000)
        errs.append(abs(Y[-1, 0] - np.exp(-2.0)))
    assert 14 < errs[0] / errs[1] < 18


def test_rk4_path_stop_condition():
    t, Y = rk4_path(lambda t, y: -y, [1.0], 0.01, 10_000, 10, stop=lambda y: y[0] < 0.5)
    assert Y[-1, 0] < 0.5 <= Y[-2, 0]
    assert t[-1] < 1.0


def test_velocity_only_matches_full_rhs():
    state = random_state(1)
    params = SystemParams(sigma=0.8, kappa=0.0, p=2.0, kernel=Kernel.uniform(1.7))
    np.testing.assert_allclose(rhs_velocity_only(state.v, state.theta, state.m, params),
                               rhs_full(state, params).dv, rtol=1e-13, atol=1e-13)


def test_velocity_only_requires_uniform_kernel_and_frozen_theta():
    s = random_state(0)
    with pytest.raises(ValueError, match="uniform"):
        rhs_velocity_only(s.v, s.theta, s.m, SystemParams(1.0, kernel=Kernel.smooth_power(1, 1)))
    with pytest.raises(ValueError, match="kappa"):
        rhs_velocity_only(s.v, s.theta, s.m, SystemParams(1.0, kappa=0.1))


def test_rhs_opinion_vanishes_at_golden_equilibrium():
    game = OpinionGame([1.0, 3.0], [1.0, 1.0], 1.0, 1.0)
    y = np.array([(1 + 5 ** 0.5) / 2, (3 + 5 ** 0.5) / 2])
    assert np.abs(rhs_opinion(y, game)).max() < 1e-14
    with pytest.raises(ValueError):
        rhs_opinion([1.0, 0.0], game)


def test_measured_perturbation_zero_when_aligned_and_nonpositive_otherwise():
    params = SystemParams(sigma=1.0, kappa=0.0, p=2.0, kernel=Kernel.uniform(1.0))
    m = np.array([0.2, 0.3, 0.5])
    theta = np.array([0.5, 1.0, 2.0])
    game = OpinionGame(theta, m, 1.0, 2.0)
    aligned = FlockState(np.zeros((3, 2)), np.outer([0.5, 1.0, 2.0], [0.6, 0.8]), theta, m)
    assert np.abs(measured_perturbation(aligned, params, game)).max() < 1e-14
    spread = FlockState(np.zeros((3, 2)), [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.2]], theta, m)
    assert np.all(measured_perturbation(spread, params, game) <= 1e-15)


def test_theta_momentum_conserved_and_speeds_bounded():
    state = random_state(4, N=6)
    params = SystemParams(sigma=1.0, kappa=0.3, p=2.0, kernel=Kernel.smooth_power(1.0, 0.5))
    tr = integrate(state, params, IntegratorSpec(1e-2, 5.0, 10), probes=())
    mom = tr.theta @ tr.m
    assert np.abs(mom - mom[0]).max() <= 1e-12 * mom[0]
    assert np.linalg.norm(tr.v, axis=2).max() <= speed_bound(state, params) * (1 + 1e-9)


def test_integrate_is_deterministic_and_records_frames():
    state = random_state(5)
    params = SystemParams(sigma=1.0, kappa=0.1, kernel=Kernel.smooth_power(1.0, 1.0))
    spec = IntegratorSpec(1e-2, 1.0, 7)
    a = integrate(state, params, spec)
    b = integrate(state, params, spec)
    assert np.array_equal(a.v, b.v) and np.array_equal(a.series("gamma2d"), b.series("gamma2d"))
    # 100 steps recorded every 7 plus the final step
    assert len(a) == 1 + 14 + 1 and a.t[-1] == pytest.approx(1.0)
    t, s, f = list(a)[3]
    assert t == a.t[3] and np.array_equal(s.v, a.v[3]) and f.A == a.series("A")[3]


def test_blowup_guard_terminates_early():
    state = random_state(6)
    params = SystemParams(sigma=1.0)
    tr = integrate(state, params, IntegratorSpec(1e-2, 1.0, 1), probes=(), blowup_factor=0.1)
    assert tr.terminated_early and "a priori bound" in tr.reason
    assert len(tr) == 2


def test_non_finite_state_raises_with_partial_trajectory():
    state = FlockState(np.zeros((2, 1)), [[50.0], [-50.0]], [1.0, 1.0], [0.5, 0.5])
    params = SystemParams(sigma=10.0)
    with pytest.raises(IntegrationError) as info:
        integrate(state, params, IntegratorSpec(dt=0.5, t_final=50.0, record_every=100), probes=("A",))
    partial = info.value.partial
    assert partial is not None and len(partial) == 1 and len(partial.frames) == 1


def test_invalid_inputs_rejected():
    state = random_state(0).replace(theta=[1.0, -1.0, 1.0, 1.0, 1.0])
    with pytest.raises(ValueError, match="theta at agent 2"):
        integrate(state, SystemParams(1.0))
    with pytest.raises(ValueError):
        IntegratorSpec(dt=-1.0)
    with pytest.raises(ValueError):
        IntegratorSpec(record_every=0)
    with pytest.raises(ValueError):
        IntegratorSpec(method="euler")
