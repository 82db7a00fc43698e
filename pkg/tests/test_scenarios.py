import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from flockgame.dynamics import IntegratorSpec, integrate
from flockgame.model import sector_margin
from flockgame.scenarios import (HaScenario, fat_lyapunov, fat_tail_config, ha_closed_form, ha_flock_config,
                                 ha_position, random_sectorial, sectorial_speed_floor)

regimes = st.builds(HaScenario, st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0.05, 1.0))


@given(regimes)
def test_ha_closed_form_solves_the_speed_equation(scn):
    assert ha_closed_form(scn, 0.0) == pytest.approx(scn.v0, rel=1e-12)
    t = np.linspace(0.1, 3.0, 7)
    h = 1e-5
    v = ha_closed_form(scn, t)
    dv = (ha_closed_form(scn, t + h) - ha_closed_form(scn, t - h)) / (2 * h)
    rhs = -scn.lam * v + scn.sigma * v * (1 - v ** 2)
    np.testing.assert_allclose(dv, rhs, rtol=1e-6, atol=1e-9)


def test_ha_regimes_and_limits():
    assert HaScenario(0.5, 1.0, 0.9).regime == "weak"
    assert HaScenario(1.0, 1.0, 0.9).regime == "critical"
    assert HaScenario(2.0, 1.0, 0.9).regime == "strong"
    assert ha_closed_form(HaScenario(0.5, 1.0, 0.2), 60.0) == pytest.approx(math.sqrt(0.5), rel=1e-12)
    # v0 = 1 is an equilibrium of the speed equation only when lam = 0, so it still decays
    assert ha_closed_form(HaScenario(2.0, 1.0, 1.0), 1.0) < 1.0
    with pytest.raises(ValueError):
        HaScenario(1.0, 1.0, 1.5)
    with pytest.raises(ValueError):
        ha_closed_form(HaScenario(1.0, 1.0, 0.5), -1.0)


def test_ha_simulation_and_critical_position():
    scn = HaScenario(1.0, 1.0, 0.9)
    state, params = ha_flock_config(scn)
    tr = integrate(state, params, IntegratorSpec(dt=0.02, t_final=20.0, record_every=50), probes=())
    np.testing.assert_allclose(tr.v[:, 0, 0], ha_closed_form(scn, tr.t), rtol=1e-7)
    np.testing.assert_allclose(tr.x[:, 0, 0], ha_position(scn, tr.t), rtol=1e-7, atol=1e-12)
    with pytest.raises(ValueError):
        ha_position(HaScenario(2.0, 1.0, 0.5), 1.0)


def test_fat_tail_preconditions_name_the_inequality():
    with pytest.raises(ValueError, match=r"x1\(0\)\^\(1-beta\)/\(beta-1\)"):
        fat_tail_config(beta=1.5, r0=0.01, x1_0=1.0, v1_0=0.9)
    with pytest.raises(ValueError, match="2 r0"):
        fat_tail_config(beta=1.5, r0=1.0, x1_0=1.5, v1_0=0.9)
    with pytest.raises(ValueError, match=r"\|v'\(0\)\|"):
        fat_tail_config(beta=1.5, r0=0.01, x1_0=10.0, v1_0=0.9, v2_0=0.5)
    with pytest.raises(ValueError, match="beta > 1"):
        fat_tail_config(beta=1.0, r0=0.01, x1_0=10.0, v1_0=0.9)


def test_fat_tail_lyapunov_grows_and_bounds_v1():
    beta, r0 = 1.5, 0.01
    state, params = fat_tail_config(beta, r0, 10.0, 0.9)
    assert params.kernel.name == "truncated-power"
    tr = integrate(state, params, IntegratorSpec(dt=1e-2, t_final=30.0, record_every=1), probes=())
    L = np.array([fat_lyapunov(s, beta, r0) for _, s, _ in tr])
    assert np.all(np.diff(L) >= -1e-12)
    assert np.all(tr.v[:, 0, 0] >= L[0])
    # the pair stays mirrored
    np.testing.assert_allclose(tr.x[:, 1, 0], -tr.x[:, 0, 0], rtol=1e-14)


def test_fat_lyapunov_warns_inside_cap():
    state, _ = fat_tail_config(1.5, 0.01, 10.0, 0.9)
    with pytest.warns(RuntimeWarning, match="capped"):
        fat_lyapunov(state, 1.5, r0=20.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fat_lyapunov(state, 1.5, r0=0.01)


@given(st.integers(0, 10 ** 6), st.integers(1, 10), st.integers(1, 5), st.floats(0.01, 0.95))
def test_random_sectorial_properties(seed, N, n, eps):
    s = random_sectorial(seed, N, n, eps)
    assert s.v.shape == (N, n)
    assert sector_margin(s) >= eps - 1e-12
    assert s.total_mass == pytest.approx(1.0)
    assert np.array_equal(random_sectorial(seed, N, n, eps).v, s.v)


def test_random_sectorial_options_and_floor():
    s = random_sectorial(1, 4, 3, 0.3, masses=[1, 2, 3, 4], theta_range=(1.0, 1.0))
    np.testing.assert_array_equal(s.m, [1, 2, 3, 4])
    np.testing.assert_array_equal(s.theta, 1.0)
    with pytest.raises(ValueError):
        random_sectorial(1, 4, 3, 1.0)
    from flockgame.model import SystemParams
    params = SystemParams(1.0)
    c0 = sectorial_speed_floor(s, params)
    assert 0 < c0 <= s.v[:, -1].min()
    with pytest.raises(ValueError, match="not sectorial"):
        sectorial_speed_floor(s.replace(v=-np.asarray(s.v)), params)
