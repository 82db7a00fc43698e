import numpy as np
import pytest
from hypothesis import given, strategies as st

from flockgame import nash
from flockgame.dynamics import rhs_opinion
from flockgame.nash import OpinionGame
from flockgame.potential import descend, descent_monitor, flow, gradient, potential, to_y, to_z

from test_nash import games


def central(f, z, h=1e-6):
    g = np.empty_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = h * max(1.0, abs(z[i]))
        g[i] = (f(z + e) - f(z - e)) / (2 * e[i])
    return g


@given(games(max_n=6), st.integers(0, 2 ** 32 - 1))
def test_gradient_matches_central_differences(g, seed):
    z = to_z(np.random.default_rng(seed).uniform(0.3, 2.0, g.N), g)
    fd = central(lambda w: potential(w, g), z)
    an = gradient(z, g)
    assert np.linalg.norm(fd - an) <= 1e-6 * max(np.linalg.norm(an), 1e-3)


@given(games(max_n=6), st.integers(0, 2 ** 32 - 1))
def test_flow_is_negative_gradient_and_rescaled_opinion_flow(g, seed):
    y = np.random.default_rng(seed).uniform(0.3, 2.0, g.N)
    z = to_z(y, g)
    scale = 1 + np.abs(gradient(z, g)).max()
    np.testing.assert_allclose(flow(z, g), -gradient(z, g), rtol=0, atol=1e-12 * scale)
    np.testing.assert_allclose(flow(z, g), np.sqrt(g.m) * rhs_opinion(y, g), rtol=0, atol=1e-12 * scale)


def test_hessian_is_symmetrized_jacobian(rng):
    g = OpinionGame(rng.uniform(0.5, 3, 4), rng.uniform(0.2, 1, 4), 1.3, 2.0)
    y = rng.uniform(0.5, 2, 4)
    z = to_z(y, g)
    H = np.column_stack([central(lambda w: gradient(w, g)[j], z) for j in range(4)])
    sm = np.sqrt(g.m)
    expected = np.diag(nash.diag_terms(y, g)) - np.outer(sm, sm)
    np.testing.assert_allclose(H, expected, rtol=1e-6, atol=1e-6)


@given(games(max_n=5), st.integers(0, 2 ** 32 - 1))
def test_equilibrium_minimizes_potential(g, seed):
    z_star = to_z(nash.solve(g).y_star, g)
    assert np.linalg.norm(gradient(z_star, g)) < 1e-9 * (1 + g.sigma * g.theta.max() ** 2)
    z = to_z(np.random.default_rng(seed).uniform(0.05, 3.0, g.N) * g.theta.max() ** (1 / g.p), g)
    assert potential(z, g) >= potential(z_star, g) - 1e-12 * (1 + abs(potential(z_star, g)))


def test_change_of_variables_round_trip(rng):
    g = OpinionGame([1.0, 2.0], [0.3, 0.7], 1.0)
    y = rng.uniform(0.1, 2, 2)
    np.testing.assert_allclose(to_y(to_z(y, g), g), y)
    with pytest.raises(ValueError):
        potential(np.array([1.0, -1.0]), g)


def test_descent_reaches_equilibrium_monotonically():
    g = OpinionGame([0.5, 1.5, 3.0], [0.2, 0.5, 0.3], 1.0, 2.0)
    z_star = to_z(nash.solve(g).y_star, g)
    t, Z = descend(to_z([2.0, 0.1, 0.4], g), g)
    rep = descent_monitor(Z, g)
    assert rep.monotone and rep.final_grad_norm < 1e-10
    assert np.abs(rep.endpoint - z_star).max() < 1e-8
    assert rep.arc_length >= np.linalg.norm(Z[-1] - Z[0])


def test_decaying_perturbation_still_converges():
    g = OpinionGame([0.5, 1.5, 3.0], [0.2, 0.5, 0.3], 1.0, 2.0)
    z_star = to_z(nash.solve(g).y_star, g)
    kick = np.array([1.0, -0.5, 0.2])
    t, Z = descend(to_z([1.0, 1.0, 1.0], g), g, perturbation=lambda t: kick * np.exp(-t), t_max=200.0)
    assert np.abs(Z[-1] - z_star).max() < 1e-8


def test_monitor_flags_rises():
    g = OpinionGame([1.0, 2.0], [0.5, 0.5], 1.0)
    z_star = to_z(nash.solve(g).y_star, g)
    rep = descent_monitor(np.array([z_star, z_star + 0.3]), g)
    assert not rep.monotone and rep.max_increase > 0
