import numpy as np
import pytest
from hypothesis import given, strategies as st

from flockgame import nash
from flockgame.nash import OpinionGame

GOLDEN = OpinionGame([1.0, 3.0], [1.0, 1.0], 1.0, 1.0)
GOLDEN_Y = np.array([(1 + 5 ** 0.5) / 2, (3 + 5 ** 0.5) / 2])


@st.composite
def games(draw, max_n=8):
    N = draw(st.integers(2, max_n))
    theta = draw(st.lists(st.floats(0.1, 10), min_size=N, max_size=N))
    m = draw(st.lists(st.floats(0.05, 3), min_size=N, max_size=N))
    sigma = 10 ** draw(st.floats(-2, 2))
    p = draw(st.sampled_from([0.5, 1.0, 2.0, 3.0]))
    return OpinionGame(theta, m, sigma, p)


def test_golden_ratio_instance():
    # F = 0 reads y2 = y1^2 and y2^2 - 2 y2 - y1 = 0, so y1 (y1 + 1)(y1^2 - y1 - 1) = 0
    eq = nash.solve(GOLDEN)
    np.testing.assert_allclose(eq.y_star, GOLDEN_Y, rtol=0, atol=1e-12)
    assert eq.residual_norm < 1e-14


def test_consensus_is_exact_and_trivial():
    g = OpinionGame([2.0, 2.0, 2.0], [0.2, 0.3, 0.5], 1.5, 2.0)
    eq = nash.solve(g)
    assert g.is_consensus()
    assert np.all(eq.y_star == 2.0 ** 0.5)
    assert eq.shift_index == 3


def test_residual_is_negated_flow_and_jacobian_matches_finite_differences(rng):
    g = OpinionGame(rng.uniform(0.5, 3, 5), rng.uniform(0.2, 1, 5), 0.8, 2.0)
    y = rng.uniform(0.5, 2, 5)
    J = nash.jacobian(y, g)
    h = 1e-6
    fd = np.column_stack([(nash.residual(y + h * e, g) - nash.residual(y - h * e, g)) / (2 * h) for e in np.eye(5)])
    np.testing.assert_allclose(J, fd, rtol=1e-7, atol=1e-8)


@given(games(), st.integers(0, 2 ** 32 - 1))
def test_closed_form_determinant_and_minors(g, seed):
    rng = np.random.default_rng(seed)
    lo, hi = g.box(0.0)
    y = rng.uniform(0.5 * lo, 1.5 * hi, g.N)
    J = nash.jacobian(y, g)
    minors = nash.leading_minors(y, g)
    for k in range(1, g.N + 1):
        dense = np.linalg.det(J[:k, :k])
        assert minors[k - 1] == pytest.approx(dense, rel=1e-8, abs=1e-10 * np.abs(J).max() ** k)
    assert nash.jacobian_det(y, g) == minors[-1]


def test_determinant_fallback_when_a_diagonal_term_vanishes():
    g = OpinionGame([2.0, 1.0], [1.0, 1.0], 1.0, 1.0)
    # d_1 = M + 2 sigma y_1 - sigma theta_1 rounds to zero for tiny y_1
    y = np.array([1e-300, 1.0])
    assert not nash.jacobian_det(np.array([0.5, 1.0]), g, return_flag=True)[1]
    d = nash.diag_terms(y, g)
    assert d[0] == 0.0
    det, used = nash.jacobian_det(y, g, return_flag=True)
    assert used and det == pytest.approx(np.linalg.det(nash.jacobian(y, g)))


@given(games())
def test_equilibrium_certificate(g):
    eq = nash.solve(g)
    assert eq.residual_norm <= 1e-11 * (1 + g.sigma * g.theta.max() * eq.y_star.max())
    assert eq.jacobian_det > 0 and eq.minors_positive and eq.d_positive
    assert eq.mass_ratio_sum < 1
    a, b = nash.momentum(eq.y_star, g)
    assert a == pytest.approx(b, rel=1e-10)
    lo, hi = g.box()
    assert np.all(eq.y_star >= lo) and np.all(eq.y_star <= hi)


@given(games(max_n=6), st.randoms(use_true_random=False))
def test_permutation_equivariance(g, rnd):
    perm = np.arange(g.N)
    rnd.shuffle(perm)
    a = nash.solve(g).y_star
    b = nash.solve(g.permuted(perm)).y_star
    np.testing.assert_allclose(b, a[perm], rtol=1e-10)


@given(games(max_n=5))
def test_structure_of_equilibrium(g):
    rep = nash.structure_report(nash.solve(g), g)
    assert rep.ok, rep.violations


def test_structure_report_flags_reversed_order():
    g = OpinionGame([1.0, 2.0, 3.0], [1.0, 1.0, 1.0], 1.0, 1.0)
    rep = nash.structure_report(np.array([1.7, 1.5, 1.2]), g)
    assert not rep.ok and not rep.monotone


def test_payoff_stationary_at_equilibrium():
    eq = nash.solve(GOLDEN)
    y = eq.y_star
    for i in range(2):
        h = 1e-5
        grad = (nash.deviation_payoff(y[i] + h, y, GOLDEN, i) - nash.deviation_payoff(y[i] - h, y, GOLDEN, i)) / (2 * h)
        assert abs(grad) < 1e-8
        curv = (nash.deviation_payoff(y[i] + h, y, GOLDEN, i) - 2 * nash.deviation_payoff(y[i], y, GOLDEN, i)
                + nash.deviation_payoff(y[i] - h, y, GOLDEN, i)) / h ** 2
        assert curv == pytest.approx(-eq.d[i], rel=1e-4)
    assert nash.payoff(y, GOLDEN, 0) == pytest.approx(float(nash.deviation_payoff(y[0], y, GOLDEN, 0)))


def test_verify_nash_accepts_equilibrium_and_rejects_perturbation():
    eq = nash.solve(GOLDEN)
    assert nash.verify_nash(eq, GOLDEN).verified
    rep = nash.verify_nash(eq.y_star + np.array([0.1, 0.0]), GOLDEN)
    assert not rep.verified
    agent, r, gain = rep.offenders[0]
    assert agent == 1 and gain > 0


def test_multistart_agrees():
    g = OpinionGame([0.3, 1.0, 4.0, 7.0], [0.4, 0.1, 0.3, 0.2], 0.05, 1.0)
    ref, agree, worst = nash.multistart(g, 50, 0)
    assert agree == 50 and worst < 1e-8


def test_asymptotic_sweep_monotone_and_limits():
    g = OpinionGame([0.5, 1.0, 2.0, 4.0], [0.1, 0.2, 0.3, 0.4], 1.0, 2.0)
    rows = nash.asymptotic_sweep(g, [10.0 ** k for k in range(-3, 4)])
    conv = [r.dist_conviction for r in rows]
    cons = [r.dist_consensus for r in rows]
    assert np.all(np.diff(conv) < 0) and np.all(np.diff(cons) > 0)
    assert conv[-1] < 1e-2 and cons[0] < 1e-2
    with pytest.raises(ValueError):
        nash.asymptotic_sweep(g, [0.0])


def test_solver_error_carries_best_iterate():
    g = OpinionGame([0.3, 1.0, 4.0, 7.0], [0.4, 0.1, 0.3, 0.2], 0.05, 1.0)
    with pytest.raises(nash.SolverError) as info:
        nash.solve(g, seed=[0.6, 0.6, 0.6, 0.6], max_iter=1)
    assert info.value.best.shape == (4,) and info.value.residual_norm > 0


def test_game_validation():
    with pytest.raises(ValueError, match="equal length"):
        OpinionGame([1.0, 2.0], [1.0, 1.0, 1.0], 1.0)
    with pytest.raises(ValueError, match="theta"):
        OpinionGame([1.0, -2.0], [1.0, 1.0], 1.0)
    with pytest.raises(ValueError, match="sigma"):
        OpinionGame([1.0, 2.0], [1.0, 1.0], 0.0)
    with pytest.raises(ValueError, match="seed"):
        nash.solve(GOLDEN, seed=[1.0])
    assert OpinionGame([1.0, 2.0], 0.5, 1.0).M == 1.0
    assert OpinionGame([1.0, 3.0], [3.0, 1.0], 1.0).theta_bar == 1.5
