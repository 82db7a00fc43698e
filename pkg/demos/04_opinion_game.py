"""Speeds of an aligned flock play a game.

Once velocities align, each speed y_i balances its own conviction theta_i
against the group average. The unique equilibrium is computed by Newton's
method, certified, checked against unilateral deviations, and reached by the
opinion flow from any positive start.
"""
import numpy as np

from flockgame import nash
from flockgame.dynamics import rhs_opinion, rk4_path
from flockgame.potential import descent_monitor, gradient, to_z

game = nash.OpinionGame(theta=[1.0, 3.0], m=[1.0, 1.0], sigma=1.0, p=1.0)
eq = nash.solve(game)
print("golden-ratio game y* =", eq.y_star, " expected", [(1 + 5 ** 0.5) / 2, (3 + 5 ** 0.5) / 2])

game = nash.OpinionGame(theta=[0.5, 1.0, 2.0, 4.0], m=[0.1, 0.2, 0.3, 0.4], sigma=1.0, p=2.0)
eq = nash.solve(game)
print("\nfour agents, y* =", np.round(eq.y_star, 10))
print("det J =", eq.jacobian_det, " leading minors", np.round(eq.minors, 6))
print("sum m/d =", eq.mass_ratio_sum, " shift index", eq.shift_index)
print("no profitable deviation:", nash.verify_nash(eq, game).verified)
print("structure:", nash.structure_report(eq, game).ok)

print("\n  sigma      |y - theta^(1/p)|   |y - theta_bar^(1/p)|")
for row in nash.asymptotic_sweep(game, [1e-3, 1e-2, 1e-1, 1.0, 10.0, 1e2, 1e3]):
    print(f"{row.sigma:8.0e}   {row.dist_conviction:.6e}       {row.dist_consensus:.6e}")

rng = np.random.default_rng(1)
for _ in range(3):
    y0 = rng.uniform(0.05, 4.0, game.N)
    stop = lambda y: np.linalg.norm(gradient(to_z(y, game), game)) < 1e-10
    t, Y = rk4_path(lambda t, y: rhs_opinion(y, game), y0, 1e-2, 100_000, 10, stop)
    rep = descent_monitor(to_z(Y, game), game)
    print(f"\nstart {np.round(y0, 3)} -> end {np.round(Y[-1], 8)} at t = {t[-1]:.1f}")
    print(f"potential monotone: {rep.monotone}, orbit length {rep.arc_length:.4f}")
