"""Two agents leaving each other on a line.

Alignment pulls the pair together at rate lam while self-propulsion pushes
each speed toward 1. Which one wins decides whether the speed settles at a
positive value, decays like 1/sqrt(t), or decays exponentially.
"""
import numpy as np

from flockgame import IntegratorSpec, integrate
from flockgame.scenarios import HaScenario, ha_closed_form, ha_flock_config

sigma, v0 = 1.0, 0.9
times = np.array([0.0, 1.0, 2.0, 5.0, 10.0])

for lam in (0.5, 1.0, 2.0):
    scn = HaScenario(lam, sigma, v0)
    state, params = ha_flock_config(scn)
    tr = integrate(state, params, IntegratorSpec(dt=1e-3, t_final=10.0, record_every=1000), probes=())
    sim = tr.v[:, 0, 0]
    exact = ha_closed_form(scn, tr.t)
    print(f"lambda = {lam} ({scn.regime})")
    for t, a, b in zip(tr.t, sim, exact):
        if t in times:
            print(f"  t = {t:5.1f}   v = {a:.10f}   closed form = {b:.10f}")
    print(f"  max relative error {np.max(np.abs(sim - exact) / exact):.2e}")

# weak coupling keeps the pair moving apart forever at speed sqrt(1 - lam/sigma)
print("limit speed for lambda = 0.5:", np.sqrt(1 - 0.5 / sigma))
