"""Thin-tailed communication does not force alignment.

With phi(r) = r^-beta, beta > 1, a mirrored pair that starts far enough apart
and fast enough keeps its horizontal velocities apart for all time: the
quantity L = v1 + x1^(1-beta)/(1-beta) never drops, and v1 >= L.
"""
import numpy as np

from flockgame import IntegratorSpec, integrate
from flockgame.scenarios import fat_lyapunov, fat_tail_config

beta, r0 = 1.5, 0.01
state, params = fat_tail_config(beta=beta, r0=r0, x1_0=10.0, v1_0=0.9)
tr = integrate(state, params, IntegratorSpec(dt=1e-3, t_final=100.0, record_every=100), probes=())
L = np.array([fat_lyapunov(s, beta, r0) for _, s, _ in tr])

print("    t       x1         v1         L")
for k in range(0, len(tr.t), 100):
    print(f"{tr.t[k]:6.1f}  {tr.x[k, 0, 0]:9.4f}  {tr.v[k, 0, 0]:.6f}  {L[k]:.6f}")
print("smallest step change of L:", np.diff(L).min())
print("v1 - L(0) never below:", (tr.v[:, 0, 0] - L[0]).min())

# a starting distance too small for the speed is rejected up front
try:
    fat_tail_config(beta=beta, r0=r0, x1_0=1.0, v1_0=0.9)
except ValueError as e:
    print("rejected:", e)
