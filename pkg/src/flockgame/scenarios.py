"""Built-in configurations with closed-form or geometric oracles.

* ``ha``: two agents on a line moving apart with v1 = -v2 = v under
  all-to-all communication; the speed obeys dv/dt = -lam v + sigma v (1 - v^2)
  and has an explicit solution in each regime of lam vs sigma.
* ``fat-tail``: two mirrored planar agents under an exact power-law kernel
  with beta > 1; a Lyapunov-type quantity keeps them apart forever.
* ``random-sectorial``: seeded random flocks with every velocity inside the
  cone v^n >= eps |v|.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import FlockState, Kernel, SystemParams

SCENARIOS = ("ha", "fat-tail", "random-sectorial")


@dataclass(frozen=True)
class HaScenario:
    """``v0`` lies in (0, 1]; v0 = 1 is the boundary case used only as an oracle."""

    lam: float
    sigma: float
    v0: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not 0 < self.v0 <= 1:
            raise ValueError(f"v0 must lie in (0, 1], got {self.v0}")

    @property
    def regime(self) -> str:
        if self.lam < self.sigma:
            return "weak"
        if self.lam == self.sigma:
            return "critical"
        return "strong"


def ha_closed_form(scn: HaScenario, t):
    """Exact speed v(t) of the two-agent line scenario."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    lam, s, v0 = scn.lam, scn.sigma, scn.v0
    if lam == s:
        out = v0 / np.sqrt(2.0 * s * t * v0 ** 2 + 1.0)
    elif lam < s:
        a2 = 1.0 - lam / s
        # c0^2 from v(0) = v0; negative when v0 starts above the limit speed
        c2 = a2 / v0 ** 2 - 1.0
        out = np.sqrt(a2) / np.sqrt(1.0 + c2 * np.exp(-2.0 * t * (s - lam)))
    else:
        b2 = lam / s - 1.0
        c2 = v0 ** 2 / (b2 + v0 ** 2)
        e = np.exp(2.0 * t * (s - lam))
        out = np.sqrt(c2 * e) * np.sqrt(b2) / np.sqrt(1.0 - c2 * e)
    return float(out) if out.ndim == 0 else out


def ha_position(scn: HaScenario, t):
    """Exact x(t) = integral of v in the critical regime lam = sigma (x(0) = 0)."""
    if scn.lam != scn.sigma:
        raise ValueError("closed-form position only for the critical regime")
    t = np.asarray(t, dtype=float)
    s, v0 = scn.sigma, scn.v0
    return (np.sqrt(2.0 * s * t * v0 ** 2 + 1.0) - 1.0) / (s * v0)


def ha_flock_config(scn: HaScenario) -> tuple[FlockState, SystemParams]:
    state = FlockState(
        x=np.zeros((2, 1)),
        v=np.array([[scn.v0], [-scn.v0]]),
        theta=np.ones(2),
        m=np.full(2, 0.5),
    )
    return state, SystemParams(sigma=scn.sigma, kappa=0.0, p=2.0, kernel=Kernel.uniform(scn.lam))


def fat_tail_config(beta: float, r0: float, x1_0: float, v1_0: float, v2_0=None,
                    sigma: float = 1.0) -> tuple[FlockState, SystemParams]:
    """Mirrored pair x = (+-x1, 0), v = (+-v1, v2) under phi(r) = r^-beta (r > r0).

    ``v2_0`` defaults to 0.1 * v1_0.
    """
    if v2_0 is None:
        v2_0 = 0.1 * v1_0
    if not beta > 1:
        raise ValueError(f"beta > 1 required, got {beta}")
    if not r0 > 0:
        raise ValueError(f"r0 > 0 required, got {r0}")
    if not x1_0 > 2 * r0:
        raise ValueError(f"x1(0) > 2 r0 violated: {x1_0} <= {2 * r0}")
    bound = x1_0 ** (1 - beta) / (beta - 1)
    if not 1 > v1_0 > bound:
        raise ValueError(f"1 > v1(0) > x1(0)^(1-beta)/(beta-1) violated: v1(0) = {v1_0}, bound = {bound:.6g}")
    if not math.hypot(v1_0, v2_0) < 1:
        raise ValueError(f"|v'(0)| < 1 violated: |({v1_0}, {v2_0})| = {math.hypot(v1_0, v2_0):.6g}")
    state = FlockState(
        x=np.array([[x1_0, 0.0], [-x1_0, 0.0]]),
        v=np.array([[v1_0, v2_0], [-v1_0, v2_0]]),
        theta=np.ones(2),
        m=np.full(2, 0.5),
    )
    return state, SystemParams(sigma=sigma, kappa=0.0, p=2.0, kernel=Kernel.truncated_power(beta, r0))


def fat_lyapunov(state: FlockState, beta: float, r0: float = 0.0) -> float:
    """L = v1 + x1^(1-beta)/(1-beta) for the first agent of a fat-tail pair.

    Warns when x1 <= r0, where the kernel leaves its power-law regime.
    """
    x1, v1 = float(state.x[0, 0]), float(state.v[0, 0])
    if x1 <= r0:
        warnings.warn(f"x1 = {x1:g} <= r0 = {r0:g}: kernel is capped there", RuntimeWarning, stacklevel=2)
    return v1 + x1 ** (1 - beta) / (1 - beta)


def _cap_directions(rng, N, n, epsilon):
    """Unit vectors uniform in angle inside the cone u^n >= epsilon."""
    if n == 1:
        return np.ones((N, 1))
    cos_a = rng.uniform(epsilon, 1.0, N)
    sin_a = np.sqrt(1.0 - cos_a ** 2)
    w = rng.standard_normal((N, n - 1))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    return np.concatenate([sin_a[:, None] * w, cos_a[:, None]], axis=1)


def random_sectorial(seed, N: int, n: int, epsilon: float, theta_range=(0.5, 2.0),
                     speed_range=(0.5, 1.5), position_scale: float = 1.0, masses=None) -> FlockState:
    """Reproducible random flock with sector margin >= ``epsilon``.

    Uses numpy's PCG64 generator seeded with ``seed``. Masses default to 1/N
    each, so the total mass is one.
    """
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    rng = np.random.default_rng(seed)
    dirs = _cap_directions(rng, N, n, epsilon)
    speeds = rng.uniform(*speed_range, N)
    theta = rng.uniform(*theta_range, N)
    x = position_scale * rng.standard_normal((N, n))
    m = np.full(N, 1.0 / N) if masses is None else np.broadcast_to(np.asarray(masses, float), (N,))
    return FlockState(x=x, v=speeds[:, None] * dirs, theta=theta, m=m)


def sectorial_speed_floor(state: FlockState, params: SystemParams) -> float:
    """Lower bound c0 on min_i |v_i(t)| for a sectorial run.

    The smallest vertical velocity obeys a logistic inequality, so it stays
    above min(min_i v_i^n(0), eps * theta_min^(1/p)), where eps is the
    initial sector margin.
    """
    v = state.v
    eps = float(np.min(v[:, -1] / np.linalg.norm(v, axis=1)))
    if eps <= 0:
        raise ValueError("state is not sectorial")
    return min(float(v[:, -1].min()), eps * float(state.theta.min()) ** (1.0 / params.p))
