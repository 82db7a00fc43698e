"""Right-hand sides of the particle, velocity-only and opinion systems, and a
deterministic fixed-step RK4 integrator with recorded diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional

import numpy as np

from . import _kernels
from .diagnostics import DiagnosticsFrame, frame as make_frame
from .model import UNIFORM, FlockState, Kernel, SystemParams, kernel_eval, validate


class IntegrationError(RuntimeError):
    """Non-finite values appeared while stepping; ``t`` is the last finite time.

    ``partial`` holds the frames recorded before the failure, when available.
    """

    def __init__(self, message, t=None, agent=None, partial=None):
        super().__init__(message)
        self.t = t
        self.agent = agent
        self.partial = partial


@dataclass(frozen=True)
class Derivative:
    dx: np.ndarray
    dv: np.ndarray
    dtheta: np.ndarray


def _check_finite(arrs, what):
    for a in arrs:
        bad = ~np.isfinite(a)
        if bad.any():
            agent = int(np.argwhere(bad)[0][0]) + 1
            raise IntegrationError(f"non-finite {what} at agent {agent}", agent=agent)


def rhs_full(state: FlockState, params: SystemParams) -> Derivative:
    """Time derivative of (x, v, theta) for the alignment system with
    self-propulsion/friction and parameter coupling."""
    x, v, th, m = state.x, state.v, state.theta, state.m
    diff = x[:, None, :] - x[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    W = kernel_eval(params.kernel, r) * m[None, :]
    np.fill_diagonal(W, 0.0)
    speed_p = np.linalg.norm(v, axis=1) ** params.p
    dv = W @ v - W.sum(axis=1)[:, None] * v + (params.sigma * (th - speed_p))[:, None] * v
    dth = params.kappa * (W @ th - W.sum(axis=1) * th)
    _check_finite([dv, dth], "derivative")
    return Derivative(v.copy(), dv, dth)


def rhs_velocity_only(v: np.ndarray, theta: np.ndarray, m: np.ndarray, params: SystemParams) -> np.ndarray:
    """Velocity derivative under all-to-all communication with frozen theta.

    Only meaningful for the uniform kernel (positions then drop out) and
    kappa = 0.
    """
    if params.kernel.kind != UNIFORM:
        raise ValueError("velocity-only system requires a uniform kernel")
    if params.kappa != 0:
        raise ValueError("velocity-only system requires kappa = 0")
    v = np.atleast_2d(np.asarray(v, dtype=float))
    theta = np.asarray(theta, dtype=float)
    m = np.asarray(m, dtype=float)
    lam = params.kernel.a
    speed_p = np.linalg.norm(v, axis=1) ** params.p
    return lam * (m @ v - m.sum() * v) + (params.sigma * (theta - speed_p))[:, None] * v


def rhs_opinion(y, game) -> np.ndarray:
    """dy_i/dt = sum_k m_k (y_k - y_i) + sigma (theta_i - y_i^p) y_i."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("opinions must be strictly positive")
    m = game.m
    return (m @ y - m.sum() * y) + game.sigma * (game.theta - y ** game.p) * y


def measured_perturbation(state: FlockState, params: SystemParams, game) -> np.ndarray:
    """Exact deviation of d|v_i|/dt from the opinion right-hand side at ``state``.

    This is the forcing term that turns the speed dynamics of a velocity-only
    run into a perturbed opinion system.
    """
    dv = rhs_velocity_only(state.v, state.theta, state.m, params)
    y = state.speeds
    ydot = np.einsum("ij,ij->i", dv, state.v) / y
    return ydot - rhs_opinion(y, game)


def rk4_path(f: Callable[[float, np.ndarray], np.ndarray], y0, dt: float, n_steps: int,
             record_every: int = 1, stop: Optional[Callable[[np.ndarray], bool]] = None):
    """Generic fixed-step RK4 for y' = f(t, y); returns (t, Y) at recorded steps.

    ``stop`` is tested on each recorded state; integration ends at the first
    record where it is true.
    """
    y = np.array(y0, dtype=float)
    ts, ys = [0.0], [y.copy()]
    t = 0.0
    for k in range(1, n_steps + 1):
        k1 = f(t, y)
        k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = f(t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = k * dt
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"non-finite state at t = {t:g}", t=t)
        if k % record_every == 0 or k == n_steps:
            ts.append(t)
            ys.append(y.copy())
            if stop is not None and stop(y):
                break
    return np.array(ts), np.array(ys)


@dataclass(frozen=True)
class IntegratorSpec:
    dt: float = 1e-3
    t_final: float = 1.0
    record_every: int = 10
    method: str = "rk4"

    def __post_init__(self):
        if self.method != "rk4":
            raise ValueError(f"only the classical rk4 method is available, got {self.method!r}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.t_final >= self.dt:
            raise ValueError(f"t_final must be >= dt, got {self.t_final}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError(f"record_every must be a positive integer, got {self.record_every}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


def speed_bound(state: FlockState, params: SystemParams) -> float:
    """A priori bound C >= max_i |v_i(t)| from the logistic estimate on the top speed."""
    return max(float(state.speeds.max()), float(state.theta.max()) ** (1.0 / params.p))


@dataclass
class Trajectory:
    """Recorded samples of a run. Iterating yields (t, FlockState, DiagnosticsFrame)."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    theta: np.ndarray
    m: np.ndarray
    frames: list = field(default_factory=list)
    terminated_early: bool = False
    reason: str = ""

    def __len__(self):
        return len(self.t)

    def state(self, k: int) -> FlockState:
        return FlockState(self.x[k], self.v[k], self.theta[k], self.m)

    @property
    def final(self) -> FlockState:
        return self.state(-1)

    def __iter__(self) -> Iterator[tuple[float, FlockState, DiagnosticsFrame]]:
        for k in range(len(self.t)):
            yield float(self.t[k]), self.state(k), self.frames[k] if self.frames else None

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(f, name) for f in self.frames], dtype=float)


def integrate(state: FlockState, params: SystemParams, spec: IntegratorSpec = IntegratorSpec(),
              probes: Optional[Iterable[str]] = None, grid_size: Optional[int] = None,
              blowup_factor: float = 10.0) -> Trajectory:
    """Fixed-step RK4 run of the full system.

    Frames are recorded every ``spec.record_every`` steps (and at the final
    step). ``probes`` selects diagnostics; pass ``()`` to record states only.
    The run stops early, with ``terminated_early`` set, once a speed exceeds
    ``blowup_factor`` times the a priori bound.
    """
    bad = validate(state, params)
    if bad is not None:
        raise ValueError(f"invalid input: {bad}")
    probes = None if probes is None else tuple(probes)
    k = params.kernel
    x = np.array(state.x)
    v = np.array(state.v)
    th = np.array(state.theta)
    m = np.array(state.m)
    limit = blowup_factor * speed_bound(state, params)

    ts, xs, vs, ths = [0.0], [x.copy()], [v.copy()], [th.copy()]
    done, total = 0, spec.n_steps
    terminated, reason = False, ""
    failure = None
    while done < total:
        chunk = min(spec.record_every, total - done)
        x, v, th = _kernels.rk4_steps(x, v, th, m, params.sigma, params.kappa, params.p,
                                      k.kind, k.a, k.b, spec.dt, chunk)
        done += chunk
        t = done * spec.dt
        if not (np.isfinite(x).all() and np.isfinite(v).all() and np.isfinite(th).all()):
            failure = f"non-finite state between t = {ts[-1]:g} and t = {t:g}"
            terminated, reason = True, failure
            break
        ts.append(t)
        xs.append(x.copy())
        vs.append(v.copy())
        ths.append(th.copy())
        if np.linalg.norm(v, axis=1).max() > limit:
            terminated, reason = True, f"speed exceeded {blowup_factor:g} x a priori bound at t = {t:g}"
            break

    traj = Trajectory(np.array(ts), np.array(xs), np.array(vs), np.array(ths), m,
                      terminated_early=terminated, reason=reason)
    if probes != ():
        traj.frames = [make_frame(s, probes, grid_size) for _, s, _ in traj]
    if failure is not None:
        raise IntegrationError(failure, t=float(traj.t[-1]), partial=traj)
    return traj
