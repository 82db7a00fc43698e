"""Agents, system parameters and communication kernels.

All containers are frozen dataclasses wrapping read-only numpy arrays, so a
state can be handed to several integrators or diagnostics at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

UNIFORM, SMOOTH_POWER, TRUNCATED_POWER = 0, 1, 2
_KIND_NAMES = {UNIFORM: "uniform", SMOOTH_POWER: "smooth-power", TRUNCATED_POWER: "truncated-power"}


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Kernel:
    """Radial communication weight phi(r).

    Build through the constructors rather than directly:

    * ``Kernel.uniform(level)``: phi = level
    * ``Kernel.smooth_power(lam, beta)``: phi = lam / (1 + r^2)^(beta/2)
    * ``Kernel.truncated_power(beta, r0)``: phi = r^-beta for r > r0, capped
      at r0^-beta below
    """

    kind: int
    a: float
    b: float = 0.0

    def __post_init__(self):
        if self.kind == UNIFORM:
            if not self.a >= 0:
                raise ValueError(f"uniform level must be >= 0, got {self.a}")
        elif self.kind == SMOOTH_POWER:
            if not self.a > 0:
                raise ValueError(f"smooth-power lambda must be > 0, got {self.a}")
            if not self.b >= 0:
                raise ValueError(f"smooth-power beta must be >= 0, got {self.b}")
        elif self.kind == TRUNCATED_POWER:
            if not self.a > 0:
                raise ValueError(f"truncated-power beta must be > 0, got {self.a}")
            if not self.b > 0:
                raise ValueError(f"truncated-power r0 must be > 0, got {self.b}")
        else:
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    @classmethod
    def uniform(cls, level: float = 1.0) -> "Kernel":
        return cls(UNIFORM, float(level))

    @classmethod
    def smooth_power(cls, lam: float, beta: float) -> "Kernel":
        return cls(SMOOTH_POWER, float(lam), float(beta))

    @classmethod
    def truncated_power(cls, beta: float, r0: float) -> "Kernel":
        return cls(TRUNCATED_POWER, float(beta), float(r0))

    @property
    def name(self) -> str:
        return _KIND_NAMES[self.kind]

    @property
    def infimum(self) -> float:
        """inf over r >= 0 of phi(r); zero for the decaying kernels."""
        if self.kind == UNIFORM:
            return self.a
        return 0.0

    def fat_tailed(self) -> bool:
        """True when phi(r) >= lam/(1+r^2)^(beta/2) for some lam > 0, beta <= 1."""
        if self.kind == UNIFORM:
            return self.a > 0
        if self.kind == SMOOTH_POWER:
            return self.b <= 1
        return self.a <= 1

    def to_dict(self) -> dict:
        if self.kind == UNIFORM:
            return {"type": "uniform", "level": self.a}
        if self.kind == SMOOTH_POWER:
            return {"type": "smooth-power", "lambda": self.a, "beta": self.b}
        return {"type": "truncated-power", "beta": self.a, "r0": self.b}

    def __call__(self, r):
        return kernel_eval(self, r)


def kernel_eval(kernel: Kernel, r):
    """Evaluate phi at distance(s) ``r``; scalar in, scalar out."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0) or np.any(np.isnan(r_arr)):
        raise ValueError("kernel distance must be nonnegative")
    if kernel.kind == UNIFORM:
        out = np.full_like(r_arr, kernel.a)
    elif kernel.kind == SMOOTH_POWER:
        out = kernel.a / (1.0 + r_arr * r_arr) ** (0.5 * kernel.b)
    else:
        beta, r0 = kernel.a, kernel.b
        out = np.maximum(r_arr, r0) ** (-beta)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class SystemParams:
    sigma: float
    kappa: float = 0.0
    p: float = 2.0
    kernel: Kernel = field(default_factory=Kernel.uniform)

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not self.kappa >= 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        if not self.p > 0:
            raise ValueError(f"p must be > 0, got {self.p}")


@dataclass(frozen=True)
class FlockState:
    """Positions ``x`` and velocities ``v`` of shape (N, n), ``theta`` and
    masses ``m`` of shape (N,).

    Construction only normalizes shapes; call :func:`validate` for the
    positivity and finiteness checks.
    """

    x: np.ndarray
    v: np.ndarray
    theta: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape != v.shape or v.ndim != 2:
            raise ValueError(f"x and v must both have shape (N, n); got {x.shape} and {v.shape}")
        N = v.shape[0]
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        m = np.asarray(self.m, dtype=float).reshape(-1)
        if theta.shape != (N,) or m.shape != (N,):
            raise ValueError(f"theta and m must have shape ({N},)")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "v", _frozen(v))
        object.__setattr__(self, "theta", _frozen(theta))
        object.__setattr__(self, "m", _frozen(m))

    @property
    def N(self) -> int:
        return self.v.shape[0]

    @property
    def n(self) -> int:
        return self.v.shape[1]

    @property
    def total_mass(self) -> float:
        return float(self.m.sum())

    @property
    def theta_momentum(self) -> float:
        """sum_i m_i theta_i, conserved by the parameter equation."""
        return float(self.m @ self.theta)

    @property
    def theta_bar(self) -> float:
        """Mass-weighted mean conviction; the common limit of all theta_i."""
        return self.theta_momentum / self.total_mass

    @property
    def speeds(self) -> np.ndarray:
        return np.linalg.norm(self.v, axis=1)

    def replace(self, **changes) -> "FlockState":
        kw = dict(x=self.x, v=self.v, theta=self.theta, m=self.m)
        kw.update(changes)
        return FlockState(**kw)

    def transformed(self, U: np.ndarray) -> "FlockState":
        """Apply the orthogonal map ``U`` to every position and velocity."""
        U = np.asarray(U, dtype=float)
        return self.replace(x=self.x @ U.T, v=self.v @ U.T)


def sector_margin(state) -> float:
    """min_i v_i^n / |v_i|, the opening of the smallest e_n-cone holding all velocities.

    Accepts a :class:`FlockState` or a bare (N, n) velocity array.
    """
    v = state.v if isinstance(state, FlockState) else np.atleast_2d(np.asarray(state, dtype=float))
    speeds = np.linalg.norm(v, axis=1)
    zero = np.flatnonzero(speeds == 0)
    if zero.size:
        raise ValueError(f"sector margin undefined: agent {zero[0] + 1} has zero velocity")
    return float(np.min(v[:, -1] / speeds))


@dataclass(frozen=True)
class Violation:
    """First failed check: ``field`` names the quantity, ``agent`` is 1-based."""

    field: str
    message: str
    agent: Optional[int] = None

    def __str__(self):
        where = f" at agent {self.agent}" if self.agent is not None else ""
        return f"{self.field}{where}: {self.message}"


def validate(state: FlockState, params: Optional[SystemParams] = None) -> Optional[Violation]:
    """Return ``None`` when the inputs are admissible, else the first violation."""
    for name in ("x", "v"):
        arr = getattr(state, name)
        bad = np.flatnonzero(~np.isfinite(arr).all(axis=1))
        if bad.size:
            return Violation(name, "non-finite entry", int(bad[0]) + 1)
    for name in ("theta", "m"):
        arr = getattr(state, name)
        bad = np.flatnonzero(~(np.isfinite(arr) & (arr > 0)))
        if bad.size:
            return Violation(name, f"must be finite and > 0, got {arr[bad[0]]}", int(bad[0]) + 1)
    if params is not None:
        if not params.sigma > 0:
            return Violation("sigma", "must be > 0")
        if not params.kappa >= 0:
            return Violation("kappa", "must be >= 0")
        if not params.p > 0:
            return Violation("p", "must be > 0")
    return None
