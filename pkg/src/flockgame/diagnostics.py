"""Alignment diagnostics: spreads, speed ratio, pairwise and plane-projected angles.

Angles are evaluated as ``2*atan2(|a - b|, |a + b|)`` for unit vectors, which
equals ``arccos(a . b)`` but keeps full relative precision for small angles;
``1 - cos`` is taken as ``2 sin^2(angle/2)`` for the same reason.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from .model import FlockState, sector_margin

FRAME_FIELDS = ("A", "B", "D", "R", "gamma", "gamma2d", "margin")
DEFAULT_GRID = {3: 64, 4: 256}


@dataclass(frozen=True)
class DiagnosticsFrame:
    """One time slice of the monitored quantities; ``nan`` marks undefined or unselected."""

    A: float = math.nan
    B: float = math.nan
    D: float = math.nan
    R: float = math.nan
    gamma: float = math.nan
    gamma2d: float = math.nan
    margin: float = math.nan
    skipped: int = 0

    def as_row(self) -> tuple:
        return tuple(getattr(self, k) for k in FRAME_FIELDS)

    def to_dict(self) -> dict:
        return asdict(self)


def _max_pair_distance(a: np.ndarray) -> float:
    if a.shape[0] < 2:
        return 0.0
    diff = a[:, None, ...] - a[None, :, ...]
    if diff.ndim == 2:
        return float(np.max(np.abs(diff)))
    return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", diff, diff))))


def unit_angles(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Angle between unit vectors along the last axis."""
    return 2.0 * np.arctan2(np.linalg.norm(u - w, axis=-1), np.linalg.norm(u + w, axis=-1))


def max_pair_angle(v: np.ndarray) -> float:
    """gamma = max_{i,j} angle(v_i, v_j); all rows must be nonzero."""
    u = v / np.linalg.norm(v, axis=1, keepdims=True)
    if u.shape[0] < 2:
        return 0.0
    return float(np.max(unit_angles(u[:, None, :], u[None, :, :])))


def one_minus_cos(angle):
    return 2.0 * np.sin(0.5 * np.asarray(angle)) ** 2


def project_plane(v, u) -> np.ndarray:
    """Coordinates of ``v`` in the plane spanned by (u, e_n).

    ``u`` is a unit vector in the first n-1 coordinates. Works row-wise when
    ``v`` has shape (N, n). The n-th coordinate is returned unchanged.
    """
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    if abs(np.linalg.norm(u) - 1.0) > 1e-12:
        raise ValueError(f"plane direction must be a unit vector, |u| = {np.linalg.norm(u)!r}")
    if v.shape[-1] != u.shape[0] + 1:
        raise ValueError(f"u must live in R^{v.shape[-1] - 1}")
    return np.stack([v[..., :-1] @ u, v[..., -1]], axis=-1)


@lru_cache(maxsize=None)
def direction_grid(dim: int, size: int) -> np.ndarray:
    """Quasi-uniform unit directions in R^dim (a plane and its mirror coincide).

    dim 1: the single direction; dim 2: equispaced half circle; dim 3: a
    Fibonacci lattice on the upper hemisphere; higher: a fixed-seed Gaussian
    sample.
    """
    if dim == 1:
        g = np.ones((1, 1))
    elif dim == 2:
        phi = np.pi * np.arange(size) / size
        g = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    elif dim == 3:
        k = np.arange(size) + 0.5
        z = k / size
        r = np.sqrt(1.0 - z * z)
        phi = np.pi * (1.0 + 5.0 ** 0.5) * k
        g = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    else:
        g = np.random.default_rng(20240607).standard_normal((size, dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
    g.setflags(write=False)
    return g


def _planar_max_angle(P: np.ndarray) -> np.ndarray:
    """Max pairwise angle per plane for projected vectors P of shape (K, N, 2).

    Zero-length projections are ignored; returns (max angle per plane, number of
    ignored (plane, agent) pairs).
    """
    ang = np.arctan2(P[..., 1], P[..., 0])
    valid = np.hypot(P[..., 0], P[..., 1]) > 0
    skipped = int(np.count_nonzero(~valid))
    if np.all(P[..., 1][valid] > 0):
        # every projection in the open upper half plane: the spread is max - min
        hi = np.where(valid, ang, -np.inf).max(axis=1)
        lo = np.where(valid, ang, np.inf).min(axis=1)
        out = np.where(np.isfinite(hi) & np.isfinite(lo), hi - lo, 0.0)
        return out, skipped
    d = np.abs(ang[:, :, None] - ang[:, None, :])
    d = np.minimum(d, 2.0 * np.pi - d)
    mask = valid[:, :, None] & valid[:, None, :]
    return np.where(mask, d, 0.0).max(axis=(1, 2)), skipped


def candidate_planes(v: np.ndarray, grid_size: Optional[int] = None) -> tuple[np.ndarray, int]:
    """Plane directions u in R^{n-1} searched by :func:`gamma2d`.

    Pair-difference planes (unit-velocity and raw-velocity differences) come
    first, then the fallback grid. Returns (directions, number of pairs whose
    difference had no component off e_n).
    """
    n = v.shape[1]
    u = v / np.linalg.norm(v, axis=1, keepdims=True)
    iu, ju = np.triu_indices(v.shape[0], 1)
    cands = np.concatenate([(u[iu] - u[ju])[:, :-1], (v[iu] - v[ju])[:, :-1]])
    norms = np.linalg.norm(cands, axis=1)
    ok = norms > 1e-300
    dirs = cands[ok] / norms[ok, None]
    if grid_size is None:
        grid_size = DEFAULT_GRID.get(n, 256)
    dirs = np.concatenate([dirs, direction_grid(n - 1, grid_size)])
    return dirs, int(np.count_nonzero(~ok))


def gamma2d_detail(v: np.ndarray, grid_size: Optional[int] = None) -> tuple[float, int]:
    v = np.asarray(v, dtype=float)
    n = v.shape[1]
    if n <= 2:
        # a single plane (or the line itself): the projection is the identity
        return max_pair_angle(v), 0
    dirs, skipped = candidate_planes(v, grid_size)
    P = np.stack([np.einsum("kj,ij->ki", dirs, v[:, :-1]), np.broadcast_to(v[:, -1], (len(dirs), v.shape[0]))], axis=-1)
    angles, zero_proj = _planar_max_angle(P)
    return float(angles.max()), skipped + zero_proj


def gamma2d(state, grid_size: Optional[int] = None) -> float:
    """Largest projected pairwise angle over planes containing e_n.

    The search covers the planes through e_n and each pairwise velocity
    difference plus a quasi-uniform grid, so the value is a lower bound of the
    supremum over all such planes and never below the pairwise angle gamma.
    """
    v = state.v if isinstance(state, FlockState) else np.asarray(state, dtype=float)
    return gamma2d_detail(v, grid_size)[0]


def frame(state: FlockState, probes: Optional[Iterable[str]] = None, grid_size: Optional[int] = None) -> DiagnosticsFrame:
    """Compute the selected diagnostics (all by default) for one state."""
    sel = set(FRAME_FIELDS if probes is None else probes)
    unknown = sel - set(FRAME_FIELDS)
    if unknown:
        raise ValueError(f"unknown diagnostics {sorted(unknown)}")
    out = {}
    if "A" in sel:
        out["A"] = _max_pair_distance(state.v)
    if "B" in sel:
        out["B"] = float(np.ptp(state.theta))
    if "D" in sel:
        out["D"] = _max_pair_distance(state.x)
    speeds = state.speeds
    if np.all(speeds > 0):
        if "R" in sel:
            out["R"] = float((speeds.max() / speeds.min()) ** 2)
        if "gamma" in sel:
            out["gamma"] = max_pair_angle(state.v)
        if "gamma2d" in sel:
            out["gamma2d"], out["skipped"] = gamma2d_detail(state.v, grid_size)
        if "margin" in sel:
            out["margin"] = sector_margin(state)
    return DiagnosticsFrame(**out)


@dataclass(frozen=True)
class RateFit:
    """Least-squares line log(value) = intercept + rate * t over ``window``."""

    rate: float
    intercept: float
    r_squared: float
    window: tuple[float, float]
    samples: int


def fit_rate(t: Sequence[float], values: Sequence[float], window: Optional[tuple[float, float]] = None) -> RateFit:
    """Fit an exponential rate to positive samples.

    ``window`` defaults to the second half of the time span, which skips the
    initial transient.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    if window is None:
        window = (0.5 * (t[0] + t[-1]), float(t[-1]))
    t1, t2 = window
    sel = (t >= t1) & (t <= t2)
    if np.count_nonzero(sel) < 10:
        raise ValueError(f"need at least 10 samples in window {window}, got {np.count_nonzero(sel)}")
    ts, ys = t[sel], y[sel]
    if not np.all(ys > 0):
        raise ValueError("rate fit needs strictly positive values in the window")
    logs = np.log(ys)
    rate, intercept = np.polyfit(ts, logs, 1)
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    ss_res = float(np.sum((logs - (intercept + rate * ts)) ** 2))
    # a flat series (up to rounding) is fit exactly by a zero rate
    flat = ss_tot <= 1e-26 * logs.size * max(1.0, float(np.max(np.abs(logs)))) ** 2
    r2 = 1.0 if flat else max(0.0, 1.0 - ss_res / ss_tot)
    return RateFit(float(rate), float(intercept), r2, (float(t1), float(t2)), int(sel.sum()))


def floor_window(t: Sequence[float], values: Sequence[float], floor: float = 1e-10) -> tuple[float, float]:
    """Second half of the span before ``values`` first drops to ``floor``.

    Angles that reach the rounding floor stop decaying exponentially, so rate
    fits on them are restricted to the resolvable part of the run.
    """
    t = np.asarray(t, dtype=float)
    below = np.flatnonzero(np.asarray(values, dtype=float) <= floor)
    t_end = float(t[below[0] - 1]) if below.size and below[0] > 0 else float(t[-1])
    return 0.5 * (t[0] + t_end), t_end


def field_series(frames: Sequence[DiagnosticsFrame], name: str) -> np.ndarray:
    if name not in {f.name for f in fields(DiagnosticsFrame)}:
        raise KeyError(name)
    return np.array([getattr(f, name) for f in frames], dtype=float)
