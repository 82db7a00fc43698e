"""Gradient structure of the opinion system.

In the variables z_i = sqrt(m_i) y_i the opinion flow is dz/dt = -grad Phi(z) with

    Phi(z) = -1/2 (sum_j sqrt(m_j) z_j)^2 + 1/2 sum_j (M - sigma theta_j) z_j^2
             + sigma/(p+2) sum_j z_j^(p+2) / m_j^(p/2).

Convergence of flows is monitored through Phi values and orbit arc length.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dynamics import rk4_path
from .nash import OpinionGame


def to_z(y, game: OpinionGame) -> np.ndarray:
    return np.sqrt(game.m) * np.asarray(y, dtype=float)


def to_y(z, game: OpinionGame) -> np.ndarray:
    return np.asarray(z, dtype=float) / np.sqrt(game.m)


def _positive(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise ValueError("rescaled opinions must be strictly positive")
    return z


def potential(z, game: OpinionGame) -> float:
    z = _positive(z)
    sm = np.sqrt(game.m)
    s, p = game.sigma, game.p
    return float(-0.5 * (sm @ z) ** 2 + 0.5 * np.sum((game.M - s * game.theta) * z ** 2)
                 + s / (p + 2.0) * np.sum(z ** (p + 2.0) / game.m ** (0.5 * p)))


def gradient(z, game: OpinionGame) -> np.ndarray:
    z = _positive(z)
    sm = np.sqrt(game.m)
    s, p = game.sigma, game.p
    return -sm * (sm @ z) + (game.M - s * game.theta) * z + s * z ** (p + 1.0) / game.m ** (0.5 * p)


def flow(z, game: OpinionGame) -> np.ndarray:
    """Right-hand side of the rescaled opinion system, written term by term."""
    z = _positive(z)
    sm = np.sqrt(game.m)
    s, p = game.sigma, game.p
    mp = game.m ** (0.5 * p)
    return sm * (sm @ z) - game.M * z + (s / mp) * (mp * game.theta - z ** p) * z


@dataclass
class DescentReport:
    phi: np.ndarray
    arc_length: float
    monotone: bool
    max_increase: float
    final_grad_norm: float
    endpoint: np.ndarray


def descent_monitor(z_path, game: OpinionGame, tol: float = 1e-9) -> DescentReport:
    """Summarize a recorded trajectory z(t) of shape (K, N).

    ``monotone`` holds when Phi never rises by more than ``tol`` between
    consecutive samples; only expected when the flow is unperturbed.
    """
    Z = np.asarray(z_path, dtype=float)
    phi = np.array([potential(z, game) for z in Z])
    rises = np.diff(phi)
    max_inc = float(rises.max()) if rises.size else 0.0
    arc = float(np.sum(np.linalg.norm(np.diff(Z, axis=0), axis=1)))
    return DescentReport(phi, arc, max_inc <= tol, max_inc,
                         float(np.linalg.norm(gradient(Z[-1], game))), Z[-1].copy())


def descend(z0, game: OpinionGame, dt: float = 1e-2, grad_tol: float = 1e-10, t_max: float = 1e4,
            perturbation: Optional[Callable[[float], np.ndarray]] = None, record_every: int = 1):
    """Integrate dz/dt = -grad Phi(z) (+ perturbation(t)) until |grad Phi| < grad_tol.

    Returns (t, Z) at recorded steps.
    """
    if perturbation is None:
        f = lambda t, z: -gradient(z, game)  # noqa: E731
    else:
        f = lambda t, z: -gradient(z, game) + perturbation(t)  # noqa: E731
    stop = lambda z: np.linalg.norm(gradient(z, game)) < grad_tol  # noqa: E731
    return rk4_path(f, _positive(z0), dt, int(np.ceil(t_max / dt)), record_every, stop)
