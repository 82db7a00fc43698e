"""Alignment dynamics with self-propulsion and friction, plane-projected angle
diagnostics, and the equilibria of the associated opinion game."""

from .model import FlockState, Kernel, SystemParams, kernel_eval, sector_margin, validate
from .dynamics import (IntegratorSpec, Trajectory, integrate, rhs_full, rhs_opinion,
                       rhs_velocity_only)
from .diagnostics import DiagnosticsFrame, RateFit, fit_rate, frame, gamma2d, project_plane
from .nash import Equilibrium, OpinionGame, solve

__version__ = "0.1.0"

__all__ = [
    "FlockState", "Kernel", "SystemParams", "kernel_eval", "sector_margin", "validate",
    "IntegratorSpec", "Trajectory", "integrate", "rhs_full", "rhs_opinion", "rhs_velocity_only",
    "DiagnosticsFrame", "RateFit", "fit_rate", "frame", "gamma2d", "project_plane",
    "Equilibrium", "OpinionGame", "solve",
]
