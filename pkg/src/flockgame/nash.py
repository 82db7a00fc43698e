"""Equilibria of the opinion game.

The steady states of

    dy_i/dt = sum_k m_k (y_k - y_i) + sigma (theta_i - y_i^p) y_i

are the zeros of ``F(y)_i = M y_i - sum_k m_k y_k - sigma (theta_i - y_i^p) y_i``.
Its Jacobian is ``diag(d) - 1 m^T`` with
``d_i = M + sigma (p+1) y_i^p - sigma theta_i``, whose determinant and leading
minors have closed forms used here as stability certificates.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import rhs_opinion

log = logging.getLogger(__name__)

EQUALITY_TOL = 1e-10


class SolverError(RuntimeError):
    """Newton iteration did not converge; ``best`` holds the best iterate."""

    def __init__(self, message, best=None, residual_norm=None):
        super().__init__(message)
        self.best = best
        self.residual_norm = residual_norm


@dataclass(frozen=True)
class OpinionGame:
    theta: np.ndarray
    m: np.ndarray
    sigma: float
    p: float = 1.0

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        m = np.array(self.m, dtype=float).reshape(-1)
        if m.size == 1 and theta.size > 1:
            m = np.full(theta.size, m[0])
        if theta.shape != m.shape or theta.size == 0:
            raise ValueError("theta and m must be nonempty vectors of equal length")
        if not (np.all(theta > 0) and np.all(np.isfinite(theta))):
            raise ValueError("convictions theta must be finite and positive")
        if not (np.all(m > 0) and np.all(np.isfinite(m))):
            raise ValueError("masses m must be finite and positive")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not self.p > 0:
            raise ValueError(f"p must be > 0, got {self.p}")
        theta.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "p", float(self.p))

    @property
    def N(self) -> int:
        return self.theta.size

    @property
    def M(self) -> float:
        return float(self.m.sum())

    @property
    def theta_bar(self) -> float:
        """Mass-weighted mean conviction sum m_i theta_i / M."""
        return float(self.m @ self.theta) / self.M

    def with_sigma(self, sigma: float) -> "OpinionGame":
        return OpinionGame(self.theta, self.m, sigma, self.p)

    def permuted(self, perm) -> "OpinionGame":
        perm = np.asarray(perm)
        return OpinionGame(self.theta[perm], self.m[perm], self.sigma, self.p)

    def box(self, slack: float = 1e-6) -> tuple[float, float]:
        """Interval holding every equilibrium opinion, min/max theta^(1/p), widened by ``slack``."""
        lo = self.theta.min() ** (1.0 / self.p)
        hi = self.theta.max() ** (1.0 / self.p)
        return lo * (1.0 - slack), hi * (1.0 + slack)

    def is_consensus(self) -> bool:
        return bool(np.all(self.theta == self.theta[0]))


def _positive(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0)):
        raise ValueError("opinions must be strictly positive")
    return y


def residual(y, game: OpinionGame) -> np.ndarray:
    """F(y); equal to ``-rhs_opinion(y, game)``."""
    return -rhs_opinion(_positive(y), game)


def diag_terms(y, game: OpinionGame) -> np.ndarray:
    y = _positive(y)
    return game.M + game.sigma * (game.p + 1.0) * y ** game.p - game.sigma * game.theta


def jacobian(y, game: OpinionGame) -> np.ndarray:
    d = diag_terms(y, game)
    return np.diag(d) - np.broadcast_to(game.m, (game.N, game.N))


def _closed_minor(d: np.ndarray, m: np.ndarray) -> float:
    return float(np.prod(d) * (1.0 - np.sum(m / d)))


def jacobian_det(y, game: OpinionGame, return_flag: bool = False):
    """Closed-form det of the Jacobian, prod(d) * (1 - sum m/d).

    Falls back to a dense LU determinant when some d_i vanishes; with
    ``return_flag`` the second return value tells whether that happened.
    """
    d = diag_terms(y, game)
    if np.any(d == 0):
        det, fallback = float(np.linalg.det(jacobian(y, game))), True
    else:
        det, fallback = _closed_minor(d, game.m), False
    return (det, fallback) if return_flag else det


def leading_minors(y, game: OpinionGame) -> np.ndarray:
    """Upper-left principal minors M_1..M_N in closed form."""
    d = diag_terms(y, game)
    m = game.m
    return np.array([_closed_minor(d[:k], m[:k]) for k in range(1, game.N + 1)])


def momentum(y, game: OpinionGame) -> tuple[float, float]:
    """(<y, theta>_m, ||y||_{p+1,m}^{p+1}); equal at every equilibrium."""
    y = _positive(y)
    return float(game.m @ (y * game.theta)), float(game.m @ y ** (game.p + 1.0))


@dataclass(frozen=True)
class Equilibrium:
    y_star: np.ndarray
    residual_norm: float
    jacobian_det: float
    minors: np.ndarray
    d: np.ndarray
    shift_index: int
    y_bar: float
    iterations: int = 0
    # sum_k m_k / d_k, below one at a nondegenerate equilibrium
    mass_ratio_sum: float = np.nan

    @property
    def minors_positive(self) -> bool:
        return bool(np.all(self.minors > 0))

    @property
    def d_positive(self) -> bool:
        return bool(np.all(self.d > 0))


def _tolerance(game: OpinionGame, y: np.ndarray) -> float:
    return 1e-12 * (1.0 + game.sigma * game.theta.max() * y.max())


def _merit(y, game: OpinionGame) -> float:
    """Potential of the rescaled gradient flow, written in opinion variables.

    Its gradient in y is m_i F_i(y), so the equilibrium is its unique
    minimizer over the positive orthant.
    """
    m, s, p, M = game.m, game.sigma, game.p, game.M
    return float(-0.5 * (m @ y) ** 2 + 0.5 * np.sum((M - s * game.theta) * m * y ** 2)
                 + s / (p + 2.0) * np.sum(m * y ** (p + 2.0)))


def _search_direction(y, F, game):
    """Newton direction, or a shifted one where the symmetrized Jacobian is indefinite.

    In z = sqrt(m) y the Jacobian becomes the symmetric Hessian
    diag(d) - sqrt(m) sqrt(m)^T of the potential; the Newton step is the same
    in either variable.
    """
    sm = np.sqrt(game.m)
    H = np.diag(diag_terms(y, game)) - np.outer(sm, sm)
    lam_min = float(np.linalg.eigvalsh(H)[0])
    newton = lam_min > 0
    if not newton:
        H = H + (1e-3 * max(1.0, float(np.abs(np.diag(H)).max())) - lam_min) * np.eye(game.N)
    dz = -np.linalg.solve(H, sm * F)
    return dz / sm, newton


def shift_index(y, game: OpinionGame, tol: float = EQUALITY_TOL) -> int:
    """Number of opinions at or below the average (in ascending-theta order).

    Ties with the average count as below, so a consensus gives N.
    """
    order = np.argsort(game.theta, kind="stable")
    ys = np.asarray(y)[order]
    y_bar = float(game.m @ y) / game.M
    below = ys <= y_bar + tol * max(1.0, abs(y_bar))
    return int(np.count_nonzero(below))


def certify(y, game: OpinionGame, iterations: int = 0) -> Equilibrium:
    y = np.array(_positive(y), dtype=float)
    d = diag_terms(y, game)
    y.setflags(write=False)
    return Equilibrium(
        y_star=y,
        residual_norm=float(np.max(np.abs(residual(y, game)))),
        jacobian_det=jacobian_det(y, game),
        minors=leading_minors(y, game),
        d=d,
        shift_index=shift_index(y, game),
        y_bar=float(game.m @ y) / game.M,
        iterations=iterations,
        mass_ratio_sum=float(np.sum(game.m / d)),
    )


def solve(game: OpinionGame, seed=None, max_iter: int = 200, max_halvings: int = 40) -> Equilibrium:
    """Damped Newton iteration for the unique positive equilibrium.

    Starts from ``seed`` (default theta^(1/p)), clipped into the a priori box
    [min theta^(1/p), max theta^(1/p)] (widened by 1e-6). Each step is halved
    until the iterate stays in the box and either the potential decreases
    (Armijo) or, once potential differences are at rounding level, the
    residual decreases. Where the Jacobian is not positive definite in the
    symmetrizing variables the Newton system is shifted to keep a descent
    direction. When no halving succeeds a projected step of the opinion flow
    (steepest descent of the potential) is taken instead.
    """
    lo, hi = game.box()
    y = game.theta ** (1.0 / game.p) if seed is None else np.array(seed, dtype=float)
    if y.shape != game.theta.shape:
        raise ValueError("seed must have one entry per agent")
    y = np.clip(y, lo, hi)
    F = residual(y, game)
    fnorm = float(np.max(np.abs(F)))
    phi = _merit(y, game)
    best, best_norm = y.copy(), fnorm
    for it in range(1, max_iter + 1):
        if fnorm <= _tolerance(game, y):
            return certify(y, game, it - 1)
        step, _ = _search_direction(y, F, game)
        slope = float(np.sum(game.m * F * step))
        noise = 1e-13 * (1.0 + abs(phi))
        accepted = False
        alpha = 1.0
        for _ in range(max_halvings + 1):
            trial = y + alpha * step
            if np.all(trial >= lo) and np.all(trial <= hi):
                Ft = residual(trial, game)
                pt = _merit(trial, game)
                tn = float(np.max(np.abs(Ft)))
                if pt <= phi + 1e-4 * alpha * slope or (abs(alpha * slope) < noise and tn < fnorm):
                    y, F, fnorm, phi, accepted = trial, Ft, tn, pt, True
                    break
            alpha *= 0.5
        if not accepted:
            y, F, fnorm, phi = _flow_step(y, F, phi, game, lo, hi, max_halvings)
            log.debug("newton line search failed at iteration %d; took a flow step", it)
        if fnorm < best_norm:
            best, best_norm = y.copy(), fnorm
    if best_norm <= _tolerance(game, best):
        return certify(best, game, max_iter)
    raise SolverError(f"no convergence after {max_iter} iterations (|F| = {best_norm:.3e})",
                      best=best, residual_norm=best_norm)


def _flow_step(y, F, phi, game, lo, hi, max_halvings):
    """Projected steepest-descent step y <- clip(y - t F) with Armijo backtracking."""
    t = 1.0 / float(np.abs(diag_terms(y, game)).max() + game.M)
    for _ in range(4 * max_halvings):
        trial = np.clip(y - t * F, lo, hi)
        pt = _merit(trial, game)
        if pt <= phi + 1e-4 * float(np.sum(game.m * F * (trial - y))):
            break
        t *= 0.5
    Ft = residual(trial, game)
    return trial, Ft, float(np.max(np.abs(Ft))), pt


def payoff(y, game: OpinionGame, i: int, y_bar: Optional[float] = None) -> float:
    """p_i(y) = sigma (theta_i y_i^2 / 2 - y_i^(p+2)/(p+2)) - M/2 (y_bar - y_i)^2.

    ``i`` is 0-based. ``y_bar`` defaults to the mass-weighted mean of ``y``;
    pass it explicitly to evaluate a deviation against a fixed average opinion.
    """
    y = _positive(y)
    if y_bar is None:
        y_bar = float(game.m @ y) / game.M
    yi, s, p = y[i], game.sigma, game.p
    return float(s * (0.5 * game.theta[i] * yi ** 2 - yi ** (p + 2) / (p + 2)) - 0.5 * game.M * (y_bar - yi) ** 2)


def deviation_payoff(r, y, game: OpinionGame, i: int, y_bar: Optional[float] = None) -> np.ndarray:
    """Payoff of agent ``i`` when it alone moves to opinion(s) ``r``.

    The average opinion is held at ``y_bar`` (default: the average of ``y``):
    a single agent takes the collective opinion as given. Its derivative in
    ``r`` is then exactly the opinion flow of agent ``i`` and its second
    derivative is ``-d_i``.
    """
    y = _positive(y)
    if y_bar is None:
        y_bar = float(game.m @ y) / game.M
    r = np.asarray(r, dtype=float)
    s, p = game.sigma, game.p
    return s * (0.5 * game.theta[i] * r ** 2 - r ** (p + 2) / (p + 2)) - 0.5 * game.M * (y_bar - r) ** 2


@dataclass
class NashReport:
    verified: bool
    offenders: list = field(default_factory=list)


def verify_nash(eq, game: OpinionGame, grid: int = 10_000) -> NashReport:
    """Grid check that no agent gains by a unilateral deviation.

    For each agent, the deviation payoff is scanned over opinions r with r^p
    in [min theta, max theta]. The profile passes when the best grid value
    does not beat the current payoff and sits within one grid cell of the
    agent's opinion. ``eq`` may be an :class:`Equilibrium` or any positive
    profile. Offenders are reported as (agent (1-based), better r, gain).
    """
    y = eq.y_star if isinstance(eq, Equilibrium) else _positive(eq)
    lo = game.theta.min() ** (1.0 / game.p)
    hi = game.theta.max() ** (1.0 / game.p)
    r = np.linspace(lo, hi, grid) if hi > lo else np.array([lo])
    cell = (hi - lo) / max(grid - 1, 1)
    y_bar = float(game.m @ y) / game.M
    offenders = []
    for i in range(game.N):
        vals = deviation_payoff(r, y, game, i, y_bar)
        k = int(np.argmax(vals))
        here = float(deviation_payoff(y[i], y, game, i, y_bar))
        tol = 1e-12 * max(1.0, abs(here))
        if vals[k] > here + tol or abs(r[k] - y[i]) > cell * (1 + 1e-9):
            offenders.append((i + 1, float(r[k]), float(vals[k] - here)))
    return NashReport(not offenders, offenders)


@dataclass
class StructureReport:
    ok: bool
    monotone: bool
    equality_pattern: bool
    lower_bound: bool
    minmax: bool
    shift_index: int
    shifts: bool
    order: np.ndarray
    violations: list = field(default_factory=list)


def structure_report(eq, game: OpinionGame, tol: float = EQUALITY_TOL) -> StructureReport:
    """Check the ordering, equality and shift structure of an equilibrium.

    Agents are sorted by conviction internally; ``order`` records the
    permutation and ``shift_index`` counts, in that order, the opinions at or
    below the average.
    """
    y = eq.y_star if isinstance(eq, Equilibrium) else _positive(eq)
    order = np.argsort(game.theta, kind="stable")
    th, m, ys = game.theta[order], game.m[order], np.asarray(y)[order]
    p, s, M = game.p, game.sigma, game.M
    yp = ys ** p
    scale = max(1.0, float(np.max(th)))
    violations = []

    monotone = bool(np.all(np.diff(yp) >= -tol * scale))
    if not monotone:
        violations.append("opinions not monotone in conviction")
    minmax = bool(np.all(yp >= th[0] - tol * scale) and np.all(yp <= th[-1] + tol * scale))
    if not minmax:
        violations.append("opinion outside [min theta, max theta]")

    same_theta = np.isclose(th[:, None], th[None, :], rtol=0, atol=tol * scale)
    same_y = np.isclose(ys[:, None], ys[None, :], rtol=0, atol=tol * max(1.0, float(ys.max())))
    equality = bool(np.array_equal(same_theta, same_y))
    if not equality:
        violations.append("theta_i = theta_j does not match y_i = y_j")

    m_tail = np.cumsum(m[::-1])[::-1]
    lower = bool(np.all(yp >= th + (m_tail - M) / s - tol * scale))
    if not lower:
        violations.append("lower bound y_i^p >= theta_i + (m_{>=i} - M)/sigma fails")

    i0 = shift_index(y, game, tol)
    shifts = bool(np.all(yp[:i0] >= th[:i0] - tol * scale) and np.all(yp[i0:] <= th[i0:] + tol * scale))
    if not shifts:
        violations.append(f"shift pattern fails at i0 = {i0}")

    ok = monotone and minmax and equality and lower and shifts
    return StructureReport(ok, monotone, equality, lower, minmax, i0, shifts, order, violations)


@dataclass
class SweepRow:
    sigma: float
    dist_conviction: float
    dist_consensus: float
    y_star: np.ndarray


def asymptotic_sweep(game: OpinionGame, sigmas: Sequence[float]) -> list[SweepRow]:
    """Distances of y*(sigma) to theta^(1/p) and to the consensus theta_bar^(1/p)."""
    rows = []
    target_hi = game.theta ** (1.0 / game.p)
    target_lo = game.theta_bar ** (1.0 / game.p)
    for s in sigmas:
        if not s > 0:
            raise ValueError(f"sigma must be positive, got {s}")
        y = solve(game.with_sigma(s)).y_star
        rows.append(SweepRow(float(s), float(np.max(np.abs(y - target_hi))),
                             float(np.max(np.abs(y - target_lo))), y))
    return rows


def multistart(game: OpinionGame, n_seeds: int = 100, rng=None) -> tuple[Equilibrium, int, float]:
    """Solve from uniform random seeds in the a priori box.

    Returns (reference solution, number of seeds agreeing with it within 1e-8,
    largest deviation).
    """
    rng = np.random.default_rng(rng)
    ref = solve(game)
    lo, hi = game.box(0.0)
    worst, agree = 0.0, 0
    for _ in range(n_seeds):
        seed = rng.uniform(lo, hi, game.N)
        y = solve(game, seed).y_star
        dev = float(np.max(np.abs(y - ref.y_star)))
        worst = max(worst, dev)
        agree += dev <= 1e-8
    return ref, agree, worst
