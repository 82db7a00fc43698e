"""Desk-scale verification suites.

Each suite runs simulations or solves and returns a list of :class:`Check`
records with the measured value, the pinned limit and the verdict. The CLI
``verify`` command and the acceptance tests both run these.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from . import nash
from .potential import descent_monitor, gradient, potential, to_z
from .diagnostics import fit_rate, floor_window, one_minus_cos
from .dynamics import IntegratorSpec, integrate, rhs_opinion, rk4_path
from .model import FlockState, Kernel, SystemParams
from .scenarios import (HaScenario, fat_lyapunov, fat_tail_config, ha_closed_form, ha_flock_config,
                        random_sectorial, sectorial_speed_floor)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.name}: value={self.value:.6g} limit={self.limit:.6g} {self.detail}".rstrip()


def _le(name, value, limit, detail=""):
    return Check(name, bool(value <= limit), float(value), float(limit), detail)


def _ge(name, value, limit, detail=""):
    return Check(name, bool(value >= limit), float(value), float(limit), detail)


def _warm_up():
    s, p = ha_flock_config(HaScenario(1.0, 1.0, 0.5))
    integrate(s, p, IntegratorSpec(1e-3, 1e-3, 1), probes=())


# -- alignment and flocking ---------------------------------------------------

def ha_oracle() -> list[Check]:
    """Two-agent line runs against the closed form in all three regimes."""
    _warm_up()
    start = time.perf_counter()
    worst = 0.0
    for lam in (0.5, 1.0, 2.0):
        scn = HaScenario(lam, 1.0, 0.9)
        state, params = ha_flock_config(scn)
        tr = integrate(state, params, IntegratorSpec(dt=1e-4, t_final=5.0, record_every=100), probes=())
        exact = ha_closed_form(scn, tr.t)
        worst = max(worst, float(np.max(np.abs(tr.v[:, 0, 0] - exact) / exact)))
    elapsed = time.perf_counter() - start
    return [_le("ha.closed_form_rel_err", worst, 1e-6, "lambda in {0.5, 1, 2}, dt=1e-4, t<=5"),
            _le("ha.runtime_s", elapsed, 5.0)]


def absolute_state(seed: int = 7):
    """N=6, n=3 flock with uniform kernel level 5, unit total mass, sigma * theta_bar = 4.5."""
    rng = np.random.default_rng(seed)
    N, n = 6, 3
    theta = rng.uniform(1.0, 5.0, N)
    sigma = 1.5
    theta *= 3.0 / theta.mean()
    state = FlockState(rng.standard_normal((N, n)), rng.standard_normal((N, n)), theta, np.full(N, 1.0 / N))
    params = SystemParams(sigma=sigma, kappa=0.1, p=2.0, kernel=Kernel.uniform(5.0))
    return state, params


def absolute_communication() -> list[Check]:
    state, params = absolute_state()
    margin = params.kernel.infimum * state.total_mass - params.sigma * state.theta_bar
    tr = integrate(state, params, IntegratorSpec(dt=1e-3, t_final=40.0, record_every=100), probes=("A", "B"))
    fit = fit_rate(tr.t, tr.series("A"))
    target = state.theta_bar ** (1.0 / params.p)
    speed_gap = float(np.max(np.abs(tr.final.speeds - target)))
    return [Check("absolute.hypothesis_margin", abs(margin - 0.5) < 1e-12, margin, 0.5),
            _le("absolute.A_rate", fit.rate, -0.45, f"window={fit.window}"),
            _ge("absolute.A_r2", fit.r_squared, 0.99),
            _le("absolute.final_speed_gap", speed_gap, 1e-4)]


SECTORIAL_PARAMS = SystemParams(sigma=0.5, kappa=0.2, p=2.0, kernel=Kernel.smooth_power(1.0, 1.0))
SECTORIAL_SEEDS = (0, 1, 2)
ANGLE_FLOOR = 1e-10


@lru_cache(maxsize=None)
def sectorial_run(seed: int):
    state = random_sectorial(seed, N=8, n=3, epsilon=0.2)
    return state, integrate(state, SECTORIAL_PARAMS, IntegratorSpec(dt=1e-2, t_final=400.0, record_every=50))


def sectorial_alignment() -> list[Check]:
    _warm_up()
    start = time.perf_counter()
    sectorial_run.cache_clear()
    checks = []
    for seed in SECTORIAL_SEEDS:
        state, tr = sectorial_run(seed)
        tag = f"sectorial[seed={seed}]"
        g2d = tr.series("gamma2d")
        for name, series, window in (("A", tr.series("A"), None),
                                     ("B", tr.series("B"), None),
                                     ("1-cos(gamma2d)", one_minus_cos(g2d), floor_window(tr.t, g2d, ANGLE_FLOOR))):
            fit = fit_rate(tr.t, series, window)
            checks.append(_le(f"{tag}.{name}_rate", fit.rate, -1e-12,
                              f"rate must be strictly negative, window={tuple(round(w, 2) for w in fit.window)}"))
            checks.append(_ge(f"{tag}.{name}_r2", fit.r_squared, 0.98))
        D = tr.series("D")
        half = len(tr.t) // 2
        checks.append(_le(f"{tag}.diameter_ratio", D.max() / D[: half + 1].max(), 1.05))
        final = tr.final
        vbar = final.m @ final.v / final.total_mass
        target = final.theta_bar ** (1.0 / SECTORIAL_PARAMS.p)
        checks.append(_le(f"{tag}.velocity_spread", float(np.max(np.linalg.norm(final.v - vbar, axis=1))), 1e-3))
        checks.append(_le(f"{tag}.limit_speed_gap", abs(float(np.linalg.norm(vbar)) - target), 1e-3))
    checks.append(_le("sectorial.runtime_s", time.perf_counter() - start, 30.0))
    return checks


def fat_tail() -> list[Check]:
    beta, r0 = 1.5, 0.01
    state, params = fat_tail_config(beta=beta, r0=r0, x1_0=10.0, v1_0=0.9)
    tr = integrate(state, params, IntegratorSpec(dt=1e-3, t_final=100.0, record_every=1), probes=())
    L = np.array([fat_lyapunov(s, beta, r0) for _, s, _ in tr])
    v1 = tr.v[:, 0, 0]
    x1 = tr.x[:, 0, 0]
    floor = L[0]
    return [_ge("fat.v1_minus_bound", float(np.min(v1 - floor)), -1e-6, f"L(0)={floor:.6g}"),
            _le("fat.lyapunov_max_step_increase", float(np.max(np.diff(L))), 1e-8,
                "nonincreasing per step, as stated"),
            _ge("fat.x1_min_step", float(np.min(np.diff(x1))), 1e-300, "x1 strictly increasing")]


PRINCIPLE_KERNELS = (Kernel.uniform(1.0), Kernel.smooth_power(1.0, 0.5), Kernel.smooth_power(1.0, 1.0),
                     Kernel.smooth_power(2.0, 2.0), Kernel.truncated_power(1.5, 0.5))


@lru_cache(maxsize=None)
def principle_run(seed: int):
    rng = np.random.default_rng(10_000 + seed)
    N = int(rng.integers(2, 9))
    n = int(rng.integers(2, 5))
    eps = float(rng.uniform(0.05, 0.5))
    state = random_sectorial(seed, N, n, eps)
    params = SystemParams(sigma=float(rng.uniform(0.5, 2.0)), kappa=0.0 if seed % 2 == 0 else 0.1,
                          p=float(rng.choice([1.0, 2.0, 3.0])),
                          kernel=PRINCIPLE_KERNELS[seed % len(PRINCIPLE_KERNELS)])
    tr = integrate(state, params, IntegratorSpec(dt=1e-2, t_final=10.0, record_every=5),
                   probes=("gamma", "gamma2d", "margin"))
    return state, params, tr


def sectorial_principles(n_configs: int = 200) -> list[Check]:
    worst_l, worst_floor = np.inf, np.inf
    for seed in range(n_configs):
        state, params, tr = principle_run(seed)
        c0 = sectorial_speed_floor(state, params)
        worst_l = min(worst_l, float(tr.v[:, :, -1].min()))
        worst_floor = min(worst_floor, float(np.linalg.norm(tr.v, axis=2).min() - c0))
    return [_ge("principles.min_vertical_velocity", worst_l, 0.0, f"{n_configs} configs"),
            _ge("principles.min_speed_minus_c0", worst_floor, 0.0, f"{n_configs} configs")]


def grassmann_inequality() -> list[Check]:
    worst = -np.inf
    for seed in SECTORIAL_SEEDS:
        _, tr = sectorial_run(seed)
        worst = max(worst, float(np.max(tr.series("gamma") - tr.series("gamma2d"))))
    for seed in range(200):
        _, _, tr = principle_run(seed)
        worst = max(worst, float(np.max(tr.series("gamma") - tr.series("gamma2d"))))
    return [_le("grassmann.max_gamma_minus_gamma2d", worst, 1e-9)]


def _symmetry_setup():
    rng = np.random.default_rng(5)
    N, n = 5, 3
    state = FlockState(rng.standard_normal((N, n)), rng.standard_normal((N, n)),
                       rng.uniform(0.5, 2.0, N), rng.uniform(0.5, 1.5, N))
    params = SystemParams(sigma=1.0, kappa=0.1, p=2.0, kernel=Kernel.smooth_power(1.0, 0.5))
    return state, params, IntegratorSpec(dt=1e-3, t_final=5.0, record_every=50)


def conservation_and_symmetry() -> list[Check]:
    state, params, spec = _symmetry_setup()
    tr = integrate(state, params, spec, probes=())
    mom = tr.theta @ tr.m
    drift = float(np.max(np.abs(mom - mom[0])) / mom[0])

    def rel(a, b):
        return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))

    mirror = 0.0
    for k in range(state.n):
        flip = np.ones(state.n)
        flip[k] = -1.0
        tr_f = integrate(state.replace(x=state.x * flip, v=state.v * flip), params, spec, probes=())
        mirror = max(mirror, rel(tr_f.x, tr.x * flip), rel(tr_f.v, tr.v * flip), rel(tr_f.theta, tr.theta))
    rng = np.random.default_rng(11)
    rot = 0.0
    for _ in range(3):
        U, _ = np.linalg.qr(rng.standard_normal((state.n, state.n)))
        tr_u = integrate(state.transformed(U), params, spec, probes=())
        rot = max(rot, rel(tr_u.x, tr.x @ U.T), rel(tr_u.v, tr.v @ U.T), rel(tr_u.theta, tr.theta))
    return [_le("symmetry.theta_momentum_drift", drift, 1e-10),
            _le("symmetry.mirror_rel_err", mirror, 1e-10),
            _le("symmetry.rotation_rel_err", rot, 1e-10)]


# -- opinion game ---------------------------------------------------------------

GOLDEN = nash.OpinionGame(theta=[1.0, 3.0], m=[1.0, 1.0], sigma=1.0, p=1.0)
GOLDEN_Y = np.array([(1 + 5 ** 0.5) / 2, (3 + 5 ** 0.5) / 2])


def random_game(rng, N=None) -> nash.OpinionGame:
    N = int(rng.integers(2, 9)) if N is None else N
    return nash.OpinionGame(theta=rng.uniform(0.2, 5.0, N), m=rng.uniform(0.1, 2.0, N),
                            sigma=float(10 ** rng.uniform(-1.5, 1.5)), p=float(rng.choice([0.5, 1.0, 2.0, 3.0])))


def certificate_gaps(eq: nash.Equilibrium, game: nash.OpinionGame) -> dict:
    a, b = nash.momentum(eq.y_star, game)
    return {
        "det": eq.jacobian_det,
        "min_minor": float(eq.minors.min()),
        "min_d": float(eq.d.min()),
        "mass_ratio_sum": eq.mass_ratio_sum,
        "momentum_rel": abs(a - b) / abs(b),
    }


def nash_exactness(n_games: int = 20, n_seeds: int = 100) -> list[Check]:
    golden = float(np.max(np.abs(nash.solve(GOLDEN).y_star - GOLDEN_Y)))
    consensus = 0.0
    for theta, p in ((2.0, 1.0), (3.0, 2.0), (0.7, 0.5)):
        g = nash.OpinionGame([theta] * 4, [0.1, 0.2, 0.3, 0.4], 1.3, p)
        consensus = max(consensus, float(np.max(np.abs(nash.solve(g).y_star - theta ** (1 / p)))))
    rng = np.random.default_rng(2024)
    worst_dev, worst = 0.0, {"det": np.inf, "min_minor": np.inf, "min_d": np.inf,
                             "mass_ratio_sum": -np.inf, "momentum_rel": 0.0}
    for _ in range(n_games):
        game = random_game(rng)
        ref, _, dev = nash.multistart(game, n_seeds, rng)
        worst_dev = max(worst_dev, dev)
        gaps = certificate_gaps(ref, game)
        for k in ("det", "min_minor", "min_d"):
            worst[k] = min(worst[k], gaps[k])
        worst["mass_ratio_sum"] = max(worst["mass_ratio_sum"], gaps["mass_ratio_sum"])
        worst["momentum_rel"] = max(worst["momentum_rel"], gaps["momentum_rel"])
    return [_le("nash.golden_err", golden, 1e-10),
            _le("nash.consensus_err", consensus, 0.0),
            _le("nash.multistart_max_dev", worst_dev, 1e-8, f"{n_games} games x {n_seeds} seeds"),
            Check("nash.min_det", worst["det"] > 0, worst["det"], 0.0, "> 0"),
            Check("nash.min_leading_minor", worst["min_minor"] > 0, worst["min_minor"], 0.0, "> 0"),
            Check("nash.min_d", worst["min_d"] > 0, worst["min_d"], 0.0, "> 0"),
            Check("nash.max_mass_ratio_sum", worst["mass_ratio_sum"] < 1, worst["mass_ratio_sum"], 1.0, "< 1"),
            _le("nash.momentum_identity_rel", worst["momentum_rel"], 1e-10)]


def opinion_convergence(n_runs: int = 50) -> list[Check]:
    rng = np.random.default_rng(99)
    game = nash.OpinionGame(theta=rng.uniform(0.5, 3.0, 5), m=rng.uniform(0.1, 1.0, 5), sigma=1.0, p=2.0)
    y_star = nash.solve(game).y_star
    worst_end, worst_rise = 0.0, -np.inf
    for _ in range(n_runs):
        y0 = rng.uniform(0.01, 4.0, game.N)
        stop = lambda y: np.linalg.norm(gradient(to_z(y, game), game)) < 1e-10  # noqa: E731
        t, Y = rk4_path(lambda _t, y: rhs_opinion(y, game), y0, 1e-2, 200_000, 1, stop)
        if not stop(Y[-1]):
            worst_end = np.inf
        rep = descent_monitor(to_z(Y, game), game)
        worst_rise = max(worst_rise, rep.max_increase)
        worst_end = max(worst_end, float(np.max(np.abs(Y[-1] - y_star))))
    return [_le("opinion.endpoint_err", worst_end, 1e-6, f"{n_runs} runs to |grad Phi| < 1e-10"),
            _le("opinion.max_potential_rise", worst_rise, 1e-9)]


ASYMPTOTIC_GAME = nash.OpinionGame(theta=[0.5, 1.0, 2.0, 4.0], m=[0.1, 0.2, 0.3, 0.4], sigma=1.0, p=2.0)


def sigma_asymptotics() -> list[Check]:
    rows = {r.sigma: r for r in nash.asymptotic_sweep(ASYMPTOTIC_GAME, [1e-3, 1e-1, 10.0, 1e3])}
    hi = rows[1e3].dist_conviction / rows[10.0].dist_conviction
    lo = rows[1e-3].dist_consensus / rows[1e-1].dist_consensus
    return [_le("asymptotics.conviction_ratio", hi, 0.1, "sigma 1e3 vs 10"),
            _le("asymptotics.consensus_ratio", lo, 0.1, "sigma 1e-3 vs 1e-1")]


def central_gradient(f: Callable[[np.ndarray], float], z: np.ndarray, h: float = 1e-6) -> np.ndarray:
    g = np.empty_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = h * max(1.0, abs(z[i]))
        g[i] = (f(z + e) - f(z - e)) / (2 * e[i])
    return g


def jacobian_cross_checks(n_samples: int = 100) -> list[Check]:
    rng = np.random.default_rng(314)
    worst_det, worst_grad = 0.0, 0.0
    for _ in range(n_samples):
        game = random_game(rng)
        lo, hi = game.box(0.0)
        y = rng.uniform(0.5 * lo, 1.5 * hi, game.N)
        closed = nash.jacobian_det(y, game)
        dense = float(np.linalg.det(nash.jacobian(y, game)))
        worst_det = max(worst_det, abs(closed - dense) / abs(dense))
        z = to_z(y, game)
        fd = central_gradient(lambda w: potential(w, game), z)
        an = gradient(z, game)
        worst_grad = max(worst_grad, float(np.linalg.norm(fd - an) / np.linalg.norm(an)))
    return [_le("jacobian.det_rel_err", worst_det, 1e-10, f"{n_samples} samples"),
            _le("jacobian.potential_gradient_rel_err", worst_grad, 1e-6, f"{n_samples} samples")]


SUITES: dict[str, Callable[[], list[Check]]] = {
    "ha": ha_oracle,
    "absolute": absolute_communication,
    "sectorial": sectorial_alignment,
    "fat-tail": fat_tail,
    "principles": sectorial_principles,
    "symmetry": conservation_and_symmetry,
    "grassmann": grassmann_inequality,
    "nash": nash_exactness,
    "opinion": opinion_convergence,
    "asymptotics": sigma_asymptotics,
    "jacobian": jacobian_cross_checks,
}


def run_suite(name: str) -> list[Check]:
    if name == "all":
        return [c for fn in SUITES.values() for c in fn()]
    try:
        return SUITES[name]()
    except KeyError:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES) + ['all']}") from None
