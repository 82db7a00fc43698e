"""JSON run configurations.

A simulation config is a JSON object::

    {
      "scenario": "ha" | {"name": "ha", "lambda": 2.0, "v0": 0.9},
      "params": {"sigma": 1.0, "kappa": 0.0, "p": 2.0,
                 "kernel": {"type": "smooth-power", "lambda": 1.0, "beta": 1.0}},
      "integrator": {"dt": 0.001, "t_final": 10.0, "record_every": 10},
      "diagnostics": {"probes": ["A", "B", "D", "R", "gamma", "gamma2d", "margin"],
                      "grid_size": null},
      "fit": {"A": null, "one_minus_cos_gamma2d": [10.0, 50.0]},
      "invariants": ["no_blowup", "velocity_bound"],
      "output": {"dir": "ha-run"}
    }

Only ``scenario`` and ``params.sigma`` are required. The ``ha`` and ``fat-tail``
scenarios fix every parameter except ``sigma``. A game config for the
``nash`` command has a ``game`` section instead; see :func:`parse_game_config`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .diagnostics import FRAME_FIELDS
from .dynamics import IntegratorSpec
from .model import FlockState, Kernel, SystemParams, validate
from .nash import OpinionGame
from .scenarios import HaScenario, fat_tail_config, ha_flock_config, random_sectorial

REQUIRED = object()

FIT_SERIES = ("A", "B", "D", "gamma", "gamma2d", "one_minus_cos_gamma2d")
INVARIANTS = ("no_blowup", "velocity_bound", "theta_conservation", "sector_preserved", "speed_floor",
              "gamma_le_gamma2d", "flock_diameter_bounded", "a_monotone", "misaligned")
DEFAULT_INVARIANTS = {
    "ha": ("no_blowup", "velocity_bound"),
    "fat-tail": ("no_blowup", "misaligned"),
    "random-sectorial": ("no_blowup", "velocity_bound", "theta_conservation", "sector_preserved",
                         "speed_floor", "gamma_le_gamma2d", "flock_diameter_bounded"),
    "explicit": ("no_blowup", "velocity_bound", "theta_conservation"),
}
SCENARIO_KEYS = {
    "ha": {"lambda": 2.0, "v0": 0.9},
    "fat-tail": {"beta": 1.5, "r0": 0.01, "x1": 10.0, "v1": 0.9, "v2": None},
    "random-sectorial": {"seed": 0, "N": 8, "n": 3, "epsilon": 0.2, "theta_range": [0.5, 2.0],
                         "speed_range": [0.5, 1.5], "position_scale": 1.0, "masses": None},
    "explicit": {"x": REQUIRED, "v": REQUIRED, "theta": REQUIRED, "m": REQUIRED},
}
KERNEL_KEYS = {
    "uniform": {"level": 1.0},
    "smooth-power": {"lambda": 1.0, "beta": 1.0},
    "truncated-power": {"beta": REQUIRED, "r0": REQUIRED},
}


class ConfigError(ValueError):
    """Schema violation; ``path`` is the dotted location of the offending key."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _join(path, key):
    return f"{path}.{key}" if path else str(key)


def _section(doc, path, allowed) -> dict:
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(path or "<root>", "expected an object")
    for k in doc:
        if k not in allowed:
            raise ConfigError(_join(path, k), f"unknown key (allowed: {', '.join(sorted(allowed))})")
    return doc


def _number(doc, key, path, default=REQUIRED, positive=False, nonneg=False, integer=False):
    where = _join(path, key)
    if key not in doc or doc[key] is None:
        if default is REQUIRED:
            raise ConfigError(where, "required key is missing")
        return default
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(where, f"expected a number, got {json.dumps(val)}")
    if integer and int(val) != val:
        raise ConfigError(where, f"expected an integer, got {val}")
    if not math.isfinite(val):
        raise ConfigError(where, "must be finite")
    if positive and not val > 0:
        raise ConfigError(where, f"must be > 0, got {val}")
    if nonneg and not val >= 0:
        raise ConfigError(where, f"must be >= 0, got {val}")
    return int(val) if integer else float(val)


def _array(doc, key, path, ndim):
    where = _join(path, key)
    if key not in doc:
        raise ConfigError(where, "required key is missing")
    try:
        arr = np.array(doc[key], dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(where, "expected a numeric array") from None
    if arr.ndim != ndim:
        raise ConfigError(where, f"expected a {ndim}-d array, got shape {arr.shape}")
    return arr


def _pair(doc, key, path, default):
    val = doc.get(key, default)
    where = _join(path, key)
    if (not isinstance(val, (list, tuple)) or len(val) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in val)):
        raise ConfigError(where, "expected [low, high]")
    if not 0 < val[0] <= val[1]:
        raise ConfigError(where, f"expected 0 < low <= high, got {list(val)}")
    return float(val[0]), float(val[1])


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    scenario_args: dict
    state: FlockState
    params: SystemParams
    integrator: IntegratorSpec
    probes: tuple = FRAME_FIELDS
    grid_size: Optional[int] = None
    fits: dict = field(default_factory=lambda: {"A": None})
    invariants: tuple = ()
    output_dir: Optional[str] = None


def _kernel(doc, path) -> Kernel:
    doc = _section(doc, path, {"type", *{k for keys in KERNEL_KEYS.values() for k in keys}})
    kind = doc.get("type", "uniform")
    if kind not in KERNEL_KEYS:
        raise ConfigError(_join(path, "type"), f"unknown kernel {kind!r} (choose from {', '.join(KERNEL_KEYS)})")
    _section(doc, path, {"type", *KERNEL_KEYS[kind]})
    vals = {k: _number(doc, k, path, d, positive=True) for k, d in KERNEL_KEYS[kind].items()}
    try:
        if kind == "uniform":
            return Kernel.uniform(vals["level"])
        if kind == "smooth-power":
            return Kernel.smooth_power(vals["lambda"], vals["beta"])
        return Kernel.truncated_power(vals["beta"], vals["r0"])
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(path, str(e)) from None


def _scenario(doc):
    if isinstance(doc, str):
        doc = {"name": doc}
    if not isinstance(doc, dict):
        raise ConfigError("scenario", "expected a scenario name or object")
    name = doc.get("name")
    if name not in SCENARIO_KEYS:
        raise ConfigError("scenario.name", f"unknown scenario {name!r} (choose from {', '.join(SCENARIO_KEYS)})")
    _section(doc, "scenario", {"name", *SCENARIO_KEYS[name]})
    return name, doc


def _build(name, doc, params_doc):
    fixed = name in ("ha", "fat-tail")
    params_doc = _section(params_doc, "params", {"sigma"} if fixed else {"sigma", "kappa", "p", "kernel"})
    sigma = _number(params_doc, "sigma", "params", positive=True)
    path = "scenario"
    try:
        if name == "ha":
            scn = HaScenario(_number(doc, "lambda", path, 2.0, positive=True), sigma,
                             _number(doc, "v0", path, 0.9, positive=True))
            state, params = ha_flock_config(scn)
            return state, params, {"lambda": scn.lam, "v0": scn.v0}
        if name == "fat-tail":
            args = {k: _number(doc, k, path, d) for k, d in SCENARIO_KEYS["fat-tail"].items() if k != "v2"}
            args["v2"] = _number(doc, "v2", path, None)
            state, params = fat_tail_config(args["beta"], args["r0"], args["x1"], args["v1"], args["v2"], sigma)
            return state, params, args
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(path, str(e)) from None

    params = SystemParams(sigma=sigma,
                          kappa=_number(params_doc, "kappa", "params", 0.0, nonneg=True),
                          p=_number(params_doc, "p", "params", 2.0, positive=True),
                          kernel=_kernel(params_doc.get("kernel"), "params.kernel"))
    if name == "random-sectorial":
        eps = _number(doc, "epsilon", path, 0.2, positive=True)
        if not eps < 1:
            raise ConfigError("scenario.epsilon", f"must be < 1, got {eps}")
        N = _number(doc, "N", path, 8, positive=True, integer=True)
        n = _number(doc, "n", path, 3, positive=True, integer=True)
        masses = None
        if doc.get("masses") is not None:
            masses = _array(doc, "masses", path, 1)
            if masses.shape != (N,):
                raise ConfigError("scenario.masses", f"expected {N} masses, got {masses.size}")
        args = {"seed": _number(doc, "seed", path, 0, nonneg=True, integer=True), "N": N, "n": n,
                "epsilon": eps, "theta_range": _pair(doc, "theta_range", path, [0.5, 2.0]),
                "speed_range": _pair(doc, "speed_range", path, [0.5, 1.5]),
                "position_scale": _number(doc, "position_scale", path, 1.0, nonneg=True)}
        state = random_sectorial(masses=masses, **args)
        return state, params, args
    arrays = {"x": _array(doc, "x", path, 2), "v": _array(doc, "v", path, 2),
              "theta": _array(doc, "theta", path, 1), "m": _array(doc, "m", path, 1)}
    try:
        state = FlockState(**arrays)
    except ValueError as e:
        raise ConfigError(path, str(e)) from None
    bad = validate(state, params)
    if bad is not None:
        raise ConfigError(_join(path, bad.field) if bad.field in arrays else _join("params", bad.field), str(bad))
    return state, params, {}


def parse_config(text: str) -> RunConfig:
    """Validate a simulation config document and fill in defaults."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("<root>", f"invalid JSON: {e}") from None
    doc = _section(doc, "", {"scenario", "params", "integrator", "diagnostics", "fit", "invariants", "output", "sweep"})
    if "scenario" not in doc:
        raise ConfigError("scenario", "required key is missing")
    name, sdoc = _scenario(doc["scenario"])
    if "params" not in doc:
        raise ConfigError("params.sigma", "required key is missing")
    state, params, args = _build(name, sdoc, doc["params"])

    idoc = _section(doc.get("integrator"), "integrator", {"dt", "t_final", "record_every"})
    dt = _number(idoc, "dt", "integrator", 1e-3, positive=True)
    t_final = _number(idoc, "t_final", "integrator", 10.0, positive=True)
    if t_final < dt:
        raise ConfigError("integrator.t_final", f"must be >= dt = {dt}")
    spec = IntegratorSpec(dt, t_final, _number(idoc, "record_every", "integrator", 10, positive=True, integer=True))

    ddoc = _section(doc.get("diagnostics"), "diagnostics", {"probes", "grid_size"})
    probes = ddoc.get("probes", list(FRAME_FIELDS))
    if not isinstance(probes, list):
        raise ConfigError("diagnostics.probes", "expected a list")
    for i, p in enumerate(probes):
        if p not in FRAME_FIELDS:
            raise ConfigError(f"diagnostics.probes[{i}]", f"unknown probe {p!r}")
    grid = ddoc.get("grid_size")
    if grid is not None:
        grid = _number(ddoc, "grid_size", "diagnostics", positive=True, integer=True)

    fdoc = _section(doc.get("fit", {"A": None}), "fit", set(FIT_SERIES))
    fits = {}
    for key, win in fdoc.items():
        if win is not None:
            if (not isinstance(win, list) or len(win) != 2
                    or not all(isinstance(w, (int, float)) and not isinstance(w, bool) for w in win)
                    or not 0 <= win[0] < win[1]):
                raise ConfigError(f"fit.{key}", "expected null or [t_start, t_end] with 0 <= t_start < t_end")
            win = (float(win[0]), float(win[1]))
        fits[key] = win

    invariants = doc.get("invariants", list(DEFAULT_INVARIANTS[name]))
    if not isinstance(invariants, list):
        raise ConfigError("invariants", "expected a list")
    for i, inv in enumerate(invariants):
        if inv not in INVARIANTS:
            raise ConfigError(f"invariants[{i}]", f"unknown invariant {inv!r}")
    if "misaligned" in invariants and name != "fat-tail":
        raise ConfigError("invariants", "misaligned applies to the fat-tail scenario only")

    odoc = _section(doc.get("output"), "output", {"dir"})
    out = odoc.get("dir")
    if out is not None and (not isinstance(out, str) or not out):
        raise ConfigError("output.dir", "expected a non-empty string")

    return RunConfig(name, args, state, params, spec, tuple(probes), grid, fits, tuple(invariants), out)


@dataclass(frozen=True)
class GameConfig:
    game: OpinionGame
    seeds: int = 100
    rng_seed: int = 0
    verify_grid: int = 10_000
    sigmas: tuple = tuple(10.0 ** k for k in range(-3, 4))
    output_dir: Optional[str] = None


def parse_game_config(text: str) -> GameConfig:
    """Validate an opinion-game config::

        {"game": {"theta": [1, 3], "m": [1, 1], "sigma": 1.0, "p": 1.0},
         "multistart": {"seeds": 100, "rng_seed": 0},
         "verify_grid": 10000,
         "sweep": {"sigmas": [0.001, 0.01, 0.1, 1, 10, 100, 1000]},
         "output": {"dir": "golden"}}

    Masses default to one each, ``p`` to 1.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("<root>", f"invalid JSON: {e}") from None
    doc = _section(doc, "", {"game", "multistart", "verify_grid", "sweep", "output"})
    if "game" not in doc:
        raise ConfigError("game", "required key is missing")
    gdoc = _section(doc["game"], "game", {"theta", "m", "sigma", "p"})
    theta = _array(gdoc, "theta", "game", 1)
    m = _array(gdoc, "m", "game", 1) if "m" in gdoc else np.ones_like(theta)
    sigma = _number(gdoc, "sigma", "game", positive=True)
    p = _number(gdoc, "p", "game", 1.0, positive=True)
    try:
        game = OpinionGame(theta, m, sigma, p)
    except ValueError as e:
        raise ConfigError("game", str(e)) from None

    mdoc = _section(doc.get("multistart"), "multistart", {"seeds", "rng_seed"})
    seeds = _number(mdoc, "seeds", "multistart", 100, nonneg=True, integer=True)
    rng_seed = _number(mdoc, "rng_seed", "multistart", 0, nonneg=True, integer=True)
    grid = _number(doc, "verify_grid", "", 10_000, positive=True, integer=True)

    sdoc = _section(doc.get("sweep"), "sweep", {"sigmas"})
    sigmas = sdoc.get("sigmas", list(GameConfig.sigmas))
    if not isinstance(sigmas, list) or not sigmas:
        raise ConfigError("sweep.sigmas", "expected a non-empty list")
    for i in range(len(sigmas)):
        if isinstance(sigmas[i], bool) or not isinstance(sigmas[i], (int, float)) or not sigmas[i] > 0:
            raise ConfigError(f"sweep.sigmas[{i}]", f"expected a positive number, got {json.dumps(sigmas[i])}")

    odoc = _section(doc.get("output"), "output", {"dir"})
    out = odoc.get("dir")
    if out is not None and (not isinstance(out, str) or not out):
        raise ConfigError("output.dir", "expected a non-empty string")
    return GameConfig(game, seeds, rng_seed, grid, tuple(float(s) for s in sigmas), out)


def get_path(doc: dict, dotted: str) -> Any:
    cur = doc
    for part in dotted.split("."):
        if not isinstance(cur, dict) or part not in cur:
            raise ConfigError(dotted, "key not present in config")
        cur = cur[part]
    return cur


def set_path(doc: dict, dotted: str, value) -> dict:
    """Copy of ``doc`` with the dotted key set to ``value`` (intermediate objects created)."""
    out = json.loads(json.dumps(doc))
    parts = dotted.split(".")
    cur = out
    for part in parts[:-1]:
        nxt = cur.get(part)
        if nxt is None:
            nxt = cur[part] = {}
        if isinstance(nxt, str) and part == "scenario":
            nxt = cur[part] = {"name": nxt}
        if not isinstance(nxt, dict):
            raise ConfigError(dotted, f"{part} is not an object")
        cur = nxt
    cur[parts[-1]] = value
    return out
