"""Run configuration, synthetic observations and CSV/JSON emission."""

from __future__ import annotations

import copy
import csv
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .adjoint import ShootingConfig
from .forward import InitialCondition, SolverConfig, StateTrajectory, grow_from_seed, solve_forward
from .grid import Grid
from .kinetics import PARAM_NAMES, ModelConstants, Parameters
from .objective import Observations
from .optimizer import DEFAULT_BOX, OptimizerConfig

__all__ = [
    "ConfigError",
    "NoiseSpec",
    "RunConfig",
    "DEFAULTS",
    "load_config",
    "generate_observations",
    "build_initial_condition",
    "write_observations",
    "read_observations",
    "write_field",
    "write_radius",
    "write_trace",
    "write_json",
    "NOISE_TARGETS",
]

NOISE_TARGETS = ("N_star", "S_star")


class ConfigError(ValueError):
    """The configuration file is missing, malformed or inconsistent."""


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_triple = {"type": "array", "items": _num, "minItems": 3, "maxItems": 3}
_range = {"type": "array", "items": [_num, _num, {"type": "integer", "minimum": 1}], "minItems": 3, "maxItems": 3}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"b_over_a": _num, "delta": _num, "beta_hat_a": _num},
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_y": {"type": "integer", "minimum": 3},
                "dt": _pos,
                "n_t": {"type": "integer", "minimum": 1},
            },
        },
        "initial": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "density": {"enum": ["seed", "zero", "one"]},
                "target_S": {"type": "number", "minimum": 1},
                "S0": _pos,
            },
        },
        "true_params": _triple,
        "initial_guess": _triple,
        "bounds": {"type": "array", "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                   "minItems": 3, "maxItems": 3},
        "weights": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"mu1": {"type": "number", "minimum": 0}, "mu2": {"type": "number", "minimum": 0}},
        },
        "optimizer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"alpha": _pos, "tol_J": _pos, "tol_step": _pos, "tol_grad": _pos,
                           "max_iter": {"type": "integer", "minimum": 0}},
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"bvp_tol": _pos, "max_picard": {"type": "integer", "minimum": 1},
                           "residual_tol": _pos, "max_seed_time": _pos},
        },
        "shooting": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"epsilon": {"type": ["number", "null"], "exclusiveMinimum": 0},
                           "root_tol": _pos},
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "level": {"type": "number", "minimum": 0},
                "targets": {"type": "array", "items": {"enum": list(NOISE_TARGETS)}, "uniqueItems": True},
            },
        },
        "observations": {"type": ["string", "null"]},
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {name: {"oneOf": [_num, _range]} for name in PARAM_NAMES},
        },
        "gradcheck": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "points": {"type": "array", "items": _triple},
                "n_random": {"type": "integer", "minimum": 0},
                "h": _pos,
                "rtol": _pos,
                "atol": _pos,
            },
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}

DEFAULTS = {
    "model": {"b_over_a": 0.5, "delta": 0.5, "beta_hat_a": 0.005},
    "grid": {"n_y": 30, "dt": 0.01, "n_t": 50},
    "initial": {"density": "seed", "target_S": 34.0, "S0": 1.0},
    "true_params": [0.1, 0.05, 0.9],
    "initial_guess": [0.16, 0.03, 1.0],
    "bounds": [list(b) for b in DEFAULT_BOX],
    "weights": {"mu1": 100.0, "mu2": 1.0},
    "optimizer": {"alpha": 0.1, "tol_J": 1e-6, "tol_step": 1e-8, "tol_grad": 1e-12, "max_iter": 300},
    "solver": {"bvp_tol": 1e-10, "max_picard": 100, "residual_tol": 1e-6, "max_seed_time": 50.0},
    "shooting": {"epsilon": None, "root_tol": 1e-12},
    "noise": {"level": 0.0, "targets": list(NOISE_TARGETS)},
    "observations": None,
    "sweep": {"c_c": [0.05, 0.2, 20], "c_d": [0.01, 0.1, 20], "sigma": 0.9},
    "gradcheck": {"points": [[0.16, 0.03, 1.0]], "n_random": 5, "h": 1e-5, "rtol": 1e-2, "atol": 1e-7},
    "seed": 0,
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key != "sweep":
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass(frozen=True)
class NoiseSpec:
    """Multiplicative uniform noise ``x -> x (1 + level u)``, ``u ~ U[-1, 1]``."""

    level: float = 0.0
    seed: int = 0
    targets: tuple[str, ...] = NOISE_TARGETS

    def __post_init__(self):
        if not self.level >= 0:
            raise ValueError(f"noise level must be non-negative, got {self.level}")
        bad = set(self.targets) - set(NOISE_TARGETS)
        if bad:
            raise ValueError(f"unknown noise targets {sorted(bad)}")


@dataclass(frozen=True)
class RunConfig:
    """Validated run settings, converted to the solver types."""

    raw: dict
    base_dir: Path

    @property
    def model(self) -> ModelConstants:
        return ModelConstants(**self.raw["model"])

    @property
    def grid(self) -> Grid:
        return Grid(**self.raw["grid"])

    @property
    def solver(self) -> SolverConfig:
        return SolverConfig(**self.raw["solver"])

    @property
    def shooting(self) -> ShootingConfig:
        return ShootingConfig(**self.raw["shooting"])

    @property
    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(box=tuple(map(tuple, self.raw["bounds"])), **self.raw["optimizer"])

    @property
    def true_params(self) -> Parameters:
        return Parameters.from_array(self.raw["true_params"])

    @property
    def initial_guess(self) -> np.ndarray:
        return np.asarray(self.raw["initial_guess"], dtype=float)

    @property
    def mu(self):
        w = self.raw["weights"]
        return float(w["mu1"]), float(w["mu2"])

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def noise(self) -> NoiseSpec:
        n = self.raw["noise"]
        return NoiseSpec(float(n["level"]), self.seed, tuple(n["targets"]))

    @property
    def observations_path(self) -> Path | None:
        path = self.raw["observations"]
        return None if path is None else (self.base_dir / path)

    def with_seed(self, seed: int) -> "RunConfig":
        raw = copy.deepcopy(self.raw)
        raw["seed"] = int(seed)
        return RunConfig(raw, self.base_dir)


def load_config(path) -> RunConfig:
    """Read a JSON config, fill defaults and validate every field.

    Raises
    ------
    ConfigError
        On a missing file, invalid JSON, schema violation or a value rejected
        by the solver types.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        user = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(user, path.parent)


def config_from_dict(user: dict, base_dir=".") -> RunConfig:
    try:
        jsonschema.Draft7Validator(SCHEMA).validate(user)
    except jsonschema.ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise ConfigError(f"config field {where}: {exc.message}") from exc
    cfg = RunConfig(_merge(DEFAULTS, user), Path(base_dir))
    try:
        # instantiating the solver types runs their own validation
        cfg.model, cfg.grid, cfg.solver, cfg.shooting, cfg.optimizer, cfg.true_params, cfg.noise
        Parameters.from_array(cfg.initial_guess)
        _sweep_axes(cfg.raw["sweep"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    obs = cfg.observations_path
    if obs is not None and not obs.is_file():
        raise ConfigError(f"observation file {obs} does not exist")
    return cfg


def _sweep_axes(sweep):
    ranged = [k for k in PARAM_NAMES if isinstance(sweep.get(k), list)]
    fixed = [k for k in PARAM_NAMES if isinstance(sweep.get(k), (int, float))]
    if len(ranged) != 2 or len(fixed) != 1:
        raise ValueError("sweep needs two ranged parameters [lo, hi, n] and one fixed value")
    for k in ranged:
        lo, hi, n = sweep[k]
        if hi < lo or (n == 1 and hi != lo):
            raise ValueError(f"sweep range for {k} must have lo <= hi, and lo == hi when n == 1")
    return ranged, fixed[0]


def build_initial_condition(cfg: RunConfig) -> InitialCondition:
    """Initial state from the ``initial`` section (grown seed, or a uniform profile)."""
    init = cfg.raw["initial"]
    grid = cfg.grid
    if init["density"] == "seed":
        return grow_from_seed(cfg.true_params, cfg.model, cfg.solver, float(init["target_S"]), grid)
    value = 0.0 if init["density"] == "zero" else 1.0
    return InitialCondition(np.full(grid.n_y, value), float(init["S0"]))


def generate_observations(p_true: Parameters, ic: InitialCondition, grid: Grid, mc: ModelConstants = ModelConstants(),
                          cfg: SolverConfig = SolverConfig(), noise: NoiseSpec = NoiseSpec(),
                          mu1=100.0, mu2=1.0):
    """Synthetic data from a forward solve at ``p_true``, optionally perturbed.

    Every sample of a target field is multiplied by ``1 + level u`` with ``u``
    drawn i.i.d. from U[-1, 1].  The generator is seeded from ``noise.seed``
    and the draws for ``N*`` precede those for ``S*``, so a given ``NoiseSpec`` always
    yields the same data.

    Returns
    -------
    obs : Observations
    traj : StateTrajectory
        The noiseless trajectory.
    """
    traj = solve_forward(p_true, ic, grid, mc, cfg)
    N_star = traj.N.copy()
    S_star = traj.S.copy()
    if noise.level > 0:
        rng = np.random.default_rng(noise.seed)
        uN = rng.uniform(-1.0, 1.0, N_star.shape)
        uS = rng.uniform(-1.0, 1.0, S_star.shape)
        if "N_star" in noise.targets:
            N_star *= 1.0 + noise.level * uN
        if "S_star" in noise.targets:
            S_star *= 1.0 + noise.level * uS
    return Observations(N_star, S_star, mu1, mu2), traj


# --- writers -----------------------------------------------------------------

UNIT = "[nondim]"


def _fmt(x):
    return repr(float(x))


def _write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) if isinstance(v, float) else v for v in row])
    return path


def _node_columns(grid: Grid, name):
    return [f"{name}(y={y:.6f}) {UNIT}" for y in grid.y]


def write_observations(path, obs: Observations, grid: Grid):
    """Columns ``t``, ``S_star``, then ``N_star`` at each landmark node."""
    header = [f"t {UNIT}", f"S_star {UNIT}"] + _node_columns(grid, "N_star")
    rows = ([float(t), float(s)] + [float(v) for v in n] for t, s, n in zip(grid.t, obs.S_star, obs.N_star))
    return _write_rows(path, header, rows)


def read_observations(path, grid: Grid, mu1=100.0, mu2=1.0) -> Observations:
    """Inverse of :func:`write_observations`; the time and node columns must match ``grid``."""
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read observations {path}: {exc}") from exc
    if data.shape != (grid.n_t + 1, grid.n_y + 2):
        raise ConfigError(f"observations {path} have shape {data.shape}, grid needs {(grid.n_t + 1, grid.n_y + 2)}")
    if not np.allclose(data[:, 0], grid.t, rtol=0, atol=1e-9):
        raise ConfigError(f"observation times in {path} do not match the grid")
    return Observations(data[:, 2:], data[:, 1], mu1, mu2)


def write_field(path, values, grid: Grid, name):
    """Space-time field as one row per time level."""
    header = [f"t {UNIT}"] + _node_columns(grid, name)
    rows = ([float(t)] + [float(v) for v in row] for t, row in zip(grid.t, values))
    return _write_rows(path, header, rows)


def write_radius(path, traj: StateTrajectory):
    header = [f"t {UNIT}", f"S {UNIT}", f"S_prime {UNIT}"]
    rows = ([float(t), float(s), float(sp)] for t, s, sp in zip(traj.grid.t, traj.S, traj.S_prime))
    return _write_rows(path, header, rows)


def write_trace(path, trace):
    header = ["k", f"c_c {UNIT}", f"c_d {UNIT}", f"sigma {UNIT}", f"J {UNIT}", f"gnorm {UNIT}", f"step {UNIT}"]
    rows = ([r.k, *map(float, r.p), float(r.J), r.grad_norm, float(r.step_norm)] for r in trace)
    return _write_rows(path, header, rows)


def write_table(path, header, rows):
    return _write_rows(path, header, rows)


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
