"""Experiment configuration: defaults, validation and object construction.

Configs are JSON objects.  Missing sections fall back to ``DEFAULTS``; the
merged dictionary is what gets hashed into every artifact, so equal merged
configs (including the seed) reproduce identical outputs.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .io import config_hash, load_potential_csv
from .markov import BASIS_KINDS, NOISE_LAWS, RandomAmplitudeSpec
from .spectral import Grid1D, SampledPotential, builtin_potential

DEFAULTS = {
    "grid": {"a": 0.0, "b": 1.0, "n": 1000},
    "V": {"name": "zero"},
    "Q": {"name": "linear", "slope": 1.0},
    "n_modes": 8,
    "sigma_shift": 0.0,
    "lyapunov": {"alpha": "auto", "s": 2.0, "target": 1},
    "steering": {
        "tol": 1e-2, "max_iter": 1000, "horizon_max": None, "cap": 5.0, "dt": None,
        "armijo": 0.1, "m_max": 30, "retry_budget": 6, "overlap_floor": 1e-3,
        "initial": [1.0, 1.0, 1.0],
    },
    "conditions": {"coupling_tol": 1e-8, "resonance_tol": None},
    "genericity": {"sigmas": [0.1, 0.2, 0.5]},
    "independence": {"N": 6, "denom_bound": 2, "tol": 1e-8},
    "random": {
        "b": {"law": "harmonic", "scale": 0.3}, "J_trunc": 6, "noise": "normal",
        "basis": "cosine", "substeps": 50, "seed": None, "n_steps": 200, "replicas": 16,
        "initial_a": [1.0], "initial_b": [0.0, 1.0], "burn_in": None, "epsilon": 0.5,
        "n_boot": 1000, "threshold": 3.0,
    },
    "linearize": {"sigmas": [1e-2, 1e-3, 1e-4], "T": None, "dt": None, "initial": [1.0, 1.0]},
    "output_dir": "out",
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key not in ("V", "Q", "b"):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v)


@dataclass
class ExperimentConfig:
    raw: dict
    base_dir: Path

    @property
    def hash(self) -> str:
        # where artifacts land does not change what they contain
        return config_hash({k: v for k, v in self.raw.items() if k != "output_dir"})

    @property
    def seed(self):
        return self.raw["random"]["seed"]

    @property
    def output_dir(self) -> Path:
        out = Path(self.raw["output_dir"])
        return out if out.is_absolute() else self.base_dir / out

    def provenance(self) -> dict:
        return {"config_hash": self.hash, "seed": self.seed}

    # -- constructors -------------------------------------------------
    def grid(self) -> Grid1D:
        g = self.raw["grid"]
        return Grid1D(float(g["a"]), float(g["b"]), int(g["n"]))

    def potential(self, key: str) -> SampledPotential:
        spec = dict(self.raw[key])
        grid = self.grid()
        if "csv" in spec:
            path = Path(spec["csv"])
            return load_potential_csv(path if path.is_absolute() else self.base_dir / path, grid)
        name = spec.pop("name")
        return builtin_potential(grid, name, **spec)

    def state(self, coeffs, N: int) -> np.ndarray:
        return parse_state(coeffs, N)

    def random_spec(self) -> RandomAmplitudeSpec:
        r = self.raw["random"]
        b = r["b"]
        kw = dict(basis_kind=r["basis"], noise=r["noise"], substeps=int(r["substeps"]))
        if isinstance(b, dict):
            return RandomAmplitudeSpec.harmonic(float(b.get("scale", 0.3)), int(r["J_trunc"]), **kw)
        return RandomAmplitudeSpec(tuple(b), **kw)


def parse_state(coeffs, N: int) -> np.ndarray:
    """Amplitudes given as a real list, ``{"re": [...], "im": [...]}`` or
    ``{"mode": i}``; zero-padded to N and normalized."""
    if isinstance(coeffs, dict) and "mode" in coeffs:
        c = np.zeros(N, dtype=complex)
        c[int(coeffs["mode"]) - 1] = 1.0
        return c
    if isinstance(coeffs, dict):
        re = np.asarray(coeffs.get("re", []), dtype=float)
        im = np.asarray(coeffs.get("im", np.zeros_like(re)), dtype=float)
        if re.shape != im.shape:
            raise ConfigError("initial state 're' and 'im' differ in length")
        vals = re + 1j * im
    else:
        vals = np.asarray(coeffs, dtype=float).astype(complex)
    if len(vals) > N:
        raise ConfigError(f"initial state has {len(vals)} entries, truncation is N={N}")
    c = np.zeros(N, dtype=complex)
    c[: len(vals)] = vals
    nrm = np.linalg.norm(c)
    if nrm == 0:
        raise ConfigError("initial state is the zero vector")
    return c / nrm


def _validate_state(coeffs, N: int, label: str):
    try:
        if isinstance(coeffs, dict) and "mode" in coeffs:
            _require(1 <= int(coeffs["mode"]) <= N, f"{label}: mode outside 1..{N}")
        parse_state(coeffs, N)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{label}: {exc}") from exc


def validate(raw: dict, base_dir: Path, command: str | None = None):
    g = raw["grid"]
    _require(all(_is_num(g.get(k)) for k in ("a", "b", "n")), "grid needs numeric a, b, n")
    _require(g["a"] < g["b"], "grid: need a < b")
    _require(int(g["n"]) == g["n"] and g["n"] >= 2, "grid: n must be an integer >= 2")
    N = raw["n_modes"]
    _require(isinstance(N, int) and N >= 1, "n_modes must be a positive integer")
    _require(N <= g["n"] / 4, f"n_modes={N} exceeds grid.n/4 (grid too coarse)")
    _require(_is_num(raw["sigma_shift"]), "sigma_shift must be a number")
    for key in ("V", "Q"):
        spec = raw[key]
        _require(isinstance(spec, dict) and ("name" in spec or "csv" in spec),
                 f"{key}: give a built-in 'name' or a 'csv' path")
        if "csv" in spec:
            path = Path(spec["csv"])
            path = path if path.is_absolute() else base_dir / path
            _require(path.is_file(), f"{key}: potential file not found: {path}")
        else:
            _require(spec["name"] in ("zero", "constant", "linear", "quadratic", "well"),
                     f"{key}: unknown built-in potential {spec['name']!r}")

    lyap = raw["lyapunov"]
    alpha = lyap["alpha"]
    _require(alpha == "auto" or (_is_num(alpha) and alpha > 0), "lyapunov.alpha must be > 0 or 'auto'")
    _require(_is_num(lyap["s"]) and lyap["s"] >= 0, "lyapunov.s must be >= 0")
    _require(isinstance(lyap["target"], int) and 1 <= lyap["target"] <= N,
             f"lyapunov.target must be an integer in 1..{N}")

    st = raw["steering"]
    _require(_is_num(st["tol"]) and st["tol"] > 0, "steering.tol must be > 0")
    _require(isinstance(st["max_iter"], int) and st["max_iter"] >= 1, "steering.max_iter must be >= 1")
    _require(_is_num(st["cap"]) and st["cap"] > 0, "steering.cap must be > 0")
    for key in ("horizon_max", "dt"):
        _require(st[key] is None or (_is_num(st[key]) and st[key] > 0), f"steering.{key} must be > 0 or null")
    _require(_is_num(st["armijo"]) and 0 < st["armijo"] < 1, "steering.armijo must lie in (0, 1)")
    _validate_state(st["initial"], N, "steering.initial")

    cond = raw["conditions"]
    _require(_is_num(cond["coupling_tol"]) and cond["coupling_tol"] >= 0, "conditions.coupling_tol must be >= 0")
    _require(cond["resonance_tol"] is None or (_is_num(cond["resonance_tol"]) and cond["resonance_tol"] >= 0),
             "conditions.resonance_tol must be >= 0 or null")
    sig = raw["genericity"]["sigmas"]
    _require(isinstance(sig, list) and sig and all(_is_num(v) for v in sig), "genericity.sigmas must be numbers")

    ind = raw["independence"]
    _require(isinstance(ind["N"], int) and 1 <= ind["N"] <= N, f"independence.N must be in 1..{N}")
    _require(isinstance(ind["denom_bound"], int) and ind["denom_bound"] >= 1, "independence.denom_bound must be >= 1")

    r = raw["random"]
    b = r["b"]
    if isinstance(b, dict):
        _require(b.get("law", "harmonic") == "harmonic", "random.b law must be 'harmonic' or an explicit list")
        _require(isinstance(r["J_trunc"], int) and r["J_trunc"] >= 1, "random.J_trunc must be >= 1")
    else:
        _require(isinstance(b, list) and b and all(_is_num(v) and v >= 0 for v in b),
                 "random.b must be a list of nonnegative numbers")
    _require(r["noise"] in NOISE_LAWS, f"random.noise must be one of {NOISE_LAWS}")
    _require(r["basis"] in BASIS_KINDS, f"random.basis must be one of {BASIS_KINDS}")
    _require(isinstance(r["substeps"], int) and r["substeps"] >= 2, "random.substeps must be >= 2")
    _require(isinstance(r["n_steps"], int) and r["n_steps"] >= 1, "random.n_steps must be >= 1")
    _require(isinstance(r["replicas"], int) and r["replicas"] >= 10, "random.replicas must be >= 10")
    if r["burn_in"] is not None:
        _require(isinstance(r["burn_in"], int) and 0 <= r["burn_in"] < r["n_steps"],
                 "random.burn_in must be in [0, n_steps)")
    _validate_state(r["initial_a"], N, "random.initial_a")
    _validate_state(r["initial_b"], N, "random.initial_b")
    if command == "random":
        _require(isinstance(r["seed"], int) and not isinstance(r["seed"], bool) and r["seed"] >= 0,
                 "random.seed (or --seed) is required for stochastic runs")

    lin = raw["linearize"]
    _require(all(_is_num(s) and s > 0 for s in lin["sigmas"]) and len(lin["sigmas"]) >= 2,
             "linearize.sigmas needs at least two positive values")
    for key in ("T", "dt"):
        _require(lin[key] is None or (_is_num(lin[key]) and lin[key] > 0), f"linearize.{key} must be > 0 or null")
    _validate_state(lin["initial"], N, "linearize.initial")


def load_config(path=None, seed=None, out=None, command=None, overrides=None) -> ExperimentConfig:
    """Read, merge with defaults, apply CLI overrides and validate."""
    user = {}
    base_dir = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            user = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be an object")
        base_dir = path.resolve().parent
    if overrides:
        user = _merge(user, overrides)
    raw = _merge(DEFAULTS, user)
    if seed is not None:
        raw["random"]["seed"] = int(seed)
    if out is not None:
        raw["output_dir"] = str(Path(out).resolve())
    try:
        validate(raw, base_dir, command)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed config: {exc!r}") from exc
    return ExperimentConfig(raw, base_dir)
