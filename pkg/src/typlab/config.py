"""Experiment configuration: JSON in, validated and defaulted dataclasses out."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .ensembles import EnsembleSpec, profile_from_json
from .errors import ConfigError, TyplabError
from .hilbert import MacroDecomposition, new_decomposition

__all__ = [
    "ExperimentConfig",
    "DEFAULTS",
    "load_schema",
    "load_config",
    "config_from_dict",
    "canonical_json",
    "config_hash",
    "read_complex_csv",
    "write_complex_csv",
]

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "trials": 1,
    "mu": 1,
    "out": "out",
    "ensemble": {"profile": {"kind": "exponential-band", "s": 0.01}, "H0": None},
    "time_grid": {"window": "early", "steps": 2000},
    "observables": {"B_file": None, "reference_curves": True},
    "constants": {"c_c": 1.0, "c_minus": 1.0, "c_plus": 1.0, "C_hat": 1.0,
                  "eta": 0.1, "J_samples": 20, "J_part": "re-im"},
    "bounds": {"eps": 0.1, "delta": 0.1, "eps_prime": 0.25, "kappa": 1e-3,
               "xi": 0.3, "tau": 0.3, "kB": 1.0},
    "deloc": {"kappa_grid": [0.25, 0.5, 1.0], "delta": 1e-8},
    "dyson": {"S": "flat", "z": [[0.0, 1.0]], "tol": 1e-10, "max_iter": 100000, "damping": 0.5},
    "eth": {"nu": 1, "xi_grid": [0.1, 0.2, 0.3]},
}

# (start, end) in units of the inverse mean level spacing
WINDOWS = {"early": (0.0, 0.1), "late": (1e3, 2e3)}


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    """Load a schema shipped in ``typlab/schemas`` (e.g. ``"config"``)."""
    text = resources.files("typlab").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def config_hash(obj: Any) -> str:
    """Git blob hash of the canonical JSON encoding."""
    data = canonical_json(obj)
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def read_complex_csv(path: str | Path) -> np.ndarray:
    """Dense complex matrix stored as rows of interleaved ``Re, Im`` columns."""
    try:
        raw = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read matrix file {path}: {exc}") from exc
    if raw.shape[1] % 2:
        raise ConfigError(f"{path}: expected an even number of columns (Re, Im pairs)")
    return raw[:, 0::2] + 1j * raw[:, 1::2]


def write_complex_csv(path: str | Path, A: np.ndarray) -> None:
    A = np.asarray(A, dtype=complex)
    raw = np.empty((A.shape[0], 2 * A.shape[1]))
    raw[:, 0::2] = A.real
    raw[:, 1::2] = A.imag
    np.savetxt(path, raw, delimiter=",", fmt="%.17g")


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    raw: dict
    decomposition: MacroDecomposition
    ensemble: EnsembleSpec
    base_dir: Path = field(default=Path("."))

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def trials(self) -> int:
        return int(self.raw["trials"])

    @property
    def mu(self) -> int:
        return int(self.raw["mu"])

    @property
    def D(self) -> int:
        return self.decomposition.D

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def time_grid(self, mean_gap: float) -> np.ndarray:
        tg = self.raw["time_grid"]
        steps = int(tg["steps"])
        if "t_start" in tg or "t_end" in tg:
            a, b = float(tg.get("t_start", 0.0)), float(tg["t_end"])
            if tg.get("units", "absolute") == "inverse-mean-gap":
                a, b = a / mean_gap, b / mean_gap
        else:
            a, b = WINDOWS[tg.get("window", "early")]
            a, b = a / mean_gap, b / mean_gap
        if not b > a:
            raise ConfigError(f"time grid end {b} must exceed start {a}")
        return np.linspace(a, b, steps)

    def observable(self) -> np.ndarray | None:
        f = self.raw["observables"].get("B_file")
        if f is None:
            return None
        B = read_complex_csv(self.resolve(f))
        if B.shape != (self.D, self.D):
            raise ConfigError(f"observable shape {B.shape} does not match D={self.D}")
        return B

    def with_overrides(self, seed: int | None = None, out: str | None = None) -> "ExperimentConfig":
        raw = copy.deepcopy(self.raw)
        if seed is not None:
            raw["seed"] = int(seed)
        if out is not None:
            raw["out"] = str(out)
        return ExperimentConfig(raw, self.decomposition, self.ensemble, self.base_dir)


def config_from_dict(obj: dict, base_dir: str | Path = ".") -> ExperimentConfig:
    """Validate against the shipped schema, apply defaults and build the ensemble."""
    try:
        jsonschema.validate(obj, load_schema("config"))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc
    raw = _merge(DEFAULTS, obj)
    base = Path(base_dir)
    try:
        decomp = new_decomposition(raw["dims"])
        if not 1 <= raw["mu"] <= decomp.m:
            raise ConfigError(f"mu={raw['mu']} outside 1..{decomp.m}")
        if not 1 <= raw["eth"]["nu"] <= decomp.m:
            raise ConfigError(f"eth.nu={raw['eth']['nu']} outside 1..{decomp.m}")
        profile = profile_from_json(raw["ensemble"]["profile"], decomp.D)
        H0 = None
        h0 = raw["ensemble"].get("H0")
        if h0 is not None:
            if "file" in h0:
                p = Path(h0["file"])
                H0 = read_complex_csv(p if p.is_absolute() else base / p)
            else:
                H0 = np.diag(np.asarray(h0["diagonal"], dtype=float))
        ens = EnsembleSpec(profile, H0)
    except ConfigError:
        raise
    except (TyplabError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(raw, decomp, ens, base)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(obj, path.parent)
