"""
Model configuration documents.

One JSON document per run:

    {"kind": "explicit", "atoms": [0, 1], "weights": [1, 2], "dims": [2, 1],
     "matrices": [[[[-1, 0], [0, 0]], [[0, 0], [2, 0]]], [[[3, 0]]]],
     "sections": [{"pairs": [[0, [[1, 0], [1, 0]]]]}, {"random": 3}],
     "tolerances": {"representation": 1e-10}, "seed": 1}

Complex entries are [re, im] pairs (plain reals are accepted). Other kinds:
"position" (k_min, k_max, n_per_cell), "group" (name of a shipped group or
cayley path, coefficients list or "random", optional side) and "random"
(n_atoms, max_dim, eig_range).
"""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from parameter import DEFAULT_TOLERANCES, ParameterManager, Tolerances
from utils.errors import ConfigError
from utils.log import get_logger

log = get_logger("cfg")

KINDS = ("explicit", "position", "group", "random")
GROUP_DIR = Path(__file__).resolve().parent.parent.parent / "config" / "groups"


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    params: dict
    tolerances: Tolerances = DEFAULT_TOLERANCES
    seed: int = 0
    sections: tuple = ()


def parse_complex(value) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return complex(value[0], value[1])
    raise ConfigError(f"expected a number or an [re, im] pair, got {value!r}")


def parse_vector(entries) -> np.ndarray:
    if not isinstance(entries, list):
        raise ConfigError(f"expected a list of complex entries, got {entries!r}")
    return np.array([parse_complex(v) for v in entries], dtype=complex)


def parse_matrix(rows) -> np.ndarray:
    if not isinstance(rows, list) or not rows:
        raise ConfigError("matrix must be a nonempty list of rows")
    out = [parse_vector(r) for r in rows]
    if any(len(r) != len(out) for r in out):
        raise ConfigError("matrix must be square")
    return np.array(out)


def _require(doc: dict, *keys) -> None:
    missing = [k for k in keys if k not in doc]
    if missing:
        raise ConfigError(f"kind {doc.get('kind')!r} needs {', '.join(missing)}")


def _integer(doc: dict, key: str) -> int:
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    return value


def parse_model_config(doc, base_dir: Optional[Path] = None, defaults: Tolerances = DEFAULT_TOLERANCES) -> ModelConfig:
    if not isinstance(doc, dict):
        raise ConfigError("model config must be a JSON object")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {', '.join(KINDS)}, got {kind!r}")
    base_dir = Path.cwd() if base_dir is None else Path(base_dir)

    if kind == "explicit":
        _require(doc, "atoms", "weights", "dims", "matrices")
        if not all(isinstance(doc[k], list) for k in ("atoms", "weights", "dims", "matrices")):
            raise ConfigError("atoms, weights, dims and matrices must be lists")
        if not (len(doc["atoms"]) == len(doc["weights"]) == len(doc["dims"]) == len(doc["matrices"])):
            raise ConfigError("atoms, weights, dims and matrices must have equal lengths")
        for atom in doc["atoms"]:
            if not isinstance(atom, (int, str)) or isinstance(atom, bool):
                raise ConfigError(f"atom labels must be integers or strings, got {atom!r}")
        params = {"atoms": list(doc["atoms"]), "weights": list(doc["weights"]), "dims": list(doc["dims"]),
                  "matrices": [parse_matrix(m) for m in doc["matrices"]], "metrics": doc.get("metrics")}
    elif kind == "position":
        _require(doc, "k_min", "k_max", "n_per_cell")
        params = {k: _integer(doc, k) for k in ("k_min", "k_max", "n_per_cell")}
    elif kind == "group":
        if ("name" in doc) == ("cayley" in doc):
            raise ConfigError("group config needs exactly one of name or cayley")
        params = {"name": doc.get("name"), "side": doc.get("side", "right")}
        if "cayley" in doc:
            params["cayley"] = str(resolve_path(doc["cayley"], base_dir))
        coefficients = doc.get("coefficients", "random")
        params["coefficients"] = coefficients if coefficients == "random" else list(parse_vector(coefficients))
    else:
        _require(doc, "n_atoms", "max_dim")
        eig_range = doc.get("eig_range", [-10.0, 10.0])
        if not (isinstance(eig_range, list) and len(eig_range) == 2):
            raise ConfigError("eig_range must be a [lo, hi] pair")
        params = {"n_atoms": _integer(doc, "n_atoms"), "max_dim": _integer(doc, "max_dim"),
                  "eig_range": [float(x) for x in eig_range]}

    try:
        tolerances = defaults.merged(doc.get("tolerances"))
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    sections = doc.get("sections", [])
    if not isinstance(sections, list) or not all(isinstance(s, dict) for s in sections):
        raise ConfigError("sections must be a list of objects")
    return ModelConfig(kind, params, tolerances, seed, tuple(sections))


def resolve_path(name: str, base_dir: Optional[Path] = None) -> Path:
    """Look next to the config document first, then in config/groups/."""
    base_dir = Path.cwd() if base_dir is None else Path(base_dir)
    for candidate in (base_dir / name, GROUP_DIR / name, Path(name)):
        if candidate.exists():
            return candidate
    raise ConfigError(f"referenced file {name} not found")


def load_model_config(path, defaults: Optional[Tolerances] = None) -> ModelConfig:
    path = Path(path)
    if defaults is None:
        defaults = ParameterManager().tolerances()
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"failed to read {path}: {e}") from None
    config = parse_model_config(doc, path.parent, defaults)
    log.debug("loaded %s model from %s", config.kind, path)
    return config
