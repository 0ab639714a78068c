"""Run configuration: JSON file -> validated :class:`RunConfig`.

Every section has documented defaults; a config file only needs the keys
it changes.  Validation collects all problems before raising
:class:`~skewswitch.errors.ConfigInvalid`, so a bad file is reported in one
pass.

Schema (all keys optional)::

    {
      "base": "cat-map" | "t3-one-stable" | "t3-two-stable" | "suspension-flow",
      "matrix": [[...]],            # integer matrix overriding the preset
      "stable_count": int,
      "mode": "diffeo" | "flow",
      "depth": int,                 # number of switches
      "doubling": bool,
      "profile": {"lambda", "eta", "mu", "a", "N"},
      "profiles": [{...}, ...],     # one per stage when depth > 1
      "seed": int,
      "output": str,
      "cones": {...}, "splitting": {...}, "lyapunov": {...},
      "absolute": {...}, "incoherence": {...}, "profiles_dump": {...}
    }
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigInvalid

SCHEMA_VERSION = "1.0"

PRESETS = {
    "cat-map": {
        "matrix": [[2, 1], [1, 1]],
        "stable_count": 1,
        "mode": "diffeo",
        "profile": {"lambda": 0.25, "eta": 0.4, "mu": 1.8, "a": 0.9, "N": 1},
    },
    "t3-one-stable": {
        "matrix": [[0, 0, 1], [1, 0, -6], [0, 1, 5]],
        "stable_count": 1,
        "mode": "diffeo",
        "profile": {"lambda": 0.12, "eta": 0.25, "mu": 1.8, "a": 0.9, "N": 1},
    },
    "t3-two-stable": {
        "matrix": [[0, 0, 1], [1, 0, -5], [0, 1, 6]],
        "stable_count": 2,
        "mode": "diffeo",
        "profile": {"lambda": 0.2, "eta": 0.7, "mu": 1.8, "a": 0.9, "N": 1},
        "stage_lambdas": [0.2, 0.12],
    },
    "suspension-flow": {
        "matrix": [[2, 1], [1, 1]],
        "stable_count": 1,
        "mode": "flow",
        "profile": {"lambda": 0.25, "eta": 0.4, "mu": 1.8, "a": 0.9, "N": 2},
    },
}

SECTION_DEFAULTS = {
    "cones": {
        "aperture": 0.5,
        "epsilon0": 0.05,
        "margin_floor": 1e-3,
        "max_halvings": 40,
        "directions": None,
        "power_margin": 1e-3,
        "power_cap": 20,
        "times": [-1.0, -0.5, 0.0, 0.5, 1.0],
    },
    "splitting": {
        "n_backward": 60,
        "switch_points": 100,
        "switch_tol": 1e-6,
        "domination_n": 32,
        "domination_points": 1000,
        "monotone_ns": [8, 16, 32, 64],
        "monotone_points": 100,
        "equivariance_points": 200,
        "equivariance_tol": 1e-6,
        "angle_tol": 1e-9,
        "nested_n": 32,
        "nested_points": 200,
        "fiber_tol": 1e-4,
    },
    "lyapunov": {
        "n": 10_000,
        "tol": 1e-3,
        "sum_tol": 1e-8,
        "checkpoints": 64,
    },
    "absolute": {
        "grid": 16,
        "k": 64,
        "n": 60,
        "chunk": 4096,
    },
    "incoherence": {
        "step": 0.05,
        "n_x": 32,
        "n_z": 8,
        "n0": 40,
        "sign_points": 1000,
        "falln_levels": [0, 1, 2, 3],
        "length_slack": 1.05,
        "box_tracks": 6,
    },
    "profiles_dump": {"points": 2001},
}

BASES = tuple(PRESETS)
MODES = ("diffeo", "flow")


@dataclass
class RunConfig:
    """Validated run configuration (see module docstring for the schema)."""

    base: str
    matrix: list
    stable_count: int
    mode: str
    depth: int
    doubling: bool
    profiles: list
    seed: int
    output: str
    cones: dict = field(default_factory=dict)
    splitting: dict = field(default_factory=dict)
    lyapunov: dict = field(default_factory=dict)
    absolute: dict = field(default_factory=dict)
    incoherence: dict = field(default_factory=dict)
    profiles_dump: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "base": self.base,
            "matrix": self.matrix,
            "stable_count": self.stable_count,
            "mode": self.mode,
            "depth": self.depth,
            "doubling": self.doubling,
            "profiles": self.profiles,
            "seed": self.seed,
            "cones": self.cones,
            "splitting": self.splitting,
            "lyapunov": self.lyapunov,
            "absolute": self.absolute,
            "incoherence": self.incoherence,
            "profiles_dump": self.profiles_dump,
        }


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _check_profile(prof, where, problems, mode):
    keys = ("lambda", "eta", "mu", "a", "N")
    for k in prof:
        if k not in keys:
            problems.append((f"{where}.{k}", "unknown key"))
    for k in keys[:4]:
        if not _is_num(prof.get(k)):
            problems.append((f"{where}.{k}", "must be a number"))
    if not _is_int(prof.get("N", 1)) or prof.get("N", 1) < 1:
        problems.append((f"{where}.N", "must be an integer >= 1"))
    if any(p[0].startswith(where) for p in problems):
        return
    lam, eta, mu, a = (prof[k] for k in ("lambda", "eta", "mu", "a"))
    N = prof.get("N", 1)
    if not (0 < lam < eta < 1 < mu):
        problems.append((where, f"constants violate 0 < λ < η < 1 < μ (λ={lam}, η={eta}, μ={mu})"))
    if not (0 < a < 1):
        problems.append((f"{where}.a", f"must satisfy 0 < a < 1, got {a}"))
    elif 1 - mu * (1 - a) <= 0:
        problems.append((where, f"h(a) = 1 - μ(1 - a) must be positive, got {1 - mu * (1 - a):.6g}"))
    if mode == "flow" and 0 < lam < eta < 1 and not eta ** N < lam:
        problems.append((f"{where}.N", f"N={N} too small: need η^N < λ (η^N={eta ** N:.6g}, λ={lam})"))


def _merge_section(name, given, problems):
    out = copy.deepcopy(SECTION_DEFAULTS[name])
    if given is None:
        return out
    if not isinstance(given, dict):
        problems.append((name, "must be an object"))
        return out
    for k, v in given.items():
        if k not in out:
            problems.append((f"{name}.{k}", "unknown key"))
            continue
        default = out[k]
        if default is not None and not isinstance(default, (list, bool)):
            if not _is_num(v) or (_is_int(default) and not _is_int(v)):
                problems.append((f"{name}.{k}", f"must be {'an integer' if _is_int(default) else 'a number'}"))
                continue
            if v <= 0 and k != "times":
                problems.append((f"{name}.{k}", "must be positive"))
                continue
        out[k] = v
    return out


def parse_config(raw, seed=None, output=None):
    """Validate a config mapping and fill defaults.

    Raises
    ------
    ConfigInvalid
    """
    problems = []
    if not isinstance(raw, dict):
        raise ConfigInvalid([("config", "top level must be a JSON object")])
    known = {"base", "matrix", "stable_count", "mode", "depth", "doubling", "profile", "profiles",
             "seed", "output", "schema_version"} | set(SECTION_DEFAULTS)
    for k in raw:
        if k not in known:
            problems.append((k, "unknown key"))
    base = raw.get("base", "cat-map")
    if base not in PRESETS:
        problems.append(("base", f"must be one of {', '.join(BASES)}"))
        base = "cat-map"
    preset = PRESETS[base]
    matrix = raw.get("matrix", preset["matrix"])
    if not (isinstance(matrix, list) and matrix and all(isinstance(r, list) and len(r) == len(matrix)
                                                         and all(_is_int(x) for x in r) for r in matrix)):
        problems.append(("matrix", "must be a square list of integer rows"))
    stable_count = raw.get("stable_count", preset["stable_count"])
    if not _is_int(stable_count) or stable_count < 1:
        problems.append(("stable_count", "must be an integer >= 1"))
    mode = raw.get("mode", preset["mode"])
    if mode not in MODES:
        problems.append(("mode", f"must be one of {', '.join(MODES)}"))
    if mode == "flow" and base not in ("suspension-flow",):
        problems.append(("mode", "flow mode needs base 'suspension-flow'"))
    if base == "suspension-flow" and mode != "flow":
        problems.append(("mode", "base 'suspension-flow' runs in flow mode"))
    depth = raw.get("depth", 1)
    if not _is_int(depth) or depth < 1:
        problems.append(("depth", "must be an integer >= 1"))
        depth = 1
    doubling = raw.get("doubling", False)
    if not isinstance(doubling, bool):
        problems.append(("doubling", "must be true or false"))

    if "profiles" in raw:
        profiles = raw["profiles"]
        if not isinstance(profiles, list) or len(profiles) != depth:
            problems.append(("profiles", f"must be a list of {depth} profile objects"))
            profiles = [dict(preset["profile"])] * depth
    else:
        prof = dict(preset["profile"])
        given = raw.get("profile", {})
        if not isinstance(given, dict):
            problems.append(("profile", "must be an object"))
            given = {}
        prof.update(given)
        lams = preset.get("stage_lambdas")
        if depth > 1 and lams and "lambda" not in given and depth <= len(lams):
            profiles = [dict(prof, **{"lambda": lam}) for lam in lams[:depth]]
        else:
            profiles = [dict(prof) for _ in range(depth)]
    for i, prof in enumerate(profiles):
        if not isinstance(prof, dict):
            problems.append((f"profiles[{i}]", "must be an object"))
            continue
        prof.setdefault("N", 1)
        where = "profile" if "profiles" not in raw else f"profiles[{i}]"
        if depth > 1 and where == "profile":
            where = f"profile(stage {i + 1})"
        _check_profile(prof, where, problems, mode)

    if seed is None:
        seed = raw.get("seed", 0)
    if not _is_int(seed) or seed < 0 or seed >= 2**64:
        problems.append(("seed", "must be an unsigned 64-bit integer"))
    if output is None:
        output = raw.get("output", "out")
    sections = {name: _merge_section(name, raw.get(name), problems) for name in SECTION_DEFAULTS}
    if problems:
        raise ConfigInvalid(problems)
    return RunConfig(base, matrix, stable_count, mode, depth, doubling, profiles, int(seed), str(output),
                     **sections)


def load_config(path=None, seed=None, output=None):
    """Read a JSON config file (or defaults when ``path`` is None)."""
    if path is None:
        raw = {}
    else:
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigInvalid([("config", f"file not found: {path}")]) from None
        except json.JSONDecodeError as exc:
            raise ConfigInvalid([("config", f"invalid JSON: {exc}")]) from None
    return parse_config(raw, seed=seed, output=output)
