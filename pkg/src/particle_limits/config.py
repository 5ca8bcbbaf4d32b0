"""Run configuration: a JSON document plus dotted-path flag overrides.

Every key is declared in ``SCHEMA``; anything else is rejected. Profile and
rate blocks are free-form and checked by their own constructors.
"""
from dataclasses import dataclass
import copy
import json
import math

import numpy as np

from .harness import ScalingSchedule
from .profiles import check_range, profile_from_dict
from .rates import rates_from_dict

COMMANDS = ("simulate", "solve", "converge", "blowup", "check")
MODELS = ("ssep", "bdrw")


class ConfigError(ValueError):
    """Invalid configuration; the CLI exits with status 2."""


def _int(lo=None, hi=None):
    return ("int", lo, hi)


def _num(lo=None, hi=None, open_lo=False):
    return ("num", lo, hi, open_lo)


SCHEMA = {
    "command": ("choice", COMMANDS),
    "seed": _int(0, 2**64 - 1),
    "time": _num(0.0),
    "checkpoints": ("checkpoints",),
    "threads": ("opt", _int(1)),
    "model": {
        "kind": ("choice", MODELS),
        "n": _int(2, 1 << 20),
        "ell": _num(1.0),
        "rates": ("free",),
        "cap_factor": _num(1.0, open_lo=True),
        "event_budget": _int(1),
        "replicas": _int(1),
    },
    "profile": ("free",),
    "schedule": {
        "ns": ("ints",),
        "rule": ("choice", ("constant", "power", "log_power")),
        "params": ("free",),
    },
    "grid": {
        "m": ("opt", _int(8, 1 << 16)),
        "dt": ("opt", _num(0.0, open_lo=True)),
    },
    "study": {
        "replicas": _int(1),
        "k_max": _int(1, 64),
    },
    "check": {
        "kind": ("choice", ("criterion", "a2")),
        "a": _num(0.0),
        "s_max": _num(0.0, open_lo=True),
        "c_grid": ("nums",),
        "log_n_max": _num(1.0),
    },
    "output": {
        "dir": ("str",),
        "prefix": ("str",),
        "svg": ("bool",),
        "png": ("bool",),
    },
}

DEFAULTS = {
    "command": "simulate",
    "seed": 1,
    "time": None,
    "checkpoints": 5,
    "threads": None,
    "model": {"kind": "ssep", "n": 64, "ell": 1.0, "rates": {"family": "none"},
              "cap_factor": 1024.0, "event_budget": 10**10, "replicas": 1},
    "profile": {"name": "constant", "value": 0.5},
    "schedule": {"ns": [64, 128, 256], "rule": "constant", "params": {}},
    # m = None picks 64 for blowup and 256 otherwise
    "grid": {"m": None, "dt": None},
    "study": {"replicas": 20, "k_max": 3},
    "check": {"kind": "criterion", "a": 1.0, "s_max": 1e6,
              "c_grid": [0.01, 0.1, 1.0, 4.0], "log_n_max": 690.0},
    "output": {"dir": "out", "prefix": "run", "svg": True, "png": True},
}


def _check_value(path, rule, value):
    kind = rule[0]
    if kind == "free":
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object, got {type(value).__name__}")
        return value
    if kind == "opt":
        return None if value is None else _check_value(path, rule[1], value)
    if kind == "choice":
        if value not in rule[1]:
            raise ConfigError(f"{path}: {value!r} is not one of {', '.join(rule[1])}")
        return value
    if kind == "str":
        if not isinstance(value, str) or not value:
            raise ConfigError(f"{path}: expected a non-empty string")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true or false, got {value!r}")
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                value = int(value)
            else:
                raise ConfigError(f"{path}: expected an integer, got {value!r}")
        lo, hi = rule[1], rule[2]
        if (lo is not None and value < lo) or (hi is not None and value > hi):
            raise ConfigError(f"{path}: {value} outside the allowed range "
                              f"[{'-inf' if lo is None else lo}, {'inf' if hi is None else hi}]")
        return value
    if kind == "num":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{path}: expected a finite number, got {value!r}")
        value = float(value)
        lo, hi, open_lo = rule[1], rule[2], rule[3]
        bad_lo = lo is not None and (value <= lo if open_lo else value < lo)
        if bad_lo or (hi is not None and value > hi):
            left = "(" if open_lo else "["
            raise ConfigError(f"{path}: {value} outside the allowed range "
                              f"{left}{'-inf' if lo is None else lo}, {'inf' if hi is None else hi}]")
        return value
    if kind == "ints":
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{path}: expected a non-empty list of integers")
        return [_check_value(f"{path}[{i}]", _int(2, 1 << 20), v) for i, v in enumerate(value)]
    if kind == "nums":
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{path}: expected a non-empty list of numbers")
        return [_check_value(f"{path}[{i}]", _num(0.0, open_lo=True), v) for i, v in enumerate(value)]
    if kind == "checkpoints":
        if isinstance(value, list):
            vals = [_check_value(f"{path}[{i}]", _num(0.0), v) for i, v in enumerate(value)]
            if not vals or any(b <= a for a, b in zip(vals, vals[1:])):
                raise ConfigError(f"{path}: checkpoints must be a non-empty increasing list")
            return vals
        return _check_value(path, _int(1, 10**4), value)
    raise AssertionError(kind)


def _validate(tree, schema, prefix=""):
    out = {}
    for key, value in tree.items():
        path = f"{prefix}{key}"
        if key not in schema:
            raise ConfigError(f"unknown key {path!r}; allowed: {', '.join(sorted(schema))}")
        rule = schema[key]
        if isinstance(rule, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}: expected an object")
            out[key] = _validate(value, rule, path + ".")
        else:
            out[key] = _check_value(path, rule, value)
    return out


def _merge(base, extra):
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key not in ("profile", "rates", "params"):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _set_dotted(tree, dotted, value):
    keys = dotted.split(".")
    node = tree
    for k in keys[:-1]:
        nxt = node.setdefault(k, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"--{dotted}: {k!r} is not an object")
        node = nxt
    node[keys[-1]] = value


def parse_flag_value(text):
    """Flag values are JSON when they parse as JSON, plain strings otherwise."""
    try:
        return json.loads(text)
    except ValueError:
        return text


@dataclass
class RunConfig:
    command: str
    seed: int
    time: float
    checkpoints: object
    threads: int
    model: dict
    profile: dict
    schedule: dict
    grid: dict
    study: dict
    check: dict
    output: dict

    def to_dict(self):
        return copy.deepcopy(self.__dict__)

    def checkpoint_times(self, include_zero=False):
        if isinstance(self.checkpoints, list):
            return np.array(self.checkpoints, dtype=float)
        k = int(self.checkpoints)
        grid = np.linspace(0.0, self.time, k + 1)
        return grid if include_zero else grid[1:]

    def schedule_obj(self):
        return ScalingSchedule.from_dict(self.schedule)


def parse_config(document=None, flags=None, command=None):
    """Validate a config dict (or JSON text) merged with ``{dotted.key: value}`` flags.

    Raises ConfigError naming the offending key.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except ValueError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    document = document or {}
    if not isinstance(document, dict):
        raise ConfigError("config must be a JSON object")
    raw = copy.deepcopy(document)
    for dotted, value in (flags or {}).items():
        _set_dotted(raw, dotted, value)
    if command is not None:
        raw["command"] = command
    checked = _validate(raw, SCHEMA)
    cfg = _merge(DEFAULTS, checked)
    _semantic_checks(cfg)
    return RunConfig(**cfg)


def _semantic_checks(cfg):
    cmd = cfg["command"]
    model = cfg["model"]
    try:
        phi = profile_from_dict(cfg["profile"])
    except ValueError as exc:
        raise ConfigError(f"profile: {exc}") from None
    upper = 1.0 if model["kind"] == "ssep" else None
    try:
        check_range(phi, 0.0, upper)
    except ValueError as exc:
        need = "[0, 1] (exclusion)" if upper else ">= 0"
        raise ConfigError(f"profile: values must lie in {need}: {exc}") from None
    try:
        rates_from_dict(model["rates"])
    except ValueError as exc:
        raise ConfigError(f"model.rates: {exc}") from None
    try:
        ScalingSchedule.from_dict(cfg["schedule"])
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"schedule: {exc}") from None
    if cmd in ("simulate", "solve", "converge") and cfg["time"] is None:
        raise ConfigError(f"time: required for the {cmd} command")
    if cmd == "converge" and model["kind"] == "ssep" and cfg["schedule"]["rule"] != "constant":
        raise ConfigError("schedule.rule: the hydrodynamic study needs ell = 1 (rule 'constant')")
    if isinstance(cfg["checkpoints"], list) and cfg["time"] is not None and cfg["checkpoints"][-1] > cfg["time"]:
        raise ConfigError(f"checkpoints: last checkpoint exceeds time={cfg['time']}")
    grid = cfg["grid"]
    if grid["m"] is None:
        grid["m"] = 64 if cmd == "blowup" else 256
    if grid["dt"] is not None and grid["dt"] > 0.5 / grid["m"] ** 2:
        raise ConfigError(f"grid.dt: {grid['dt']} exceeds the diffusive bound (1/m)^2/2 = {0.5 / grid['m'] ** 2}")
    if cfg["check"]["s_max"] <= cfg["check"]["a"]:
        raise ConfigError("check.s_max: must exceed check.a")
