from __future__ import annotations

import math
import re
import tomllib
from pathlib import Path
from typing import Any, Iterable

import pypinnkf.core.utilities as utils
from pypinnkf.core.enums import E_Mode, E_Problem, E_Variant
from pypinnkf.core.structures import ConfigError

# -----------------------------
# Input parsing helpers
# -----------------------------

# Canonical names and simple aliases
_PROBLEM_ALIASES = {
    "burgers": E_Problem.BURGERS,
    "burger": E_Problem.BURGERS,
    "viscous-burgers": E_Problem.BURGERS,
    "tfmdwe": E_Problem.TFMDWE,
    "fractional": E_Problem.TFMDWE,
    "diffusion-wave": E_Problem.TFMDWE,
}

_MODE_ALIASES = {
    "forward": E_Mode.FORWARD,
    "fwd": E_Mode.FORWARD,
    "inverse": E_Mode.INVERSE,
    "inv": E_Mode.INVERSE,
}

_VARIANT_ALIASES = {
    "adam": E_Variant.ADAM,
    "adam-pinn": E_Variant.ADAM,
    "adam_pinn": E_Variant.ADAM,
    "nsga3": E_Variant.NSGA3,
    "nsga-iii": E_Variant.NSGA3,
    "nsga3-pinn": E_Variant.NSGA3,
    "nsga-iii-pinn": E_Variant.NSGA3,
    "mopinnenkf": E_Variant.MOPINNENKF,
    "enkf": E_Variant.MOPINNENKF,
    "mopinn-enkf": E_Variant.MOPINNENKF,
}

# Noise levels of the published comparison tables
_ALLOWED_ETAS = (0.0, 0.2, 0.5, 0.8)

def _lookup(table: dict[str, Any], value: Any, what: str) -> Any:
    if isinstance(value, tuple(type(v) for v in table.values())):
        return value
    key = str(value).strip().lower().replace(" ", "-")
    if key not in table:
        raise ConfigError(f"Unsupported {what} '{value}'. Supported: {sorted(table.keys())}")
    return table[key]

def _parse_problem(value: str | E_Problem) -> E_Problem:
    return _lookup(_PROBLEM_ALIASES, value, "problem")

def _parse_mode(value: str | E_Mode) -> E_Mode:
    return _lookup(_MODE_ALIASES, value, "mode")

def _parse_variant(value: str | E_Variant) -> E_Variant:
    return _lookup(_VARIANT_ALIASES, value, "variant")

def _parse_eta(value: str | float) -> float:
    """
    Accepts 0.2, "0.2", "20%" or "20" (values above 1 read as percent).
    Only the noise levels of the comparison tables are accepted.
    """
    if isinstance(value, str):
        text = value.strip()
        m = re.fullmatch(r"(\d+(?:\.\d*)?)\s*%", text)
        try:
            eta = float(m.group(1)) / 100.0 if m else float(text)
        except ValueError:
            raise ConfigError(f"Invalid noise level '{value}'. Use like '0.2' or '20%'.") from None
    else:
        eta = float(value)

    if eta > 1.0:
        eta /= 100.0

    for allowed in _ALLOWED_ETAS:
        if math.isclose(eta, allowed, abs_tol=1e-9):
            return allowed
    raise ConfigError(f"Unsupported noise level '{value}'. Allowed: {list(_ALLOWED_ETAS)}")

def _parse_list(value: str | Iterable[Any]) -> list[str]:
    if isinstance(value, str):
        return [p for p in re.split(r"[,\s]+", value) if p]
    return [str(v) for v in value]

def _parse_eta_list(value: str | Iterable[Any]) -> list[float]:
    out = utils.unique([_parse_eta(p) for p in _parse_list(value)])
    return out

def _parse_seed_list(value: str | Iterable[Any]) -> list[int]:
    """
    Accepts '0,1,2', '0-2' or a list of integers.
    """
    seeds: list[int] = []
    for p in _parse_list(value):
        m = re.fullmatch(r"(\d+)-(\d+)", p)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            if lo > hi:
                raise ConfigError(f"Invalid seed range '{p}'")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(_parse_seed(p))
    return seeds

def _parse_seed(value: Any) -> int:
    try:
        seed = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"Seed must be a non-negative integer, got '{value}'") from None
    if seed < 0:
        raise ConfigError(f"Seed must be a non-negative integer, got '{value}'")
    return seed

def _parse_positive_int(value: Any, name: str, *, allow_zero: bool = False) -> int:
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"'{name}' must be an integer, got '{value}'") from None
    if n < 0 or (n == 0 and not allow_zero):
        raise ConfigError(f"'{name}' must be {'>= 0' if allow_zero else '>= 1'}, got {n}")
    return n

def _parse_positive_float(value: Any, name: str) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"'{name}' must be a number, got '{value}'") from None
    if not math.isfinite(x) or x <= 0:
        raise ConfigError(f"'{name}' must be finite and > 0, got {x}")
    return x

def _parse_times(value: str | Iterable[Any], t_range: tuple[float, float]) -> tuple[float, ...]:
    times = []
    for p in _parse_list(value):
        try:
            t = float(p)
        except ValueError:
            raise ConfigError(f"Invalid slice time '{p}'") from None
        if not (t_range[0] <= t <= t_range[1]):
            raise ConfigError(f"Slice time {t} outside [{t_range[0]}, {t_range[1]}]")
        times.append(t)
    return tuple(times)

# -----------------------------
# Flat TOML
# -----------------------------

def load_flat_toml(path: str | Path) -> dict[str, Any]:
    """
    Read a flat key = value TOML file. Nested tables are rejected.
    """
    p = Path(path)
    try:
        with open(p, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {p}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Invalid TOML in {p}: {e}") from None

    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"Config must be flat key = value pairs; got tables {nested} in {p}")
    return data

def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise ConfigError(f"Cannot serialize value of type {type(value).__name__} to TOML")

def dump_flat_toml(data: dict[str, Any]) -> str:
    """Serialize a flat mapping; keys with value None are omitted."""
    lines = [f"{k} = {_toml_value(v)}" for k, v in data.items() if v is not None]
    return "\n".join(lines) + "\n"
