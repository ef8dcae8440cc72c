"""
    Utilities: small helpers used across the codebase.

    Provides compact helpers for:
    - Reproducible randomness (seed sequences keyed by run coordinates, per-task generators)
    - Space-time grids (tensor grids, point arrays, domain checks)
    - Checksums of written files
    - Coercion of numpy scalars/arrays to native Python values for JSON

    Functions raise ValueError/DomainError for invalid input and propagate I/O/OS errors.
"""

# ---- Standard library imports ----
import hashlib
from pathlib import Path
from typing import Any

import numpy as np

# ---- Package imports ----
from pypinnkf.core.structures import DomainError, FloatArray


# Randomness utilities
def _stable_key(key: Any) -> int:
    """Map a seed-sequence key (int, float, str, enum) to a stable non-negative integer."""
    if hasattr(key, "value"):
        key = key.value
    if isinstance(key, (bool, np.bool_)):
        return int(key)
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"Seed keys must be non-negative, got {key}")
        return int(key)
    if isinstance(key, float):
        return int(round(key * 1000))
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], byteorder="little", signed=False)

def seed_sequence(seed: int, *keys: Any) -> np.random.SeedSequence:
    """
    Seed sequence for a run coordinate, e.g. seed_sequence(seed, "observations", problem, eta).

    Floats are keyed by round(1000 * value), so eta = 0.2 and "20%" hit the same stream.
    """
    return np.random.SeedSequence([_stable_key(seed), *(_stable_key(k) for k in keys)])

def make_rng(seed: int, *keys: Any) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, *keys))

def spawn_generators(seed: int, n: int, *keys: Any) -> list[np.random.Generator]:
    """
    One independent generator per task, split from the master seed.
    Task i always gets the same stream regardless of how many workers run the tasks.
    """
    return [np.random.default_rng(s) for s in seed_sequence(seed, *keys).spawn(n)]

def draw_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**31 - 1))


# Grid utilities
def tensor_grid(xs: FloatArray, ts: FloatArray) -> FloatArray:
    """
    Rows (x, t) of the tensor grid xs × ts, x-major (all times of xs[0] first).
    """
    X, T = np.meshgrid(np.asarray(xs, dtype=np.float64), np.asarray(ts, dtype=np.float64), indexing="ij")
    return np.column_stack([X.ravel(), T.ravel()])

def uniform_grid(domain: tuple[tuple[float, float], tuple[float, float]], n_x: int, n_t: int) -> tuple[FloatArray, FloatArray]:
    (x0, x1), (t0, t1) = domain
    return np.linspace(x0, x1, n_x), np.linspace(t0, t1, n_t)

def as_points(x, t) -> FloatArray:
    """Broadcast x and t into an (n, 2) point array."""
    x_arr, t_arr = np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(t, dtype=np.float64))
    return np.column_stack([x_arr.ravel(), t_arr.ravel()])

def check_in_domain(points: FloatArray, domain: tuple[tuple[float, float], tuple[float, float]], tol: float = 1e-12) -> None:
    (x0, x1), (t0, t1) = domain
    x, t = points[:, 0], points[:, 1]
    bad = (x < x0 - tol) | (x > x1 + tol) | (t < t0 - tol) | (t > t1 + tol) | ~np.isfinite(x) | ~np.isfinite(t)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise DomainError(
            f"Point (x={points[i, 0]}, t={points[i, 1]}) outside domain x∈[{x0}, {x1}], t∈[{t0}, {t1}]"
            f" ({int(bad.sum())} offending points)"
        )


# File utilities
def sha256_file(path: str | Path, chunk_size: int = 1 << 20) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(chunk_size), b""):
            h.update(chunk)
    return h.hexdigest()


# Array manipulation utilities
def unique(arr: list[Any]) -> list[Any]:
    """
        Return a list of unique elements while preserving order.
    """

    seen = set()
    unique_list = []

    for item in arr:
        if item not in seen:
            seen.add(item)
            unique_list.append(item)

    return unique_list


# Type manipulation utilities
 # Helpers to coerce numpy -> native
def _to_float(x) -> float | None:
    if x is None: return None
    if isinstance(x, np.generic): return float(x.item())
    return float(x)

def to_native(obj: Any) -> Any:
    """Recursively convert numpy containers/scalars and enums for JSON serialization."""
    if obj is None or isinstance(obj, (str, bool, int)):
        return obj
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else None
    if hasattr(obj, "value") and not isinstance(obj, np.ndarray):
        return to_native(obj.value)
    if isinstance(obj, np.generic):
        return to_native(obj.item())
    if isinstance(obj, np.ndarray):
        return [to_native(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): to_native(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_native(v) for v in obj]
    raise TypeError(f"Cannot convert {type(obj).__name__} to a JSON value")
