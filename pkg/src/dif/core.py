"""Dense matrix helpers, activations and seeded random streams.

Matrices are plain 2-D ``float64`` numpy arrays. The functions here add the
shape checks and finiteness guarantees the rest of the package relies on.
"""

from __future__ import annotations

import hashlib
from typing import Sequence

import numpy as np

from .errors import ConfigError, ShapeError

ACTIVATIONS = ("tanh", "relu", "leaky_relu")
DISTRIBUTIONS = ("normal", "uniform")


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce ``x`` to a finite 2-D float64 array."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def matmul(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return a @ b


def hadamard(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"hadamard shape mismatch: {a.shape} vs {b.shape}")
    return a * b


def activation(x, kind: str = "tanh", alpha: float = 0.01) -> np.ndarray:
    """Apply an elementwise non-linearity.

    ``kind`` is one of ``tanh``, ``relu`` or ``leaky_relu``; ``alpha`` is the
    negative slope of the leaky variant and must be non-negative so that
    every kind stays monotone.
    """
    x = np.asarray(x, dtype=np.float64)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "leaky_relu":
        if alpha < 0:
            raise ConfigError(f"leaky_relu alpha must be >= 0, got {alpha}")
        return np.where(x >= 0, x, alpha * x)
    raise ConfigError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def _key(part) -> int:
    # Strings are hashed so component tags give stable 32-bit spawn keys.
    if isinstance(part, str):
        return int.from_bytes(hashlib.sha256(part.encode()).digest()[:4], "little")
    part = int(part)
    if part < 0:
        raise ValueError(f"stream key parts must be non-negative, got {part}")
    return part


class RngStream:
    """Seeded, splittable random stream.

    A stream is identified by ``(seed, stream_id)`` plus an optional path of
    child keys. :meth:`child` derives a new independent stream from that
    identity alone, so the child's values never depend on how much of the
    parent has been consumed. This is what makes per-tree and per-member
    parameters independent of build order and thread schedule.

    Instances are single-owner; parallel workers must each take a child.
    """

    def __init__(self, seed: int = 0, stream_id: int = 0, path: Sequence[int] = ()):
        if seed < 0 or seed >= 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if stream_id < 0 or stream_id >= 2**64:
            raise ConfigError(f"stream_id must be a 64-bit unsigned integer, got {stream_id}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self.path))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, *parts) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.path + tuple(_key(p) for p in parts))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, path={self.path})"

    # thin wrappers over the numpy generator
    def standard_normal(self, size=None):
        return self._gen.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def choice(self, a, size=None, replace=True):
        return self._gen.choice(a, size=size, replace=replace)

    def permutation(self, x):
        return self._gen.permutation(x)

    def random_bytes(self, n: int) -> bytes:
        return self._gen.bytes(n)


def sample_matrix(rng: RngStream, rows: int, cols: int, dist: str = "normal",
                  scale: float = 1.0) -> np.ndarray:
    """Draw a ``rows x cols`` matrix of i.i.d. entries.

    ``dist="normal"`` gives standard normal entries times ``scale``;
    ``dist="uniform"`` gives entries uniform on ``[-scale, scale]``.
    """
    if rows < 0 or cols < 0:
        raise ConfigError(f"matrix dimensions must be non-negative, got {rows}x{cols}")
    if dist == "normal":
        return scale * rng.standard_normal((rows, cols))
    if dist == "uniform":
        return rng.uniform(-scale, scale, (rows, cols))
    raise ConfigError(f"unknown distribution {dist!r}; expected one of {DISTRIBUTIONS}")
