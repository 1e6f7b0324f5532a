"""Random, untrained representation ensembles.

All ``r`` ensemble members share one base weight matrix per layer and differ
only by a rank-one multiplicative perturbation ``p_i q_i^T``. The member
weight ``W_i = W0 * outer(p_i, q_i)`` is never built; instead

    x @ W_i == ((x * p_i) @ W0) * q_i

so a mini-batch can be tiled ``r`` times, scaled row-block-wise by the
``p`` vectors, multiplied once by ``W0`` and rescaled by the ``q`` vectors.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import ACTIVATIONS, DISTRIBUTIONS, RngStream, activation, as_matrix, sample_matrix
from .errors import ConfigError, ShapeError

DEFAULT_BATCH_SIZE = 64
DEFAULT_OUT_DIM = 16


def default_hidden_dims(input_dim: int) -> tuple[int, ...]:
    return (max(16, min(500, input_dim)),)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CereLayer:
    base_weights: np.ndarray  # (m, n)
    p_vectors: np.ndarray  # (r, m)
    q_vectors: np.ndarray  # (r, n)
    activation: str = "tanh"
    apply_activation: bool = True
    alpha: float = 0.01

    def __post_init__(self):
        for name in ("base_weights", "p_vectors", "q_vectors"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        m, n = self.base_weights.shape
        if self.p_vectors.ndim != 2 or self.p_vectors.shape[1] != m:
            raise ShapeError(f"p vectors must have length {m}, got {self.p_vectors.shape}")
        if self.q_vectors.ndim != 2 or self.q_vectors.shape[1] != n:
            raise ShapeError(f"q vectors must have length {n}, got {self.q_vectors.shape}")
        if self.p_vectors.shape[0] != self.q_vectors.shape[0]:
            raise ShapeError("p and q vector counts differ")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self) -> int:
        return self.base_weights.shape[0]

    @property
    def out_dim(self) -> int:
        return self.base_weights.shape[1]

    def _activate(self, h):
        if self.apply_activation:
            return activation(h, self.activation, self.alpha)
        return h


@dataclass(frozen=True)
class CereNetwork:
    """Frozen parameters of an ``r``-member rank-one perturbed MLP."""

    layers: tuple[CereLayer, ...]
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ConfigError("a network needs at least one layer")
        r = self.layers[0].p_vectors.shape[0]
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ShapeError(f"layer widths do not chain: {prev.out_dim} -> {nxt.in_dim}")
        if any(layer.p_vectors.shape[0] != r for layer in self.layers):
            raise ShapeError("all layers must carry the same number of members")

    @property
    def ensemble_size(self) -> int:
        return self.layers[0].p_vectors.shape[0]

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def member_weights(self, member: int) -> list[np.ndarray]:
        """Materialise ``W0 * outer(p_i, q_i)`` per layer (for inspection and tests)."""
        _check_member(self, member)
        return [
            layer.base_weights * np.outer(layer.p_vectors[member], layer.q_vectors[member])
            for layer in self.layers
        ]

    def to_bytes(self) -> bytes:
        parts = [np.int64(self.master_seed).tobytes()]
        for layer in self.layers:
            parts.append(f"{layer.activation}:{int(layer.apply_activation)}:{layer.alpha!r}".encode())
            for a in (layer.base_weights, layer.p_vectors, layer.q_vectors):
                parts.append(np.int64(a.shape).tobytes())
                parts.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
        return b"".join(parts)

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()


@dataclass(frozen=True)
class RepresentationSet:
    members: tuple[np.ndarray, ...]
    source_seed: int
    source_dims: tuple[int, int, int, int]  # (N, D, d, r)

    def __len__(self):
        return len(self.members)

    def __getitem__(self, u):
        return self.members[u]


def _check_member(net: CereNetwork, member: int):
    if not 0 <= member < net.ensemble_size:
        raise IndexError(f"member {member} out of range for ensemble of size {net.ensemble_size}")


def build_network(input_dim: int, hidden_dims: Sequence[int], output_dim: int, r: int,
                  activation: str = "tanh", rng: RngStream | None = None, *,
                  init: str = "normal", alpha: float = 0.01,
                  final_activation: bool = True) -> CereNetwork:
    """Sample a frozen ``r``-member network.

    Layer ``l`` draws its base weights from ``rng.child("cere", l, "base")``
    and member ``i``'s ``(p, q)`` pair from ``rng.child("cere", l, i)``, so
    growing ``r`` leaves the existing members untouched. The activation is
    applied after every layer, including the last unless
    ``final_activation`` is False, so representations stay bounded.
    """
    if rng is None:
        rng = RngStream(0)
    dims = [input_dim, *hidden_dims, output_dim]
    if r < 1:
        raise ConfigError(f"ensemble size r must be >= 1, got {r}")
    if any(int(d) < 1 for d in dims):
        raise ConfigError(f"all layer dimensions must be >= 1, got {dims}")
    if init not in DISTRIBUTIONS:
        raise ConfigError(f"unknown init distribution {init!r}")
    if activation not in ACTIVATIONS:
        raise ConfigError(f"unknown activation {activation!r}")
    layers = []
    n_layers = len(dims) - 1
    for l in range(n_layers):
        m, n = int(dims[l]), int(dims[l + 1])
        base = sample_matrix(rng.child("cere", l, "base"), m, n, init)
        p = np.empty((r, m))
        q = np.empty((r, n))
        for i in range(r):
            s = rng.child("cere", l, i)
            p[i] = sample_matrix(s, 1, m, init)[0]
            q[i] = sample_matrix(s, 1, n, init)[0]
        last = l == n_layers - 1
        layers.append(CereLayer(base, p, q, activation, final_activation if last else True, alpha))
    return CereNetwork(tuple(layers), rng.seed)


def identity_network(dim: int, r: int = 1) -> CereNetwork:
    """Single linear layer with ``W0 = I`` and all-ones perturbations."""
    layer = CereLayer(np.eye(dim), np.ones((r, dim)), np.ones((r, dim)),
                      "tanh", apply_activation=False)
    return CereNetwork((layer,), 0)


def forward_member(net: CereNetwork, x, member: int) -> np.ndarray:
    """Sequential forward pass of one ensemble member."""
    _check_member(net, member)
    h = as_matrix(x, "x")
    if h.shape[1] != net.input_dim:
        raise ShapeError(f"expected {net.input_dim} input columns, got {h.shape[1]}")
    for layer in net.layers:
        h = ((h * layer.p_vectors[member]) @ layer.base_weights) * layer.q_vectors[member]
        h = layer._activate(h)
    return h


def _forward_batch(net: CereNetwork, xb: np.ndarray) -> np.ndarray:
    r = net.ensemble_size
    b = xb.shape[0]
    # (r*b, m): member u owns rows [u*b, (u+1)*b)
    h = np.tile(xb, (r, 1))
    for layer in net.layers:
        h = h * np.repeat(layer.p_vectors, b, axis=0)
        h = h @ layer.base_weights
        h = h * np.repeat(layer.q_vectors, b, axis=0)
        h = layer._activate(h)
    return h.reshape(r, b, net.output_dim)


def forward_ensemble(net: CereNetwork, x, batch_size: int = DEFAULT_BATCH_SIZE,
                     threads: int = 1) -> RepresentationSet:
    """Project ``x`` through all members at once, one mini-batch at a time."""
    x = as_matrix(x, "x")
    if x.shape[1] != net.input_dim:
        raise ShapeError(f"expected {net.input_dim} input columns, got {x.shape[1]}")
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    n_rows = x.shape[0]
    out = np.empty((net.ensemble_size, n_rows, net.output_dim))
    starts = range(0, n_rows, batch_size)

    def run(start):
        stop = min(start + batch_size, n_rows)
        out[:, start:stop] = _forward_batch(net, x[start:stop])

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(run, starts))
    else:
        for s in starts:
            run(s)
    if not np.all(np.isfinite(out)):
        raise ValueError("representation contains non-finite values")
    members = tuple(out[u] for u in range(net.ensemble_size))
    return RepresentationSet(members, net.master_seed,
                             (n_rows, net.input_dim, net.output_dim, net.ensemble_size))


@dataclass(frozen=True)
class ColumnStats:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, x) -> np.ndarray:
        x = as_matrix(x, "x")
        if x.shape[1] != self.mean.shape[0]:
            raise ShapeError(f"expected {self.mean.shape[0]} columns, got {x.shape[1]}")
        safe = np.where(self.std > 0, self.std, 1.0)
        z = (x - self.mean) / safe
        z[:, self.std == 0] = 0.0
        return z

    def inverse(self, z) -> np.ndarray:
        z = as_matrix(z, "z")
        return z * self.std + self.mean


def standardize(x) -> tuple[np.ndarray, ColumnStats]:
    """Zero-mean, unit-variance columns; constant columns become zeros."""
    x = as_matrix(x, "x")
    if x.size == 0:
        raise ShapeError("cannot standardize an empty matrix")
    std = np.where(np.ptp(x, axis=0) > 0, x.std(axis=0), 0.0)
    stats = ColumnStats(_frozen(x.mean(axis=0)), _frozen(std))
    return stats.transform(x), stats


def destandardize(z, stats: ColumnStats) -> np.ndarray:
    return stats.inverse(z)
