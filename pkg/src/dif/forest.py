"""Isolation trees grown on projected representations.

Trees store their nodes column-wise in preorder (root, left subtree, right
subtree). Each node also records its heap id (children of ``k`` are ``2k``
and ``2k + 1``, root is 1) so traversal paths can be reported the same way
they are numbered during partitioning.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import RngStream, as_matrix
from .data import DataMatrix
from .errors import ConfigError, InputError, ShapeError
from .representation import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_OUT_DIM,
    CereNetwork,
    ColumnStats,
    build_network,
    default_hidden_dims,
    forward_ensemble,
    standardize,
)

LEAF = -1


def default_depth(n: int) -> int:
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


@dataclass(frozen=True)
class TreeNode:
    node_id: int
    split_dim: int | None
    split_value: float | None
    size: int
    depth: int

    @property
    def is_leaf(self) -> bool:
        return self.split_dim is None


@dataclass(frozen=True)
class IsolationTree:
    """Axis-parallel isolation tree in flat preorder storage."""

    node_id: np.ndarray
    split_dim: np.ndarray  # LEAF for leaves
    split_value: np.ndarray
    left: np.ndarray  # child position in the arrays, -1 for leaves
    right: np.ndarray
    size: np.ndarray
    depth: np.ndarray
    subsample: np.ndarray  # training row indices of the root pool
    representation_index: int
    subsample_size: int
    depth_limit: int
    n_features: int

    def __post_init__(self):
        for name in ("node_id", "split_dim", "split_value", "left", "right", "size",
                     "depth", "subsample"):
            a = np.array(getattr(self, name), copy=True)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def n_nodes(self) -> int:
        return len(self.node_id)

    def nodes(self) -> list[TreeNode]:
        out = []
        for k in range(self.n_nodes):
            leaf = self.split_dim[k] == LEAF
            out.append(TreeNode(int(self.node_id[k]),
                                None if leaf else int(self.split_dim[k]),
                                None if leaf else float(self.split_value[k]),
                                int(self.size[k]), int(self.depth[k])))
        return out

    def splits(self) -> list[tuple[int, int, float]]:
        """Preorder ``(node_id, dim, threshold)`` of internal nodes."""
        return [(int(self.node_id[k]), int(self.split_dim[k]), float(self.split_value[k]))
                for k in range(self.n_nodes) if self.split_dim[k] != LEAF]


def _pick_split(pool_values: np.ndarray, rng: RngStream):
    lo = pool_values.min(axis=0)
    hi = pool_values.max(axis=0)
    splittable = np.flatnonzero(hi > lo)
    if len(splittable) == 0:
        return None
    for _ in range(pool_values.shape[1]):
        j = int(splittable[rng.integers(len(splittable))])
        eta = float(rng.uniform(lo[j], hi[j]))
        # open interval keeps both children non-empty
        if lo[j] < eta < hi[j]:
            return j, eta
    return None


def build_tree(rep, n: int, depth_limit: int, rng: RngStream, *,
               representation_index: int = 0) -> IsolationTree:
    """Grow one isolation tree on a random subsample of ``rep``.

    The root pool is ``min(n, N)`` rows drawn without replacement. A node
    becomes a leaf when it holds one object, sits at ``depth_limit``, or has
    no dimension with spread; otherwise a dimension with spread is drawn
    uniformly and a threshold uniformly inside its open range. Objects with
    value ``<= threshold`` go left.
    """
    rep = as_matrix(rep, "representation")
    n_rows, d = rep.shape
    if n_rows == 0:
        raise InputError("cannot build a tree on an empty representation")
    if n < 1 or depth_limit < 1:
        raise ConfigError(f"subsample size and depth limit must be >= 1, got n={n}, J={depth_limit}")
    size = min(n, n_rows)
    subsample = np.sort(rng.choice(n_rows, size=size, replace=False))

    node_id, split_dim, split_value, left, right, sizes, depths = [], [], [], [], [], [], []
    # stack of (heap id, depth, row indices, (parent position, side))
    stack = [(1, 0, subsample, None)]
    while stack:
        hid, depth, rows, link = stack.pop()
        pos = len(node_id)
        if link is not None:
            (left if link[1] == 0 else right)[link[0]] = pos
        node_id.append(hid)
        sizes.append(len(rows))
        depths.append(depth)
        left.append(-1)
        right.append(-1)
        split = None
        if len(rows) > 1 and depth < depth_limit:
            split = _pick_split(rep[rows], rng)
        if split is None:
            split_dim.append(LEAF)
            split_value.append(0.0)
            continue
        j, eta = split
        split_dim.append(j)
        split_value.append(eta)
        go_left = rep[rows, j] <= eta
        # right pushed first so the left subtree is built (and drawn) first
        stack.append((2 * hid + 1, depth + 1, rows[~go_left], (pos, 1)))
        stack.append((2 * hid, depth + 1, rows[go_left], (pos, 0)))

    return IsolationTree(
        np.array(node_id, dtype=np.int64), np.array(split_dim, dtype=np.int64),
        np.array(split_value, dtype=np.float64), np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64), np.array(sizes, dtype=np.int64),
        np.array(depths, dtype=np.int64), subsample.astype(np.int64),
        representation_index, size, depth_limit, d,
    )


@dataclass(frozen=True)
class TraversalRecord:
    path_length: int
    deviation_sum: float
    tree_index: int = 0
    path: tuple[int, ...] = ()


def traverse(tree: IsolationTree, x_rep, tree_index: int = 0) -> TraversalRecord:
    """Walk one object from the root to its leaf.

    Records the heap ids of the nodes entered, the number of decisions and
    the summed ``|x[j] - threshold|`` over the decisions taken.
    """
    x = np.asarray(x_rep, dtype=np.float64).ravel()
    if x.shape[0] != tree.n_features:
        raise ShapeError(f"expected a vector of length {tree.n_features}, got {x.shape[0]}")
    k = 0
    path = []
    beta = 0.0
    while tree.split_dim[k] != LEAF:
        v = x[tree.split_dim[k]]
        eta = tree.split_value[k]
        beta += abs(v - eta)
        k = tree.left[k] if v <= eta else tree.right[k]
        path.append(int(tree.node_id[k]))
    return TraversalRecord(len(path), beta, tree_index, tuple(path))


def traverse_many(tree: IsolationTree, x_rep) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`traverse`: path lengths and deviation sums for all rows."""
    x = np.asarray(x_rep, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != tree.n_features:
        raise ShapeError(f"expected shape (N, {tree.n_features}), got {x.shape}")
    n = x.shape[0]
    pos = np.zeros(n, dtype=np.int64)
    lengths = np.zeros(n, dtype=np.int64)
    beta = np.zeros(n)
    rows = np.arange(n)
    active = tree.split_dim[pos] != LEAF
    while active.any():
        idx = rows[active]
        p = pos[idx]
        v = x[idx, tree.split_dim[p]]
        eta = tree.split_value[p]
        beta[idx] += np.abs(v - eta)
        lengths[idx] += 1
        pos[idx] = np.where(v <= eta, tree.left[p], tree.right[p])
        active = tree.split_dim[pos] != LEAF
    return lengths, beta


@dataclass(frozen=True)
class ForestConfig:
    r: int = 50
    t: int = 6
    n: int = 256
    depth: int | None = None
    hidden_dims: tuple[int, ...] | None = None
    out_dim: int = DEFAULT_OUT_DIM
    activation: str = "tanh"
    final_activation: bool = True
    init: str = "normal"
    batch_size: int = DEFAULT_BATCH_SIZE
    seed: int = 0

    def __post_init__(self):
        for name in ("r", "t", "n", "out_dim", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.depth is not None and self.depth < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}")
        if self.hidden_dims is not None:
            object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))

    @property
    def depth_limit(self) -> int:
        return self.depth if self.depth is not None else default_depth(self.n)


@dataclass(frozen=True)
class DeepForest:
    network: CereNetwork
    trees: tuple[IsolationTree, ...]
    config: ForestConfig
    training_stats: ColumnStats

    @property
    def input_dim(self) -> int:
        return self.network.input_dim

    @property
    def subsample_size(self) -> int:
        return self.trees[0].subsample_size


def build_trees(members, t: int, n: int, depth_limit: int, rng: RngStream,
                threads: int = 1) -> tuple[IsolationTree, ...]:
    """Build ``t`` trees on each representation; tree ``(u, i)`` uses ``rng.child("tree", u, i)``."""
    jobs = [(u, i) for u in range(len(members)) for i in range(t)]

    def run(job):
        u, i = job
        return build_tree(members[u], n, depth_limit, rng.child("tree", u, i),
                          representation_index=u)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return tuple(pool.map(run, jobs))
    return tuple(run(job) for job in jobs)


def build_forest(data, config: ForestConfig | None = None, *, network: CereNetwork | None = None,
                 threads: int = 1) -> DeepForest:
    """Standardise, project through a random network and grow ``r * t`` trees.

    ``network`` overrides the randomly sampled one (its ensemble size then
    replaces ``config.r``).
    """
    config = config or ForestConfig()
    x = data.values if isinstance(data, DataMatrix) else as_matrix(data, "data")
    if x.shape[0] == 0:
        raise InputError("cannot fit on an empty dataset")
    z, stats = standardize(x)
    root = RngStream(config.seed)
    if network is None:
        hidden = config.hidden_dims if config.hidden_dims is not None else default_hidden_dims(x.shape[1])
        network = build_network(x.shape[1], hidden, config.out_dim, config.r, config.activation,
                                root, init=config.init, final_activation=config.final_activation)
    elif network.input_dim != x.shape[1]:
        raise ShapeError(f"network expects {network.input_dim} features, data has {x.shape[1]}")
    reps = forward_ensemble(network, z, config.batch_size, threads=threads)
    trees = build_trees(reps.members, config.t, config.n, config.depth_limit, root, threads)
    return DeepForest(network, trees, config, stats)
