"""Classic isolation forest and extended isolation forest baselines.

Both are written independently of :mod:`dif.forest` (recursive growth,
their own traversal) so the reduction checks compare two implementations
rather than one code path with itself.

Tree ``i`` of either baseline draws from ``RngStream(seed).child("tree", 0, i)``,
the stream a deep forest with a single representation gives its tree ``i``.
The classic forest consumes that stream in the same order as
:func:`dif.forest.build_tree`: subsample first, then for each node in
preorder a dimension index and a threshold per attempt.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import RngStream, as_matrix
from .data import DataMatrix
from .errors import ConfigError, InputError, ShapeError
from .forest import ForestConfig, build_forest, default_depth
from .representation import CereLayer, CereNetwork, forward_member, identity_network, standardize
from .scoring import leaf_adjustment, normalizer, path_score, score_dataset

DEFAULT_TREES = 300
DEFAULT_SUBSAMPLE = 256


def _values(data) -> np.ndarray:
    x = data.values if isinstance(data, DataMatrix) else as_matrix(data, "data")
    if x.shape[0] == 0:
        raise InputError("cannot fit on an empty dataset")
    return x


@dataclass
class _Node:
    node_id: int
    size: int
    depth: int
    dim: int = -1
    value: float = 0.0
    normal: np.ndarray | None = None
    intercept: np.ndarray | None = None
    left: "_Node | None" = None
    right: "_Node | None" = None
    rows: np.ndarray | None = None

    @property
    def is_leaf(self):
        return self.left is None


def _preorder(node):
    stack = [node]
    while stack:
        nd = stack.pop()
        yield nd
        if not nd.is_leaf:
            stack.append(nd.right)
            stack.append(nd.left)


@dataclass
class _FlatTree:
    """Array form of a recursive tree, used for scoring."""

    left: np.ndarray
    right: np.ndarray
    depth: np.ndarray
    size: np.ndarray
    dim: np.ndarray
    value: np.ndarray
    normal: np.ndarray | None = None
    intercept: np.ndarray | None = None

    @classmethod
    def from_root(cls, root: _Node, oblique: bool = False):
        nodes = list(_preorder(root))
        index = {id(nd): k for k, nd in enumerate(nodes)}
        left = np.array([index[id(nd.left)] if not nd.is_leaf else -1 for nd in nodes])
        right = np.array([index[id(nd.right)] if not nd.is_leaf else -1 for nd in nodes])
        flat = cls(left, right, np.array([nd.depth for nd in nodes]),
                   np.array([nd.size for nd in nodes]),
                   np.array([nd.dim for nd in nodes]), np.array([nd.value for nd in nodes]))
        if oblique:
            width = next(nd.normal.shape[0] for nd in nodes if nd.normal is not None) \
                if any(nd.normal is not None for nd in nodes) else 0
            zero = np.zeros(width)
            flat.normal = np.array([nd.normal if nd.normal is not None else zero for nd in nodes])
            flat.intercept = np.array([nd.intercept if nd.intercept is not None else zero for nd in nodes])
        return flat


class IsolationForest:
    """Axis-parallel isolation forest on standardised features.

    Parameters
    ----------
    n_trees : int
        Number of trees ``T``.
    subsample_size : int
        Rows drawn without replacement per tree.
    depth : int or None
        Depth limit; ``ceil(log2(subsample_size))`` when None.
    seed : int
        Master seed.
    leaf_adjustment : bool
        Add ``c(size)`` to the depth of truncated leaves holding more than
        one training object (the classic convention).
    """

    oblique = False

    def __init__(self, n_trees=DEFAULT_TREES, subsample_size=DEFAULT_SUBSAMPLE, depth=None,
                 seed=0, leaf_adjustment=True, threads=1):
        if n_trees < 1 or subsample_size < 1:
            raise ConfigError("n_trees and subsample_size must be >= 1")
        if depth is not None and depth < 1:
            raise ConfigError("depth must be >= 1")
        self.n_trees = n_trees
        self.subsample_size = subsample_size
        self.depth = depth
        self.seed = seed
        self.leaf_adjustment = leaf_adjustment
        self.threads = threads
        self.roots_: list[_Node] = []

    @property
    def depth_limit(self) -> int:
        return self.depth if self.depth is not None else default_depth(self.subsample_size)

    def _split(self, x, rows, rng):
        sub = x[rows]
        lo = sub.min(axis=0)
        hi = sub.max(axis=0)
        cand = np.flatnonzero(hi > lo)
        if len(cand) == 0:
            return None
        for _ in range(x.shape[1]):
            j = int(cand[rng.integers(len(cand))])
            eta = float(rng.uniform(lo[j], hi[j]))
            if lo[j] < eta < hi[j]:
                return dict(dim=j, value=eta), x[rows, j] <= eta
        return None

    def _grow(self, x, rows, depth, rng, node_id, keep_rows):
        node = _Node(node_id, len(rows), depth, rows=rows if keep_rows else None)
        if len(rows) <= 1 or depth >= self.depth_limit:
            return node
        found = self._split(x, rows, rng)
        if found is None:
            return node
        params, go_left = found
        for k, v in params.items():
            setattr(node, k, v)
        node.left = self._grow(x, rows[go_left], depth + 1, rng, 2 * node_id, keep_rows)
        node.right = self._grow(x, rows[~go_left], depth + 1, rng, 2 * node_id + 1, keep_rows)
        return node

    def _build_one(self, z, i, keep_rows=False):
        rng = RngStream(self.seed).child("tree", 0, i)
        n = min(self.subsample_size, z.shape[0])
        rows = np.sort(rng.choice(z.shape[0], size=n, replace=False))
        return self._grow(z, rows, 0, rng, 1, keep_rows)

    def fit(self, data, keep_rows: bool = False):
        x = _values(data)
        z, self.stats_ = standardize(x)
        self.n_features_ = x.shape[1]
        self.effective_subsample_ = min(self.subsample_size, x.shape[0])
        build = lambda i: self._build_one(z, i, keep_rows)
        if self.threads > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                self.roots_ = list(pool.map(build, range(self.n_trees)))
        else:
            self.roots_ = [build(i) for i in range(self.n_trees)]
        self._flat = [_FlatTree.from_root(r, self.oblique) for r in self.roots_]
        return self

    def refresh(self):
        """Rebuild the scoring arrays after the node objects were edited."""
        self._flat = [_FlatTree.from_root(r, self.oblique) for r in self.roots_]

    def _goes_left(self, flat, pos, x):
        return x[np.arange(len(pos)), flat.dim[pos]] <= flat.value[pos]

    def path_lengths(self, data) -> np.ndarray:
        """Per-object, per-tree path lengths, shape ``(N, T)``."""
        if not getattr(self, "_flat", None):
            raise ConfigError("forest is not fitted")
        x = data.values if isinstance(data, DataMatrix) else as_matrix(data, "data")
        if x.shape[1] != self.n_features_:
            raise ShapeError(f"model expects {self.n_features_} features, data has {x.shape[1]}")
        z = self.stats_.transform(x)
        out = np.empty((z.shape[0], len(self._flat)))
        for t, flat in enumerate(self._flat):
            pos = np.zeros(z.shape[0], dtype=np.int64)
            while True:
                internal = flat.left[pos] >= 0
                if not internal.any():
                    break
                idx = np.flatnonzero(internal)
                go = self._goes_left(flat, pos[idx], z[idx])
                pos[idx] = np.where(go, flat.left[pos[idx]], flat.right[pos[idx]])
            h = flat.depth[pos].astype(np.float64)
            if self.leaf_adjustment:
                h = h + np.array([leaf_adjustment(int(s)) for s in flat.size[pos]])
            out[:, t] = h
        return out

    def score_samples(self, data) -> np.ndarray:
        return path_score(self.path_lengths(data).mean(axis=1), self.effective_subsample_)

    def split_sequences(self) -> list[list[tuple[int, int, float]]]:
        """Preorder ``(node_id, dim, threshold)`` of internal nodes, per tree."""
        return [[(nd.node_id, nd.dim, nd.value) for nd in _preorder(r) if not nd.is_leaf]
                for r in self.roots_]


class ExtendedIsolationForest(IsolationForest):
    """Isolation forest with random hyper-plane splits at full extension.

    Each split draws a slope ``k`` with i.i.d. standard normal entries and an
    intercept ``p`` uniform over the node's per-dimension ranges; objects
    with ``(o - p) . k <= 0`` go left.
    """

    oblique = True

    def _split(self, x, rows, rng):
        sub = x[rows]
        lo = sub.min(axis=0)
        hi = sub.max(axis=0)
        if not np.any(hi > lo):
            return None
        for _ in range(x.shape[1]):
            k = rng.standard_normal(x.shape[1])
            p = rng.uniform(lo, hi)
            go_left = (sub - p) @ k <= 0
            if go_left.any() and not go_left.all():
                return dict(normal=k, intercept=p), go_left
        return None

    def _goes_left(self, flat, pos, x):
        return np.einsum("ij,ij->i", x - flat.intercept[pos], flat.normal[pos]) <= 0


def iforest_fit_score(data, T: int = DEFAULT_TREES, n: int = DEFAULT_SUBSAMPLE, seed=0,
                      leaf_adjustment: bool = True) -> np.ndarray:
    return IsolationForest(T, n, seed=seed, leaf_adjustment=leaf_adjustment).fit(data).score_samples(data)


def eif_fit_score(data, T: int = DEFAULT_TREES, n: int = DEFAULT_SUBSAMPLE, seed=0) -> np.ndarray:
    return ExtendedIsolationForest(T, n, seed=seed).fit(data).score_samples(data)


@dataclass
class IForestReductionReport:
    seed: int
    n_trees: int
    max_abs_diff: float
    split_sequence_equal: list[bool]
    deviation_factor_max_err: float
    passed: bool

    def to_dict(self):
        return dict(seed=self.seed, n_trees=self.n_trees, max_abs_diff=self.max_abs_diff,
                    split_sequence_equal=self.split_sequence_equal,
                    deviation_factor_max_err=self.deviation_factor_max_err, passed=self.passed)


def verify_iforest_reduction(data, seed=0, n_trees: int = 50, subsample_size: int = DEFAULT_SUBSAMPLE,
                             inject_fault: bool = False) -> IForestReductionReport:
    """Check that an identity-network deep forest is a classic isolation forest.

    Builds the deep forest with ``W0 = I``, unit perturbations, no activation
    and one representation, and the classic forest without leaf adjustment
    on the same per-tree streams. Path-only scores must agree exactly and
    every tree must have the same preorder split sequence. The deviation
    enhanced scores must equal the path-only ones times the mean deviation.

    ``inject_fault`` moves one threshold of the classic forest to test that
    the check can fail.
    """
    x = _values(data)
    net = identity_network(x.shape[1])
    cfg = ForestConfig(r=1, t=n_trees, n=subsample_size, seed=seed)
    forest = build_forest(x, cfg, network=net)
    base = IsolationForest(n_trees, subsample_size, seed=seed, leaf_adjustment=False).fit(x)
    if inject_fault:
        for root in base.roots_:
            if not root.is_leaf:
                root.value += 1.0
                break
        base.refresh()
    path_only = score_dataset(forest, x, "path-only")
    deas = score_dataset(forest, x, "deas")
    diff = float(np.max(np.abs(path_only.scores - base.score_samples(x))))
    flags = []
    for tree, seq in zip(forest.trees, base.split_sequences()):
        mine = tree.splits()
        flags.append(len(mine) == len(seq) and all(
            a[0] == b[0] and a[1] == b[1] and a[2] == b[2] for a, b in zip(mine, seq)))
    ratio_err = float(np.max(np.abs(deas.scores - path_only.scores * deas.mean_deviation)))
    passed = diff == 0.0 and all(flags) and ratio_err == 0.0
    return IForestReductionReport(seed, n_trees, diff, flags, ratio_err, passed)


def eif_predicates(o, k, p) -> tuple[bool, bool]:
    """Return ``(o.k <= p.k, (o - p).k <= 0)`` for one object."""
    o, k, p = (np.asarray(v, dtype=np.float64) for v in (o, k, p))
    return bool(o @ k <= p @ k), bool((o - p) @ k <= 0)


def one_column_network(normal) -> CereNetwork:
    """Single linear layer ``W0 = k`` (shape ``D x 1``) with unit perturbations."""
    k = np.asarray(normal, dtype=np.float64).reshape(-1, 1)
    layer = CereLayer(k, np.ones((1, k.shape[0])), np.ones((1, 1)), "tanh", apply_activation=False)
    return CereNetwork((layer,), 0)


@dataclass
class EifReductionReport:
    seed: int
    n_triples: int
    triple_agreement: float
    nodes_checked: int
    objects_checked: int
    node_agreement: float
    boundary_left: bool
    passed: bool

    def to_dict(self):
        return dict(seed=self.seed, n_triples=self.n_triples, triple_agreement=self.triple_agreement,
                    nodes_checked=self.nodes_checked, objects_checked=self.objects_checked,
                    node_agreement=self.node_agreement, boundary_left=self.boundary_left,
                    passed=self.passed)


def verify_eif_reduction(data, seed=0, n_trees: int = 10, subsample_size: int = DEFAULT_SUBSAMPLE,
                         n_triples: int = 500, inject_fault: bool = False) -> EifReductionReport:
    """Check that each hyper-plane split is a one-unit linear projection split.

    For every internal node of a fitted extended forest, the node's training
    pool is projected through a one-layer network with ``W0 = k`` and
    compared against the threshold ``p . k``; the resulting branch must match
    the forest's ``(o - p) . k <= 0`` for every object. Random triples and an
    object lying exactly on a hyper-plane are checked as well.
    """
    x = _values(data)
    rng = RngStream(seed).child("eif-verify")
    d = x.shape[1]
    agree = 0
    for _ in range(n_triples):
        o, k, p = (rng.standard_normal(d) for _ in range(3))
        a, b = eif_predicates(o, k, p)
        agree += a == b
    o = rng.standard_normal(d)
    k = rng.standard_normal(d)
    a, b = eif_predicates(o, k, o)
    proj_on_plane = forward_member(one_column_network(k), o.reshape(1, -1), 0)[0, 0]
    boundary_left = a and b and bool(proj_on_plane <= o @ k)

    eif = ExtendedIsolationForest(n_trees, subsample_size, seed=seed).fit(x, keep_rows=True)
    z = eif.stats_.transform(x)
    nodes = objects = node_ok = 0
    flipped = False
    for root in eif.roots_:
        for nd in _preorder(root):
            if nd.is_leaf:
                continue
            pool = z[nd.rows]
            eta = float(nd.intercept @ nd.normal)
            if inject_fault and not flipped:
                eta = -eta if eta != 0 else 1.0
                flipped = True
            proj = forward_member(one_column_network(nd.normal), pool, 0)[:, 0]
            mine = proj <= eta
            theirs = (pool - nd.intercept) @ nd.normal <= 0
            same = bool(np.array_equal(mine, theirs)) and int(mine.sum()) == nd.left.size
            nodes += 1
            objects += len(pool)
            node_ok += same
    node_rate = node_ok / nodes if nodes else 1.0
    triple_rate = agree / n_triples if n_triples else 1.0
    passed = triple_rate == 1.0 and node_rate == 1.0 and boundary_left
    return EifReductionReport(seed, n_triples, triple_rate, nodes, objects, node_rate,
                              boundary_left, passed)
