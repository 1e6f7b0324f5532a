"""Detection metrics: AUC-ROC, average precision and the anomaly isolability index."""

from __future__ import annotations

import numpy as np

from .core import RngStream, as_matrix
from .errors import MetricError, ShapeError


def _check(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ShapeError(f"scores and labels differ in length: {s.shape[0]} vs {y.shape[0]}")
    if not np.isin(y, (0, 1)).all():
        raise MetricError("labels must be 0 (normal) or 1 (anomaly)")
    y = y.astype(bool)
    if y.all() or not y.any():
        raise MetricError("both classes must be present")
    if not np.all(np.isfinite(s)):
        raise MetricError("scores must be finite")
    return s, y


def auc_roc(scores, labels) -> float:
    """Probability that a random anomaly outscores a random normal, ties counted as 1/2.

    Computed from mid-ranks (Mann-Whitney U).
    """
    s, y = _check(scores, labels)
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s))
    sorted_s = s[order]
    # mid-rank of each tie group
    starts = np.r_[0, np.flatnonzero(np.diff(sorted_s)) + 1]
    ends = np.r_[starts[1:], len(s)]
    mid = (starts + ends + 1) / 2.0
    ranks[order] = np.repeat(mid, ends - starts)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_pr(scores, labels) -> float:
    """Average precision over a descending-score sweep; tied scores form one step."""
    s, y = _check(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tp = np.cumsum(y)[last]
    fp = (last + 1) - tp
    precision = tp / (tp + fp)
    recall = tp / y.sum()
    steps = np.diff(np.r_[0.0, recall])
    return float(np.sum(steps * precision))


def aii(representation, labels, rng: RngStream | int = 0, anchors: int = 20,
        normals: int = 1000) -> float:
    """Fraction of anomalies that stand apart from normal anchors.

    For each anomaly ``a`` an anchor set ``C`` and a reference set ``N`` are
    drawn from the labeled normals (with replacement only when there are too
    few). ``a`` counts as isolated when the median over ``n_i`` in ``N`` of
    ``mean_{c in C} [d(a, c) - d(n_i, c)]`` is positive, i.e. ``a`` is on
    average farther from the anchors than a typical normal is. Each anomaly
    uses its own child stream ``rng.child("aii", index)``.
    """
    x = as_matrix(representation, "representation")
    y = np.asarray(labels).ravel()
    if y.shape[0] != x.shape[0]:
        raise ShapeError(f"labels must have length {x.shape[0]}, got {y.shape[0]}")
    normal_idx = np.flatnonzero(y == 0)
    anomaly_idx = np.flatnonzero(y == 1)
    if len(anomaly_idx) == 0:
        raise MetricError("AII needs at least one anomaly")
    if len(normal_idx) < anchors + 1:
        raise MetricError(f"AII needs at least {anchors + 1} normal objects, got {len(normal_idx)}")
    if not isinstance(rng, RngStream):
        rng = RngStream(int(rng))
    isolated = 0
    for a_pos, a in enumerate(anomaly_idx):
        s = rng.child("aii", a_pos)
        c = s.choice(normal_idx, anchors, replace=len(normal_idx) < anchors)
        ref = s.choice(normal_idx, normals, replace=len(normal_idx) < normals)
        cx = x[c]
        d_anchor = np.linalg.norm(cx - x[a], axis=1)  # (|C|,)
        d_ref = np.linalg.norm(x[ref][:, None, :] - cx[None, :, :], axis=2)  # (|N|, |C|)
        margin = d_anchor.mean() - d_ref.mean(axis=1)
        isolated += np.median(margin) > 0
    return isolated / len(anomaly_idx)
