"""Tabular datasets: CSV ingestion and synthetic scenario generators."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import RngStream
from .errors import ConfigError, InputError, ParseError, ShapeError


@dataclass(frozen=True)
class DataMatrix:
    values: np.ndarray
    labels: np.ndarray | None = None
    feature_names: tuple[str, ...] | None = None
    source: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if v.ndim != 2:
            raise ShapeError(f"values must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ParseError("values contain non-finite entries")
        object.__setattr__(self, "values", v)
        if self.labels is not None:
            lab = np.asarray(self.labels).astype(np.int64)
            if lab.shape != (v.shape[0],):
                raise ShapeError(f"labels must have length {v.shape[0]}, got {lab.shape}")
            if not np.isin(lab, (0, 1)).all():
                raise ParseError("labels must be 0 (normal) or 1 (anomaly)")
            object.__setattr__(self, "labels", lab)
        if self.feature_names is not None:
            names = tuple(self.feature_names)
            if len(names) != v.shape[1]:
                raise ShapeError(f"expected {v.shape[1]} feature names, got {len(names)}")
            object.__setattr__(self, "feature_names", names)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def anomaly_ratio(self) -> float:
        if self.labels is None:
            raise ConfigError("dataset is unlabeled")
        return float(self.labels.mean()) if len(self.labels) else 0.0


def _parse_cell(text: str, row: int, col: str, policy: str):
    try:
        value = float(text)
    except ValueError:
        if text.strip() == "" and policy == "mean":
            return math.nan
        raise ParseError(f"row {row}, column {col!r}: non-numeric cell {text!r}") from None
    if not math.isfinite(value) and policy != "mean":
        raise ParseError(f"row {row}, column {col!r}: non-finite cell {text!r}")
    return value


def load_csv(path, label_column: str | None = None, delimiter: str = ",",
             missing: str = "reject") -> DataMatrix:
    """Read a headed numeric CSV file.

    Lines starting with ``#`` are skipped. ``missing="mean"`` replaces empty,
    NaN and infinite cells with the column mean of the finite cells instead
    of rejecting them. Row numbers in error messages are 1-based file lines.
    """
    if missing not in ("reject", "mean"):
        raise ConfigError(f"missing-value policy must be 'reject' or 'mean', got {missing!r}")
    path = Path(path)
    with path.open(newline="") as fh:
        lines = [(i + 1, line) for i, line in enumerate(fh) if not line.startswith("#")]
    reader = csv.reader((line for _, line in lines), delimiter=delimiter)
    rows = list(reader)
    line_no = [i for i, _ in lines]
    if not rows:
        raise InputError(f"{path}: no header row")
    header = [h.strip() for h in rows[0]]
    body = [(line_no[k], r) for k, r in enumerate(rows[1:], start=1) if r]
    label_idx = None
    if label_column is not None:
        if label_column not in header:
            raise ParseError(f"{path}: unknown label column {label_column!r}; columns are {header}")
        label_idx = header.index(label_column)
    feat_idx = [j for j in range(len(header)) if j != label_idx]
    values = np.empty((len(body), len(feat_idx)))
    labels = np.empty(len(body), dtype=np.int64) if label_idx is not None else None
    for r, (line, cells) in enumerate(body):
        if len(cells) != len(header):
            raise ParseError(f"{path}: row {line} has {len(cells)} cells, header has {len(header)}")
        for c, j in enumerate(feat_idx):
            values[r, c] = _parse_cell(cells[j], line, header[j], missing)
        if label_idx is not None:
            raw = cells[label_idx].strip()
            try:
                lab = float(raw)
            except ValueError:
                lab = math.nan
            if lab not in (0.0, 1.0):
                raise ParseError(f"{path}: row {line}, column {label_column!r}: label {raw!r} is not 0 or 1")
            labels[r] = int(lab)
    if missing == "mean" and values.size:
        bad = ~np.isfinite(values)
        if bad.any():
            means = np.array([values[~bad[:, c], c].mean() if (~bad[:, c]).any() else 0.0
                              for c in range(values.shape[1])])
            values[bad] = np.take(means, np.nonzero(bad)[1])
    return DataMatrix(values, labels, tuple(header[j] for j in feat_idx), str(path))


def save_csv(data: DataMatrix, path, label_column: str = "label", delimiter: str = ",",
             comment: str | None = None) -> None:
    names = list(data.feature_names or (f"x{j}" for j in range(data.n_cols)))
    with Path(path).open("w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(names + ([label_column] if data.labels is not None else []))
        for i in range(data.n_rows):
            row = [repr(float(v)) for v in data.values[i]]
            if data.labels is not None:
                row.append(str(int(data.labels[i])))
            w.writerow(row)


def _rng(seed) -> RngStream:
    return seed if isinstance(seed, RngStream) else RngStream(int(seed))


def gen_ring(n_normal: int = 800, n_anomaly: int = 30, radius: float = 4.0,
             thickness: float = 0.3, seed=0, anomaly_spread: float | None = None) -> DataMatrix:
    """Normals on a noisy ring around the origin, an anomaly cloud at its centre.

    Normal radii are ``radius + thickness * z`` with ``z`` standard normal
    truncated to ``[-3, 3]``. Anomalies are Gaussian around the origin with
    std ``anomaly_spread`` (default ``0.15 * radius``), truncated so every
    anomaly stays inside ``radius - 3 * thickness``.
    """
    if n_normal < 1 or n_anomaly < 1:
        raise ConfigError("ring generator needs at least one normal and one anomaly")
    inner = radius - 3 * thickness
    if inner <= 0:
        raise ConfigError("thickness too large for radius: the ring would cover the centre")
    spread = 0.15 * radius if anomaly_spread is None else anomaly_spread
    rng = _rng(seed)
    angle = rng.uniform(0.0, 2 * np.pi, n_normal)
    z = rng.standard_normal(n_normal)
    while np.any(np.abs(z) > 3):
        bad = np.abs(z) > 3
        z[bad] = rng.standard_normal(int(bad.sum()))
    rad = radius + thickness * z
    normals = np.column_stack([rad * np.cos(angle), rad * np.sin(angle)])
    anomalies = spread * rng.standard_normal((n_anomaly, 2))
    while True:
        bad = np.hypot(anomalies[:, 0], anomalies[:, 1]) >= inner
        if not bad.any():
            break
        anomalies[bad] = spread * rng.standard_normal((int(bad.sum()), 2))
    values = np.vstack([normals, anomalies])
    labels = np.r_[np.zeros(n_normal, dtype=np.int64), np.ones(n_anomaly, dtype=np.int64)]
    return DataMatrix(values, labels, ("x", "y"), f"ring(seed={seed})")


BLOB_KINDS = ("single-blob", "two-blob", "sinusoid")
TWO_BLOB_CENTERS = ((10.0, 0.0), (0.0, 10.0))


def gen_blobs(kind: str, n: int = 500, noise: float = 1.0, seed=0) -> DataMatrix:
    """Unlabeled 2-D clouds.

    ``single-blob``: isotropic Gaussian at the origin with std ``noise``.
    ``two-blob``: two such Gaussians centred at (10, 0) and (0, 10), half
    of the points each. ``sinusoid``: ``x`` uniform on ``[0, 2*pi]`` and
    ``y = sin(x) + noise * z``.
    """
    if kind not in BLOB_KINDS:
        raise ConfigError(f"unknown blob kind {kind!r}; expected one of {BLOB_KINDS}")
    if n < 1:
        raise ConfigError("n must be >= 1")
    rng = _rng(seed)
    if kind == "single-blob":
        values = noise * rng.standard_normal((n, 2))
    elif kind == "two-blob":
        half = n // 2
        centers = np.array([TWO_BLOB_CENTERS[0]] * half + [TWO_BLOB_CENTERS[1]] * (n - half))
        values = centers + noise * rng.standard_normal((n, 2))
    else:
        x = rng.uniform(0.0, 2 * np.pi, n)
        values = np.column_stack([x, np.sin(x) + noise * rng.standard_normal(n)])
    return DataMatrix(values, None, ("x", "y"), f"{kind}(seed={seed})")


def gen_labeled_blobs(kind: str, n: int = 500, n_anomaly: int = 20, noise: float | None = None,
                      seed=0) -> DataMatrix:
    """Blob scenario plus injected anomalies placed where the normal data is absent.

    ``single-blob``: anomalies at radius ``4 * noise`` around the origin in
    random directions. ``two-blob``: a tight cloud (std ``0.5 * noise``) at the
    midpoint (5, 5) between the blob centres. ``sinusoid``: points offset by
    ``+-(0.8 + 4 * noise)`` vertically from the curve. ``noise`` defaults to
    1.0 for the blobs and 0.1 for the sinusoid.
    """
    if noise is None:
        noise = 0.1 if kind == "sinusoid" else 1.0
    rng = _rng(seed)
    normal = gen_blobs(kind, n, noise, rng.child("normal"))
    a = rng.child("anomaly")
    if kind == "single-blob":
        ang = a.uniform(0.0, 2 * np.pi, n_anomaly)
        anomalies = 4 * noise * np.column_stack([np.cos(ang), np.sin(ang)])
    elif kind == "two-blob":
        mid = np.mean(TWO_BLOB_CENTERS, axis=0)
        anomalies = mid + 0.5 * noise * a.standard_normal((n_anomaly, 2))
    else:
        x = a.uniform(0.0, 2 * np.pi, n_anomaly)
        sign = np.where(a.uniform(0.0, 1.0, n_anomaly) < 0.5, -1.0, 1.0)
        anomalies = np.column_stack([x, np.sin(x) + sign * (0.8 + 4 * noise)])
    values = np.vstack([normal.values, anomalies])
    labels = np.r_[np.zeros(n, dtype=np.int64), np.ones(n_anomaly, dtype=np.int64)]
    return DataMatrix(values, labels, ("x", "y"), f"{kind}+anomalies(seed={seed})")


DEFAULT_SCALING_DIMS =tuple(16 * 2**k for k in range(9))  # 16 .. 4096
DEFAULT_SCALING_SIZES = tuple(1000 * 2**k for k in range(9))  # 1000 .. 256000


def gen_scaling_suite(sizes: Sequence[int] = DEFAULT_SCALING_SIZES,
                      dims: Sequence[int] = DEFAULT_SCALING_DIMS, seed=0,
                      fixed_size: int = 5000, fixed_dim: int = 32) -> list[DataMatrix]:
    """Standard-normal datasets: one per dimensionality at ``fixed_size`` rows,
    then one per size at ``fixed_dim`` columns."""
    rng = _rng(seed)
    out = []
    for k, d in enumerate(dims):
        v = rng.child("dims", k).standard_normal((fixed_size, int(d)))
        out.append(DataMatrix(v, None, None, f"scaling(N={fixed_size},D={d})"))
    for k, size in enumerate(sizes):
        v = rng.child("sizes", k).standard_normal((int(size), fixed_dim))
        out.append(DataMatrix(v, None, None, f"scaling(N={size},D={fixed_dim})"))
    return out


def adjust_contamination(data: DataMatrix, rho: float, seed=0, jitter: float = 0.01) -> DataMatrix:
    """Remove or inject anomalies until their share of the rows is ``rho``.

    The target anomaly count is ``round(rho / (1 - rho) * n_normal)``.
    Injected anomalies are copies of random existing anomalies plus Gaussian
    noise of ``jitter`` times each feature's standard deviation. Normal rows
    are never modified and keep their order at the front.
    """
    if data.labels is None:
        raise ConfigError("contamination adjustment needs labeled data")
    if not 0.0 <= rho <= 0.10:
        raise ConfigError(f"rho must lie in [0, 0.10], got {rho}")
    rng = _rng(seed)
    normal = data.values[data.labels == 0]
    anomalous = data.values[data.labels == 1]
    target = int(round(rho / (1.0 - rho) * len(normal)))
    if target == len(anomalous):
        kept = anomalous
    elif target < len(anomalous):
        keep = np.sort(rng.choice(len(anomalous), size=target, replace=False))
        kept = anomalous[keep]
    else:
        if len(anomalous) == 0:
            raise ConfigError("cannot inject anomalies into a dataset without any")
        extra = target - len(anomalous)
        src = anomalous[rng.integers(0, len(anomalous), extra)]
        scale = jitter * data.values.std(axis=0)
        kept = np.vstack([anomalous, src + scale * rng.standard_normal(src.shape)])
    values = np.vstack([normal, kept])
    labels = np.r_[np.zeros(len(normal), dtype=np.int64), np.ones(len(kept), dtype=np.int64)]
    return DataMatrix(values, labels, data.feature_names, f"{data.source}|rho={rho}")


@dataclass(frozen=True)
class ScoreMap:
    xs: np.ndarray
    ys: np.ndarray
    scores: np.ndarray  # (resolution, resolution), scores[iy, ix]
    threshold: float | None = None

    def triples(self) -> np.ndarray:
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.column_stack([gx.ravel(), gy.ravel(), self.scores.ravel()])


def score_map_grid(model, bounds, resolution: int = 100, train=None) -> ScoreMap:
    """Score a ``resolution x resolution`` lattice over ``bounds``.

    ``model`` is any fitted detector with ``score_samples`` and
    ``n_features_``; ``bounds`` is ``((xmin, xmax), (ymin, ymax))``. When
    ``train`` is given, the 99th percentile of its scores is reported as the
    contour threshold.
    """
    if getattr(model, "n_features_", None) != 2:
        raise ConfigError("score maps need a model fitted on 2-D data")
    if resolution < 2:
        raise ConfigError("resolution must be >= 2")
    (x0, x1), (y0, y1) = bounds
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    gx, gy = np.meshgrid(xs, ys)
    scores = np.asarray(model.score_samples(np.column_stack([gx.ravel(), gy.ravel()])))
    threshold = None
    if train is not None:
        tv = train.values if isinstance(train, DataMatrix) else train
        threshold = float(np.percentile(model.score_samples(tv), 99))
    return ScoreMap(xs, ys, scores.reshape(resolution, resolution), threshold)
