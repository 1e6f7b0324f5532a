"""Versioned single-file model container.

Layout (all integers little-endian)::

    b"DIFMODEL"                       magic, 8 bytes
    u32 format version
    u32 section count
    section table, one entry per section:
        32-byte NUL-padded ASCII name, u64 offset, u64 length
    section payloads

The ``meta`` section is canonical JSON (sorted keys, no whitespace) that
also records dtype and shape of every array section. Nothing time-dependent
is written, so refitting with the same inputs reproduces the file byte for
byte.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .baselines import ExtendedIsolationForest, IsolationForest, _FlatTree
from .errors import ModelFormatError
from .forest import DeepForest, ForestConfig, IsolationTree
from .models import DeepIsolationForest
from .representation import CereLayer, CereNetwork, ColumnStats

MAGIC = b"DIFMODEL"
FORMAT_VERSION = 1
_NAME_BYTES = 32
_ENTRY = struct.Struct(f"<{_NAME_BYTES}sQQ")
_HEAD = struct.Struct("<8sII")

_TREE_FIELDS = ("node_id", "split_dim", "split_value", "left", "right", "size", "depth")


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def write_container(path, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    meta = dict(meta)
    meta["arrays"] = {}
    payloads = []
    for name, a in arrays.items():
        if len(name.encode()) > _NAME_BYTES:
            raise ValueError(f"section name too long: {name}")
        a = np.ascontiguousarray(a)
        dt = a.dtype.newbyteorder("<") if a.dtype.byteorder not in ("|", "<") else a.dtype
        a = a.astype(dt, copy=False)
        meta["arrays"][name] = {"dtype": a.dtype.str, "shape": list(a.shape)}
        payloads.append((name, a.tobytes()))
    payloads.insert(0, ("meta", canonical_json(meta)))
    offset = _HEAD.size + _ENTRY.size * len(payloads)
    table = []
    for name, blob in payloads:
        table.append(_ENTRY.pack(name.encode(), offset, len(blob)))
        offset += len(blob)
    with Path(path).open("wb") as fh:
        fh.write(_HEAD.pack(MAGIC, FORMAT_VERSION, len(payloads)))
        fh.write(b"".join(table))
        for _, blob in payloads:
            fh.write(blob)


def read_container(path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEAD.size:
        raise ModelFormatError(f"{path}: file too short to be a model")
    magic, version, count = _HEAD.unpack_from(raw, 0)
    if magic != MAGIC:
        raise ModelFormatError(f"{path}: not a model file (bad magic)")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported format version {version}")
    sections = {}
    for k in range(count):
        pos = _HEAD.size + k * _ENTRY.size
        if pos + _ENTRY.size > len(raw):
            raise ModelFormatError(f"{path}: truncated section table")
        name, off, length = _ENTRY.unpack_from(raw, pos)
        if off + length > len(raw):
            raise ModelFormatError(f"{path}: section {name!r} runs past end of file")
        sections[name.rstrip(b"\0").decode()] = raw[off:off + length]
    if "meta" not in sections:
        raise ModelFormatError(f"{path}: missing meta section")
    try:
        meta = json.loads(sections.pop("meta"))
    except ValueError as exc:
        raise ModelFormatError(f"{path}: corrupt meta section") from exc
    arrays = {}
    for name, info in meta.get("arrays", {}).items():
        if name not in sections:
            raise ModelFormatError(f"{path}: missing array section {name}")
        arrays[name] = np.frombuffer(sections[name], dtype=np.dtype(info["dtype"])).reshape(info["shape"])
    return meta, arrays


def _concat(parts, dtype):
    offsets = np.cumsum([0] + [len(p) for p in parts]).astype(np.int64)
    body = np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype)
    return offsets, body


def _split(offsets, body):
    return [body[offsets[k]:offsets[k + 1]] for k in range(len(offsets) - 1)]


def _stats_arrays(stats: ColumnStats):
    return {"stats.mean": stats.mean, "stats.std": stats.std}


def _stats_from(arrays) -> ColumnStats:
    return ColumnStats(np.array(arrays["stats.mean"]), np.array(arrays["stats.std"]))


def save_model(path, model, extra_meta: dict | None = None) -> None:
    """Write a fitted :class:`DeepIsolationForest`, :class:`IsolationForest` or
    :class:`ExtendedIsolationForest` to ``path``."""
    meta = dict(extra_meta or {})
    arrays: dict[str, np.ndarray] = {}
    if isinstance(model, DeepIsolationForest):
        forest = model.forest_
        if forest is None:
            raise ModelFormatError("cannot save an unfitted model")
        cfg = asdict(forest.config)
        meta.update(algorithm="dif", config=cfg, mode=model.mode, n_features=forest.input_dim,
                    n_trees=len(forest.trees), master_seed=forest.network.master_seed,
                    layers=[dict(activation=l.activation, apply_activation=l.apply_activation,
                                 alpha=l.alpha) for l in forest.network.layers],
                    trees=[dict(representation_index=t.representation_index,
                                subsample_size=t.subsample_size, depth_limit=t.depth_limit,
                                n_features=t.n_features) for t in forest.trees])
        arrays.update(_stats_arrays(forest.training_stats))
        for l, layer in enumerate(forest.network.layers):
            arrays[f"net.{l}.W"] = layer.base_weights
            arrays[f"net.{l}.P"] = layer.p_vectors
            arrays[f"net.{l}.Q"] = layer.q_vectors
        for name in _TREE_FIELDS:
            dtype = np.float64 if name == "split_value" else np.int64
            off, body = _concat([getattr(t, name) for t in forest.trees], dtype)
            arrays["trees.offsets"] = off
            arrays[f"trees.{name}"] = body
        off, body = _concat([t.subsample for t in forest.trees], np.int64)
        arrays["trees.sub_offsets"] = off
        arrays["trees.subsample"] = body
    elif isinstance(model, IsolationForest):
        flats = getattr(model, "_flat", None)
        if not flats:
            raise ModelFormatError("cannot save an unfitted model")
        algo = "eif" if isinstance(model, ExtendedIsolationForest) else "iforest"
        meta.update(algorithm=algo, n_features=model.n_features_, n_trees=len(flats),
                    config=dict(n_trees=model.n_trees, subsample_size=model.subsample_size,
                                depth=model.depth, seed=model.seed,
                                leaf_adjustment=model.leaf_adjustment),
                    effective_subsample=model.effective_subsample_)
        arrays.update(_stats_arrays(model.stats_))
        names = ["left", "right", "depth", "size", "dim", "value"]
        if model.oblique:
            names += ["normal", "intercept"]
        width = model.n_features_
        for name in names:
            dtype = np.float64 if name in ("value", "normal", "intercept") else np.int64
            parts = [getattr(f, name) for f in flats]
            if name in ("normal", "intercept"):
                # trees without any split carry zero-width placeholders
                parts = [p if p.size else np.zeros((len(f.left), width)) for p, f in zip(parts, flats)]
            off, body = _concat(parts, dtype)
            arrays["trees.offsets"] = off
            arrays[f"trees.{name}"] = body
    else:
        raise ModelFormatError(f"cannot serialise {type(model).__name__}")
    write_container(path, meta, arrays)


def load_model(path):
    """Return ``(model, meta)`` for a file written by :func:`save_model`."""
    meta, arrays = read_container(path)
    algo = meta.get("algorithm")
    try:
        if algo == "dif":
            cfg = dict(meta["config"])
            if cfg.get("hidden_dims") is not None:
                cfg["hidden_dims"] = tuple(cfg["hidden_dims"])
            config = ForestConfig(**cfg)
            layers = []
            for l, info in enumerate(meta["layers"]):
                layers.append(CereLayer(arrays[f"net.{l}.W"], arrays[f"net.{l}.P"],
                                        arrays[f"net.{l}.Q"], info["activation"],
                                        info["apply_activation"], info["alpha"]))
            network = CereNetwork(tuple(layers), meta["master_seed"])
            off = arrays["trees.offsets"]
            cols = {name: _split(off, arrays[f"trees.{name}"]) for name in _TREE_FIELDS}
            subs = _split(arrays["trees.sub_offsets"], arrays["trees.subsample"])
            trees = tuple(
                IsolationTree(*(cols[name][k] for name in _TREE_FIELDS), subs[k],
                              info["representation_index"], info["subsample_size"],
                              info["depth_limit"], info["n_features"])
                for k, info in enumerate(meta["trees"]))
            forest = DeepForest(network, trees, config, _stats_from(arrays))
            return DeepIsolationForest.from_forest(forest, meta.get("mode", "deas")), meta
        if algo in ("iforest", "eif"):
            cls = ExtendedIsolationForest if algo == "eif" else IsolationForest
            c = meta["config"]
            model = cls(c["n_trees"], c["subsample_size"], c["depth"], c["seed"],
                        c["leaf_adjustment"])
            off = arrays["trees.offsets"]
            names = ["left", "right", "depth", "size", "dim", "value"]
            cols = {name: _split(off, arrays[f"trees.{name}"]) for name in names}
            flats = [_FlatTree(*(cols[name][k] for name in names)) for k in range(len(off) - 1)]
            if model.oblique:
                for name in ("normal", "intercept"):
                    for f, part in zip(flats, _split(off, arrays[f"trees.{name}"])):
                        setattr(f, name, part)
            model._flat = flats
            model.stats_ = _stats_from(arrays)
            model.n_features_ = meta["n_features"]
            model.effective_subsample_ = meta["effective_subsample"]
            return model, meta
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: inconsistent model contents ({exc})") from exc
    raise ModelFormatError(f"{path}: unknown algorithm {algo!r}")
