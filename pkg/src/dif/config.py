"""Run configuration: flat ``key = value`` files, flag overrides and hashing.

Only settings that change results take part in the hash; thread counts and
file paths do not.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .core import ACTIVATIONS, DISTRIBUTIONS
from .errors import ConfigError
from .forest import ForestConfig
from .scoring import MODES

ALGORITHMS = ("dif", "iforest", "eif")


@dataclass(frozen=True)
class RunConfig:
    algorithm: str = "dif"
    r: int = 50
    t: int = 6
    n: int = 256
    depth: int | None = None
    hidden: tuple[int, ...] | None = None
    out_dim: int = 16
    activation: str = "tanh"
    final_activation: bool = True
    init: str = "normal"
    batch: int = 64
    seed: int = 0
    mode: str = "deas"
    trees: int = 300
    leaf_adjustment: bool = True

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.init not in DISTRIBUTIONS:
            raise ConfigError(f"unknown init distribution {self.init!r}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown scoring mode {self.mode!r}; expected one of {MODES}")
        for name in ("r", "t", "n", "out_dim", "batch", "trees"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.depth is not None and self.depth < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}")
        if self.hidden is not None:
            hidden = tuple(int(h) for h in self.hidden)
            if any(h < 1 for h in hidden):
                raise ConfigError(f"hidden widths must be >= 1, got {hidden}")
            object.__setattr__(self, "hidden", hidden)

    def canonical(self) -> str:
        """One ``key=value`` line per setting, sorted by key."""
        lines = []
        for key, value in sorted(asdict(self).items()):
            lines.append(f"{key}={_format(value)}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def forest_config(self) -> ForestConfig:
        return ForestConfig(r=self.r, t=self.t, n=self.n, depth=self.depth, hidden_dims=self.hidden,
                            out_dim=self.out_dim, activation=self.activation,
                            final_activation=self.final_activation, init=self.init,
                            batch_size=self.batch, seed=self.seed)

    def make_detector(self, threads: int = 1):
        """Unfitted detector for :attr:`algorithm`."""
        from .baselines import ExtendedIsolationForest, IsolationForest
        from .models import DeepIsolationForest

        if self.algorithm == "dif":
            return DeepIsolationForest(mode=self.mode, threads=threads, **asdict(self.forest_config()))
        cls = IsolationForest if self.algorithm == "iforest" else ExtendedIsolationForest
        return cls(self.trees, self.n, self.depth, self.seed, self.leaf_adjustment, threads)


def _format(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


_FIELDS = {f.name: f for f in fields(RunConfig)}
_INT_KEYS = {"r", "t", "n", "out_dim", "batch", "seed", "trees"}
_BOOL_KEYS = {"final_activation", "leaf_adjustment"}
_ALIASES = {"algo": "algorithm", "batch_size": "batch", "hidden_dims": "hidden", "out": "out_dim"}


def parse_value(key: str, text: str):
    """Convert the textual value of ``key`` to its typed form."""
    text = text.strip()
    try:
        if key in _INT_KEYS:
            return int(text)
        if key == "depth":
            return None if text.lower() in ("auto", "none", "") else int(text)
        if key == "hidden":
            if text.lower() in ("auto", "none", ""):
                return None
            return tuple(int(v) for v in text.split(",") if v.strip())
        if key in _BOOL_KEYS:
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
    except ValueError:
        raise ConfigError(f"invalid value {text!r} for {key}") from None
    return text


def normalize_key(key: str) -> str:
    key = key.strip().lower().replace("-", "_")
    key = _ALIASES.get(key, key)
    if key not in _FIELDS:
        raise ConfigError(f"unknown configuration key {key!r}")
    return key


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        try:
            k = normalize_key(key)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
        out[k] = parse_value(k, value)
    return out


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file at ``path``, then non-None ``overrides``."""
    values = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {p}: {exc}") from None
        values.update(parse_config_text(text, str(p)))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[normalize_key(key)] = value
    return RunConfig(**values)


def with_overrides(cfg: RunConfig, **changes) -> RunConfig:
    return replace(cfg, **{k: v for k, v in changes.items() if v is not None})
