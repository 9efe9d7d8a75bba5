"""Pipeline configuration: defaults, a key = value file format, validation.

Precedence, lowest first: built-in defaults, the config file, command-line
flags.  Unknown keys are rejected.  Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import ConfigError


@dataclass
class PipelineConfig:
    # frame quality
    y_min: float = 0.10
    s_min: float = 100.0
    u_min: float = 0.30
    # change-point segmentation
    analysis_rate: float = 2.0
    lambda_ratio: float = 0.5
    lam: float = 0.0            # > 0 overrides lambda_ratio
    solver_tol: float = 1e-6
    solver_max_iter: int = 500
    target_segment_seconds: float = 5.0
    min_split_gap: int = 0      # analysis columns; 0 = one second's worth
    # refinement and the short-segment merge pass
    discard_fraction: float = 0.5
    max_bad_run_seconds: float = 0.5
    d_m_seconds: float = 1.5
    d_b_seconds: float = 0.5
    # frame features
    feature_width: int = 320    # 0 = full resolution
    feature_stride: int = 1
    exclude_faces: bool = True
    embeddings: str = ""
    tau: float = 0.6
    salience_min: int = 0       # 0 = max(2, 1% of embeddings)
    bit_model: str = ""
    # ranking and selection
    model: str = ""
    fraction: float = 0.15
    coarsen: bool = False
    include_frames: bool = False
    # execution
    seed: int = 0
    workers: int = 0            # 0 = available cores
    cache: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        def need(cond: bool, msg: str):
            if not cond:
                raise ConfigError(msg)

        need(0.0 <= self.y_min <= 1.0, "y_min must lie in [0, 1]")
        need(self.s_min >= 0.0, "s_min must be >= 0")
        need(0.0 <= self.u_min <= 1.0, "u_min must lie in [0, 1]")
        need(self.analysis_rate > 0, "analysis_rate must be > 0")
        need(0.0 < self.lambda_ratio <= 1.0, "lambda_ratio must lie in (0, 1]")
        need(self.lam >= 0.0, "lam must be >= 0")
        need(self.solver_tol > 0, "solver_tol must be > 0")
        need(self.solver_max_iter >= 1, "solver_max_iter must be >= 1")
        need(self.target_segment_seconds > 0, "target_segment_seconds must be > 0")
        need(self.min_split_gap >= 0, "min_split_gap must be >= 0")
        need(0.0 <= self.discard_fraction <= 1.0, "discard_fraction must lie in [0, 1]")
        for key in ("max_bad_run_seconds", "d_m_seconds", "d_b_seconds"):
            need(getattr(self, key) >= 0, f"{key} must be >= 0")
        need(self.feature_width >= 0, "feature_width must be >= 0")
        need(self.feature_stride >= 1, "feature_stride must be >= 1")
        need(self.tau >= 0, "tau must be >= 0")
        need(self.salience_min >= 0, "salience_min must be >= 0")
        need(0.0 <= self.fraction <= 1.0, "fraction must lie in [0, 1]")
        need(self.workers >= 0, "workers must be >= 0")

    @property
    def n_workers(self) -> int:
        return self.workers or (os.cpu_count() or 1)

    @property
    def split_gap(self) -> int:
        return self.min_split_gap or max(1, int(round(self.analysis_rate)))

    def frames(self, seconds: float, fps: float) -> int:
        return int(round(seconds * fps))

    def to_dict(self) -> dict:
        return asdict(self)

    def subset(self, keys) -> dict:
        d = self.to_dict()
        return {k: d[k] for k in keys}

    def updated(self, **changes) -> "PipelineConfig":
        d = self.to_dict()
        for k, v in changes.items():
            if k not in d:
                raise ConfigError(f"unknown config key {k!r}")
            d[k] = _coerce(k, v)
        return PipelineConfig(**d)


_TYPES = {f.name: f.type for f in fields(PipelineConfig)}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(key: str, value):
    kind = _TYPES[key]
    if not isinstance(value, str):
        if kind == "bool" and isinstance(value, bool):
            return value
        if kind in ("int", "float") and isinstance(value, (int, float)) and not isinstance(value, bool):
            return int(value) if kind == "int" else float(value)
        if kind == "str" and value is None:
            return ""
        value = str(value)
    text = value.strip()
    try:
        if kind == "bool":
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(text)
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r} as {kind}") from None
    return text


def parse_config_text(text: str, origin: str = "<config>") -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{n}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"{origin}:{n}: unknown config key {key!r}")
        out[key] = _coerce(key, value)
    return out


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Defaults, then the file at ``path`` (if any), then non-None ``overrides``."""
    values = {}
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values.update(parse_config_text(text, str(path)))
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k not in _TYPES:
            raise ConfigError(f"unknown config key {k!r}")
        values[k] = _coerce(k, v)
    return PipelineConfig(**values)


def dump_config(cfg: PipelineConfig) -> str:
    lines = []
    for k, v in cfg.to_dict().items():
        if isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"
