"""Session configuration: TOML file, flag overrides, validation.

Defaults mirror the full-scale setup (3768 characters x 768 dims, top-3
retrieval); tests and demos override to desk scale.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

PROVIDER_URL_ENV = "AIN_PROVIDER_URL"


class ConfigError(ValueError):
    pass


@dataclass
class SimulationConfig:
    seed: int = 0
    table: str = "synthetic"  # "synthetic" or path to a table file
    table_n: int = 3768
    table_dim: int = 768
    corpus: str = ""
    script: str = ""
    linkage: str = "average"
    feedback_levels: int = 4
    epsilon: float = 0.3
    max_iterations: int = 1000
    saturation_window: int = 50
    k_retrieval: int = 3
    max_verse_len: int = 14
    metrics_window: int = 50
    out_dir: str = "out"
    provider_url: str = ""
    provider_timeout: float = 10.0
    randomize_hint_ties: bool = False

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _coerce(name: str, kind: type, raw) -> object:
    if kind is bool:
        if isinstance(raw, bool):
            return raw
        if isinstance(raw, str) and raw.lower() in ("true", "false"):
            return raw.lower() == "true"
        raise ConfigError(f"{name}: expected true/false, got {raw!r}")
    if kind is int:
        if isinstance(raw, bool) or (not isinstance(raw, (int, str))):
            raise ConfigError(f"{name}: expected integer, got {raw!r}")
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{name}: expected integer, got {raw!r}") from None
    if kind is float:
        if isinstance(raw, bool) or (not isinstance(raw, (int, float, str))):
            raise ConfigError(f"{name}: expected number, got {raw!r}")
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{name}: expected number, got {raw!r}") from None
    return str(raw)


_FIELD_TYPES = {"seed": int, "table_n": int, "table_dim": int, "feedback_levels": int,
                "max_iterations": int, "saturation_window": int, "k_retrieval": int,
                "max_verse_len": int, "metrics_window": int, "epsilon": float,
                "provider_timeout": float, "randomize_hint_ties": bool}


def field_type(name: str) -> type:
    return _FIELD_TYPES.get(name, str)


def load_config(path: str | Path) -> SimulationConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data, origin=str(path))


def config_from_dict(data: dict, origin: str = "<dict>") -> SimulationConfig:
    known = {f.name for f in fields(SimulationConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{origin}: unknown config keys {sorted(unknown)}")
    cfg = SimulationConfig()
    for name, raw in data.items():
        setattr(cfg, name, _coerce(name, field_type(name), raw))
    return cfg


def apply_overrides(cfg: SimulationConfig, overrides: dict[str, str]) -> SimulationConfig:
    known = {f.name for f in fields(SimulationConfig)}
    for name, raw in overrides.items():
        if name not in known:
            raise ConfigError(f"unknown config key {name!r}")
        setattr(cfg, name, _coerce(name, field_type(name), raw))
    return cfg


def validate(cfg: SimulationConfig) -> None:
    if cfg.seed < 0:
        raise ConfigError("seed must be >= 0")
    if cfg.table == "synthetic":
        # the session fits a 3-axis projection, so 4 rows / 3 dims minimum
        if cfg.table_n < 4 or cfg.table_dim < 3:
            raise ConfigError("synthetic table needs table_n >= 4 and table_dim >= 3")
    elif not Path(cfg.table).is_file():
        raise ConfigError(f"table file not found: {cfg.table}")
    for name in ("corpus", "script"):
        p = getattr(cfg, name)
        if not p:
            raise ConfigError(f"{name} path is required")
        if not Path(p).is_file():
            raise ConfigError(f"{name} file not found: {p}")
    if cfg.linkage not in ("average", "complete", "single"):
        raise ConfigError(f"unknown linkage {cfg.linkage!r}")
    if cfg.feedback_levels < 2:
        raise ConfigError("feedback_levels must be >= 2")
    if not 0.0 < cfg.epsilon < 1.0:
        raise ConfigError("epsilon must be in (0, 1)")
    if cfg.max_iterations < 0:
        raise ConfigError("max_iterations must be >= 0")
    for name in ("saturation_window", "k_retrieval", "max_verse_len", "metrics_window"):
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name} must be >= 1")
    if cfg.provider_timeout <= 0:
        raise ConfigError("provider_timeout must be positive")


def resolve_provider_url(cfg: SimulationConfig) -> None:
    """Environment variable supplies the endpoint when the config doesn't;
    absence of both means offline mode."""
    if not cfg.provider_url:
        cfg.provider_url = os.environ.get(PROVIDER_URL_ENV, "")
