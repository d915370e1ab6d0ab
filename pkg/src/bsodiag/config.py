"""Pipeline configuration: defaults, TOML file, and flag overrides.

Precedence is CLI flag > config file > default. The effective configuration
is echoed into every output artifact so runs can be reproduced.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Union

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigurationError

ENV_CONFIG_PATH = "BSODIAG_CONFIG"


@dataclass(frozen=True)
class SpotConfig:
    """Extreme-value detector parameters."""

    q: float = 1e-4
    init_quantile: float = 0.98
    min_nonzero: int = 10
    intensity_fallback: bool = False
    split_gap_slots: Optional[int] = None

    def __post_init__(self) -> None:
        if not 0 < self.q < 1:
            raise ConfigurationError(f"spot.q must be in (0,1), got {self.q}")
        if not 0 < self.init_quantile < 1:
            raise ConfigurationError(
                f"spot.init_quantile must be in (0,1), got {self.init_quantile}"
            )
        if self.min_nonzero < 1:
            raise ConfigurationError("spot.min_nonzero must be >= 1")
        if self.split_gap_slots is not None and self.split_gap_slots < 1:
            raise ConfigurationError("spot.split_gap_slots must be >= 1 or omitted")


@dataclass(frozen=True)
class WalkConfig:
    """Random-walk ranking parameters."""

    iterations: int = 100
    damping: float = 0.85
    tol: float = 1e-12

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ConfigurationError("walk.iterations must be >= 1")
        if not 0 < self.damping < 1:
            raise ConfigurationError(f"walk.damping must be in (0,1), got {self.damping}")
        if self.tol <= 0:
            raise ConfigurationError("walk.tol must be > 0")


SUPPORT_MODES = ("groups", "literal")
PCR_DENOMINATORS = ("predicted", "truth")


@dataclass(frozen=True)
class PipelineConfig:
    """Top-level configuration for all pipeline stages."""

    window_l: int = 240
    window_t: int = 120
    window_t_prime: int = 15
    delta_minutes: int = 1
    eta_minutes: int = 5
    alpha: float = 0.001
    k: int = 3
    max_path_len: int = 10
    support_mode: str = "groups"
    pcr_denominator: str = "predicted"
    whitelist_path: Optional[str] = None
    disable_fkg: bool = False
    disable_cmdb: bool = False
    spot: SpotConfig = field(default_factory=SpotConfig)
    walk: WalkConfig = field(default_factory=WalkConfig)

    def __post_init__(self) -> None:
        for name in ("window_l", "window_t", "window_t_prime", "delta_minutes", "eta_minutes"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if not 0 < self.alpha < 1:
            raise ConfigurationError(f"alpha must be in (0,1), got {self.alpha}")
        if self.k < 1:
            raise ConfigurationError("k must be >= 1")
        if self.max_path_len < 2:
            raise ConfigurationError("max_path_len must be >= 2")
        if self.support_mode not in SUPPORT_MODES:
            raise ConfigurationError(
                f"support_mode must be one of {SUPPORT_MODES}, got {self.support_mode!r}"
            )
        if self.pcr_denominator not in PCR_DENOMINATORS:
            raise ConfigurationError(
                f"pcr_denominator must be one of {PCR_DENOMINATORS}, "
                f"got {self.pcr_denominator!r}"
            )

    def to_dict(self) -> dict:
        return {
            "window_l": self.window_l,
            "window_t": self.window_t,
            "window_t_prime": self.window_t_prime,
            "delta_minutes": self.delta_minutes,
            "eta_minutes": self.eta_minutes,
            "alpha": self.alpha,
            "k": self.k,
            "max_path_len": self.max_path_len,
            "support_mode": self.support_mode,
            "pcr_denominator": self.pcr_denominator,
            "whitelist_path": self.whitelist_path,
            "disable_fkg": self.disable_fkg,
            "disable_cmdb": self.disable_cmdb,
            "spot": {
                "q": self.spot.q,
                "init_quantile": self.spot.init_quantile,
                "min_nonzero": self.spot.min_nonzero,
                "intensity_fallback": self.spot.intensity_fallback,
                "split_gap_slots": self.spot.split_gap_slots,
            },
            "walk": {
                "iterations": self.walk.iterations,
                "damping": self.walk.damping,
                "tol": self.walk.tol,
            },
        }

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


_TOP_LEVEL_KEYS = {
    "window_l",
    "window_t",
    "window_t_prime",
    "delta_minutes",
    "eta_minutes",
    "alpha",
    "k",
    "max_path_len",
    "support_mode",
    "pcr_denominator",
    "whitelist_path",
    "disable_fkg",
    "disable_cmdb",
}
_SPOT_KEYS = {"q", "init_quantile", "min_nonzero", "intensity_fallback", "split_gap_slots"}
_WALK_KEYS = {"iterations", "damping", "tol"}


def _apply(cfg: PipelineConfig, values: Mapping) -> PipelineConfig:
    top = {}
    spot = {}
    walk = {}
    for key, value in values.items():
        if value is None:
            continue
        if key in _TOP_LEVEL_KEYS:
            top[key] = value
        elif key == "spot" and isinstance(value, Mapping):
            spot.update({k: v for k, v in value.items() if v is not None})
        elif key == "walk" and isinstance(value, Mapping):
            walk.update({k: v for k, v in value.items() if v is not None})
        elif key.startswith("spot.") and key[5:] in _SPOT_KEYS:
            spot[key[5:]] = value
        elif key.startswith("walk.") and key[5:] in _WALK_KEYS:
            walk[key[5:]] = value
        else:
            raise ConfigurationError(f"unknown configuration key: {key!r}")
    unknown_spot = set(spot) - _SPOT_KEYS
    unknown_walk = set(walk) - _WALK_KEYS
    if unknown_spot or unknown_walk:
        raise ConfigurationError(
            f"unknown configuration keys: {sorted(unknown_spot | unknown_walk)}"
        )
    if spot:
        top["spot"] = replace(cfg.spot, **spot)
    if walk:
        top["walk"] = replace(cfg.walk, **walk)
    return replace(cfg, **top) if top else cfg


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping] = None,
) -> PipelineConfig:
    """Build the effective configuration.

    ``path`` falls back to the BSODIAG_CONFIG environment variable; when
    neither is set, file values are skipped. ``overrides`` (typically CLI
    flags) win over the file; keys may be flat ("alpha"), dotted
    ("spot.q") or nested tables.
    """
    cfg = PipelineConfig()
    if path is None:
        env = os.environ.get(ENV_CONFIG_PATH)
        path = env if env else None
    if path is not None:
        p = Path(path)
        try:
            data = tomllib.loads(p.read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigurationError(f"cannot read config file {p}: {e}") from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigurationError(f"invalid TOML in {p}: {e}") from e
        cfg = _apply(cfg, data)
    if overrides:
        cfg = _apply(cfg, overrides)
    return cfg
