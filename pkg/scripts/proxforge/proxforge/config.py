"""
Generation and scoring configuration.

Values come, highest precedence first, from command-line flags, a JSON
config file, PROXFORGE_* environment variables (or .env), then defaults.
"""

import hashlib
import json
import re
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional, Tuple

from pydantic import Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .constants import DEFAULT_AUDIT_THRESHOLD, DEFAULT_EPSILON
from .errors import ConfigError

# Fields that never influence output bytes and are left out of the hash
_UNHASHED_FIELDS = {"jobs"}


class GenConfig(BaseSettings):
    """Every tunable of the pipeline."""

    seed: int = Field(default=0, ge=0, lt=2**64)
    max_pairs_per_image: int = Field(default=8, ge=0)
    perception_cap: Optional[int] = Field(default=None, ge=0)
    mode_ratio: str = "1:1"
    epsilon: float = Field(default=DEFAULT_EPSILON, gt=0)
    median_window: int = Field(default=1, ge=1)
    equal_tie_rule: Literal["2dp"] = "2dp"
    sqrel_denominator: Literal["pred", "gt"] = "pred"
    audit_threshold: float = Field(default=DEFAULT_AUDIT_THRESHOLD, gt=0)
    system_message: str = (
        "You are a helpful vision assistant. Estimate relative depth values of "
        "objects in the image and reason about which objects are closer to the viewer."
    )
    eval_prompt_style: Literal["plain", "detailed"] = "plain"
    jobs: int = Field(default=1, ge=1)

    model_config = SettingsConfigDict(env_prefix="PROXFORGE_", env_file=".env", extra="ignore")

    @field_validator("mode_ratio")
    @classmethod
    def _ratio_usable(cls, v: str) -> str:
        direct, reasoned = _split_ratio(v)
        if direct + reasoned == 0:
            raise ValueError(f"mode ratio {v!r} cannot be 0:0")
        return f"{direct}:{reasoned}"

    @field_validator("median_window")
    @classmethod
    def _odd_window(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError(f"median window {v} must be odd")
        return v

    @property
    def direct_fraction(self) -> float:
        direct, reasoned = _split_ratio(self.mode_ratio)
        return direct / (direct + reasoned)

    def hashed_fields(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", exclude=_UNHASHED_FIELDS)

    def config_hash(self) -> str:
        return sha256_hex(canonical_json(self.hashed_fields()).encode("utf-8"))


def _split_ratio(text: str) -> Tuple[int, int]:
    match = re.fullmatch(r"\s*(\d+)\s*:\s*(\d+)\s*", text)
    if not match:
        raise ValueError(f"mode ratio {text!r} is not of the form direct:reasoned")
    return int(match.group(1)), int(match.group(2))


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def read_config_file(path: Optional[Path]) -> Dict[str, Any]:
    """Read a JSON config file into a flat dict (empty when no path)."""
    if path is None:
        return {}
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}")
    if not isinstance(payload, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(payload) - set(GenConfig.model_fields))
    if unknown:
        raise ConfigError(f"config file {path} has unknown setting(s): {', '.join(unknown)}")
    return payload


def load_config(
    config_file: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None
) -> GenConfig:
    """Build a GenConfig; flags override file values, which override env/defaults."""
    values = read_config_file(config_file)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return GenConfig(**values)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}")
