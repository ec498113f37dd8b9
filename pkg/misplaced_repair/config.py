"""Run configuration: defaults, JSON config file and command-line overrides."""
from __future__ import annotations

from collections.abc import Mapping
from dataclasses import asdict, dataclass
import json
import logging
from pathlib import Path
from typing import Any

import voluptuous as vol

from .behavior import ModelConfig
from .const import (
    BLOCK_LAMBDA_RANGE,
    CONF_BLOCK_LAMBDA,
    CONF_JACCARD_MIN,
    CONF_LEN1,
    CONF_LEN2,
    CONF_MATCHER,
    CONF_MAX_WORKERS,
    CONF_MERGE_THRESHOLD,
    CONF_PROTECT_LONG_BLOCKS,
    CONF_SEED,
    CONF_SIZE_THRESHOLD,
    CONF_SUPPORT_THRESHOLD,
    CONF_VARIANCE_FLOOR,
    CONF_VARIANT,
    CONF_WINDOW_LEN,
    DEFAULT_BLOCK_LAMBDA,
    DEFAULT_JACCARD_MIN,
    DEFAULT_LEN1,
    DEFAULT_LEN2,
    DEFAULT_MAX_WORKERS,
    DEFAULT_MERGE_THRESHOLD,
    DEFAULT_PROTECT_LONG_BLOCKS,
    DEFAULT_SEED,
    DEFAULT_SIZE_THRESHOLD,
    DEFAULT_SUPPORT_THRESHOLD,
    DEFAULT_VARIANCE_FLOOR,
    DEFAULT_WINDOW_LEN,
    MATCHER_EXACT,
    MATCHER_GREEDY,
    MATCHERS,
    MIN_SIZE_THRESHOLD,
    VARIANT_GREEDY_ISR,
    VARIANT_ISR,
    VARIANTS,
)
from .determination import DeterminationConfig
from .pipeline import PipelineConfig

_LOGGER = logging.getLogger(__name__)

ERROR_INVALID_VALUE = "invalid_value"
ERROR_UNKNOWN_KEY = "unknown_key"
ERROR_INVALID_FILE = "invalid_config_file"


class RepairConfigError(Exception):
    """Exception raised when a configuration is rejected."""

    def __init__(self, key: str | None, code: str, message: str) -> None:
        """Initialize the error with the offending key and an error code."""
        super().__init__(message)
        self.key = key
        self.code = code


CONFIG_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_WINDOW_LEN, default=DEFAULT_WINDOW_LEN): vol.All(
            vol.Coerce(int), vol.Range(min=2)
        ),
        vol.Optional(CONF_SUPPORT_THRESHOLD, default=DEFAULT_SUPPORT_THRESHOLD): vol.All(
            vol.Coerce(float), vol.Range(min=0, max=1, min_included=False, max_included=False)
        ),
        vol.Optional(CONF_VARIANCE_FLOOR, default=DEFAULT_VARIANCE_FLOOR): vol.All(
            vol.Coerce(float), vol.Range(min=0, min_included=False)
        ),
        vol.Optional(CONF_SIZE_THRESHOLD, default=DEFAULT_SIZE_THRESHOLD): vol.All(
            vol.Coerce(int), vol.Range(min=MIN_SIZE_THRESHOLD)
        ),
        vol.Optional(CONF_MATCHER, default=MATCHER_EXACT): vol.In(MATCHERS),
        vol.Optional(CONF_LEN1, default=DEFAULT_LEN1): vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Optional(CONF_LEN2, default=DEFAULT_LEN2): vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Optional(CONF_MERGE_THRESHOLD, default=DEFAULT_MERGE_THRESHOLD): vol.All(
            vol.Coerce(float), vol.Range(min=0, min_included=False)
        ),
        vol.Optional(CONF_PROTECT_LONG_BLOCKS, default=DEFAULT_PROTECT_LONG_BLOCKS): vol.Boolean(),
        vol.Optional(CONF_VARIANT, default=VARIANT_ISR): vol.In(VARIANTS),
        vol.Optional(CONF_BLOCK_LAMBDA, default=DEFAULT_BLOCK_LAMBDA): vol.All(
            vol.Coerce(float), vol.Range(min=BLOCK_LAMBDA_RANGE[0], max=BLOCK_LAMBDA_RANGE[1])
        ),
        vol.Optional(CONF_JACCARD_MIN, default=DEFAULT_JACCARD_MIN): vol.All(
            vol.Coerce(float), vol.Range(min=0, max=1, min_included=False)
        ),
        vol.Optional(CONF_SEED, default=DEFAULT_SEED): vol.All(vol.Coerce(int), vol.Range(min=0)),
        vol.Optional(CONF_MAX_WORKERS, default=DEFAULT_MAX_WORKERS): vol.All(
            vol.Coerce(int), vol.Range(min=1)
        ),
    }
)


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of a repair run."""

    window_len: int = DEFAULT_WINDOW_LEN
    support_threshold: float = DEFAULT_SUPPORT_THRESHOLD
    variance_floor: float = DEFAULT_VARIANCE_FLOOR
    size_threshold: int = DEFAULT_SIZE_THRESHOLD
    matcher: str = MATCHER_EXACT
    len1: int = DEFAULT_LEN1
    len2: int = DEFAULT_LEN2
    merge_threshold: float = DEFAULT_MERGE_THRESHOLD
    protect_long_blocks: bool = DEFAULT_PROTECT_LONG_BLOCKS
    variant: str = VARIANT_ISR
    block_lambda: float = DEFAULT_BLOCK_LAMBDA
    jaccard_min: float = DEFAULT_JACCARD_MIN
    seed: int = DEFAULT_SEED
    max_workers: int = DEFAULT_MAX_WORKERS

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any] | None = None) -> RunConfig:
        """Validate a flat mapping and fill in defaults."""
        try:
            validated = CONFIG_SCHEMA(dict(data or {}))
        except vol.MultipleInvalid as err:
            error = err.errors[0]
            key = str(error.path[0]) if error.path else None
            code = (
                ERROR_UNKNOWN_KEY
                if error.error_message == "extra keys not allowed"
                else ERROR_INVALID_VALUE
            )
            raise RepairConfigError(key, code, f"{key}: {error.error_message}") from err
        return cls(**validated)

    @property
    def model_config(self) -> ModelConfig:
        """Return the behavior model settings."""
        return ModelConfig(self.window_len, self.support_threshold, self.variance_floor)

    def pipeline_config(self, variant: str | None = None) -> PipelineConfig:
        """Return the scan settings; the greedy variant forces the greedy matcher."""
        variant = variant or self.variant
        matcher = MATCHER_GREEDY if variant == VARIANT_GREEDY_ISR else self.matcher
        return PipelineConfig(self.model_config, self.size_threshold, matcher)

    @property
    def determination_config(self) -> DeterminationConfig:
        """Return the determination thresholds."""
        return DeterminationConfig(
            self.len1, self.len2, self.merge_threshold, self.protect_long_blocks
        )

    def as_dict(self) -> dict[str, Any]:
        """Return the configuration echo."""
        return asdict(self)


def load_config(path: Path | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Build a run config from defaults, an optional JSON file and overrides.

    Overrides whose value is None are ignored.
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as err:
            raise RepairConfigError(None, ERROR_INVALID_FILE, f"{path}: {err}") from err
        if not isinstance(loaded, dict):
            raise RepairConfigError(None, ERROR_INVALID_FILE, f"{path}: expected a JSON object")
        data.update(loaded)
    data.update({key: value for key, value in (overrides or {}).items() if value is not None})
    config = RunConfig.from_mapping(data)
    _LOGGER.debug("Run configuration: %s", config.as_dict())
    return config
