"""Tuning-free recommendation from LLM-annotated motives.

Item metadata is enriched and embedded; each user's history is cut into
chronological bundles whose underlying motive is written out and embedded;
at recommendation time the user's own, diverse and other users' motives are
turned into search queries, fused with reciprocal rank fusion and refined by
a bounded verify-and-retry loop.
"""

from .config import AblationFlags, PipelineConfig, load_config, validate_config
from .errors import ConfigError, MotiveRecError
from .index import ITEMS, MOTIVES_GLOBAL, VectorIndex, user_namespace
from .types import InteractionEvent, ItemRecord, MotiveAnnotation, UserRecord

__version__ = "0.1.0"

__all__ = [
    "AblationFlags", "ConfigError", "ITEMS", "InteractionEvent", "ItemRecord", "MOTIVES_GLOBAL",
    "MotiveAnnotation", "MotiveRecError", "PipelineConfig", "UserRecord", "VectorIndex",
    "load_config", "user_namespace", "validate_config",
]
