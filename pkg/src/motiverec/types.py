"""Core records shared across the pipeline.

All records are frozen dataclasses. Vectors are stored as tuples of floats so
that records compare field-wise and serialize to plain JSON.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional

import numpy as np

SPLIT_TAGS = ("train", "valid", "test", "unassigned")


def unit_vector(values) -> tuple[float, ...]:
    """L2-normalize ``values`` and return them as a tuple."""
    arr = np.asarray(values, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if not math.isfinite(norm) or norm == 0.0:
        raise ValueError("cannot normalize a zero or non-finite vector")
    return tuple(float(x) for x in arr / norm)


def serialize_metadata(metadata: Mapping[str, str]) -> str:
    """Render a metadata map as ``key: value`` lines in sorted key order."""
    return "\n".join(f"{key}: {metadata[key]}" for key in sorted(metadata))


AUGMENT_SEPARATOR = "\n\n"


@dataclass(frozen=True)
class ItemRecord:
    item_id: str
    raw_metadata: dict = field(default_factory=dict)
    description: Optional[str] = None
    augmented_text: Optional[str] = None
    embedding: Optional[tuple] = None
    popularity: int = 0
    augmentation_failed: bool = False

    @property
    def title(self) -> str:
        return self.raw_metadata.get("title", self.item_id)

    @property
    def search_text(self) -> str:
        """Augmented text when available, serialized metadata otherwise."""
        if self.augmented_text is not None:
            return self.augmented_text
        return serialize_metadata(self.raw_metadata)

    def to_dict(self) -> dict[str, Any]:
        return {
            "item_id": self.item_id,
            "raw_metadata": dict(self.raw_metadata),
            "description": self.description,
            "augmented_text": self.augmented_text,
            "embedding": list(self.embedding) if self.embedding is not None else None,
            "popularity": self.popularity,
            "augmentation_failed": self.augmentation_failed,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ItemRecord":
        emb = data.get("embedding")
        return cls(
            item_id=str(data["item_id"]),
            raw_metadata={str(k): str(v) for k, v in data.get("raw_metadata", {}).items()},
            description=data.get("description"),
            augmented_text=data.get("augmented_text"),
            embedding=tuple(float(x) for x in emb) if emb is not None else None,
            popularity=int(data.get("popularity", 0)),
            augmentation_failed=bool(data.get("augmentation_failed", False)),
        )


@dataclass(frozen=True, slots=True)
class InteractionEvent:
    user_id: str
    item_id: str
    timestamp: int
    rating: Optional[float] = None
    split_tag: str = "unassigned"

    def __post_init__(self):
        if not isinstance(self.timestamp, int) or self.timestamp < 0:
            raise ValueError(f"timestamp must be a non-negative integer, got {self.timestamp!r}")
        if self.split_tag not in SPLIT_TAGS:
            raise ValueError(f"unknown split tag {self.split_tag!r}")

    def user_order_key(self):
        return (self.timestamp, self.item_id)

    def global_order_key(self):
        return (self.timestamp, self.user_id, self.item_id)

    def with_tag(self, tag: str) -> "InteractionEvent":
        return replace(self, split_tag=tag)

    def to_dict(self) -> dict[str, Any]:
        return {
            "user_id": self.user_id,
            "item_id": self.item_id,
            "timestamp": self.timestamp,
            "rating": self.rating,
            "split_tag": self.split_tag,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "InteractionEvent":
        rating = data.get("rating")
        return cls(
            user_id=str(data["user_id"]),
            item_id=str(data["item_id"]),
            timestamp=int(data["timestamp"]),
            rating=float(rating) if rating is not None else None,
            split_tag=data.get("split_tag", "unassigned"),
        )


def sort_history(events) -> list[InteractionEvent]:
    """Order one user's events by (timestamp, item_id)."""
    return sorted(events, key=InteractionEvent.user_order_key)


@dataclass(frozen=True)
class UserRecord:
    user_id: str
    metadata: dict = field(default_factory=dict)
    history: tuple = ()

    def __post_init__(self):
        keys = [e.user_order_key() for e in self.history]
        if keys != sorted(keys):
            raise ValueError(f"history of user {self.user_id} is not ordered by (timestamp, item_id)")

    def events(self, tag: str | None = None) -> list[InteractionEvent]:
        if tag is None:
            return list(self.history)
        return [e for e in self.history if e.split_tag == tag]

    def items(self, tag: str | None = None) -> list[str]:
        return [e.item_id for e in self.events(tag)]

    def to_dict(self) -> dict[str, Any]:
        return {
            "user_id": self.user_id,
            "metadata": dict(self.metadata),
            "history": [e.to_dict() for e in self.history],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "UserRecord":
        return cls(
            user_id=str(data["user_id"]),
            metadata={str(k): str(v) for k, v in data.get("metadata", {}).items()},
            history=tuple(InteractionEvent.from_dict(e) for e in data.get("history", [])),
        )


def motive_key(user_id: str, bundle_index: int) -> str:
    return f"{user_id}#{bundle_index}"


@dataclass(frozen=True)
class MotiveAnnotation:
    user_id: str
    bundle_index: int
    bundle_items: tuple
    motive_text: str
    time_span: tuple
    motive_vector: Optional[tuple] = None

    def __post_init__(self):
        if not self.bundle_items:
            raise ValueError("bundle_items must be non-empty")
        if not self.motive_text or not self.motive_text.strip():
            raise ValueError("motive_text must be non-empty")
        if self.time_span[0] > self.time_span[1]:
            raise ValueError("time_span must satisfy first_ts <= last_ts")

    @property
    def key(self) -> str:
        return motive_key(self.user_id, self.bundle_index)

    def to_dict(self) -> dict[str, Any]:
        return {
            "user_id": self.user_id,
            "bundle_index": self.bundle_index,
            "bundle_items": list(self.bundle_items),
            "motive_text": self.motive_text,
            "time_span": list(self.time_span),
            "motive_vector": list(self.motive_vector) if self.motive_vector is not None else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MotiveAnnotation":
        vec = data.get("motive_vector")
        return cls(
            user_id=str(data["user_id"]),
            bundle_index=int(data["bundle_index"]),
            bundle_items=tuple(str(i) for i in data["bundle_items"]),
            motive_text=data["motive_text"],
            time_span=tuple(int(t) for t in data["time_span"]),
            motive_vector=tuple(float(x) for x in vec) if vec is not None else None,
        )
