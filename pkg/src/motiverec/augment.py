"""Offline item enrichment: generated description, augmented text, embedding."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from .cache import DiskCache, content_key
from .errors import GatewayError
from .index import ITEMS, VectorIndex
from .types import AUGMENT_SEPARATOR, ItemRecord, serialize_metadata

log = logging.getLogger(__name__)

EMBED_BATCH = 64


@dataclass
class AugmentReport:
    total: int = 0
    augmented: int = 0
    degraded: int = 0
    cache_hits: int = 0

    def to_dict(self) -> dict:
        return {"total": self.total, "augmented": self.augmented,
                "degraded": self.degraded, "cache_hits": self.cache_hits}


def _degraded(item: ItemRecord) -> ItemRecord:
    return replace(item, description=None, augmented_text=serialize_metadata(item.raw_metadata),
                   augmentation_failed=True)


def augment_item(item: ItemRecord, gateway, cache: DiskCache | None = None) -> ItemRecord:
    """Attach a generated description and the augmented text (metadata, blank line, description).

    A generation failure yields a degraded record: no description,
    ``augmentation_failed`` set, and augmented text equal to the serialized
    metadata alone.
    """
    if not item.raw_metadata:
        raise ValueError(f"item {item.item_id} has empty metadata")
    meta_text = serialize_metadata(item.raw_metadata)
    key = content_key(meta_text, gateway.templates["item"].template_text)
    description = None
    hit = cache.get(key) if cache is not None else None
    if hit is not None:
        description = hit["description"]
    else:
        try:
            resp = gateway.generate("item", {"metadata": item.raw_metadata}, max_tokens=256)
        except GatewayError as exc:
            log.warning("item %s: generation failed (%s); using metadata only", item.item_id, exc)
            return _degraded(item)
        if not resp.ok:
            log.warning("item %s: unusable description (%s); using metadata only", item.item_id, resp.parse_error)
            return _degraded(item)
        description = resp.parsed
        if cache is not None:
            cache.put(key, {"item_id": item.item_id, "description": description})
    return replace(item, description=description, augmented_text=meta_text + AUGMENT_SEPARATOR + description,
                   augmentation_failed=False)


def build_item_index(items: dict, gateway, index: VectorIndex, *, jobs: int = 1,
                     cache: DiskCache | None = None):
    """Augment and embed every item into the ``items`` namespace.

    Non-degraded items are embedded from their description, degraded ones
    from their augmented text, so every catalog item ends up indexed.
    Returns ``(augmented_items, report)``.
    """
    if not items:
        raise ValueError("build_item_index needs at least one item")
    ids = sorted(items)
    report = AugmentReport(total=len(ids))

    def work(item_id):
        rec = items[item_id]
        was_cached = cache is not None and cache.get(
            content_key(serialize_metadata(rec.raw_metadata), gateway.templates["item"].template_text)) is not None
        return augment_item(rec, gateway, cache), was_cached

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(work, ids))

    augmented = {}
    for item_id, (rec, was_cached) in zip(ids, results):
        augmented[item_id] = rec
        report.degraded += rec.augmentation_failed
        report.augmented += not rec.augmentation_failed
        report.cache_hits += was_cached
    if report.augmented == 0:
        raise GatewayError("every item failed augmentation")

    texts = [augmented[i].description if not augmented[i].augmentation_failed else augmented[i].augmented_text
             for i in ids]
    out = {}
    for start in range(0, len(ids), EMBED_BATCH):
        batch = ids[start:start + EMBED_BATCH]
        vectors = gateway.embed(texts[start:start + EMBED_BATCH])
        for item_id, vec in zip(batch, vectors):
            index.add(ITEMS, item_id, vec)
            out[item_id] = replace(augmented[item_id], embedding=tuple(float(x) for x in vec))
    log.info("item index: %d augmented, %d degraded, %d cached", report.augmented, report.degraded,
             report.cache_hits)
    return out, report
