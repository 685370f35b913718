"""Turn train-split histories into chronological bundles annotated with motives."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .cache import DiskCache, content_key
from .errors import GatewayError
from .index import VectorIndex, user_namespace
from .types import MotiveAnnotation, UserRecord, serialize_metadata

log = logging.getLogger(__name__)

EMBED_BATCH = 64


@dataclass
class AnnotateReport:
    users: int = 0
    users_skipped: int = 0
    bundles: int = 0
    bundles_skipped: int = 0
    cache_hits: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def build_bundles(user: UserRecord, window: int, stride: int | None = None) -> list[tuple]:
    """Sliding windows over the user's train events.

    Windows start every ``stride`` events and run until a start passes the
    end of the history, so the last window may be short and no event is left
    unbundled. 6 events, window 4, stride 2 give sizes [4, 4, 2].
    """
    stride = window if stride is None else stride
    if window < 1 or not 1 <= stride <= window:
        raise ValueError("need window >= 1 and 1 <= stride <= window")
    events = user.events("train")
    return [tuple(events[start:start + window]) for start in range(0, len(events), stride)]


def annotate_bundle(bundle, user_metadata: dict, items: dict, gateway, *, annotation_on: bool = True,
                    cache: DiskCache | None = None) -> str | None:
    """Motive text for one bundle, or ``None`` when generation fails.

    With ``annotation_on`` false no model is called: the motive is the plain
    list of item titles.
    """
    if not bundle:
        raise ValueError("bundle must be non-empty")
    records = [items[e.item_id] for e in bundle]
    if not annotation_on:
        return "; ".join(r.title for r in records)
    bindings = {"user": dict(user_metadata), "bundle": [r.search_text for r in records]}
    key = content_key(gateway.templates["annotate"].template_text, json.dumps(bindings, sort_keys=True))
    hit = cache.get(key) if cache is not None else None
    if hit is not None:
        return hit["motive_text"]
    try:
        resp = gateway.generate("annotate", bindings, max_tokens=128)
    except GatewayError as exc:
        log.warning("bundle of %s skipped: %s", bundle[0].user_id, exc)
        return None
    if not resp.ok:
        log.warning("bundle of %s skipped: %s", bundle[0].user_id, resp.parse_error)
        return None
    text = resp.parsed
    if any(text == serialize_metadata(r.raw_metadata) or text == r.search_text for r in records):
        log.warning("bundle of %s skipped: motive copies an item verbatim", bundle[0].user_id)
        return None
    if cache is not None:
        cache.put(key, {"motive_text": text})
    return text


def build_motive_index(users: dict, items: dict, gateway, index: VectorIndex, *, window: int = 5,
                       stride: int | None = None, annotation_on: bool = True, jobs: int = 1,
                       cache: DiskCache | None = None):
    """Annotate every user's bundles and index the motive vectors.

    Returns ``(annotations, report)`` with annotations ordered by user id
    then bundle index. Users without train events, and bundles whose
    generation failed, are skipped and counted.
    """
    report = AnnotateReport(users=len(users))
    jobs_list = []
    for user_id in sorted(users):
        user = users[user_id]
        bundles = build_bundles(user, window, stride)
        if not bundles:
            report.users_skipped += 1
            log.info("user %s has no train history; skipped", user_id)
            continue
        for j, bundle in enumerate(bundles, 1):
            jobs_list.append((user, j, bundle))
    report.bundles = len(jobs_list)

    def work(job):
        user, j, bundle = job
        return annotate_bundle(bundle, user.metadata, items, gateway, annotation_on=annotation_on, cache=cache)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        texts = list(pool.map(work, jobs_list))

    annotations = []
    for (user, j, bundle), text in zip(jobs_list, texts):
        if text is None:
            report.bundles_skipped += 1
            continue
        annotations.append(MotiveAnnotation(
            user_id=user.user_id,
            bundle_index=j,
            bundle_items=tuple(e.item_id for e in bundle),
            motive_text=text,
            time_span=(bundle[0].timestamp, bundle[-1].timestamp),
        ))

    out = []
    for start in range(0, len(annotations), EMBED_BATCH):
        batch = annotations[start:start + EMBED_BATCH]
        vectors = gateway.embed([a.motive_text for a in batch])
        for ann, vec in zip(batch, vectors):
            index.add(user_namespace(ann.user_id), ann.key, vec)
            out.append(replace(ann, motive_vector=tuple(float(x) for x in vec)))
    log.info("motive index: %d motives for %d users (%d bundles skipped)",
             len(out), len({a.user_id for a in out}), report.bundles_skipped)
    return out, report


def profiles(annotations) -> dict[str, list[MotiveAnnotation]]:
    """Group annotations by user, each list ordered by bundle index."""
    out: dict[str, list] = {}
    for ann in sorted(annotations, key=lambda a: (a.user_id, a.bundle_index)):
        out.setdefault(ann.user_id, []).append(ann)
    return out


def index_from_annotations(annotations, dimension: int) -> VectorIndex:
    index = VectorIndex(dimension)
    for ann in annotations:
        index.add(user_namespace(ann.user_id), ann.key, ann.motive_vector)
    return index


def save_annotations(annotations, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for ann in annotations:
            fh.write(json.dumps(ann.to_dict(), sort_keys=True) + "\n")


def load_annotations(path) -> list[MotiveAnnotation]:
    with open(path, encoding="utf-8") as fh:
        return [MotiveAnnotation.from_dict(json.loads(line)) for line in fh if line.strip()]
