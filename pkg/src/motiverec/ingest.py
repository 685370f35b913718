"""Load interaction and item files, filter, split chronologically, count popularity.

File formats
------------
Interactions are delimited text, one event per line. ``InteractionSchema``
names the delimiter, whether a header line is present, and which columns hold
the user, item, timestamp and (optional) rating. Timestamps are integer
seconds since the epoch.

Items are JSON lines, one object per item. ``item_id`` is mandatory; every
other key is kept verbatim (as text) in the item's raw metadata.

The MovieLens-1M ``ratings.dat`` / ``movies.dat`` pair is supported through
``ML1M_SCHEMA`` and :func:`load_ml1m_items`.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

from .errors import DatasetError, EmptyDatasetError
from .types import InteractionEvent, ItemRecord, UserRecord, sort_history

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class InteractionSchema:
    delimiter: str = "\t"
    header: bool = True
    user: str = "user_id"
    item: str = "item_id"
    timestamp: str = "timestamp"
    rating: Optional[str] = "rating"
    # column names when the file has no header line
    names: tuple = ()
    encoding: str = "utf-8"


ML1M_SCHEMA = InteractionSchema(
    delimiter="::",
    header=False,
    names=("user_id", "item_id", "rating", "timestamp"),
    encoding="latin-1",
)


@dataclass
class LoadReport:
    rows: int = 0
    rejected: list = field(default_factory=list)  # (line_number, reason)

    @property
    def n_rejected(self) -> int:
        return len(self.rejected)


def load_interactions(path, schema: InteractionSchema = InteractionSchema()):
    """Parse an interaction file into events.

    Returns ``(events, report)``. Malformed rows never abort the load; each
    one is recorded in ``report.rejected`` with its line number.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    report = LoadReport()
    events = []
    with open(path, encoding=schema.encoding) as fh:
        lines = iter(fh)
        if schema.header:
            first = next(lines, None)
            if first is None:
                return events, report
            names = [c.strip() for c in first.rstrip("\r\n").split(schema.delimiter)]
            line_no = 1
        else:
            names = list(schema.names)
            line_no = 0
        wanted = [schema.user, schema.item, schema.timestamp]
        missing = [c for c in wanted if c not in names]
        rating_col = names.index(schema.rating) if schema.rating in names else None
        if missing:
            raise DatasetError(f"{path}: missing mandatory column(s) {missing}")
        u_col, i_col, t_col = (names.index(c) for c in wanted)

        for line in lines:
            line_no += 1
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            report.rows += 1
            parts = line.split(schema.delimiter)
            if len(parts) < len(names):
                report.rejected.append((line_no, "too few columns"))
                continue
            user, item = parts[u_col].strip(), parts[i_col].strip()
            if not user or not item:
                report.rejected.append((line_no, "empty user or item field"))
                continue
            try:
                ts_value = float(parts[t_col])
            except ValueError:
                report.rejected.append((line_no, f"unparsable timestamp {parts[t_col]!r}"))
                continue
            if not math.isfinite(ts_value) or ts_value < 0:
                report.rejected.append((line_no, f"invalid timestamp {parts[t_col]!r}"))
                continue
            rating = None
            if rating_col is not None and parts[rating_col].strip():
                try:
                    rating = float(parts[rating_col])
                except ValueError:
                    report.rejected.append((line_no, f"unparsable rating {parts[rating_col]!r}"))
                    continue
            events.append(InteractionEvent(user, item, int(ts_value), rating))
    if report.rejected:
        log.warning("%s: rejected %d of %d rows", path, report.n_rejected, report.rows)
    return events, report


def load_items(path) -> dict[str, ItemRecord]:
    """Read a JSON-lines item file into ``{item_id: ItemRecord}``."""
    items = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            record = json.loads(line)
            if "item_id" not in record:
                raise DatasetError(f"{path}:{line_no}: item record without item_id")
            item_id = str(record.pop("item_id"))
            metadata = {str(k): str(v) for k, v in record.items() if v is not None}
            items[item_id] = ItemRecord(item_id, metadata)
    return items


def load_ml1m_items(path) -> dict[str, ItemRecord]:
    """Read MovieLens-1M ``movies.dat`` (``MovieID::Title::Genres``)."""
    items = {}
    with open(path, encoding="latin-1") as fh:
        for line in fh:
            parts = line.rstrip("\r\n").split("::")
            if len(parts) != 3:
                continue
            item_id, title, genres = parts
            items[item_id] = ItemRecord(item_id, {"title": title, "genres": genres.replace("|", ", ")})
    return items


def apply_core_filter(events: list, min_count: int = 5, min_rating: float | None = None) -> list:
    """Rating filter, then iterative k-core pruning to a fixed point.

    Events with no rating survive the rating filter. Raises EmptyDatasetError
    if nothing is left.
    """
    if not events:
        raise DatasetError("apply_core_filter needs a non-empty event list")
    kept = list(events)
    if min_rating is not None:
        kept = [e for e in kept if e.rating is None or e.rating >= min_rating]
    while kept:
        users = Counter(e.user_id for e in kept)
        items = Counter(e.item_id for e in kept)
        survivors = [e for e in kept if users[e.user_id] >= min_count and items[e.item_id] >= min_count]
        if len(survivors) == len(kept):
            break
        kept = survivors
    if not kept:
        raise EmptyDatasetError(
            f"no interactions left after filtering (min_count={min_count}, min_rating={min_rating})"
        )
    return kept


@dataclass(frozen=True)
class SplitBoundaries:
    """Inclusive upper timestamps of the train and valid splits."""
    train_end: int
    valid_end: int

    def tag(self, timestamp: int) -> str:
        if timestamp <= self.train_end:
            return "train"
        if timestamp <= self.valid_end:
            return "valid"
        return "test"


def _cut(timestamps: list, target: int, floor: int) -> int:
    # Move the cut forward so a tie group is never split; ties go to the earlier side.
    cut = max(target, floor)
    while 0 < cut < len(timestamps) and timestamps[cut] == timestamps[cut - 1]:
        cut += 1
    return cut


def chronological_split(events: list, ratios=(0.8, 0.1, 0.1)):
    """Global timestamp split into train / valid / test.

    Events are ordered by (timestamp, user_id, item_id). Cut positions start
    at round(r * N) and slide forward past any tie group they would cut
    through. Returns ``(tagged_events, boundaries)`` with the tagged events
    in global order.
    """
    if len(events) < 3:
        raise DatasetError("need at least 3 events for a three-way split")
    if len(ratios) != 3 or any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0):
        raise ValueError(f"ratios must be three non-negative values summing to 1, got {ratios}")
    ordered = sorted(events, key=InteractionEvent.global_order_key)
    ts = [e.timestamp for e in ordered]
    n = len(ordered)
    c1 = _cut(ts, math.floor(ratios[0] * n + 0.5), 1)
    c2 = _cut(ts, math.floor((ratios[0] + ratios[1]) * n + 0.5), c1)
    train_end = ts[c1 - 1]
    valid_end = ts[c2 - 1] if c2 > c1 else train_end
    bounds = SplitBoundaries(train_end, valid_end)
    tagged = [e.with_tag(bounds.tag(e.timestamp)) for e in ordered]
    return tagged, bounds


def compute_popularity(train_events: Iterable, items: dict) -> dict[str, ItemRecord]:
    """Set each item's popularity to its train-split interaction count."""
    counts = Counter(e.item_id for e in train_events if e.split_tag in ("train", "unassigned"))
    return {item_id: replace(rec, popularity=counts.get(item_id, 0)) for item_id, rec in items.items()}


@dataclass
class DatasetBundle:
    users: dict  # user_id -> UserRecord
    items: dict  # item_id -> ItemRecord
    boundaries: SplitBoundaries
    stats: dict = field(default_factory=dict)

    def events(self, tag: str | None = None) -> list:
        out = []
        for user in self.users.values():
            out.extend(user.events(tag))
        return out

    def train_items(self, user_id: str) -> set:
        user = self.users.get(user_id)
        return set(user.items("train")) if user else set()

    def summary(self) -> dict:
        n_events = sum(len(u.history) for u in self.users.values())
        n_users, n_items = len(self.users), len(self.items)
        by_tag = Counter(e.split_tag for u in self.users.values() for e in u.history)
        return {
            "users": n_users,
            "items": n_items,
            "interactions": n_events,
            "density": n_events / (n_users * n_items) if n_users and n_items else 0.0,
            "train": by_tag["train"],
            "valid": by_tag["valid"],
            "test": by_tag["test"],
        }

    # persistence: directory with events.tsv, items.jsonl, meta.json
    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / "events.tsv", "w", encoding="utf-8") as fh:
            fh.write("user_id\titem_id\ttimestamp\trating\tsplit_tag\n")
            for user_id in sorted(self.users):
                for e in self.users[user_id].history:
                    rating = "" if e.rating is None else repr(e.rating)
                    fh.write(f"{e.user_id}\t{e.item_id}\t{e.timestamp}\t{rating}\t{e.split_tag}\n")
        with open(directory / "items.jsonl", "w", encoding="utf-8") as fh:
            for item_id in sorted(self.items):
                fh.write(json.dumps(self.items[item_id].to_dict(), sort_keys=True) + "\n")
        meta = {
            "boundaries": {"train_end": self.boundaries.train_end, "valid_end": self.boundaries.valid_end},
            "user_metadata": {u: self.users[u].metadata for u in sorted(self.users) if self.users[u].metadata},
            "stats": self.stats,
        }
        (directory / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory) -> "DatasetBundle":
        directory = Path(directory)
        meta = json.loads((directory / "meta.json").read_text())
        by_user: dict[str, list] = {}
        with open(directory / "events.tsv", encoding="utf-8") as fh:
            next(fh)
            for line in fh:
                user_id, item_id, ts, rating, tag = line.rstrip("\n").split("\t")
                by_user.setdefault(user_id, []).append(
                    InteractionEvent(user_id, item_id, int(ts), float(rating) if rating else None, tag)
                )
        user_meta = meta.get("user_metadata", {})
        users = {
            u: UserRecord(u, user_meta.get(u, {}), tuple(sort_history(evs))) for u, evs in by_user.items()
        }
        items = {}
        with open(directory / "items.jsonl", encoding="utf-8") as fh:
            for line in fh:
                rec = ItemRecord.from_dict(json.loads(line))
                items[rec.item_id] = rec
        b = meta["boundaries"]
        return cls(users, items, SplitBoundaries(b["train_end"], b["valid_end"]), meta.get("stats", {}))


def build_dataset(events: list, items: dict, *, min_count: int = 5, min_rating: float | None = 3.0,
                  ratios=(0.8, 0.1, 0.1), user_metadata: dict | None = None) -> DatasetBundle:
    """Filter, split and assemble a :class:`DatasetBundle`.

    Events whose item has no metadata record are dropped before filtering
    (counted in ``stats['unknown_item_events']``); surviving items without
    any interaction are removed from the catalog.
    """
    known = [e for e in events if e.item_id in items]
    stats = {"input_events": len(events), "unknown_item_events": len(events) - len(known)}
    filtered = apply_core_filter(known, min_count=min_count, min_rating=min_rating)
    stats["filtered_out"] = len(known) - len(filtered)
    tagged, bounds = chronological_split(filtered, ratios)
    kept_items = {e.item_id for e in tagged}
    catalog = compute_popularity(
        (e for e in tagged if e.split_tag == "train"),
        {i: rec for i, rec in items.items() if i in kept_items},
    )
    by_user: dict[str, list] = {}
    for e in tagged:
        by_user.setdefault(e.user_id, []).append(e)
    user_metadata = user_metadata or {}
    users = {u: UserRecord(u, dict(user_metadata.get(u, {})), tuple(sort_history(evs)))
             for u, evs in sorted(by_user.items())}
    bundle = DatasetBundle(users, dict(sorted(catalog.items())), bounds, stats)
    bundle.stats.update(bundle.summary())
    return bundle
