"""Full-ranking evaluation: Recall, nDCG, MRR, Coverage and Popularity at K.

Accuracy metrics are macro-averaged over users with at least one test
item; a missing or short list is scored on what it has. Coverage counts the
top-K of every recommended user against the whole catalog. Popularity is
the mean train-split interaction count of a user's top-K, averaged over
users with a non-empty list.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DatasetError

log = logging.getLogger(__name__)

ACCURACY = ("Recall", "nDCG", "MRR")
METRIC_ORDER = ("Recall", "nDCG", "MRR", "Coverage", "Popularity")
SHORT = {"Recall": "Recall", "nDCG": "nDCG", "MRR": "MRR", "Coverage": "Cov", "Popularity": "Pop"}


def relevance_sets(users: dict):
    """``({user_id: set of test items}, n_excluded)``; users without test items are excluded."""
    rel, excluded = {}, 0
    for user_id in sorted(users):
        items = set(users[user_id].items("test"))
        if items:
            rel[user_id] = items
        else:
            excluded += 1
    if not rel:
        raise DatasetError("test split is empty")
    return rel, excluded


@dataclass
class EvalResult:
    metrics: dict  # "nDCG@10" -> value
    per_user: dict = field(default_factory=dict)  # user -> {"nDCG@10": value, ...}
    fingerprint: str = ""
    n_users: int = 0
    n_excluded: int = 0

    def __getitem__(self, name: str) -> float:
        return self.metrics[name]

    def to_dict(self) -> dict:
        return {"metrics": self.metrics, "fingerprint": self.fingerprint, "n_users": self.n_users,
                "n_excluded": self.n_excluded}


def _discounts(k: int) -> np.ndarray:
    return 1.0 / np.log2(np.arange(2, k + 2))


def metrics_at_k(recommendations: dict, relevance: dict, items: dict, cutoffs, *, fingerprint: str = "",
                 n_excluded: int = 0) -> EvalResult:
    """Compute every metric at every cutoff.

    ``recommendations`` maps user to ranked item ids, ``relevance`` maps
    user to the set of test items, ``items`` maps item id to a record with a
    ``popularity`` attribute (the catalog).
    """
    cutoffs = list(cutoffs)
    kmax = max(cutoffs)
    disc = _discounts(kmax)
    popularity = {i: rec.popularity for i, rec in items.items()}
    per_user: dict[str, dict] = {}
    sums = {f"{m}@{k}": 0.0 for m in ACCURACY for k in cutoffs}

    for user_id in sorted(relevance):
        rel = relevance[user_id]
        ranked = list(recommendations.get(user_id, []))[:kmax]
        hits = np.array([i in rel for i in ranked], dtype=bool)
        row = {}
        for k in cutoffs:
            h = hits[:k]
            n_hits = int(h.sum())
            dcg = float(disc[: len(h)][h].sum())
            idcg = float(disc[: min(len(rel), k)].sum())
            first = int(np.argmax(h)) + 1 if n_hits else 0
            row[f"Recall@{k}"] = n_hits / len(rel)
            row[f"nDCG@{k}"] = dcg / idcg
            row[f"MRR@{k}"] = 1.0 / first if first else 0.0
        per_user[user_id] = row
        for name, value in row.items():
            sums[name] += value

    n = len(relevance)
    metrics = {}
    for k in cutoffs:
        for m in ACCURACY:
            metrics[f"{m}@{k}"] = sums[f"{m}@{k}"] / n if n else 0.0
        union = set()
        pops = []
        for user_id in sorted(recommendations):
            top = list(recommendations[user_id])[:k]
            union.update(top)
            if top:
                pops.append(sum(popularity.get(i, 0) for i in top) / len(top))
        metrics[f"Coverage@{k}"] = len(union & set(items)) / len(items) if items else 0.0
        metrics[f"Popularity@{k}"] = float(np.mean(pops)) if pops else 0.0
    ordered = {f"{m}@{k}": metrics[f"{m}@{k}"] for m in METRIC_ORDER for k in cutoffs}
    return EvalResult(ordered, per_user, fingerprint, n, n_excluded)


def render_table(rows: dict, cutoffs) -> str:
    """Aligned text table, one row per named result, columns as Metric@K."""
    cols = [f"{m}@{k}" for m in METRIC_ORDER for k in cutoffs]
    heads = [f"{SHORT[c.split('@')[0]]}@{c.split('@')[1]}" for c in cols]
    name_w = max([len("Model")] + [len(n) for n in rows])
    widths = [max(len(h), 8) for h in heads]
    lines = ["  ".join([f"{'Model':<{name_w}}"] + [f"{h:>{w}}" for h, w in zip(heads, widths)])]
    lines.append("-" * len(lines[0]))
    for name, result in rows.items():
        cells = []
        for c, w in zip(cols, widths):
            v = result.metrics[c]
            cells.append(f"{v:>{w}.2f}" if c.startswith("Popularity") else f"{v:>{w}.4f}")
        lines.append("  ".join([f"{name:<{name_w}}"] + cells))
    return "\n".join(lines) + "\n"


def relative_change(value: float, base: float):
    """Percent change from ``base``; None when the base is zero."""
    if base == 0:
        return None
    return (value - base) / base * 100.0


def write_report(result: EvalResult, text_path, json_path, name: str = "model") -> None:
    cutoffs = sorted({int(k.split("@")[1]) for k in result.metrics})
    with open(text_path, "w", encoding="utf-8") as fh:
        fh.write(render_table({name: result}, cutoffs))
        fh.write(f"\nusers evaluated: {result.n_users}  excluded (no test items): {result.n_excluded}\n")
        fh.write(f"config fingerprint: {result.fingerprint}\n")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def format_delta(delta) -> str:
    if delta is None or not math.isfinite(delta):
        return "n/a"
    return f"{delta:+.1f}%"
