"""Run the component ablations and report drops relative to the full pipeline."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from .annotate import build_motive_index, index_from_annotations
from .evaluate import METRIC_ORDER, format_delta, metrics_at_k, relative_change, relevance_sets
from .index import VectorIndex
from .pipeline import Recommender, ranked_items

log = logging.getLogger(__name__)

FULL = "Full"
VARIANTS = (
    (FULL, {}),
    ("w/o Annotation", {"annotation_on": False}),
    ("w/o Exploration", {"exploration_on": False}),
    ("w/o Reflection", {"reflection_on": False}),
)


@dataclass
class AblationRow:
    name: str
    fingerprint: str
    result: object = None  # EvalResult
    error: str | None = None


@dataclass
class AblationReport:
    rows: list = field(default_factory=list)
    cutoffs: tuple = ()

    def row(self, name: str) -> AblationRow:
        return next(r for r in self.rows if r.name == name)

    def deltas(self, metric: str) -> dict:
        base = self.row(FULL).result
        out = {}
        for r in self.rows:
            if r.result is None or base is None:
                out[r.name] = None
            else:
                out[r.name] = relative_change(r.result.metrics[metric], base.metrics[metric])
        return out

    def render(self, metrics=None) -> str:
        """Aligned table: one column per metric, value followed by its change vs the full run."""
        k = 10 if 10 in self.cutoffs else self.cutoffs[0]
        metrics = metrics or [f"nDCG@{k}", f"Popularity@{k}"]
        cells = {}
        for r in self.rows:
            line = []
            for m in metrics:
                if r.result is None:
                    line.append(f"failed: {r.error}")
                    continue
                v = r.result.metrics[m]
                text = f"{v:.2f}" if m.startswith("Popularity") else f"{v:.4f}"
                if r.name != FULL:
                    text += f" ({format_delta(self.deltas(m)[r.name])})"
                line.append(text)
            cells[r.name] = line
        heads = [f"{m} (Change)" for m in metrics]
        name_w = max(len("Variant"), *(len(n) for n in cells))
        widths = [max(len(h), *(len(c[i]) for c in cells.values())) for i, h in enumerate(heads)]
        out = ["  ".join([f"{'Variant':<{name_w}}"] + [f"{h:>{w}}" for h, w in zip(heads, widths)])]
        out.append("-" * len(out[0]))
        for name, line in cells.items():
            out.append("  ".join([f"{name:<{name_w}}"] + [f"{c:>{w}}" for c, w in zip(line, widths)]))
        return "\n".join(out) + "\n"

    def to_dict(self) -> dict:
        all_metrics = [f"{m}@{k}" for m in METRIC_ORDER for k in self.cutoffs]
        return {
            "cutoffs": list(self.cutoffs),
            "variants": [
                {
                    "name": r.name,
                    "fingerprint": r.fingerprint,
                    "error": r.error,
                    "metrics": r.result.metrics if r.result is not None else None,
                    "change_pct": {m: self.deltas(m)[r.name] for m in all_metrics} if r.result is not None else None,
                }
                for r in self.rows
            ],
        }

    def write(self, text_path, json_path) -> None:
        with open(text_path, "w", encoding="utf-8") as fh:
            fh.write(self.render())
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def run_ablation_grid(dataset, items: dict, item_index: VectorIndex, base_cfg, gateway, *,
                      variants=VARIANTS, annotations=None, jobs: int = 1, cache=None) -> AblationReport:
    """Evaluate each variant of ``base_cfg`` on the test split.

    The item index is shared by every variant. Variants with annotation on
    share one motive index (``annotations`` if given, else built once); the
    annotation-off variant builds its own from item titles. A failing
    variant is recorded and the grid moves on.
    """
    relevance, excluded = relevance_sets(dataset.users)
    motive_cache: dict[bool, tuple] = {}
    if annotations is not None:
        motive_cache[True] = (annotations, index_from_annotations(annotations, item_index.dimension))

    def motives_for(annotation_on: bool):
        if annotation_on not in motive_cache:
            index = VectorIndex(item_index.dimension)
            anns, _ = build_motive_index(dataset.users, items, gateway, index, window=base_cfg.bundle_window,
                                         stride=base_cfg.bundle_stride, annotation_on=annotation_on, jobs=jobs,
                                         cache=cache if annotation_on else None)
            motive_cache[annotation_on] = (anns, index)
        return motive_cache[annotation_on]

    report = AblationReport(cutoffs=tuple(base_cfg.top_k_eval))
    for name, flags in variants:
        cfg = base_cfg.with_ablation(**flags)
        row = AblationRow(name, cfg.fingerprint())
        try:
            anns, motive_index = motives_for(cfg.ablation.annotation_on)
            engine = Recommender(dataset.users, items, item_index, motive_index, anns, gateway, cfg)
            records = engine.recommend_all(jobs=jobs)
            row.result = metrics_at_k(ranked_items(records), relevance, items, cfg.top_k_eval,
                                      fingerprint=row.fingerprint, n_excluded=excluded)
        except Exception as exc:  # a failing variant must not stop the grid
            log.exception("variant %s failed", name)
            row.error = f"{type(exc).__name__}: {exc}"
        report.rows.append(row)
    return report
