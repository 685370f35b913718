"""
Fusing query results and the verify-and-retry loop
==================================================

Each query is run against the item index, the ranked lists are merged by
reciprocal rank fusion, and a verifier scores the candidates. Below the
threshold it proposes a new plan and retrieval runs again, at most
``max_reflections`` times.
"""

from motiverec.augment import build_item_index
from motiverec.gateway import Gateway, MockBackend
from motiverec.index import VectorIndex
from motiverec.retrieve import MotiveSelection, QueryPlan, SelectedMotive
from motiverec.search import ReflectiveSearcher, rrf_fuse
from motiverec.types import ItemRecord, MotiveAnnotation

fused = rrf_fuse([["a", "b", "c"], ["b", "a"], ["c"]], k0=60)
for entry in fused.entries:
    print(entry.item_id, round(entry.score, 6))

catalog = {
    "m1": ItemRecord("m1", {"title": "Glory", "genre": "war battle"}),
    "m2": ItemRecord("m2", {"title": "Platoon", "genre": "war jungle"}),
    "m3": ItemRecord("m3", {"title": "Heat", "genre": "crime heist"}),
    "m4": ItemRecord("m4", {"title": "Fargo", "genre": "crime snow"}),
    "m5": ItemRecord("m5", {"title": "Ran", "genre": "war samurai"}),
}
gateway = Gateway(MockBackend(), dimension=256)
index = VectorIndex(256)
items, _ = build_item_index(catalog, gateway, index)
searcher = ReflectiveSearcher(index, gateway, items)

motive = MotiveAnnotation("u", 1, ("m1",), "Prefers war, samurai and submarines.", (0, 0))
selection = MotiveSelection((SelectedMotive(motive, "exploit"),))
plan = QueryPlan(("crime",))
ranked, _ = searcher.retrieve(plan.queries)
print("first pass:", ranked.item_ids())

outcome = searcher.reflect_and_refine(ranked, None, selection, plan, tau=0.9, t_max=3)
for p, v in zip(outcome.plans, outcome.verdicts):
    print(p.queries, "->", round(v.score, 3), v.feedback)
print("stopped on", outcome.ranked.terminal_reason, "after", outcome.verdict_calls, "verdicts")
print("final:", outcome.ranked.item_ids())
