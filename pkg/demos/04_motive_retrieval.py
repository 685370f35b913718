"""
Choosing motives and writing search queries
===========================================

Three sources feed the query plan: the user's closest motives, further
motives of theirs picked for diversity (MMR), and close motives of other
users. An explicit request is guaranteed to survive into the plan.
"""

from motiverec.annotate import build_motive_index, profiles
from motiverec.augment import build_item_index
from motiverec.config import PipelineConfig
from motiverec.gateway import Gateway, MockBackend
from motiverec.index import VectorIndex
from motiverec.ingest import build_dataset
from motiverec.retrieve import select_motives, synthesize_queries
from motiverec.toydata import make_toy_dataset

events, items, meta = make_toy_dataset(n_users=20, n_items=40, seed=4)
dataset = build_dataset(events, items, user_metadata=meta)
gateway = Gateway(MockBackend(), dimension=256)
augmented, _ = build_item_index(dataset.items, gateway, VectorIndex(256))
motive_index = VectorIndex(256)
annotations, _ = build_motive_index(dataset.users, augmented, gateway, motive_index, window=4)
profs = profiles(annotations)
cfg = PipelineConfig(bundle_window=4, k_exploit=2, k_div=2, k_social=2, mmr_lambda=0.5)

for query in (None, "lighthouse mystery"):
    selection, _ = select_motives("u02", query, profs, motive_index, gateway, cfg)
    for strategy in ("exploit", "diverse", "social"):
        for m in getattr(selection, strategy):
            score = "  n/a " if m.score is None else f"{m.score:+.3f}"
            print(f"{strategy:8s} {m.key:8s} {score}  {m.annotation.motive_text}")
    plan = synthesize_queries(query, selection, gateway, cfg.queries_per_plan)
    print("plan:", plan.queries, "guard applied:", plan.guard_applied)
    print()

# without exploration only the user's closest motives remain
off = cfg.with_ablation(exploration_on=False)
selection, _ = select_motives("u02", None, profs, motive_index, gateway, off)
print([m.key for m in selection.exploit], selection.diverse, selection.social)
