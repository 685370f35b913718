"""
Full-ranking evaluation
=======================

Recommendations for every user are scored against their held-out test
items with Recall, nDCG, MRR, catalog Coverage and mean Popularity at
several cutoffs.
"""

import math

from motiverec.annotate import build_motive_index
from motiverec.augment import build_item_index
from motiverec.config import PipelineConfig
from motiverec.evaluate import metrics_at_k, relevance_sets, render_table
from motiverec.gateway import Gateway, MockBackend
from motiverec.index import VectorIndex
from motiverec.ingest import build_dataset
from motiverec.pipeline import Recommender, ranked_items
from motiverec.toydata import make_toy_dataset
from motiverec.types import ItemRecord

# a single hit at rank 2
items = {k: ItemRecord(k) for k in "abc"}
r = metrics_at_k({"u": ["b", "a", "c"]}, {"u": {"a"}}, items, [10])
print(r["nDCG@10"], 1 / math.log2(3), r["MRR@10"])

events, raw_items, meta = make_toy_dataset(n_users=40, n_items=60, seed=0)
dataset = build_dataset(events, raw_items, user_metadata=meta)
gateway = Gateway(MockBackend(), dimension=256)
item_index = VectorIndex(256)
augmented, _ = build_item_index(dataset.items, gateway, item_index)
motive_index = VectorIndex(256)
annotations, _ = build_motive_index(dataset.users, augmented, gateway, motive_index, window=4)

cfg = PipelineConfig(bundle_window=4)
engine = Recommender(dataset.users, augmented, item_index, motive_index, annotations, gateway, cfg)
records = engine.recommend_all(jobs=4)
relevant, excluded = relevance_sets(dataset.users)
result = metrics_at_k(ranked_items(records), relevant, augmented, [5, 10, 20])
print(f"{len(relevant)} users evaluated, {excluded} without test items")
print(render_table({"motiverec (mock)": result}, [5, 10, 20]))
