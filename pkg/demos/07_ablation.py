"""
Switching components off
========================

The grid runs the full system and three variants, each with one part
disabled, and reports nDCG@10 and Popularity@10 with the relative change
from the full system.
"""

from motiverec.ablation import run_ablation_grid
from motiverec.augment import build_item_index
from motiverec.config import PipelineConfig
from motiverec.gateway import Gateway, MockBackend
from motiverec.index import VectorIndex
from motiverec.ingest import build_dataset
from motiverec.toydata import make_toy_dataset

events, raw_items, meta = make_toy_dataset(seed=0)
dataset = build_dataset(events, raw_items, user_metadata=meta)
gateway = Gateway(MockBackend(), dimension=256)
item_index = VectorIndex(256)
items, _ = build_item_index(dataset.items, gateway, item_index)

report = run_ablation_grid(dataset, items, item_index, PipelineConfig(bundle_window=4), gateway, jobs=4)
print(report.render())
print(report.deltas("nDCG@10"))
