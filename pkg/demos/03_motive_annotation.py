"""
Turning a watch history into motives
====================================

Training interactions are cut into chronological bundles of ``w`` items.
Each bundle is summarized as one motive sentence and embedded under the
user's namespace and the global one.
"""

from motiverec.annotate import build_bundles, build_motive_index, profiles
from motiverec.augment import build_item_index
from motiverec.gateway import Gateway, MockBackend
from motiverec.index import MOTIVES_GLOBAL, VectorIndex, user_namespace
from motiverec.ingest import build_dataset
from motiverec.toydata import make_toy_dataset

events, items, meta = make_toy_dataset(n_users=12, n_items=40, seed=3)
dataset = build_dataset(events, items, user_metadata=meta)
gateway = Gateway(MockBackend(), dimension=256)
augmented, _ = build_item_index(dataset.items, gateway, VectorIndex(256))

user = dataset.users["u01"]
for bundle in build_bundles(user, window=4):
    print([e.item_id for e in bundle])

motive_index = VectorIndex(256)
annotations, report = build_motive_index(dataset.users, augmented, gateway, motive_index, window=4)
print(report.to_dict())
for a in profiles(annotations)["u01"]:
    print(a.bundle_index, a.time_span, a.motive_text)

print(motive_index.size(user_namespace("u01")), "motives for u01,",
      motive_index.size(MOTIVES_GLOBAL), "in total")
