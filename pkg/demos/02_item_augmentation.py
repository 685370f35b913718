"""
Enriching items with a generated description
============================================

Each item gets a short description from the generator, and the
description plus metadata is embedded into the ``items`` namespace.
"""

from motiverec.augment import build_item_index
from motiverec.gateway import Gateway, MockBackend
from motiverec.index import ITEMS, VectorIndex
from motiverec.types import ItemRecord

catalog = {
    "m1": ItemRecord("m1", {"title": "Alien", "genre": "Horror|Sci-Fi", "year": "1979"}),
    "m2": ItemRecord("m2", {"title": "Aliens", "genre": "Action|Sci-Fi", "year": "1986"}),
    "m3": ItemRecord("m3", {"title": "Annie Hall", "genre": "Comedy|Romance", "year": "1977"}),
}

gateway = Gateway(MockBackend(dimension=256), dimension=256)
index = VectorIndex(256)
augmented, report = build_item_index(catalog, gateway, index, jobs=2)

for item_id, item in augmented.items():
    print(item_id, "|", item.description, "| degraded:", item.augmentation_failed)
print(report.to_dict())

# an item with no metadata at all is rejected up front
try:
    build_item_index({"m4": ItemRecord("m4", {})}, gateway, VectorIndex(256))
except ValueError as exc:
    print("rejected:", exc)

# the two Alien films share most of their tokens
q = gateway.embed(["sci-fi horror in space"])[0]
print(index.top_k(ITEMS, q, 3))
