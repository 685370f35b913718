import numpy as np
import pytest

from conftest import DIM, mock_gateway

from motiverec.augment import augment_item, build_item_index
from motiverec.cache import DiskCache
from motiverec.errors import GatewayError, TransportError
from motiverec.gateway import Gateway, MockBackend
from motiverec.index import ITEMS, VectorIndex
from motiverec.types import AUGMENT_SEPARATOR, ItemRecord, serialize_metadata

CATALOG = {
    "i1": ItemRecord("i1", {"title": "Alien", "genre": "Sci-Fi Horror"}),
    "i2": ItemRecord("i2", {"title": "Heat", "genre": "Crime Thriller"}),
    "i3": ItemRecord("i3", {"title": "Amelie", "genre": "Romance Comedy"}),
}


class FailingFor(MockBackend):
    """Mock backend whose item generation fails for titles in ``bad``."""

    def __init__(self, bad=(), **kw):
        super().__init__(**kw)
        self.bad = set(bad)
        self.generations = 0

    def complete(self, request):
        self.generations += 1
        if request.template == "item" and request.bindings["metadata"].get("title") in self.bad:
            raise TransportError("forced")
        return super().complete(request)


def gateway_for(backend):
    return Gateway(backend, dimension=DIM, sleep=lambda s: None)


def test_augment_alien(gateway):
    rec = augment_item(CATALOG["i1"], gateway)
    assert "Sci-Fi" in rec.description and "Horror" in rec.description
    meta = serialize_metadata(CATALOG["i1"].raw_metadata)
    assert rec.augmented_text == meta + AUGMENT_SEPARATOR + rec.description
    assert rec.augmented_text.startswith(meta)
    assert not rec.augmentation_failed


def test_empty_metadata_rejected(gateway):
    with pytest.raises(ValueError):
        augment_item(ItemRecord("x", {}), gateway)


def test_degraded_mode_is_serialized_metadata():
    rec = augment_item(CATALOG["i1"], gateway_for(FailingFor({"Alien"})))
    assert rec.augmentation_failed and rec.description is None
    assert rec.augmented_text == "genre: Sci-Fi Horror\ntitle: Alien"


def test_three_items_indexed(gateway):
    index = VectorIndex(DIM)
    items, report = build_item_index(CATALOG, gateway, index)
    assert index.size(ITEMS) == 3
    assert (report.augmented, report.degraded) == (3, 0)
    for item_id, rec in items.items():
        vec = index.vector(ITEMS, item_id)
        assert abs(np.linalg.norm(vec) - 1.0) < 1e-9
        assert np.allclose(vec, gateway.embed([rec.description])[0])
        assert tuple(vec) == rec.embedding


def test_one_of_three_degraded_still_indexed():
    gw = gateway_for(FailingFor({"Heat"}))
    index = VectorIndex(DIM)
    items, report = build_item_index(CATALOG, gw, index)
    assert (report.augmented, report.degraded) == (2, 1)
    assert index.size(ITEMS) == 3
    assert np.allclose(index.vector(ITEMS, "i2"), gw.embed([items["i2"].augmented_text])[0])


def test_all_failed_is_fatal():
    with pytest.raises(GatewayError):
        build_item_index(CATALOG, gateway_for(FailingFor({"Alien", "Heat", "Amelie"})), VectorIndex(DIM))


def test_rebuild_is_byte_identical(tmp_path):
    blobs = []
    for jobs in (1, 3):
        index = VectorIndex(DIM)
        build_item_index(CATALOG, mock_gateway(), index, jobs=jobs)
        index.save(tmp_path / f"run{jobs}.bin")
        blobs.append((tmp_path / f"run{jobs}.bin").read_bytes())
    assert blobs[0] == blobs[1]


def test_coverage_under_random_failures(toy):
    catalog = toy["dataset"].items
    bad = {catalog[i].title for i in sorted(catalog)[::3]}
    index = VectorIndex(DIM)
    items, report = build_item_index(catalog, gateway_for(FailingFor(bad)), index)
    assert index.size(ITEMS) == len(catalog) == len(items)
    assert report.degraded == len(bad)
    for rec in items.values():
        assert (rec.description is None) == rec.augmentation_failed


def test_cache_resume(tmp_path):
    cache = DiskCache(tmp_path / "cache")
    backend = FailingFor()
    build_item_index(CATALOG, gateway_for(backend), VectorIndex(DIM), cache=cache)
    assert backend.generations == 3
    again = FailingFor()
    items, report = build_item_index(CATALOG, gateway_for(again), VectorIndex(DIM), cache=DiskCache(tmp_path / "cache"))
    assert again.generations == 0 and report.cache_hits == 3
    assert items["i1"].description.startswith("Alien")
