import os
import socket
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from motiverec.annotate import build_motive_index
from motiverec.augment import build_item_index
from motiverec.config import PipelineConfig
from motiverec.gateway import Gateway, MockBackend
from motiverec.index import VectorIndex
from motiverec.ingest import build_dataset
from motiverec.toydata import make_toy_dataset

DIM = 256

# criterion lines recorded by test_acceptance.py, echoed after the run
ACCEPTANCE_LINES = []


def pytest_configure(config):
    if os.environ.get("MOTIVEREC_NO_NETWORK"):
        def refuse(*args, **kwargs):
            raise OSError("network access is disabled for this test run")
        socket.socket.connect = refuse
        socket.create_connection = refuse


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def mock_gateway(**kw):
    return Gateway(MockBackend(dimension=DIM), dimension=DIM, sleep=lambda s: None, **kw)


@pytest.fixture
def gateway():
    return mock_gateway()


@pytest.fixture(scope="session")
def toy():
    """Toy dataset with augmented items and both indexes, built once."""
    events, items, user_meta = make_toy_dataset(n_users=40, n_items=60, seed=0)
    dataset = build_dataset(events, items, user_metadata=user_meta)
    gw = mock_gateway()
    item_index = VectorIndex(DIM)
    augmented, _ = build_item_index(dataset.items, gw, item_index)
    motive_index = VectorIndex(DIM)
    annotations, _ = build_motive_index(dataset.users, augmented, gw, motive_index, window=4)
    return {
        "dataset": dataset,
        "items": augmented,
        "item_index": item_index,
        "motive_index": motive_index,
        "annotations": annotations,
        "cfg": PipelineConfig(bundle_window=4),
    }


def random_unit(rng, n, dim):
    m = rng.normal(size=(n, dim))
    return m / np.linalg.norm(m, axis=1, keepdims=True)
