"""Exact cosine search over unit vectors, plus greedy MMR selection.

Namespaces
----------
``items``
    item embeddings.
``motives_by_user/<user_id>``
    one namespace per user holding that user's motive vectors.
``motives_global``
    read-only view: the union of every per-user motive namespace.

File format (little-endian)
---------------------------
::

    magic    4 bytes   b"MRVX"
    version  uint32    1
    dim      uint32
    count    uint32
    count x record:
        ns_len   uint16, namespace (utf-8)
        key_len  uint16, key (utf-8)
        vector   dim x float64

Records are written sorted by (namespace, key), so identical content always
gives identical bytes. ``motives_global`` is never stored.
"""

from __future__ import annotations

import io
import struct
import threading
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, UnknownNamespaceError

ITEMS = "items"
MOTIVES_GLOBAL = "motives_global"
_USER_PREFIX = "motives_by_user/"
MAGIC = b"MRVX"
VERSION = 1
UNIT_TOL = 1e-6


def user_namespace(user_id: str) -> str:
    return _USER_PREFIX + user_id


class _Block:
    """Keys plus a row matrix; rows are kept in ascending key order."""

    def __init__(self, keys, matrix):
        order = sorted(range(len(keys)), key=keys.__getitem__)
        self.keys = [keys[i] for i in order]
        self.matrix = matrix[order] if len(keys) else matrix
        self.position = {k: i for i, k in enumerate(self.keys)}


class VectorIndex:
    def __init__(self, dimension: int):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self._pending: dict[str, dict[str, np.ndarray]] = {}
        self._blocks: dict[str, _Block] = {}
        self._lock = threading.Lock()

    # -- build phase --------------------------------------------------------
    def add(self, namespace: str, key: str, vector) -> None:
        if namespace == MOTIVES_GLOBAL:
            raise ValueError("motives_global is derived; add to a per-user namespace")
        if namespace != ITEMS and not namespace.startswith(_USER_PREFIX):
            raise UnknownNamespaceError(namespace)
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (self.dimension,):
            raise DimensionMismatchError(f"vector of shape {vec.shape}, index dimension {self.dimension}")
        if abs(float(np.linalg.norm(vec)) - 1.0) > UNIT_TOL:
            raise ValueError(f"vector for {key!r} is not unit-norm")
        with self._lock:
            self._pending.setdefault(namespace, {})[key] = vec
            self._blocks.clear()

    def _freeze(self) -> None:
        with self._lock:
            if self._blocks or not self._pending:
                return
            blocks = {}
            g_keys, g_rows = [], []
            for ns, entries in self._pending.items():
                keys = list(entries)
                mat = np.vstack([entries[k] for k in keys])
                blocks[ns] = _Block(keys, mat)
                if ns.startswith(_USER_PREFIX):
                    g_keys.extend(keys)
                    g_rows.append(mat)
            if g_rows:
                blocks[MOTIVES_GLOBAL] = _Block(g_keys, np.vstack(g_rows))
            self._blocks = blocks

    def _block(self, namespace: str) -> _Block:
        self._freeze()
        block = self._blocks.get(namespace)
        if block is None:
            if namespace in (ITEMS, MOTIVES_GLOBAL) or namespace.startswith(_USER_PREFIX):
                return _Block([], np.zeros((0, self.dimension)))
            raise UnknownNamespaceError(namespace)
        return block

    # -- inspection ---------------------------------------------------------
    def namespaces(self) -> list[str]:
        self._freeze()
        return sorted(self._blocks)

    def keys(self, namespace: str) -> list[str]:
        return list(self._block(namespace).keys)

    def size(self, namespace: str) -> int:
        return len(self._block(namespace).keys)

    def vector(self, namespace: str, key: str) -> np.ndarray:
        block = self._block(namespace)
        return block.matrix[block.position[key]]

    # -- search -------------------------------------------------------------
    def _check_query(self, query) -> np.ndarray:
        q = np.asarray(query, dtype=np.float64)
        if q.shape != (self.dimension,):
            raise DimensionMismatchError(f"query of shape {q.shape}, index dimension {self.dimension}")
        return q

    def top_k(self, namespace: str, query, k: int, exclude=()) -> list[tuple[str, float]]:
        """The ``k`` highest cosine scores, descending, ties by ascending key."""
        if k < 1:
            raise ValueError("k must be >= 1")
        q = self._check_query(query)
        block = self._block(namespace)
        if not block.keys:
            return []
        scores = block.matrix @ q
        # rows are in key order, so a stable sort on -score breaks ties by key
        order = np.argsort(-scores, kind="stable")
        exclude = set(exclude)
        out = []
        for i in order:
            key = block.keys[i]
            if key in exclude:
                continue
            out.append((key, float(scores[i])))
            if len(out) == k:
                break
        return out

    def mmr_select(self, namespace: str, query, seeds, k: int, lam: float) -> list[str]:
        """Greedy maximal marginal relevance.

        Each step picks the candidate maximizing
        ``lam * sim(v, query) - (1 - lam) * max(sim(v, s) for s in seeds + picked)``,
        ties to the smallest key. Seeds are penalized against but never
        returned; the penalty is 0 while seeds and picks are both empty.
        """
        if not 0.0 <= lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        q = self._check_query(query)
        block = self._block(namespace)
        seeds = [s for s in dict.fromkeys(seeds)]
        unknown = [s for s in seeds if s not in block.position]
        if unknown:
            raise KeyError(f"seed keys not in {namespace}: {unknown}")
        seed_set = set(seeds)
        pool = [i for i, key in enumerate(block.keys) if key not in seed_set]
        if not pool or k < 1:
            return []
        cand = block.matrix[pool]
        relevance = cand @ q
        penalty = np.full(len(pool), -np.inf)
        for s in seeds:
            penalty = np.maximum(penalty, cand @ block.matrix[block.position[s]])
        alive = np.ones(len(pool), dtype=bool)
        picked = []
        for _ in range(min(k, len(pool))):
            pen = np.where(np.isneginf(penalty), 0.0, penalty)
            score = lam * relevance - (1.0 - lam) * pen
            score = np.where(alive, score, -np.inf)
            j = int(np.argmax(score))  # first max == smallest key
            picked.append(block.keys[pool[j]])
            alive[j] = False
            penalty = np.maximum(penalty, cand @ cand[j])
        return picked

    # -- persistence --------------------------------------------------------
    def to_bytes(self) -> bytes:
        with self._lock:
            records = sorted((ns, key) for ns, entries in self._pending.items() for key in entries)
            buf = io.BytesIO()
            buf.write(MAGIC)
            buf.write(struct.pack("<III", VERSION, self.dimension, len(records)))
            for ns, key in records:
                nsb, kb = ns.encode("utf-8"), key.encode("utf-8")
                buf.write(struct.pack("<H", len(nsb)) + nsb)
                buf.write(struct.pack("<H", len(kb)) + kb)
                buf.write(self._pending[ns][key].astype("<f8").tobytes())
            return buf.getvalue()

    def save(self, path) -> None:
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(self.to_bytes())
        tmp.replace(path)

    @classmethod
    def from_bytes(cls, data: bytes) -> "VectorIndex":
        if data[:4] != MAGIC:
            raise ValueError("not a vector index file (bad magic)")
        version, dim, count = struct.unpack_from("<III", data, 4)
        if version != VERSION:
            raise ValueError(f"unsupported index version {version}")
        index = cls(dim)
        pos = 16
        for _ in range(count):
            (n,) = struct.unpack_from("<H", data, pos)
            ns = data[pos + 2: pos + 2 + n].decode("utf-8")
            pos += 2 + n
            (n,) = struct.unpack_from("<H", data, pos)
            key = data[pos + 2: pos + 2 + n].decode("utf-8")
            pos += 2 + n
            vec = np.frombuffer(data, dtype="<f8", count=dim, offset=pos).astype(np.float64)
            pos += 8 * dim
            index._pending.setdefault(ns, {})[key] = vec
        return index

    @classmethod
    def load(cls, path) -> "VectorIndex":
        return cls.from_bytes(Path(path).read_bytes())
