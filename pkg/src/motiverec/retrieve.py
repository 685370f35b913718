"""Motive selection (exploit, diverse, social) and search-query synthesis."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import GatewayError, NoSignalError
from .gateway.parsing import ReflectVerdict
from .gateway.text import contains_all, salient_tokens
from .index import MOTIVES_GLOBAL, VectorIndex, user_namespace
from .types import MotiveAnnotation

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SelectedMotive:
    annotation: MotiveAnnotation
    strategy: str  # exploit | diverse | social
    score: Optional[float] = None

    @property
    def key(self) -> str:
        return self.annotation.key

    def to_dict(self) -> dict:
        return {"key": self.key, "strategy": self.strategy, "score": self.score,
                "text": self.annotation.motive_text}


@dataclass(frozen=True)
class MotiveSelection:
    exploit: tuple = ()
    diverse: tuple = ()
    social: tuple = ()

    def all(self) -> list[SelectedMotive]:
        return [*self.exploit, *self.diverse, *self.social]

    def texts(self) -> list[str]:
        return [m.annotation.motive_text for m in self.all()]

    def keys(self) -> list[str]:
        return [m.key for m in self.all()]

    def __len__(self) -> int:
        return len(self.exploit) + len(self.diverse) + len(self.social)

    def to_dict(self) -> dict:
        return {name: [m.to_dict() for m in getattr(self, name)] for name in ("exploit", "diverse", "social")}


@dataclass(frozen=True)
class QueryPlan:
    queries: tuple
    iteration: int = 0
    last_verdict: Optional[ReflectVerdict] = None
    fallback_used: bool = False
    guard_applied: bool = False

    def to_dict(self) -> dict:
        return {
            "queries": list(self.queries),
            "iteration": self.iteration,
            "last_verdict": self.last_verdict.to_dict() if self.last_verdict else None,
            "fallback_used": self.fallback_used,
            "guard_applied": self.guard_applied,
        }


def latest(profile, k: int) -> list[MotiveAnnotation]:
    """The ``k`` most recent motives, newest first."""
    ordered = sorted(profile, key=lambda a: (a.time_span[1], a.time_span[0], a.bundle_index), reverse=True)
    return ordered[:k]


def pseudo_query(profile, index: VectorIndex, k: int) -> Optional[np.ndarray]:
    """Normalized mean of the ``k`` most recent motive vectors.

    Stands in for the query embedding when there is no explicit query. If
    the mean cancels to zero, the newest motive vector is used instead.
    """
    recent = latest(profile, k)
    if not recent:
        return None
    ns = user_namespace(recent[0].user_id)
    vecs = np.vstack([index.vector(ns, a.key) for a in recent])
    mean = vecs.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-12:
        return vecs[0]
    return mean / norm


def retrieve_exploit(profile, query_vector, k: int, index: VectorIndex) -> list[SelectedMotive]:
    """Top-k of the user's own motives by similarity to the query, or the latest k without one."""
    if not profile:
        return []
    if query_vector is None:
        return [SelectedMotive(a, "exploit") for a in latest(profile, k)]
    by_key = {a.key: a for a in profile}
    hits = index.top_k(user_namespace(profile[0].user_id), query_vector, k)
    return [SelectedMotive(by_key[key], "exploit", score) for key, score in hits]


def retrieve_diverse(profile, query_vector, exploit, k: int, lam: float, index: VectorIndex) -> list[SelectedMotive]:
    if not profile or query_vector is None or k < 1:
        return []
    ns = user_namespace(profile[0].user_id)
    by_key = {a.key: a for a in profile}
    picked = index.mmr_select(ns, query_vector, [m.key for m in exploit], k, lam)
    return [SelectedMotive(by_key[key], "diverse", float(index.vector(ns, key) @ query_vector)) for key in picked]


def retrieve_social(user_id: str, query_vector, k: int, index: VectorIndex,
                    lookup: dict) -> list[SelectedMotive]:
    """Top-k motives of other users; ``lookup`` maps motive key to annotation."""
    if query_vector is None or k < 1:
        return []
    own = index.keys(user_namespace(user_id))
    hits = index.top_k(MOTIVES_GLOBAL, query_vector, k, exclude=own)
    return [SelectedMotive(lookup[key], "social", score) for key, score in hits]


def select_motives(user_id: str, query: str | None, profiles: dict, index: VectorIndex, gateway, cfg,
                   lookup: dict | None = None):
    """Gather exploit, diverse and social motives for one user.

    Returns ``(selection, query_vector)`` where ``query_vector`` is the
    embedded explicit query, the pseudo-query, or ``None`` for a cold user
    without a query (which raises NoSignalError).
    """
    profile = profiles.get(user_id, [])
    query = query.strip() if query else None
    if query:
        qvec = gateway.embed([query])[0]
    else:
        qvec = pseudo_query(profile, index, cfg.k_exploit)
    if qvec is None:
        raise NoSignalError(f"user {user_id} has no motives and no query")
    exploit = retrieve_exploit(profile, qvec if query else None, cfg.k_exploit, index)
    diverse, social = [], []
    if cfg.ablation.exploration_on:
        diverse = retrieve_diverse(profile, qvec, exploit, cfg.k_div, cfg.mmr_lambda, index)
        if lookup is None:
            lookup = {a.key: a for anns in profiles.values() for a in anns}
        social = retrieve_social(user_id, qvec, cfg.k_social, index, lookup)
    return MotiveSelection(tuple(exploit), tuple(diverse), tuple(social)), qvec


def apply_fidelity_guard(queries, query: str | None, n: int):
    """Make sure some query carries every salient token of the explicit query.

    If none does, the explicit query becomes the last query: appended when
    there is room, otherwise replacing the last one. Returns
    ``(queries, applied)``.
    """
    queries = list(queries)
    if not query or not query.strip():
        return tuple(queries), False
    needed = salient_tokens(query)
    if any(contains_all(q, needed) for q in queries):
        return tuple(queries), False
    if len(queries) < n:
        queries.append(query.strip())
    else:
        queries[-1] = query.strip()
    return tuple(queries), True


def synthesize_queries(query: str | None, selection: MotiveSelection, gateway, n: int) -> QueryPlan:
    """Ask the model for up to ``n`` search queries from the selected motives.

    If the model output cannot be parsed, the motive texts themselves are
    used as queries.
    """
    query = query.strip() if query else None
    if not len(selection) and not query:
        raise NoSignalError("empty motive selection and no explicit query")
    bindings = {"query": query, "motives": selection.texts(), "n": n}
    fallback = False
    try:
        resp = gateway.generate("query", bindings, max_tokens=256, limit=n)
        queries = resp.parsed if resp.ok else None
    except GatewayError as exc:
        log.warning("query synthesis failed: %s", exc)
        queries = None
    if queries is None:
        fallback = True
        queries = tuple(dict.fromkeys(selection.texts()))[:n] or (query,)
    queries, guarded = apply_fidelity_guard(queries, query, n)
    return QueryPlan(tuple(queries), 0, None, fallback, guarded)


def with_queries(plan: QueryPlan, queries, verdict, query: str | None, n: int) -> QueryPlan:
    queries, guarded = apply_fidelity_guard(queries, query, n)
    return replace(plan, queries=tuple(queries), iteration=plan.iteration + 1, last_verdict=verdict,
                   guard_applied=plan.guard_applied or guarded)
