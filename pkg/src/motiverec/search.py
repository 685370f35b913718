"""Dense retrieval per query, reciprocal rank fusion, and the bounded reflection loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from .errors import GatewayError, PlanError
from .index import ITEMS, VectorIndex
from .retrieve import MotiveSelection, QueryPlan, with_queries

log = logging.getLogger(__name__)

SCORE_MET = "score_met"
MAX_ITERS = "max_iters"
NO_REFINEMENT = "no_refinement"
VERDICT_FAILED = "verdict_failed"


@dataclass(frozen=True)
class RankedEntry:
    item_id: str
    score: float
    sources: tuple  # (query_index, rank) pairs, query_index 0-based

    def to_dict(self) -> dict:
        return {"item_id": self.item_id, "score": self.score,
                "sources": [{"query": q, "rank": r} for q, r in self.sources]}


@dataclass(frozen=True)
class RankedList:
    entries: tuple
    iteration: int = 0
    terminal_reason: str | None = None

    def item_ids(self) -> list[str]:
        return [e.item_id for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def rrf_fuse(ranked_lists, k0: float = 60.0) -> RankedList:
    """Reciprocal rank fusion of 1-based ranked item lists.

    ``score(i) = sum(1 / (k0 + rank_i))`` over the lists that contain ``i``;
    output sorted by descending score, ties by ascending item id. A repeated
    item within one list keeps its best rank.
    """
    if k0 <= 0:
        raise ValueError("k0 must be positive")
    terms: dict[str, list] = {}
    sources: dict[str, list] = {}
    for qi, ranked in enumerate(ranked_lists):
        seen = set()
        for rank, item_id in enumerate(ranked, 1):
            if item_id in seen:
                continue
            seen.add(item_id)
            terms.setdefault(item_id, []).append(1.0 / (k0 + rank))
            sources.setdefault(item_id, []).append((qi, rank))
    # fsum is exactly rounded, so the score does not depend on list order
    scored = [(math.fsum(t), item_id) for item_id, t in terms.items()]
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return RankedList(tuple(RankedEntry(i, s, tuple(sources[i])) for s, i in scored))


def dense_retrieve(index: VectorIndex, queries, depth: int, gateway, exclude=()):
    """Embed each query and take its ``depth`` nearest items.

    Returns ``(ranked_lists, kept_query_indices, notices)``. A query whose
    embedding fails is dropped with a notice; PlanError if all fail.
    """
    queries = list(queries)
    if not queries:
        raise PlanError("no queries to retrieve with")
    if index.size(ITEMS) == 0:
        raise PlanError("item index is empty")
    notices = []
    try:
        vectors = list(gateway.embed(queries))
    except (GatewayError, ValueError):
        vectors = []
        for q in queries:
            try:
                vectors.append(gateway.embed([q])[0])
            except (GatewayError, ValueError) as exc:
                vectors.append(None)
                notices.append(f"query dropped ({exc}): {q!r}")
    kept, lists = [], []
    for qi, vec in enumerate(vectors):
        if vec is None:
            continue
        kept.append(qi)
        lists.append([key for key, _ in index.top_k(ITEMS, vec, depth, exclude=exclude)])
    if not kept:
        raise PlanError("every query failed to embed")
    return lists, kept, notices


@dataclass
class SearchOutcome:
    ranked: RankedList
    plans: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    notices: list = field(default_factory=list)

    @property
    def verdict_calls(self) -> int:
        return len(self.verdicts) + (self.ranked.terminal_reason == VERDICT_FAILED)


class ReflectiveSearcher:
    """Retrieval plus the verify-and-refine loop for one configuration."""

    def __init__(self, index: VectorIndex, gateway, items: dict, *, depth: int = 100, rrf_constant: float = 60.0,
                 verifier_candidates: int = 10, queries_per_plan: int = 4, snippet_chars: int = 300):
        self.index = index
        self.gateway = gateway
        self.items = items
        self.depth = depth
        self.rrf_constant = rrf_constant
        self.verifier_candidates = verifier_candidates
        self.queries_per_plan = queries_per_plan
        self.snippet_chars = snippet_chars

    def retrieve(self, queries, exclude=(), iteration: int = 0):
        lists, kept, notices = dense_retrieve(self.index, queries, self.depth, self.gateway, exclude)
        fused = rrf_fuse(lists, self.rrf_constant)
        # map source indices back to positions in the full query list
        entries = tuple(
            RankedEntry(e.item_id, e.score, tuple((kept[qi], r) for qi, r in e.sources)) for e in fused.entries
        )
        return RankedList(entries, iteration), notices

    def candidate_view(self, ranked: RankedList) -> list[str]:
        out = []
        for entry in ranked.entries[: self.verifier_candidates]:
            item = self.items[entry.item_id]
            text = " ".join(item.search_text.split())
            if len(text) > self.snippet_chars:
                text = text[: self.snippet_chars].rstrip() + "..."
            out.append(f"{item.title} | {text}")
        return out

    def reflect_and_refine(self, ranked: RankedList, query: str | None, selection: MotiveSelection,
                           plan: QueryPlan, tau: float, t_max: int, exclude=()) -> SearchOutcome:
        """Verify the ranking up to ``t_max`` times, re-retrieving with refined queries.

        Iteration ``t`` verifies the current ranking; a score at or above
        ``tau`` stops the loop. Below it, the refined queries replace the plan
        and are retrieved again, except on the last iteration, whose ranking
        is returned as is. A refinement identical to the current plan stops
        the loop (``no_refinement``); an unusable verdict stops it with the
        current ranking (``verdict_failed``). ``t_max = 0`` is a single pass.
        """
        if not len(ranked):
            raise ValueError("reflect_and_refine needs a non-empty ranking")
        outcome = SearchOutcome(ranked, [plan])
        reason = MAX_ITERS
        for t in range(1, t_max + 1):
            bindings = {
                "query": query,
                "motives": selection.texts(),
                "queries": list(plan.queries),
                "candidates": self.candidate_view(ranked),
            }
            try:
                resp = self.gateway.generate("reflect", bindings, max_tokens=512, limit=self.queries_per_plan)
                verdict = resp.parsed if resp.ok else None
                if verdict is None:
                    outcome.notices.append(f"verdict unparsable at iteration {t}: {resp.parse_error}")
            except GatewayError as exc:
                verdict = None
                outcome.notices.append(f"verdict call failed at iteration {t}: {exc}")
            if verdict is None:
                reason = VERDICT_FAILED
                break
            outcome.verdicts.append(verdict)
            if verdict.score >= tau:
                reason = SCORE_MET
                break
            if t == t_max:
                reason = MAX_ITERS
                break
            refined = with_queries(plan, verdict.refined_queries or plan.queries, verdict, query,
                                   self.queries_per_plan)
            if refined.queries == plan.queries:
                reason = NO_REFINEMENT
                break
            plan = refined
            outcome.plans.append(plan)
            ranked, notices = self.retrieve(plan.queries, exclude, iteration=t)
            outcome.notices.extend(notices)
        outcome.ranked = RankedList(ranked.entries, ranked.iteration, reason)
        return outcome


@dataclass(frozen=True)
class Recommendation:
    item_id: str
    rank: int
    score: float
    sources: tuple  # (query text, rank)
    iteration: int

    def to_dict(self) -> dict:
        return {"item_id": self.item_id, "rank": self.rank, "score": self.score, "iteration": self.iteration,
                "sources": [{"query": q, "rank": r} for q, r in self.sources]}


def finalize(ranked: RankedList, history_items, exclude_history: bool, cutoff: int, plan: QueryPlan):
    """Drop train-history items (if asked), cut to ``cutoff``, attach the audit trail.

    Returns ``(recommendations, notices)``.
    """
    history = set(history_items) if exclude_history else set()
    recs = []
    for entry in ranked.entries:
        if entry.item_id in history:
            continue
        sources = tuple((plan.queries[qi], r) for qi, r in entry.sources)
        recs.append(Recommendation(entry.item_id, len(recs) + 1, entry.score, sources, ranked.iteration))
        if len(recs) == cutoff:
            break
    notices = [] if recs else ["no items left after history exclusion"]
    return recs, notices
