"""End-to-end recommendation for one user or a batch of users."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor

from .annotate import profiles as group_profiles
from .errors import NoSignalError, PlanError
from .index import VectorIndex
from .retrieve import select_motives, synthesize_queries
from .search import ReflectiveSearcher, finalize

log = logging.getLogger(__name__)


class Recommender:
    """Wires motive selection, query synthesis, search and finalization.

    ``item_index`` holds the ``items`` namespace; ``motive_index`` holds the
    per-user motive namespaces built from ``annotations``. Both are only
    read here, so one instance serves many users concurrently.
    """

    def __init__(self, users: dict, items: dict, item_index: VectorIndex, motive_index: VectorIndex,
                 annotations, gateway, cfg):
        self.users = users
        self.items = items
        self.item_index = item_index
        self.motive_index = motive_index
        self.profiles = group_profiles(annotations)
        self.lookup = {a.key: a for a in annotations}
        self.gateway = gateway
        self.cfg = cfg
        self.searcher = ReflectiveSearcher(
            item_index, gateway, items,
            depth=cfg.retrieval_depth,
            rrf_constant=cfg.rrf_constant,
            verifier_candidates=cfg.verifier_candidates,
            queries_per_plan=cfg.queries_per_plan,
        )

    def history(self, user_id: str) -> set:
        user = self.users.get(user_id)
        return set(user.items("train")) if user else set()

    def recommend(self, user_id: str, query: str | None = None) -> dict:
        """Run the full pipeline for one user and return its audit record."""
        cfg = self.cfg
        record = {
            "user_id": user_id,
            "query": query,
            "status": "ok",
            "selection": None,
            "plans": [],
            "verdicts": [],
            "terminal_reason": None,
            "iterations": 0,
            "items": [],
            "notices": [],
        }
        try:
            selection, _ = select_motives(user_id, query, self.profiles, self.motive_index, self.gateway, cfg,
                                          self.lookup)
            record["selection"] = selection.to_dict()
            plan = synthesize_queries(query, selection, self.gateway, cfg.queries_per_plan)
            if plan.fallback_used:
                record["notices"].append("query synthesis unparsable; motive texts used as queries")
            exclude = self.history(user_id) if cfg.exclude_history else set()
            ranked, notices = self.searcher.retrieve(plan.queries, exclude)
            record["notices"].extend(notices)
            outcome = self.searcher.reflect_and_refine(
                ranked, query, selection, plan, cfg.reflection_threshold, cfg.effective_max_reflections, exclude)
        except NoSignalError as exc:
            record["status"] = "no_signal"
            record["notices"].append(str(exc))
            return record
        except PlanError as exc:
            record["status"] = "plan_error"
            record["notices"].append(str(exc))
            return record
        record["plans"] = [list(p.queries) for p in outcome.plans]
        record["verdicts"] = [{"score": v.score, "feedback": v.feedback} for v in outcome.verdicts]
        record["terminal_reason"] = outcome.ranked.terminal_reason
        record["iterations"] = outcome.ranked.iteration
        record["notices"].extend(outcome.notices)
        recs, notices = finalize(outcome.ranked, self.history(user_id), cfg.exclude_history,
                                 max(cfg.top_k_eval), outcome.plans[-1])
        record["notices"].extend(notices)
        motives = selection.keys()
        record["items"] = [dict(r.to_dict(), motives=motives) for r in recs]
        return record

    def recommend_all(self, user_ids=None, *, queries: dict | None = None, jobs: int = 1) -> list[dict]:
        """Records for ``user_ids`` (default: every user), in the given order."""
        user_ids = sorted(self.users) if user_ids is None else list(user_ids)
        queries = queries or {}
        with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
            return list(pool.map(lambda u: self.recommend(u, queries.get(u)), user_ids))


def ranked_items(records) -> dict[str, list[str]]:
    """``{user_id: [item_id, ...]}`` from audit records."""
    return {r["user_id"]: [it["item_id"] for it in r["items"]] for r in records}
