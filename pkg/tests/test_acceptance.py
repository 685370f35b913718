"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Set ``MOTIVEREC_ML1M_DIR`` to a directory holding the real MovieLens-1M
``ratings.dat`` and ``movies.dat`` to add the published-statistics check to
criterion 6.
"""

import json
import math
import os
import random
import subprocess
import sys
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, DIM, mock_gateway, random_unit
from oracles import brute_mmr, brute_top_k, exact_rrf, naive_metrics

from motiverec.ablation import VARIANTS, run_ablation_grid
from motiverec.annotate import build_motive_index
from motiverec.augment import build_item_index
from motiverec.config import PipelineConfig
from motiverec.evaluate import metrics_at_k, relevance_sets
from motiverec.gateway import Gateway, MockBackend
from motiverec.gateway.text import salient_tokens, token_set
from motiverec.index import ITEMS, VectorIndex
from motiverec.ingest import ML1M_SCHEMA, apply_core_filter, build_dataset, chronological_split, \
    load_interactions, load_ml1m_items
from motiverec.pipeline import Recommender, ranked_items
from motiverec.retrieve import MotiveSelection, QueryPlan, SelectedMotive
from motiverec.search import MAX_ITERS, NO_REFINEMENT, SCORE_MET, ReflectiveSearcher, rrf_fuse
from motiverec.toydata import make_toy_dataset, write_ml1m_files
from motiverec.types import ItemRecord, MotiveAnnotation

TESTS = Path(__file__).parent


def verdict(criterion, ok, detail):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def toy_world(n_users=40, n_items=60, seed=0, window=4):
    events, items, meta = make_toy_dataset(n_users=n_users, n_items=n_items, seed=seed)
    dataset = build_dataset(events, items, user_metadata=meta)
    gw = mock_gateway()
    item_index = VectorIndex(DIM)
    augmented, _ = build_item_index(dataset.items, gw, item_index)
    motive_index = VectorIndex(DIM)
    anns, _ = build_motive_index(dataset.users, augmented, gw, motive_index, window=window)
    return dataset, augmented, item_index, motive_index, anns, gw


class CountingBackend(MockBackend):
    def __init__(self):
        super().__init__()
        self.reflect_calls = 0

    def complete(self, request):
        self.reflect_calls += request.template == "reflect"
        return super().complete(request)


# 1 --------------------------------------------------------------------------------

def test_criterion_1_metric_oracle_equivalence():
    start = time.perf_counter()
    dataset, items, item_index, motive_index, anns, gw = toy_world()
    assert len(dataset.users) <= 50 and len(items) <= 60
    records = Recommender(dataset.users, items, item_index, motive_index, anns, gw,
                          PipelineConfig(bundle_window=4)).recommend_all()
    recs = ranked_items(records)
    rel, _ = relevance_sets(dataset.users)
    got = metrics_at_k(recs, rel, items, [5, 10, 20])
    pops = {i: r.popularity for i, r in items.items()}
    worst = 0.0
    for k in (5, 10, 20):
        for name, value in naive_metrics(recs, rel, pops, len(items), k).items():
            worst = max(worst, abs(got[name] - value))
    elapsed = time.perf_counter() - start
    verdict(1, worst <= 1e-9 and elapsed < 5,
            f"{len(dataset.users)} users x {len(items)} items, max |harness - oracle| = {worst:.2e}, "
            f"{elapsed:.2f}s")


# 2 --------------------------------------------------------------------------------

def test_criterion_2_ranking_primitive_oracles():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    rnd = random.Random(2024)
    mismatches = Counter()
    for trial in range(200):
        n = int(rng.integers(1, 65))
        if trial % 4 == 0:
            # four entries of +-1/2: unit norm, and every dot product is an exact multiple of 1/4,
            # so ties are real ties under any summation order
            vectors = np.zeros((n, 16))
            for row in vectors:
                row[rng.choice(16, 4, replace=False)] = rng.choice([-0.5, 0.5], 4)
        else:
            vectors = random_unit(rng, n, 16)
        index = VectorIndex(16)
        entries = {}
        for j, v in enumerate(vectors):
            key = f"v{j:02d}"
            index.add(ITEMS, key, v)
            entries[key] = v
        q = vectors[int(rng.integers(n))] if trial % 4 == 0 else random_unit(rng, 1, 16)[0]
        k = int(rng.integers(1, n + 3))
        excluded = set(rnd.sample(sorted(entries), min(n, int(rng.integers(0, 4)))))
        if [key for key, _ in index.top_k(ITEMS, q, k, excluded)] != brute_top_k(entries, q, k, excluded):
            mismatches["top_k"] += 1
        seeds = sorted(excluded)
        lam = float(rng.choice([0.0, 0.3, 0.5, 0.7, 1.0]))
        if index.mmr_select(ITEMS, q, seeds, k, lam) != brute_mmr(entries, q, seeds, k, lam):
            mismatches["mmr_select"] += 1
        lists = [rnd.sample(sorted(entries), rnd.randint(1, min(n, 12))) for _ in range(rnd.randint(1, 5))]
        if rrf_fuse(lists, 60).item_ids() != [i for i, _ in exact_rrf(lists, 60)]:
            mismatches["rrf_fuse"] += 1
    elapsed = time.perf_counter() - start
    verdict(2, not mismatches and elapsed < 30,
            f"200 instances each, mismatches {dict(mismatches) or 0}, {elapsed:.2f}s")


# 3 --------------------------------------------------------------------------------

def test_criterion_3_analytic_spot_checks():
    items = {k: ItemRecord(k) for k in "abc"}
    ndcg = metrics_at_k({"u": ["b", "a", "c"]}, {"u": {"a"}}, items, [10])["nDCG@10"]
    ndcg_ok = abs(ndcg - 1 / math.log2(3)) <= 1e-12
    score = rrf_fuse([["x", "y"], ["x", "z"]], 60).entries[0].score
    rrf_ok = score == 2 / 61
    rng = np.random.default_rng(3)
    index = VectorIndex(16)
    for j, v in enumerate(random_unit(rng, 30, 16)):
        index.add(ITEMS, f"v{j:02d}", v)
    q = random_unit(rng, 1, 16)[0]
    seeds = ["v03", "v10", "v17"]
    mmr_ok = index.mmr_select(ITEMS, q, seeds, 8, 1.0) == [k for k, _ in index.top_k(ITEMS, q, 8, seeds)]
    verdict(3, ndcg_ok and rrf_ok and mmr_ok,
            f"nDCG rank-2 = {ndcg:.15f}, RRF double rank-1 = {score!r} (2/61 = {2 / 61!r}), "
            f"MMR lambda=1 equals top_k: {mmr_ok}")


# 4 --------------------------------------------------------------------------------

CATALOG = {
    "m1": ItemRecord("m1", {"title": "Glory", "genre": "war battle"}),
    "m2": ItemRecord("m2", {"title": "Platoon", "genre": "war jungle"}),
    "m3": ItemRecord("m3", {"title": "Heat", "genre": "crime heist"}),
    "m4": ItemRecord("m4", {"title": "Fargo", "genre": "crime snow"}),
}


def unreachable_case(t_max):
    backend = CountingBackend()
    gw = Gateway(backend, dimension=DIM, sleep=lambda s: None)
    index = VectorIndex(DIM)
    items, _ = build_item_index(CATALOG, gw, index)
    searcher = ReflectiveSearcher(index, gw, items)
    motive = MotiveAnnotation("u", 1, ("m1",), "Prefers zeppelin quasar nebula walrus yodel.", (0, 0))
    selection = MotiveSelection((SelectedMotive(motive, "exploit"),))
    plan = QueryPlan(("war",))
    ranked, _ = searcher.retrieve(plan.queries)
    out = searcher.reflect_and_refine(ranked, None, selection, plan, 1.0, t_max)
    return backend.reflect_calls, out.ranked.terminal_reason


def test_criterion_4a_unreachable_threshold():
    start = time.perf_counter()
    results = {t: unreachable_case(t) for t in range(1, 6)}
    exact = all(calls == t and reason == MAX_ITERS for t, (calls, reason) in results.items())
    # on the toy pipeline tau = 1 never exceeds the budget; each user stops at T_max or on a repeated plan
    dataset, items, item_index, motive_index, anns, _ = toy_world(n_users=20, n_items=40)
    backend = CountingBackend()
    gw = Gateway(backend, dimension=DIM, sleep=lambda s: None)
    cfg = PipelineConfig(bundle_window=4, reflection_threshold=1.0, max_reflections=3)
    engine = Recommender(dataset.users, items, item_index, motive_index, anns, gw, cfg)
    bounded = True
    for user_id in sorted(dataset.users):
        before = backend.reflect_calls
        record = engine.recommend(user_id)
        calls = backend.reflect_calls - before
        reason = record["terminal_reason"]
        bounded &= calls <= 3 and (reason == MAX_ITERS) == (calls == 3) and reason in (MAX_ITERS, NO_REFINEMENT)
    elapsed = time.perf_counter() - start
    verdict("4a", exact and bounded and elapsed < 10,
            f"verdict calls per T_max {{{', '.join(f'{t}: {c}' for t, (c, _) in results.items())}}}, "
            f"all max_iters: {exact}; toy users within budget: {bounded}; {elapsed:.2f}s")


def test_criterion_4b_immediately_satisfied():
    start = time.perf_counter()
    dataset, items, item_index, motive_index, anns, _ = toy_world(n_users=20, n_items=40)
    backend = CountingBackend()
    gw = Gateway(backend, dimension=DIM, sleep=lambda s: None)
    cfg = PipelineConfig(bundle_window=4, reflection_threshold=0.0, max_reflections=3)
    engine = Recommender(dataset.users, items, item_index, motive_index, anns, gw, cfg)
    ok = True
    for user_id in sorted(dataset.users):
        before = backend.reflect_calls
        record = engine.recommend(user_id)
        ok &= backend.reflect_calls - before == 1 and record["terminal_reason"] == SCORE_MET
    elapsed = time.perf_counter() - start
    verdict("4b", ok and elapsed < 10, f"{len(dataset.users)} users, one verdict call each, score_met; "
                                       f"{elapsed:.2f}s")


def test_criterion_4c_reflection_off_equals_single_pass():
    start = time.perf_counter()
    dataset, items, item_index, motive_index, anns, gw = toy_world()
    base = PipelineConfig(bundle_window=4)
    blobs = []
    for cfg in (base.with_ablation(reflection_on=False), PipelineConfig(bundle_window=4, max_reflections=0)):
        records = Recommender(dataset.users, items, item_index, motive_index, anns, gw, cfg).recommend_all()
        blobs.append(json.dumps(records, sort_keys=True).encode())
    elapsed = time.perf_counter() - start
    verdict("4c", blobs[0] == blobs[1] and elapsed < 10,
            f"reflection_off vs T_max=0 records byte-identical: {blobs[0] == blobs[1]} "
            f"({len(blobs[0])} bytes); {elapsed:.2f}s")


# 5 --------------------------------------------------------------------------------

def test_criterion_5_ablation_grid(tmp_path):
    start = time.perf_counter()
    outputs = []
    for run in range(2):
        events, raw_items, meta = make_toy_dataset(seed=0)
        dataset = build_dataset(events, raw_items, user_metadata=meta)
        gw = mock_gateway()
        index = VectorIndex(DIM)
        items, _ = build_item_index(dataset.items, gw, index)
        report = run_ablation_grid(dataset, items, index, PipelineConfig(bundle_window=4), gw)
        report.write(tmp_path / f"grid{run}.txt", tmp_path / f"grid{run}.json")
        outputs.append(((tmp_path / f"grid{run}.txt").read_bytes(), (tmp_path / f"grid{run}.json").read_bytes()))
    elapsed = time.perf_counter() - start
    names = [r.name for r in report.rows]
    complete = names == [n for n, _ in VARIANTS] and all(r.result is not None for r in report.rows)
    text = outputs[0][0].decode()
    shaped = "nDCG@10 (Change)" in text and "Popularity@10 (Change)" in text and "%" in text
    identical = outputs[0] == outputs[1]
    print(text)
    verdict(5, complete and shaped and identical and elapsed < 120,
            f"variants {names}, table shaped: {shaped}, two runs byte-identical: {identical}, {elapsed:.2f}s")


# 6 --------------------------------------------------------------------------------

def tie_group(ts_sorted, position):
    if position in (0, len(ts_sorted)):
        return 0
    return sum(1 for t in ts_sorted if t in (ts_sorted[position - 1], ts_sorted[position]))


def split_checks(events):
    tagged, bounds = chronological_split(events)
    n = len(tagged)
    ts = sorted(e.timestamp for e in tagged)
    counts = Counter(e.split_tag for e in tagged)
    within = True
    for cumulative, ratio in ((counts["train"], 0.8), (counts["train"] + counts["valid"], 0.9)):
        target = math.floor(ratio * n + 0.5)
        within &= abs(cumulative - target) <= tie_group(ts, target)
    by = {t: [e.timestamp for e in tagged if e.split_tag == t] for t in ("train", "valid", "test")}
    monotone = (not by["valid"] or max(by["train"]) <= min(by["valid"])) and \
               (not by["test"] or max(by["train"] + by["valid"]) <= min(by["test"]))
    return within, monotone, counts


def test_criterion_6_split_protocol(tmp_path):
    events, items, _ = make_toy_dataset(n_users=50, n_items=60, seed=6)
    ratings, movies = write_ml1m_files(tmp_path, events, items)
    loaded, report = load_interactions(ratings, ML1M_SCHEMA)
    catalog = load_ml1m_items(movies)
    filtered = apply_core_filter([e for e in loaded if e.item_id in catalog], 5, 3.0)
    within, monotone, counts = split_checks(filtered)
    detail = (f"synthesized ML-1M format: {len(loaded)} rows, {report.n_rejected} rejected, split "
              f"{counts['train']}/{counts['valid']}/{counts['test']}, within one tie group: {within}, "
              f"monotone: {monotone}")
    ok = within and monotone and len(loaded) == len(events)
    real = os.environ.get("MOTIVEREC_ML1M_DIR")
    if real:
        real_events, _ = load_interactions(Path(real) / "ratings.dat", ML1M_SCHEMA)
        kept = apply_core_filter(real_events, 5, 3.0)
        r_within, r_mono, _ = split_checks(kept)
        stats = (len({e.user_id for e in kept}), len({e.item_id for e in kept}), len(kept))
        close = all(abs(got - want) <= 0.01 * want for got, want in zip(stats, (6039, 3308, 835789)))
        ok &= r_within and r_mono and close
        detail += f"; real ML-1M users/items/interactions {stats} vs (6039, 3308, 835789) within 1%: {close}"
    else:
        detail += "; real ML-1M check skipped (MOTIVEREC_ML1M_DIR unset)"
    verdict(6, ok, detail)


# 7 --------------------------------------------------------------------------------

# each listed invariant and the tests that check it
INVARIANT_TESTS = {
    "serialization round trip": ["test_types_config.py::test_item_record_roundtrip",
                                 "test_types_config.py::test_event_roundtrip",
                                 "test_types_config.py::test_user_roundtrip",
                                 "test_types_config.py::test_motive_roundtrip"],
    "event order is total": ["test_types_config.py::test_event_order_is_total"],
    "split monotone": ["test_ingest.py::test_split_monotone_and_conserving"],
    "5-core fixed point": ["test_ingest.py::test_core_filter_fixed_point_and_oracle"],
    "count conservation": ["test_ingest.py::test_split_monotone_and_conserving",
                           "test_ingest.py::test_toy_bundle_conservation_and_core"],
    "mock determinism": ["test_gateway.py::test_mock_always_emits_parseable_verdicts",
                         "test_gateway.py::test_embed_unit_norm_and_deterministic"],
    "embed depends on token multiset": ["test_gateway.py::test_embed_is_function_of_token_multiset"],
    "parser totality": ["test_gateway.py::test_parsers_are_total"],
    "top_k full sort": ["test_index.py::test_full_sort_and_every_k"],
    "MMR lambda=1 is top_k": ["test_index.py::test_mmr_lambda_one_is_top_k_without_seeds"],
    "MMR no duplicates or seeds": ["test_index.py::test_mmr_no_duplicates_no_seeds"],
    "query scale invariance": ["test_index.py::test_scale_invariance"],
    "augment idempotence": ["test_augment.py::test_rebuild_is_byte_identical"],
    "item coverage": ["test_augment.py::test_coverage_under_random_failures"],
    "bundle coverage": ["test_annotate.py::test_bundle_coverage_and_chronology"],
    "bundle chronology": ["test_annotate.py::test_bundle_coverage_and_chronology",
                          "test_annotate.py::test_chronology_and_coverage_on_toy"],
    "annotation off keeps shape": ["test_annotate.py::test_annotation_off_keeps_profile_shape"],
    "selection disjointness": ["test_retrieve.py::test_selection_disjoint_and_social_foreign"],
    "exploration off keeps plan schema": ["test_retrieve.py::test_exploration_off_uses_only_exploit"],
    "exploit permutation invariance": ["test_retrieve.py::test_exploit_permutation_invariant"],
    "RRF score bounds": ["test_search.py::test_rrf_bounds_and_oracle"],
    "RRF shifted duplicate list": ["test_search.py::test_rank_shifted_duplicate_keeps_order"],
    "loop termination": ["test_search.py::test_unreachable_threshold_runs_exactly_t_max",
                         "test_search.py::test_loop_never_exceeds_budget_on_toy"],
    "single-pass equivalence": ["test_search.py::test_reflection_off_equals_t_max_zero"],
    "Recall and Coverage monotone in K": ["test_evaluate.py::test_bounds_and_monotone_in_k"],
    "nDCG = 1 iff prefix hits": ["test_evaluate.py::test_ndcg_one_iff_prefix_all_hits"],
    "popularity bias direction": ["test_evaluate.py::test_popular_recommender_has_higher_popularity"],
    "metric oracle equivalence": ["test_evaluate.py::test_oracle_equivalence"],
    "CLI reruns byte-identical": ["test_cli.py::test_rerun_is_byte_identical"],
    "--jobs bounds concurrency": ["test_cli.py::test_jobs_bound_in_flight_calls",
                                  "test_gateway.py::test_in_flight_bound"],
}


@pytest.mark.skipif(os.environ.get("MOTIVEREC_INNER_RUN") == "1", reason="already inside the invariant run")
def test_criterion_7_invariant_suite():
    node_ids = sorted({f"tests/{n}" for tests in INVARIANT_TESTS.values() for n in tests})
    missing = [n for n in node_ids if not (TESTS.parent / n.split("::")[0]).exists()]
    env = dict(os.environ, MOTIVEREC_NO_NETWORK="1", MOTIVEREC_INNER_RUN="1")
    env.pop("MOTIVEREC_API_BASE", None)
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           "--ignore", str(TESTS / "test_acceptance.py"), str(TESTS)],
                          cwd=TESTS.parent, env=env, capture_output=True, text=True, timeout=300)
    elapsed = time.perf_counter() - start
    collected = subprocess.run([sys.executable, "-m", "pytest", "--collect-only", "-q", "-p", "no:cacheprovider",
                                *node_ids], cwd=TESTS.parent, env=env, capture_output=True, text=True)
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0 and collected.returncode == 0 and not missing and elapsed < 300
    verdict(7, ok, f"{len(INVARIANT_TESTS)} invariants mapped to {len(node_ids)} property tests; "
                   f"module suite without network: {summary} in {elapsed:.1f}s")


# 8 --------------------------------------------------------------------------------

def test_criterion_8_context_fidelity_guard():
    dataset, items, item_index, motive_index, anns, gw = toy_world()
    engine = Recommender(dataset.users, items, item_index, motive_index, anns, gw, PipelineConfig(bundle_window=4))
    candidates = ["submarine lighthouse", "origami volcano", "lighthouse keeper", "glacier courier",
                  "zeppelin orchestra"]
    users = sorted(dataset.users)[:20]
    violations, plans_seen, applied = [], 0, 0
    for n, user_id in enumerate(users):
        history = set()
        for item_id in dataset.users[user_id].items():
            history |= token_set(items[item_id].search_text)
        q = candidates[n % len(candidates)]
        assert not set(salient_tokens(q)) & history, "query must be token-disjoint from the history"
        record = engine.recommend(user_id, q)
        needed = salient_tokens(q)
        applied += record["status"] == "ok"
        for plan in record["plans"]:
            plans_seen += 1
            if not any(all(t in q_text.lower().split() for t in needed) for q_text in plan):
                violations.append((user_id, plan))
    verdict(8, not violations and plans_seen >= 20 and applied == 20,
            f"20 users, {plans_seen} query plans, plans missing the explicit query: {len(violations)}")
