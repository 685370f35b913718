"""Batch command-line front end.

Each subcommand reads the artifacts of the previous stage from the work
directory and writes its own::

    ingest     -> dataset/
    augment    -> items/items.jsonl, items/index.bin
    annotate   -> annotations/annotations.jsonl, annotations/index.bin
    recommend  -> recommendations/recommendations.jsonl
    evaluate   -> report/eval.txt, report/eval.json
    ablate     -> ablation/ablation.txt, ablation/ablation.json

Environment for ``--backend http``: MOTIVEREC_API_BASE, MOTIVEREC_API_KEY,
MOTIVEREC_CHAT_MODEL, MOTIVEREC_EMBED_MODEL.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path

from . import __version__
from .ablation import run_ablation_grid
from .annotate import build_motive_index, load_annotations, save_annotations
from .augment import build_item_index
from .cache import DiskCache
from .config import load_config
from .errors import MissingArtifactError, MotiveRecError
from .evaluate import metrics_at_k, relevance_sets, render_table, write_report
from .gateway import Gateway, HttpBackend, MockBackend, load_templates
from .index import VectorIndex
from .ingest import ML1M_SCHEMA, DatasetBundle, InteractionSchema, build_dataset, load_interactions, load_items, \
    load_ml1m_items
from .pipeline import Recommender, ranked_items
from .toydata import make_toy_dataset
from .types import ItemRecord

log = logging.getLogger("motiverec")

STAGE_FILES = {
    "ingest": "dataset/meta.json",
    "augment": "items/index.bin",
    "annotate": "annotations/index.bin",
    "recommend": "recommendations/recommendations.jsonl",
}


def _require(workdir: Path, stage: str) -> Path:
    path = workdir / STAGE_FILES[stage]
    if not path.exists():
        raise MissingArtifactError(stage, path)
    return path


def _gateway(args, cfg) -> Gateway:
    templates = load_templates(args.templates)
    if args.backend == "mock":
        backend = MockBackend(dimension=cfg.embedding_dim, seed=args.seed)
    else:
        backend = HttpBackend.from_env()
    return Gateway(backend, templates, max_in_flight=args.jobs, dimension=cfg.embedding_dim)


def _cache(args, name: str) -> DiskCache:
    path = Path(args.workdir) / "cache" / name
    if not args.resume and path.exists():
        shutil.rmtree(path)
    return DiskCache(path)


def _write_jsonl(path: Path, records) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _read_items(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return {r.item_id: r for r in (ItemRecord.from_dict(json.loads(line)) for line in fh if line.strip())}


# -- subcommands --------------------------------------------------------------

def cmd_ingest(args, cfg) -> int:
    if args.toy:
        events, items, user_meta = make_toy_dataset(args.toy_users, args.toy_items, seed=args.seed)
        rejected = 0
    else:
        if not args.interactions or not args.items:
            raise MotiveRecError("ingest needs --interactions and --items (or --toy)")
        if args.format == "ml1m":
            events, report = load_interactions(args.interactions, ML1M_SCHEMA)
            items = load_ml1m_items(args.items)
        else:
            schema = InteractionSchema(delimiter=args.delimiter.encode().decode("unicode_escape"))
            events, report = load_interactions(args.interactions, schema)
            items = load_items(args.items)
        user_meta = None
        rejected = report.n_rejected
    bundle = build_dataset(events, items, min_count=cfg.min_count, min_rating=cfg.min_rating,
                           user_metadata=user_meta)
    bundle.stats["rejected_rows"] = rejected
    bundle.save(Path(args.workdir) / "dataset")
    print(json.dumps(bundle.summary(), sort_keys=True))
    return 0


def cmd_augment(args, cfg) -> int:
    workdir = Path(args.workdir)
    _require(workdir, "ingest")
    dataset = DatasetBundle.load(workdir / "dataset")
    gateway = _gateway(args, cfg)
    index = VectorIndex(cfg.embedding_dim)
    items, report = build_item_index(dataset.items, gateway, index, jobs=args.jobs, cache=_cache(args, "augment"))
    out = workdir / "items"
    out.mkdir(parents=True, exist_ok=True)
    _write_jsonl(out / "items.jsonl", [items[i].to_dict() for i in sorted(items)])
    index.save(out / "index.bin")
    print(json.dumps(report.to_dict(), sort_keys=True))
    return 0


def cmd_annotate(args, cfg) -> int:
    workdir = Path(args.workdir)
    _require(workdir, "augment")
    dataset = DatasetBundle.load(workdir / "dataset")
    items = _read_items(workdir / "items" / "items.jsonl")
    gateway = _gateway(args, cfg)
    index = VectorIndex(cfg.embedding_dim)
    anns, report = build_motive_index(dataset.users, items, gateway, index, window=cfg.bundle_window,
                                      stride=cfg.bundle_stride, annotation_on=cfg.ablation.annotation_on,
                                      jobs=args.jobs, cache=_cache(args, "annotate"))
    out = workdir / "annotations"
    save_annotations(anns, out / "annotations.jsonl")
    index.save(out / "index.bin")
    print(json.dumps(report.to_dict(), sort_keys=True))
    return 0


def _recommender(args, cfg) -> Recommender:
    workdir = Path(args.workdir)
    _require(workdir, "annotate")
    dataset = DatasetBundle.load(workdir / "dataset")
    items = _read_items(workdir / "items" / "items.jsonl")
    item_index = VectorIndex.load(workdir / "items" / "index.bin")
    motive_index = VectorIndex.load(workdir / "annotations" / "index.bin")
    anns = load_annotations(workdir / "annotations" / "annotations.jsonl")
    return Recommender(dataset.users, items, item_index, motive_index, anns, _gateway(args, cfg), cfg)


def cmd_recommend(args, cfg) -> int:
    if args.query and not args.user:
        raise MotiveRecError("--query needs --user")
    engine = _recommender(args, cfg)
    if args.user:
        record = engine.recommend(args.user, args.query)
        record["config_fingerprint"] = cfg.fingerprint()
        print(json.dumps(record, indent=2, sort_keys=True))
        return 0 if record["status"] == "ok" else 1
    records = engine.recommend_all(jobs=args.jobs)
    _write_jsonl(Path(args.workdir) / "recommendations" / "recommendations.jsonl", records)
    statuses = {}
    for r in records:
        statuses[r["status"]] = statuses.get(r["status"], 0) + 1
    print(json.dumps({"users": len(records), "status": statuses}, sort_keys=True))
    return 0


def cmd_evaluate(args, cfg) -> int:
    workdir = Path(args.workdir)
    rec_path = _require(workdir, "recommend")
    dataset = DatasetBundle.load(workdir / "dataset")
    items = _read_items(workdir / "items" / "items.jsonl")
    with open(rec_path, encoding="utf-8") as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    relevance, excluded = relevance_sets(dataset.users)
    result = metrics_at_k(ranked_items(records), relevance, items, cfg.top_k_eval,
                          fingerprint=cfg.fingerprint(), n_excluded=excluded)
    out = workdir / "report"
    out.mkdir(parents=True, exist_ok=True)
    write_report(result, out / "eval.txt", out / "eval.json", name="motiverec")
    print(render_table({"motiverec": result}, cfg.top_k_eval), end="")
    return 0


def cmd_ablate(args, cfg) -> int:
    workdir = Path(args.workdir)
    _require(workdir, "augment")
    dataset = DatasetBundle.load(workdir / "dataset")
    items = _read_items(workdir / "items" / "items.jsonl")
    item_index = VectorIndex.load(workdir / "items" / "index.bin")
    ann_path = workdir / "annotations" / "annotations.jsonl"
    anns = load_annotations(ann_path) if ann_path.exists() and cfg.ablation.annotation_on else None
    gateway = _gateway(args, cfg)
    report = run_ablation_grid(dataset, items, item_index, cfg, gateway, annotations=anns, jobs=args.jobs,
                               cache=_cache(args, "annotate"))
    out = workdir / "ablation"
    out.mkdir(parents=True, exist_ok=True)
    report.write(out / "ablation.txt", out / "ablation.json")
    print(report.render(), end="")
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "augment": cmd_augment,
    "annotate": cmd_annotate,
    "recommend": cmd_recommend,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workdir", default="motiverec-run", help="artifact directory (default: %(default)s)")
    common.add_argument("--config", help="TOML config file; omitted keys use defaults")
    common.add_argument("--backend", choices=("mock", "http"), default="mock",
                        help="generation/embedding backend (default: %(default)s)")
    common.add_argument("--jobs", type=int, default=1,
                        help="max concurrent users and in-flight backend requests (default: %(default)s)")
    common.add_argument("--seed", type=int, default=0, help="seed for the mock backend and toy data")
    common.add_argument("--resume", action="store_true", help="reuse cached generations from earlier runs")
    common.add_argument("--templates", help="directory overriding the shipped prompt templates")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="motiverec", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")

    p = sub.add_parser("ingest", parents=[common], help="load, filter and split a dataset")
    p.add_argument("--interactions", help="interaction file")
    p.add_argument("--items", help="item metadata file (JSON lines, or movies.dat with --format ml1m)")
    p.add_argument("--format", choices=("tsv", "ml1m"), default="tsv")
    p.add_argument("--delimiter", default="\\t", help="column delimiter for --format tsv")
    p.add_argument("--toy", action="store_true", help="generate the synthetic toy dataset instead")
    p.add_argument("--toy-users", type=int, default=40)
    p.add_argument("--toy-items", type=int, default=60)

    sub.add_parser("augment", parents=[common], help="describe and embed every item")
    sub.add_parser("annotate", parents=[common], help="annotate user bundles with motives")
    p = sub.add_parser("recommend", parents=[common], help="recommend for all users, or one with --user")
    p.add_argument("--user", help="recommend for one user and print the audit record")
    p.add_argument("--query", help="explicit request text (needs --user)")
    sub.add_parser("evaluate", parents=[common], help="score recommendations on the test split")
    sub.add_parser("ablate", parents=[common], help="run the component ablation grid")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.jobs < 1:
            raise MotiveRecError("--jobs must be >= 1")
        cfg = load_config(args.config)
        print(f"# {args.command}: config fingerprint {cfg.fingerprint()}", file=sys.stderr)
        return COMMANDS[args.command](args, cfg)
    except MissingArtifactError as exc:
        _error(exc, stage=exc.stage)
        return 3
    except (MotiveRecError, FileNotFoundError) as exc:
        _error(exc)
        return 1


def _error(exc, **extra) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc), **extra}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
