"""Command-line harness: ``erfilter run | tune | profile | eval``."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import warnings
from pathlib import Path

from .core import (
    CandidatePair,
    CandidateSet,
    ConfigError,
    DataError,
    ERFilterError,
    GroundTruth,
    dedupe,
    pair_completeness,
    pairs_quality,
)
from .datasets import DATA_ENV, load_dataset
from .ingest import (
    CleaningConfig,
    SchemaSetting,
    attribute_stats,
    best_attribute,
    dataset_profile,
    load_collection,
    load_groundtruth,
)
from .methods import Dataset, FilterConfig, Method, evaluate
from .tuner import TargetRecall, grid_search, full_scan, load_space, space_for, write_trace_csv, write_trace_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNREACHABLE = 3
EXIT_DATA = 4

# flag -> FilterConfig key
PARAM_FLAGS = {
    "q": "q", "t": "t", "lmin": "lmin", "bmax": "bmax", "bp": "bp", "bfr": "bfr", "ws": "ws", "pa": "pa",
    "cl": "cl", "sm": "sm", "rm": "rm", "K": "K", "rvs": "rvs", "bands": "bands", "rows": "rows", "k": "k",
    "tables": "tables", "hashes": "hashes", "cp_dim": "cp_dim", "probes": "probes",
}


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data")
    g.add_argument("--dataset", help=f"dataset directory, or a name under ${DATA_ENV}")
    g.add_argument("--e1", help="first collection (CSV with header)")
    g.add_argument("--e2", help="second collection (CSV with header)")
    g.add_argument("--gt", help="ground truth (two columns: E1 id, E2 id)")
    g.add_argument("--delimiter", default=",")
    g.add_argument("--id-column", default="id")
    g.add_argument("--lenient-gt", action="store_true",
                   help="accept ground truths that match an id more than once")


def _add_param_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("method parameters (accepted keys depend on --method)")
    g.add_argument("--q", type=int, help="q-gram length (qbw, eqbw)")
    g.add_argument("--t", type=float, help="eqbw combination ratio, or eps-join similarity threshold")
    g.add_argument("--lmin", type=int, help="minimum suffix length (sabw, esabw)")
    g.add_argument("--bmax", type=int, help="maximum block size (sabw, esabw)")
    g.add_argument("--bp", help="block purging on/off")
    g.add_argument("--bfr", type=float, help="block filtering ratio (1.0 disables filtering)")
    g.add_argument("--ws", help="weighting scheme: ARCS CBS ECBS JS EJS CHI2")
    g.add_argument("--pa", help="pruning: CP BLAST CEP CNP RCNP RWNP WEP WNP")
    g.add_argument("--cl", help="cleaning (stop-words + stemming) on/off")
    g.add_argument("--sm", help="similarity measure: cosine dice jaccard")
    g.add_argument("--rm", help="representation model, e.g. T1G, C3GM")
    g.add_argument("--K", type=int, help="neighbors per query (knn-join, flat-knn)")
    g.add_argument("--rvs", help="index E2 and query with E1")
    g.add_argument("--bands", type=int)
    g.add_argument("--rows", type=int)
    g.add_argument("--k", type=int, help="shingle size (mh-lsh)")
    g.add_argument("--tables", type=int)
    g.add_argument("--hashes", type=int)
    g.add_argument("--cp-dim", dest="cp_dim", type=int)
    g.add_argument("--probes", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="erfilter", description="Entity-resolution filtering benchmark harness.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one filter configuration and score it")
    run.add_argument("--method", required=True, help=", ".join(m.value for m in Method))
    run.add_argument("--schema", default="agnostic", help="agnostic or based:<attribute>")
    run.add_argument("--seeds", type=int, default=10, help="repetitions for stochastic methods")
    run.add_argument("--output", help="directory for report.csv / report.json")
    run.add_argument("--dump-candidates", help="write candidate pairs to this CSV")
    run.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    _add_dataset_args(run)
    _add_param_args(run)

    tune = sub.add_parser("tune", help="grid-search a method family under a recall target")
    tune.add_argument("--family", required=True, help="method whose space is searched")
    tune.add_argument("--schema", default="agnostic")
    tune.add_argument("--tau", type=float, default=0.9)
    tune.add_argument("--space", help="JSON space file replacing the built-in domain")
    tune.add_argument("--full-scan", action="store_true", help="disable early termination")
    tune.add_argument("--seeds", type=int, default=10)
    tune.add_argument("--output", help="directory for trace.csv / trace.json")
    tune.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    _add_dataset_args(tune)

    prof = sub.add_parser("profile", help="attribute coverage/distinctiveness and dataset statistics")
    prof.add_argument("--schema", default="agnostic")
    prof.add_argument("--output")
    _add_dataset_args(prof)

    ev = sub.add_parser("eval", help="score a candidate dump against a ground truth")
    ev.add_argument("--candidates", required=True, help="CSV of (E1 id, E2 id) pairs")
    ev.add_argument("--output")
    ev.add_argument("--gt-header", action="store_true",
                    help="skip the first ground-truth row (only used without collections)")
    _add_dataset_args(ev)
    return ap


def _dataset(args, need_gt: bool = True) -> Dataset:
    if args.dataset:
        return load_dataset(args.dataset, lenient=args.lenient_gt)
    if not (args.e1 and args.e2):
        raise ConfigError(f"give --dataset (or set ${DATA_ENV}) or both --e1 and --e2")
    opts = dict(delimiter=args.delimiter, id_column=args.id_column)
    e1 = load_collection(args.e1, "E1", **opts)
    e2 = load_collection(args.e2, "E2", **opts)
    gt = None
    if args.gt:
        gt = load_groundtruth(args.gt, e1, e2, delimiter=args.delimiter, clean_clean=not args.lenient_gt)
    elif need_gt:
        raise ConfigError("--gt is required")
    return Dataset(e1, e2, gt, name=Path(args.e1).parent.name or "adhoc")


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.4f}" if v >= 1e-3 or v == 0 else f"{v:.2e}"
    return str(v)


def print_table(rows: list[dict], cols: list[str], out=None) -> None:
    out = out or sys.stdout
    cells = [[_fmt(r.get(c)) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) if cells else len(c) for i, c in enumerate(cols)]
    print("  ".join(c.ljust(w) for c, w in zip(cols, widths)), file=out)
    for row in cells:
        print("  ".join(v.ljust(w) for v, w in zip(row, widths)), file=out)


def _write_rows(path: Path, rows: list[dict]) -> None:
    cols = list(rows[0]) if rows else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        w.writerows(rows)


def cmd_run(args) -> int:
    params = {PARAM_FLAGS[k]: v for k, v in vars(args).items() if k in PARAM_FLAGS and v is not None}
    cfg = FilterConfig.of(args.method, **params)
    setting = SchemaSetting.parse(args.schema)
    ds = _dataset(args)
    setting.check_against(ds.e1, ds.e2)
    report, pairs = evaluate(ds, cfg, setting, list(range(args.seeds)), keep_pairs=bool(args.dump_candidates))
    row = report.row()
    print_table([row], ["dataset", "schema", "method", "pc", "pq", "candidates", "rt_total", *cfg.method.stages])
    print(f"config: {json.dumps(report.config)}")
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        _write_rows(out / "report.csv", [row])
        (out / "report.json").write_text(json.dumps(report.__dict__, indent=2, default=str), encoding="utf-8")
    if args.dump_candidates:
        write_candidates(args.dump_candidates, pairs.to_candidate_set(ds.e1, ds.e2))
    return EXIT_OK


def write_candidates(path, cs: CandidateSet) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["e1_id", "e2_id"])
        w.writerows(cs.sorted())


def read_candidates(path) -> list[CandidatePair]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows and rows[0] == ["e1_id", "e2_id"]:
        rows = rows[1:]
    bad = [i for i, r in enumerate(rows, start=1) if len(r) != 2]
    if bad:
        raise DataError(f"{path}: rows {bad[:5]} do not have two fields")
    return [CandidatePair(a.strip(), b.strip()) for a, b in rows]


def cmd_tune(args) -> int:
    setting = SchemaSetting.parse(args.schema)
    target = TargetRecall(args.tau)
    space = load_space(args.space) if args.space else space_for(args.family)
    if args.space and space.method is not Method.parse(args.family):
        raise ConfigError(f"space file is for {space.method.value}, not {args.family}")
    ds = _dataset(args)
    setting.check_against(ds.e1, ds.e2)
    search = full_scan if args.full_scan else grid_search
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        outcome = search(ds, space, setting, target, threads=args.threads, seeds=list(range(args.seeds)))
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(f"space: {space.method.value}  max configurations: {space.max_configs}  evaluated: {len(outcome.trace)}")
    if outcome.best is not None:
        print_table([outcome.best.row()], ["config", "pc", "pq", "candidates", "rt_total"])
    print(f"status: {outcome.status} (tau={target.tau})")
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        write_trace_csv(outcome, out / "trace.csv")
        write_trace_json(outcome, out / "trace.json")
    return EXIT_OK if outcome.reached else EXIT_UNREACHABLE


def cmd_profile(args) -> int:
    ds = _dataset(args, need_gt=False)
    setting = SchemaSetting.parse(args.schema)
    setting.check_against(ds.e1, ds.e2)
    stats = attribute_stats(ds.e1, ds.e2, ds.gt)
    rows = [{"attribute": s.name, "coverage": s.coverage, "distinctiveness": s.distinctiveness,
             "gt_coverage": s.gt_coverage} for s in stats]
    print_table(rows, ["attribute", "coverage", "distinctiveness", "gt_coverage"])
    best = best_attribute(stats)
    prof = dataset_profile(ds.e1, ds.e2, setting, CleaningConfig.off())
    summary = {"entities_e1": len(ds.e1), "entities_e2": len(ds.e2),
               "duplicates": len(ds.gt) if ds.gt is not None else None,
               "cartesian": len(ds.e1) * len(ds.e2), "best_attribute": best, **prof.__dict__}
    for k, v in summary.items():
        print(f"{k}: {_fmt(v)}")
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        _write_rows(out / "attributes.csv", rows)
        (out / "profile.json").write_text(json.dumps({"attributes": rows, **summary}, indent=2), encoding="utf-8")
    return EXIT_OK


def cmd_eval(args) -> int:
    pairs = read_candidates(args.candidates)
    if args.dataset or (args.e1 and args.e2):
        ds = _dataset(args)
        cs, gt = dedupe(pairs, ds.e1, ds.e2), ds.gt
    else:
        if not args.gt:
            raise ConfigError("--gt is required")
        cs = dedupe(pairs)
        with open(args.gt, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh, delimiter=args.delimiter) if r]
        if args.gt_header:
            rows = rows[1:]
        if any(len(r) != 2 for r in rows):
            raise DataError(f"{args.gt}: every ground-truth row needs two fields")
        gt = GroundTruth(frozenset(CandidatePair(a.strip(), b.strip()) for a, b in rows))
    row = {"candidates": len(cs), "pc": pair_completeness(cs, gt), "pq": pairs_quality(cs, gt),
           "matches": len(gt)}
    print_table([row], ["candidates", "matches", "pc", "pq"])
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        _write_rows(out / "eval.csv", [row])
        (out / "eval.json").write_text(json.dumps(row, indent=2), encoding="utf-8")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "tune": cmd_tune, "profile": cmd_profile, "eval": cmd_eval}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError, ERFilterError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
