"""Compare every filter family on a seeded synthetic dataset: baselines, one
hand-picked config per method, and a tuned eps-join.

    python3 scripts/synthetic_benchmark.py --n1 500 --n2 800 --matches 300 --tau 0.9
"""

import argparse

from erfilter.cli import print_table
from erfilter.ingest import SchemaSetting
from erfilter.methods import FilterConfig, evaluate
from erfilter.synth import make_dataset
from erfilter.tuner import TargetRecall, grid_search, space_for

CONFIGS = [
    ("pbw", {}),
    ("dbw", {}),
    ("sbw", dict(bp=True, bfr=0.5, pa="WEP", ws="ECBS")),
    ("qbw", dict(q=3, bp=True, bfr=0.5, pa="RCNP", ws="JS")),
    ("eqbw", dict(q=3, t=0.9, bfr=0.5, pa="WEP", ws="CBS")),
    ("sabw", dict(lmin=3, bmax=20, pa="BLAST", ws="CHI2")),
    ("esabw", dict(lmin=4, bmax=20, pa="WNP", ws="ARCS")),
    ("eps-join", dict(rm="C3G", sm="cosine", t=0.5)),
    ("knn-join", dict(rm="C3GM", sm="dice", K=2)),
    ("mh-lsh", dict(bands=64, rows=4, k=3)),
    ("hp-lsh", dict(tables=16, hashes=8)),
    ("cp-lsh", dict(tables=8, hashes=1, cp_dim=16, probes=16)),
    ("flat-knn", dict(K=3)),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n1", type=int, default=500)
    ap.add_argument("--n2", type=int, default=800)
    ap.add_argument("--matches", type=int, default=300)
    ap.add_argument("--noise", type=float, default=0.3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tau", type=float, default=0.9)
    args = ap.parse_args(argv)

    ds = make_dataset(args.n1, args.n2, args.matches, args.noise, args.seed)
    setting = SchemaSetting.agnostic()
    rows = []
    for method, params in CONFIGS:
        report, _ = evaluate(ds, FilterConfig.of(method, **params), setting, seeds=list(range(3)))
        rows.append({"config": str(FilterConfig.of(method, **params)), "pc": report.pc, "pq": report.pq,
                     "candidates": report.candidates, "rt_total": report.rt_total})
    print_table(rows, ["config", "pc", "pq", "candidates", "rt_total"])

    out = grid_search(ds, space_for("eps-join"), setting, TargetRecall(args.tau))
    print(f"\ntuned eps-join ({len(out.trace)} of {out.space.max_configs} configs evaluated, {out.status}):")
    print_table([out.best.row()], ["config", "pc", "pq", "candidates", "rt_total"])


if __name__ == "__main__":
    main()
