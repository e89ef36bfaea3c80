"""Run the published best-configuration rows on whichever benchmark datasets
are present under $ERFILTER_DATA and print measured vs reported PC/PQ.

    python3 scripts/reproduce_rows.py [--csv out.csv]
"""

import argparse
import csv
import sys

from erfilter.datasets import REFERENCE_ROWS, available, load_dataset
from erfilter.ingest import SchemaSetting
from erfilter.methods import FilterConfig, evaluate


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--csv", help="also write the comparison table here")
    args = ap.parse_args(argv)

    rows = []
    cache = {}
    for (name, schema), methods in REFERENCE_ROWS.items():
        if not available(name):
            print(f"skip {name}: not found under $ERFILTER_DATA", file=sys.stderr)
            continue
        if name not in cache:
            cache[name] = load_dataset(name)
        ds = cache[name]
        setting = SchemaSetting.parse(schema)
        if setting.attribute:
            # benchmark files differ in attribute capitalisation
            attrs = {a for p in ds.e1 for a, _ in p.pairs}
            match = [a for a in attrs if a.lower() == setting.attribute.lower()]
            setting = SchemaSetting.based(match[0] if match else setting.attribute)
        for method, (params, pc_ref, pq_ref) in methods.items():
            report, _ = evaluate(ds, FilterConfig.of(method, **params), setting)
            rows.append({"dataset": name, "schema": schema, "method": method,
                         "pc": round(report.pc, 3), "pc_ref": pc_ref, "d_pc": round(report.pc - pc_ref, 3),
                         "pq": round(report.pq, 3), "pq_ref": pq_ref, "d_pq": round(report.pq - pq_ref, 3),
                         "rt": round(report.rt_total, 3)})
            r = rows[-1]
            print(f"{name:12} {schema:14} {method:10} PC {r['pc']:.3f} ({pc_ref:.3f})  "
                  f"PQ {r['pq']:.3f} ({pq_ref:.3f})  {r['rt']:.2f}s")
    if not rows:
        print("no reference dataset available; set ERFILTER_DATA", file=sys.stderr)
        return 1
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
