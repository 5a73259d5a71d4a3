"""Decay series along a q grid, one `q,value` CSV per quantity.

    python scripts/decay_grid.py --out results/decay --qs 101,211,499,1009,2003,3001
"""

import argparse
import csv
from pathlib import Path

from twistlab import afe, analysis, modsym, moments
from twistlab.config import DEFAULT_QS


def series(label: str, qs) -> dict[str, list[float]]:
    es = modsym.for_form(label)
    out = {k: [] for k in ("first_k0", "first_k1", "evans_l1", "evans_l2", "trace")}
    for q in qs:
        fam = afe.family(label, q)
        out["first_k0"].append(moments.first_moment(fam, 1, 0).abs_err)
        out["first_k1"].append(moments.first_moment(fam, 1, 1).abs_err)
        out["evans_l1"].append(abs(analysis.evans_twisted_first_moment(fam, 1).computed))
        out["evans_l2"].append(abs(analysis.evans_twisted_first_moment(fam, 2).computed))
        out["trace"].append(abs(analysis.modsym_trace_correlation(modsym.table(es, q, label))))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--form", default="11a")
    ap.add_argument("--qs", default=",".join(map(str, DEFAULT_QS)))
    ap.add_argument("--out", default="results/decay")
    a = ap.parse_args(argv)
    qs = [int(x) for x in a.qs.split(",")]
    root = Path(a.out)
    root.mkdir(parents=True, exist_ok=True)
    for name, vals in series(a.form, qs).items():
        with open(root / f"{a.form}_{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["q", "value"])
            w.writerows((q, repr(v)) for q, v in zip(qs, vals))
        flag = "monotone" if analysis.quasi_monotone(vals) else "NOT monotone"
        print(f"{name:<9} {flag:<13} " + " ".join(f"{v:.3g}" for v in vals))


if __name__ == "__main__":
    main()
