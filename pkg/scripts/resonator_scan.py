"""Resonator runs over a range of L: Q1 against the product prediction and the argmax lift."""

import argparse
import csv
import sys
import warnings

from twistlab import afe, analysis


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--form", default="11a")
    ap.add_argument("--q", type=int, default=10007)
    ap.add_argument("--Ls", default="8,9,10,12,14")
    a = ap.parse_args(argv)
    fam = afe.family(a.form, a.q)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["L", "primes", "Q1", "Q1_product", "Q1_dev", "argmax_abs_L", "median_abs_L"])
    for L in (float(x) for x in a.Ls.split(",")):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            r = analysis.resonator_run(fam, analysis.ResonatorSpec(a.form, L=L))
        w.writerow([L, len(r.primes), r.Q1, r.Q1_product, abs(r.Q1 / r.Q1_product - 1), r.argmax_abs_L,
                    r.median_abs_L])


if __name__ == "__main__":
    main()
