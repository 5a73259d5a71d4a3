"""Mean and exponential-moment rank bounds for both built-in kernels over a q list."""

import argparse
import csv
import sys

from twistlab import afe, analysis


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--form", default="11a")
    ap.add_argument("--qs", default="101,1009")
    a = ap.parse_args(argv)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["kernel", "q", "phi0", "xi", "mean", "exp_moment", "max_p2_over_xi"])
    for kernel in ("plateau", "fejer2"):
        spec = analysis.RankBoundSpec(kernel=kernel)
        for q in (int(x) for x in a.qs.split(",")):
            r = analysis.rank_bound(afe.family(a.form, q), spec)
            w.writerow([kernel, q, r.phi0, r.xi, r.mean, r.exp_moment, r.max_p2_over_xi])


if __name__ == "__main__":
    main()
