"""Variance and second-moment fits against log q, with jackknife intercepts."""

import argparse
import json

from twistlab import moments


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--form", default="11a")
    ap.add_argument("--qs", default="101,211,499,1009,2003")
    a = ap.parse_args(argv)
    qs = [int(x) for x in a.qs.split(",")]
    reps = [moments.variance_asymptotic(a.form, qs), moments.second_moment_slope(a.form, qs)]
    print(json.dumps([r.record() for r in reps], indent=1))


if __name__ == "__main__":
    main()
