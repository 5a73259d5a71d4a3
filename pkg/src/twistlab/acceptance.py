"""Acceptance criteria A1-A15, each a callable returning a Check."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import afe, analysis, chargroup, hecke, modsym, moments
from .config import DEFAULT_QS
from .numtheory import primes_upto


@dataclass
class Check:
    id: str
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        body = ", ".join(f"{k}={_short(v)}" for k, v in self.details.items())
        return f"{self.id:<4} {'PASS' if self.passed else 'FAIL'}  {self.title} ({self.seconds:.1f}s)  {body}"


def _short(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)


def quasi_monotone(values, factor: float = 2.0) -> bool:
    return analysis.quasi_monotone(values, factor)


# ------------------------------------------------------------------- A1-A5


def a1_birch_stevens() -> tuple[bool, dict]:
    t0 = time.perf_counter()
    es = modsym.for_form("11a")
    res = {}
    for q in (3, 7, 13, 101, 499):
        tab = modsym.table(es, q, "11a")
        fam = afe.family("11a", q, allow_small=True)
        res[q] = moments.birch_stevens_check(tab, fam)
    dt = time.perf_counter() - t0
    worst = max(res.values())
    return worst < 1e-8 and dt < 30, {"max_residual": worst, "runtime_s": dt}


def a2_exponential_sums() -> tuple[bool, dict]:
    fft_vs_direct = 0.0
    for q in primes_upto(499).tolist():
        if q < 3:
            continue
        group = chargroup.build(q, allow_small=True)
        gauss = chargroup.gauss_all(group)
        for k in (2, 3, 4):
            a = chargroup.kloosterman_table(group, k, gauss)[1:]
            b = chargroup.kloosterman_direct(q, k)[1:]
            fft_vs_direct = max(fft_vs_direct, float(np.max(np.abs(a - b))))
    excess = -math.inf
    gauss0 = 0.0
    for q in primes_upto(997).tolist():
        if q < 3:
            continue
        group = chargroup.build(q, allow_small=True)
        gauss = chargroup.gauss_all(group)
        gauss0 = max(gauss0, abs(gauss[0] + 1 / math.sqrt(q)))
        for k in [k for k in range(-6, 7) if k]:  # Kl_0 is sqrt(q) at m = 1 by convention
            kl = chargroup.kloosterman_table(group, k, gauss)[1:]
            excess = max(excess, float(np.max(np.abs(kl))) - abs(k))
    g5 = chargroup.build(5, allow_small=True)
    quad = abs(chargroup.gauss_all(g5)[2] - 1)
    ok = fft_vs_direct < 1e-9 and excess <= 1e-9 and gauss0 == 0.0 and quad < 1e-12
    return ok, {"fft_vs_direct": fft_vs_direct, "max|Kl|-|k|": excess, "eps_chi0_err": gauss0,
                "quadratic_q5_err": quad}


def a3_mean_formula() -> tuple[bool, dict]:
    es = modsym.for_form("11a")
    d, ok = {}, True
    for q in (101, 1009):
        rep = moments.mean_identity_check(modsym.table(es, q, "11a"))
        size = abs(rep.computed)
        d[f"rel_err_{q}"] = rep.rel_err
        d[f"|M|_{q}"] = size
        ok &= rep.rel_err < 1e-8 and size < 5 / math.sqrt(q)
    return ok, d


def a4_correlation() -> tuple[bool, dict]:
    q = 101
    tab = modsym.table(modsym.for_form("11a"), q, "11a")
    fam = afe.family("11a", q)
    d = {}
    for u, v in ((1, 1), (2, 3)):
        d[f"rel_err_{u}{v}"] = moments.correlation_identity_check(tab, tab, fam, fam, u, v).rel_err
    return all(x < 1e-6 for x in d.values()), d


def a5_exact_zero() -> tuple[bool, dict]:
    rep = moments.second_moment(afe.family("37a", 101), afe.family("37b", 101))
    return abs(rep.computed) < 1e-8, {"|Q|": abs(rep.computed)}


# ------------------------------------------------------------------ A6-A10


def a6_root_number_angle() -> tuple[bool, dict]:
    d = {}
    for q in (101, 1009):
        fam = afe.family("11a", q)
        big = np.abs(fam.values) > 1e-6
        phase = fam.values[big] / np.conj(fam.values[big])
        d[f"max_err_{q}"] = float(np.max(np.abs(phase - fam.root_numbers[big])))
    return all(x < 1e-8 for x in d.values()), d


def a7_variance_slope() -> tuple[bool, dict]:
    t0 = time.perf_counter()
    rep = moments.variance_asymptotic("11a", DEFAULT_QS[:5])
    dt = time.perf_counter() - t0
    return rep.rel_dev < 0.25 and dt < 600, {"slope": rep.slope, "predicted": rep.predicted_slope,
                                              "rel_dev": rep.rel_dev, "runtime_s": dt}


def a8_first_moment() -> tuple[bool, dict]:
    e0, e1 = [], []
    for q in DEFAULT_QS:
        fam = afe.family("11a", q)
        e0.append(abs(moments.first_moment(fam, 1, 0).computed - 1))
        e1.append(abs(moments.first_moment(fam, 1, 1).computed))
    top = DEFAULT_QS[-1]
    bound = 0.5 * top ** (-0.1)
    ok = e0[-1] < bound and e1[-1] < bound and quasi_monotone(e0) and quasi_monotone(e1)
    return ok, {"|L(f;1,0)-1|": e0, "|L(f;1,1)|": e1, "bound": bound,
                "monotone_k0": quasi_monotone(e0), "monotone_k1": quasi_monotone(e1)}


def a9_second_moment() -> tuple[bool, dict]:
    rep = moments.second_moment_slope("11a", DEFAULT_QS[:5])
    q = DEFAULT_QS[-1]
    fam = afe.family("11a", q)
    Q = moments.second_moment(fam, fam).computed.real
    f = hecke.get_form("11a")
    mt = moments.main_term_MT(f, f, q).real
    dev = abs(Q - mt) / abs(mt)
    return rep.rel_dev < 0.25 and dev < 0.08, {"slope": rep.slope, "predicted": rep.predicted_slope,
                                                "rel_dev": rep.rel_dev, "Q": Q, "MT": mt, "MT_dev": dev}


VORONOI_PARAMS = (("Delta", 7, 3, 50.0), ("11a", 13, 5, 100.0))


def a10_voronoi() -> tuple[bool, dict]:
    d = {}
    for label, q, a, N in VORONOI_PARAMS:
        r = afe.voronoi_check(hecke.get_form(label), a, q, afe.Bump(), N)
        d[f"{label}@{q}"] = r.diff
    return all(x < 1e-6 for x in d.values()), d


# ----------------------------------------------------------------- A11-A15


def a11_evans() -> tuple[bool, dict]:
    ks = analysis.evans_ks(10007)
    q = 3001
    bound = 2 * q ** (-0.1)
    ev = abs(analysis.evans_twisted_first_moment(afe.family("11a", q)).computed)
    tr = abs(analysis.modsym_trace_correlation(modsym.table(modsym.for_form("11a"), q, "11a")))
    return ks < 0.06 and ev < bound and tr < bound, {"ks": ks, "evans_first": ev, "trace_corr": tr,
                                                      "bound": bound}


def a12_mollified() -> tuple[bool, dict]:
    q, lam = 2003, 0.1
    fam = afe.family("11a", q)
    spec = analysis.mollifier_coeffs("11a", lam, q)
    first, second = analysis.mollified_moments(fam, spec)
    nv = analysis.nonvanishing_report(fam, (0.0, math.pi), mollified=(first, second))
    m1 = first.computed.real
    ok = (0.8 <= m1 <= 1.2 and second.rel_err < 0.35 and nv.cs_bound <= nv.proportion
          and nv.proportion >= nv.eta_bound)
    return ok, {"first": m1, "second": second.computed.real, "predicted_second": second.predicted.real,
                "second_dev": second.rel_err, "cs_bound": nv.cs_bound, "proportion": nv.proportion,
                "eta": nv.eta_bound}


def a13_level37() -> tuple[bool, dict]:
    d, ok = {}, True
    aps = {}
    for label in ("37a", "37b"):
        es = modsym.for_form(label)
        ap = modsym.eigen_ap(37, hecke.get_form(label).source.system, 200)
        aps[label] = tuple(ap[p] for p in sorted(ap))
        ok &= all(isinstance(v, int) for v in ap.values())
        x, y = es.rational(0, 1)
        zero = abs(es.omega_plus * x + es.omega_minus * y)
        sign = afe.root_number_estimate(hecke.get_form(label)).sign
        d[f"<0>_{label}"] = zero
        d[f"eps_{label}"] = sign
    ok &= aps["37a"] != aps["37b"]
    ok &= d["<0>_37a"] < 1e-8 and d["eps_37a"] == -1
    ok &= d["<0>_37b"] > 1e-8 and d["eps_37b"] == 1
    return ok, d


def a14_resonator() -> tuple[bool, dict]:
    fam = afe.family("11a", 10007)
    rep = analysis.resonator_run(fam, analysis.ResonatorSpec("11a"))
    dev = abs(rep.Q1 / rep.Q1_product - 1)
    lift = rep.argmax_abs_L / rep.median_abs_L
    return dev < 0.10 and lift >= 1.5, {"Q1": rep.Q1, "product": rep.Q1_product, "Q1_dev": dev,
                                        "argmax|L|/median": lift}


def a15_rank() -> tuple[bool, dict]:
    spec = analysis.RankBoundSpec()
    d, ok, moms = {}, True, []
    for q in (101, 1009):
        rep = analysis.rank_bound(afe.family("11a", q), spec)
        d[f"mean_{q}"] = rep.mean
        d[f"exp_{q}"] = rep.exp_moment
        ok &= rep.mean <= 8
        if rep.min_bound_at_zeros is not None:
            ok &= rep.min_bound_at_zeros >= 1
        ok &= math.isfinite(rep.exp_moment)
        moms.append(rep.exp_moment)
    drift = abs(moms[1] / moms[0] - 1)
    d["exp_drift"] = drift
    return ok and drift <= 0.2, d


CRITERIA: dict[str, tuple[str, Callable[[], tuple[bool, dict]]]] = {
    "A1": ("Birch-Stevens formula", a1_birch_stevens),
    "A2": ("exponential-sum identities", a2_exponential_sums),
    "A3": ("mean formula", a3_mean_formula),
    "A4": ("correlation identity", a4_correlation),
    "A5": ("exact zero for 37a x 37b", a5_exact_zero),
    "A6": ("root number / angle identity", a6_root_number_angle),
    "A7": ("variance slope", a7_variance_slope),
    "A8": ("first moment decay", a8_first_moment),
    "A9": ("second moment slope and main term", a9_second_moment),
    "A10": ("Voronoi identity", a10_voronoi),
    "A11": ("Evans statistics", a11_evans),
    "A12": ("mollified moments", a12_mollified),
    "A13": ("level-37 systems", a13_level37),
    "A14": ("resonator", a14_resonator),
    "A15": ("rank bounds", a15_rank),
}

QUICK = ("A1", "A2", "A3", "A4", "A5")


def run(cid: str) -> Check:
    title, fn = CRITERIA[cid]
    t0 = time.perf_counter()
    ok, details = fn()
    return Check(cid, title, bool(ok), details, time.perf_counter() - t0)


def run_all(ids=None, quick: bool = False, echo: Callable[[str], None] | None = None) -> list[Check]:
    ids = list(QUICK if quick else CRITERIA) if ids is None else list(ids)
    out = []
    for cid in ids:
        chk = run(cid)
        if echo is not None:
            echo(chk.line())
        out.append(chk)
    return out


__all__ = ["Check", "CRITERIA", "QUICK", "VORONOI_PARAMS", "run", "run_all"]
