"""Family averages over primitive characters and the modular-symbol identities.

Every average is taken over conjugate pairs (chi, conj chi) in a fixed
order, so cancellations forced by the functional equation are kept
to rounding level.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from math import gcd

import numpy as np

from . import afe, chargroup, hecke, modsym
from .afe import AFEConfig, CentralValueFamily
from .modsym import ModularSymbolTable
from .numtheory import is_prime, modinv


@dataclass
class MomentReport:
    kind: str
    params: dict
    computed: complex
    predicted: complex | None = None
    notes: str = ""
    abs_err: float = field(init=False)
    rel_err: float = field(init=False)

    def __post_init__(self):
        self.computed = complex(self.computed)
        if self.predicted is None:
            self.abs_err = self.rel_err = float("nan")
        else:
            self.predicted = complex(self.predicted)
            self.abs_err = abs(self.computed - self.predicted)
            self.rel_err = self.abs_err / max(1.0, abs(self.predicted))

    def record(self) -> dict:
        pred = self.predicted
        return {
            "kind": self.kind,
            **{k: _plain(v) for k, v in self.params.items()},
            "computed_re": self.computed.real,
            "computed_im": self.computed.imag,
            "predicted_re": None if pred is None else pred.real,
            "predicted_im": None if pred is None else pred.imag,
            "abs_err": self.abs_err,
            "rel_err": self.rel_err,
            "notes": self.notes,
        }


def _plain(v):
    if isinstance(v, complex):
        return repr(v).strip("()")
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def write_reports_csv(fh, reports: list[MomentReport]) -> None:
    """One row per report; parameter columns are the union over reports."""
    recs = [r.record() for r in reports]
    head = ["kind", "q"]
    for rec in recs:
        for k in rec:
            if k not in head and k not in _TAIL:
                head.append(k)
    head += [k for k in _TAIL]
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(head)
    for rec in recs:
        w.writerow(["" if rec.get(k) is None else _fmt(rec.get(k)) for k in head])


_TAIL = ("computed_re", "computed_im", "predicted_re", "predicted_im", "abs_err", "rel_err", "notes")


def _fmt(v):
    return repr(v) if isinstance(v, float) else v


def reports_json(reports: list[MomentReport], config: dict | None = None) -> str:
    out = {"config": config or {}, "records": [r.record() for r in reports]}
    return json.dumps(out, indent=1, allow_nan=True)


# ------------------------------------------------------------- helpers


def pair_sum(values: np.ndarray) -> complex:
    """sum over j = 1..q-2 (values[j-1]) taken conjugate pair by pair.

    Pairs (j, n-j) are added first, the self-conjugate middle term last,
    and the pair totals are combined with fsum.
    """
    v = np.asarray(values, dtype=np.complex128)
    m = len(v)  # q - 2
    n = m + 1
    j = np.arange(1, (n + 1) // 2)
    pairs = v[j - 1] + v[n - j - 1]
    parts = list(pairs)
    if n % 2 == 0:
        parts.append(v[n // 2 - 1])
    return complex(math.fsum(p.real for p in parts), math.fsum(p.imag for p in parts))


def _chi_nontrivial(fam: CentralValueFamily, a: int) -> np.ndarray:
    group = chargroup.build(fam.q, allow_small=True)
    return group.chi_all(a)[1:]


def _gauss(fam: CentralValueFamily) -> np.ndarray:
    if fam.gauss is not None:
        return fam.gauss
    return chargroup.gauss_all(chargroup.build(fam.q, allow_small=True))


def _rep(a: int, q: int) -> int:
    """Representative of a mod q in [1, q]."""
    r = a % q
    return q if r == 0 else r


# -------------------------------------------------------- first moment


def first_moment(fam: CentralValueFamily, ell: int = 1, k: int = 0) -> MomentReport:
    """(1/phi*(q)) sum* L(f x chi, s) eps_chi^k chi(ell), with its predicted main term."""
    q = fam.q
    if ell % q == 0:
        raise ValueError("q divides ell")
    if abs(k) > 6:
        raise ValueError("|k| <= 6 required")
    eps = _gauss(fam)[1:]
    w = eps**k * _chi_nontrivial(fam, ell)
    comp = pair_sum(fam.values * w) / (q - 2)
    form = hecke.get_form(fam.label)
    pred = 0.0
    if k == 0:
        lb = _rep(modinv(ell, q), q)
        pred += hecke.lam(form, lb) / math.sqrt(lb)
    if k == -2:
        lr = _rep(ell * form.level, q)
        pred += form.eps() * hecke.lam(form, lr) / math.sqrt(lr)
    return MomentReport("first", {"q": q, "form": fam.label, "ell": ell, "k": k, "s": fam.s},
                        comp, pred)


# ------------------------------------------------------- second moment


def second_moment(fam_f: CentralValueFamily, fam_g: CentralValueFamily, ell: int = 1,
                  ellp: int = 1, with_main_term: bool = False) -> MomentReport:
    """(1/phi*(q)) sum* L(f x chi, s) conj L(g x chi, s) chi(ell) conj chi(ell')."""
    if fam_f.q != fam_g.q:
        raise ValueError("families have different q")
    if abs(fam_f.s - fam_g.s) > 1e-15:
        raise ValueError("families have different s")
    q = fam_f.q
    if (ell * ellp) % q == 0:
        raise ValueError("q divides ell * ell'")
    prod = afe.pair_products(fam_f, fam_g)
    w = _chi_nontrivial(fam_f, ell) * np.conj(_chi_nontrivial(fam_f, ellp))
    comp = pair_sum(prod * w) / (q - 2)
    pred = None
    if with_main_term:
        pred = main_term_MT(hecke.get_form(fam_f.label), hecke.get_form(fam_g.label), q,
                            fam_f.s, ell, ellp)
    params = {"q": q, "form": fam_f.label, "form_g": fam_g.label, "ell": ell, "ellp": ellp,
              "s": fam_f.s}
    return MomentReport("second", params, comp, pred)


def _level_split(r: int, rp: int) -> tuple[int, int, int]:
    d = gcd(r, rp)
    return r // d, rp // d, d


def main_term_MT(f: hecke.Newform, g: hecke.Newform, q: int, s: complex = 0.5, ell: int = 1,
                 ellp: int = 1, cfg: AFEConfig = AFEConfig()) -> complex:
    """Diagonal main term of the twisted second moment.

    term1 = sum_n lam_f(ell' n) lam_g(ell n) / (ell'^s ell^sbar n^{2 sigma}) W_s(ell ell' n^2 / X)
    term2 = eps(f,g,s) lam_f(rho) lam_g(rho') / (rho^{1-s} rho'^{1-sbar})
            * sum_n lam_f(ell n) lam_g(ell' n) / (ell^{1-s} ell'^{1-sbar} n^{2-2 sigma})
              * W_{1-s}(sqrt(rho rho') ell ell' n^2 / X)
    with X = q^2 sqrt(r r') and r = rho delta, r' = rho' delta.
    """
    s = complex(s)
    sb = s.conjugate()
    sig = s.real
    r, rp = f.level, g.level
    rho, rhop, delta = _level_split(r, rp)
    if gcd(ell, ellp) != 1:
        g0 = gcd(ell, ellp)
        ell, ellp = ell // g0, ellp // g0
    if gcd(ell * ellp, q * r * rp) != 1:
        raise ValueError("(ell ell', q r r') must be 1")
    X = q * q * math.sqrt(r * rp)

    def series(wt, c, a, b, expo):
        # sum_n lam_f(a n) lam_g(b n) n^{-expo} wt(c n^2 / X)
        n_max = int(math.ceil(math.sqrt(wt.y_cut * X / c))) + 1
        f.ensure(a * n_max)
        g.ensure(b * n_max)
        n = np.arange(1, n_max + 1)
        lf = f.lam_array(a * n_max)[a * n]
        lg = g.lam_array(b * n_max)[b * n]
        t = lf * lg * np.exp(-expo * np.log(n)) * wt(c * n.astype(float) ** 2 / X)
        return complex(math.fsum(t.real), math.fsum(t.imag))

    w1 = afe.weight_W(f, g, s, cfg)
    t1 = series(w1, ell * ellp, ellp, ell, 2 * sig) / (ellp**s * ell**sb)
    if abs(s - 0.5) < 1e-15:
        eps_fg = f.eps() * g.eps()
        w2 = w1
    else:
        eps_fg = f.eps() * g.eps() * np.exp(
            (0.5 - s) * math.log(q * q * r) + (0.5 - sb) * math.log(q * q * rp)
            + afe.log_L_inf(f, 1 - s) - afe.log_L_inf(f, s)
            + afe.log_L_inf(g, 1 - sb) - afe.log_L_inf(g, sb))
        w2 = afe.weight_W(f, g, 1 - s, cfg)
    c2 = math.sqrt(rho * rhop) * ell * ellp
    lead = eps_fg * hecke.lam(f, rho) * hecke.lam(g, rhop) / (rho ** (1 - s) * rhop ** (1 - sb))
    t2 = lead * series(w2, c2, ell, ellp, 2 - 2 * sig) / (ell ** (1 - s) * ellp ** (1 - sb))
    return complex(t1 + t2)


def mt_leading_constant(f: hecke.Newform, g: hecke.Newform) -> float:
    """1 + eps(f) eps(g) lam_f(rho) lam_g(rho') / sqrt(rho rho') (case f != g)."""
    rho, rhop, _ = _level_split(f.level, g.level)
    return 1.0 + f.eps() * g.eps() * hecke.lam(f, rho) * hecke.lam(g, rhop) / math.sqrt(rho * rhop)


# ------------------------------------------------------- modular symbols


def local_factors(form: hecke.Newform, q: int) -> tuple[float, float]:
    """(L_q(f, 1/2), L_q(f_q, 1/2)) for q prime to the level."""
    x = q**-0.5
    lq = hecke.lam(form, q)
    Lq = 1.0 / (1.0 - lq * x + x * x)
    return Lq, (Lq - 1.0) / x


def mean_formula(form: hecke.Newform, q: int, central: float | None = None) -> float:
    Lq, Lqq = local_factors(form, q)
    if central is None:
        central = afe.untwisted_central_value(form)
    return (math.sqrt(q) / (q - 1) * Lqq / Lq - 1.0 / (q - 1)) * central


def mean_identity_check(tab: ModularSymbolTable, form: hecke.Newform | None = None) -> MomentReport:
    """Mean of the modular-symbol table against its closed form."""
    form = form or hecke.get_form(tab.label)
    pred = mean_formula(form, tab.q)
    Lq, Lqq = local_factors(form, tab.q)
    note = f"L_q(f_q,1/2) - lambda(q) = {Lqq - hecke.lam(form, tab.q):.3e}"
    return MomentReport("mean", {"q": tab.q, "form": form.label}, tab.mean, pred, note)


def correlation_lhs(tab_f: ModularSymbolTable, tab_g: ModularSymbolTable, u: int, v: int) -> complex:
    q = tab_f.q
    a = np.arange(1, q)
    x = tab_f.values[(a * u) % q] - tab_f.mean
    y = tab_g.values[(a * v) % q] - tab_g.mean
    z = x * np.conj(y)
    return complex(math.fsum(z.real), math.fsum(z.imag)) / (q - 1)


def correlation_rhs(fam_f: CentralValueFamily, fam_g: CentralValueFamily, u: int, v: int) -> complex:
    q = fam_f.q
    prod = afe.pair_products(fam_f, fam_g)
    w = _chi_nontrivial(fam_f, u) * np.conj(_chi_nontrivial(fam_f, v))
    return q / (q - 1) ** 2 * pair_sum(prod * w)


def correlation_identity_check(tab_f: ModularSymbolTable, tab_g: ModularSymbolTable,
                               fam_f: CentralValueFamily, fam_g: CentralValueFamily,
                               u: int = 1, v: int = 1) -> MomentReport:
    """C_{f,g}(u, v; q) from symbol tables against the L-value side."""
    q = tab_f.q
    if len({tab_f.q, tab_g.q, fam_f.q, fam_g.q}) != 1:
        raise ValueError("mismatched q")
    if (u * v) % q == 0:
        raise ValueError("u, v must be units mod q")
    lhs = correlation_lhs(tab_f, tab_g, u, v)
    rhs = correlation_rhs(fam_f, fam_g, u, v)
    rep = MomentReport("correlation", {"q": q, "form": tab_f.label, "form_g": tab_g.label,
                                       "u": u, "v": v}, lhs, rhs)
    # both sides are O(log q); relative error is the meaningful scale here
    rep.rel_err = rep.abs_err / max(abs(rhs), 1e-300)
    return rep


def birch_stevens_values(tab: ModularSymbolTable, gauss: np.ndarray | None = None) -> np.ndarray:
    """(eps_chi / sqrt q) sum_a chi(-abar) <a/q> for every chi_j, j = 0..q-2 (one DFT)."""
    q = tab.q
    group = chargroup.build(q, allow_small=True)
    if gauss is None:
        gauss = chargroup.gauss_all(group)
    b = group.gpow
    # sum_a chi(-abar) m_a = sum_b chi(b) m_{-bbar}
    idx = (-np.array([modinv(int(x), q) for x in b])) % q
    seq = tab.values[idx]
    return gauss / math.sqrt(q) * group.mellin(seq, sign=1)


def birch_stevens_check(tab: ModularSymbolTable, fam: CentralValueFamily) -> float:
    """max over primitive chi of |L(f x chi, 1/2) - Birch-Stevens sum|."""
    if tab.q != fam.q:
        raise ValueError("mismatched q")
    bs = birch_stevens_values(tab, fam.gauss)
    return float(np.max(np.abs(fam.values - bs[1:])))


# ---------------------------------------------------------- slope fits


@dataclass
class SlopeReport:
    kind: str
    label: str
    qs: list[int]
    values: list[float]
    slope: float
    intercept: float
    predicted_slope: float
    rel_dev: float
    jackknife_intercepts: list[float]

    def record(self) -> dict:
        return asdict(self)


def affine_fit(x, y) -> tuple[float, float]:
    slope, icpt = np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)
    return float(slope), float(icpt)


def predicted_variance_slope(form: hecke.Newform) -> float:
    """2 prod_{p | r} (1 + 1/p)^{-1} L*(Sym^2 f, 1) / zeta(2)."""
    from .numtheory import factorize

    c = 2.0 * hecke.sym2_value(form).value / (math.pi**2 / 6)
    for p in factorize(form.level):
        c /= 1.0 + 1.0 / p
    return c


def _slope_report(kind: str, label: str, qs, vals, pred: float) -> SlopeReport:
    if len(qs) < 5:
        raise ValueError("need at least 5 grid points")
    x = np.log(np.asarray(qs, float))
    slope, icpt = affine_fit(x, vals)
    jack = []
    for i in range(len(qs)):
        keep = np.arange(len(qs)) != i
        jack.append(affine_fit(x[keep], np.asarray(vals)[keep])[1])
    return SlopeReport(kind, label, list(map(int, qs)), [float(v) for v in vals], slope, icpt,
                       pred, abs(slope - pred) / abs(pred), jack)


def variance_asymptotic(label: str, qs=(101, 211, 499, 1009, 2003)) -> SlopeReport:
    """Affine fit of the modular-symbol variance against log q."""
    form = hecke.get_form(label)
    es = modsym.for_form(label)
    for q in qs:
        if not is_prime(q) or form.level % q == 0:
            raise ValueError(f"grid point {q} must be a prime not dividing the level")
    vals = [modsym.table(es, q, label).variance for q in qs]
    return _slope_report("variance", label, qs, vals, predicted_variance_slope(form))


def second_moment_slope(label: str, qs=(101, 211, 499, 1009, 2003)) -> SlopeReport:
    """Affine fit of Q(f, f; 1, 1) against log q from AFE families."""
    form = hecke.get_form(label)
    vals = []
    for q in qs:
        fam = afe.family(label, q)
        vals.append(second_moment(fam, fam).computed.real)
    return _slope_report("second-moment", label, qs, vals, predicted_variance_slope(form))


__all__ = [
    "MomentReport", "SlopeReport", "first_moment", "second_moment", "main_term_MT",
    "mt_leading_constant", "mean_identity_check", "mean_formula", "local_factors",
    "correlation_identity_check", "birch_stevens_check", "birch_stevens_values",
    "variance_asymptotic", "second_moment_slope", "pair_sum", "write_reports_csv",
    "reports_json",
]
