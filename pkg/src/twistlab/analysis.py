"""Applications built on the central-value families.

Mollified moments and non-vanishing proportions, resonator averages,
explicit-formula rank bounds, and correlations with Evans sums.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from math import gcd

import numpy as np
from scipy.special import digamma, zeta
from scipy.integrate import trapezoid
from scipy.stats import kstest

from . import chargroup, hecke
from .afe import CentralValueFamily
from .moments import MomentReport, pair_sum
from .modsym import ModularSymbolTable
from .numtheory import primes_upto, smallest_prime_factor

ZETA_3_2 = float(zeta(1.5))


# ------------------------------------------------------------ mollifier


def mu_f_array(form: hecke.Newform, n_max: int) -> np.ndarray:
    """Dirichlet inverse of lambda_f on [0, n_max] (entry 0 unused).

    mu_f(p) = -lambda(p), mu_f(p^2) = chi_r(p), zero on cubes.
    """
    lam = form.ensure(n_max).lam_array(n_max)
    spf = smallest_prime_factor(n_max)
    out = np.zeros(n_max + 1)
    if n_max >= 1:
        out[1] = 1.0
    for n in range(2, n_max + 1):
        p = int(spf[n])
        m, e = n, 0
        while m % p == 0:
            m //= p
            e += 1
        if e == 1:
            loc = -lam[p]
        elif e == 2:
            loc = float(form.chi_r(p))
        else:
            loc = 0.0
        out[n] = loc * out[m]
    return out


def _poly(P, x):
    return np.polynomial.polynomial.polyval(x, np.asarray(P, float))


@dataclass
class MollifierSpec:
    label: str
    lam: float
    q: int
    P: tuple[float, ...]  # ascending coefficients; default P(X) = X
    L: float
    ell: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)

    def coeff(self, ell: int) -> float:
        i = np.searchsorted(self.ell, ell)
        return float(self.x[i]) if i < len(self.ell) and self.ell[i] == ell else 0.0

    def p_prime_sq_integral(self) -> float:
        dP = np.polynomial.polynomial.polyder(np.asarray(self.P, float))
        sq = np.polynomial.polynomial.polymul(dP, dP)
        integ = np.polynomial.polynomial.polyint(sq)
        return float(_poly(integ, 1.0) - _poly(integ, 0.0))


def mollifier_coeffs(label: str, lam: float, q: int, P=(0.0, 1.0)) -> MollifierSpec:
    """x_l = mu_f(l) P(log(L/l)/log L) for l <= L = q^lam, (l, r) = 1."""
    if not 0 < lam <= 0.25:
        raise ValueError("lambda must lie in (0, 0.25]")
    if abs(_poly(P, 0.0)) > 1e-12 or abs(_poly(P, 1.0) - 1.0) > 1e-12:
        raise ValueError("P must satisfy P(0) = 0 and P(1) = 1")
    form = hecke.get_form(label)
    L = q**lam
    n = int(math.floor(L + 1e-9))
    mu = mu_f_array(form, max(n, 1))
    ell = np.arange(1, n + 1)
    keep = np.array([gcd(int(l), form.level) == 1 for l in ell])
    ell = ell[keep]
    logL = math.log(L)
    x = mu[ell] * _poly(P, np.log(L / ell) / logL)
    x[ell == 1] = 1.0 if n >= 1 else 0.0
    return MollifierSpec(form.label, lam, q, tuple(float(c) for c in P), L, ell, x)


def mollifier_values(fam: CentralValueFamily, spec: MollifierSpec) -> np.ndarray:
    """M(f x chi_j, 1/2) for j = 1..q-2 via one fold and one DFT."""
    group = chargroup.build(fam.q, allow_small=True)
    folded = group.fold(spec.x / np.sqrt(spec.ell), spec.ell)
    return group.mellin(folded, sign=1)[1:]


def mollified_moments(fam: CentralValueFamily, spec: MollifierSpec,
                      eta3: float | None = None) -> tuple[MomentReport, MomentReport]:
    if fam.q != spec.q or fam.label != spec.label:
        raise ValueError("family and mollifier disagree on q or form")
    M = mollifier_values(fam, spec)
    LM = fam.values * M
    q = fam.q
    first = pair_sum(LM) / (q - 2)
    second = pair_sum(np.abs(LM) ** 2) / (q - 2)
    if eta3 is None:
        eta3 = eta3_estimate(spec.label).value
    pred2 = 2 * eta3 * (1.0 + 2.0 / spec.lam * spec.p_prime_sq_integral())
    params = {"q": q, "form": spec.label, "lambda": spec.lam, "L": spec.L, "terms": len(spec.ell)}
    r1 = MomentReport("mollified-first", params, first, 1.0)
    r2 = MomentReport("mollified-second", params, second, pred2, f"eta3={eta3!r}")
    r2.rel_err = r2.abs_err / abs(pred2)
    return r1, r2


# ------------------------------------------------------------------ eta3


def eta3_sum(form: hecke.Newform, u: float, v: float, w: float, X: int) -> float:
    """L(1/2,1/2,1/2,u,v,w) summed over d l1 l2 n <= X.

    Truncating by the product keeps every group of terms with the same
    product complete.
    """
    r = form.level
    mu = mu_f_array(form, X)
    lam = form.lam_array(X)
    a1, a2, ad, an = 1 + u + v, 1 + u + w, 1 + v + w, 1 + 2 * u
    ok = np.array([gcd(i, r) == 1 for i in range(X + 1)])
    total = []
    for d in range(1, X + 1):
        if not ok[d]:
            continue
        for l1 in range(1, X // d + 1):
            m1 = mu[d * l1]
            if m1 == 0 or not ok[l1]:
                continue
            rest = X // (d * l1)
            l2 = np.arange(1, rest + 1)
            l2 = l2[ok[l2] & (mu[d * l2] != 0) & (np.gcd(l2, l1) == 1)]
            for b in l2:
                nn = np.arange(1, X // (d * l1 * int(b)) + 1)
                s = np.sum(lam[l1 * nn] * lam[int(b) * nn] * nn ** (-an))
                total.append(m1 * mu[d * int(b)] * s / (l1**a1 * float(b) ** a2 * d**ad))
    return math.fsum(total)


def eta3_local_factor(form: hecke.Newform, p: int, u: float, v: float, w: float,
                      e_max: int = 60) -> float:
    """Local factor L_p(u, v, w) by direct summation over p-power exponents."""
    lam = hecke.lambda_prime_power_table(form, p, 2 * e_max + 2)
    mu = [1.0, -lam[1], float(form.chi_r(p))] + [0.0] * (2 * e_max)
    top = 1 if form.level % p else 0  # d l1 l2 must be prime to the level
    tot = []
    for dl in range(0, 2 * top + 1):
        for a in range(0, 3):
            for b in range(0, 3):
                if (a and b) or (not top and (a or b)):
                    continue
                if dl + a > 2 or dl + b > 2:
                    continue
                for nu in range(0, e_max):
                    t = (mu[dl + a] * lam[a + nu] * mu[dl + b] * lam[b + nu]
                         * p ** -(a * (1 + u + v) + b * (1 + u + w) + dl * (1 + v + w) + nu * (1 + 2 * u)))
                    tot.append(t)
    return math.fsum(tot)


@dataclass(frozen=True)
class Eta3Estimate:
    label: str
    value: float
    samples: tuple[tuple[float, float], ...]  # (t, eta3(t,t,t))
    cutoff: int
    stability: float  # relative change when the cutoff doubles


def eta3_estimate(label: str, ts=(0.05, 0.025), X: int = 600) -> Eta3Estimate:
    """eta_3(0,0,0) by extrapolating eta_3(t,t,t) = L(t,t,t)/2 to t = 0."""
    form = hecke.get_form(label)
    form.ensure(2 * X)
    samples, stab = [], 0.0
    for t in ts:
        # (u+v)(u+w)/(u(v+w)) = 2 on the diagonal
        e1 = eta3_sum(form, t, t, t, X) / 2
        e2 = eta3_sum(form, t, t, t, 2 * X) / 2
        stab = max(stab, abs(e2 - e1) / abs(e2))
        samples.append((t, e2))
    (t1, y1), (t2, y2) = samples[0], samples[1]
    val = y2 + (y2 - y1) * (0 - t2) / (t2 - t1)
    if not 0 < val <= ZETA_3_2 + 1e-3:
        raise RuntimeError(f"eta3 extrapolation {val} outside (0, zeta(3/2)]")
    if stab > 1e-2:
        raise RuntimeError(f"eta3 truncation unstable ({stab:.2e})")
    return Eta3Estimate(form.label, float(val), tuple(samples), 2 * X, stab)


# ------------------------------------------------------------ non-vanishing


def _in_interval(theta: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """theta (mod pi) in the image of [lo, hi) in R/pi Z."""
    width = hi - lo
    if width >= math.pi:
        return np.ones(theta.shape, dtype=bool)
    return np.mod(theta - lo, math.pi) < width


@dataclass
class NonvanishingReport:
    q: int
    interval: tuple[float, float]
    threshold: float
    proportion: float
    eta_bound: float
    angle_only: float
    cs_bound: float | None
    weyl: dict

    @property
    def ok(self) -> bool:
        ok = self.proportion >= self.eta_bound
        if self.cs_bound is not None:
            ok = ok and self.cs_bound <= self.proportion
        return ok


def nonvanishing_report(fam: CentralValueFamily, interval=(0.0, math.pi), threshold: float | None = None,
                        mollified: tuple[MomentReport, MomentReport] | None = None) -> NonvanishingReport:
    lo, hi = map(float, interval)
    if hi < lo:
        raise ValueError("empty interval")
    q = fam.q
    thr = 1.0 / math.log(q) if threshold is None else threshold
    mu_I = min(hi - lo, math.pi) / math.pi
    inI = _in_interval(fam.angles, lo, hi)
    hit = (np.abs(fam.values) >= thr) & inI
    prop = float(np.count_nonzero(hit)) / (q - 2)
    cs = None
    if mollified is not None:
        first, second = mollified
        cs = (mu_I * first.computed.real) ** 2 / second.computed.real
    return NonvanishingReport(q, (lo, hi), thr, prop, mu_I**2 / (1443 * ZETA_3_2),
                              float(np.count_nonzero(inI)) / (q - 2), cs, angle_weyl_sums(fam))


def angle_weyl_sums(fam: CentralValueFamily, k_max: int = 4) -> dict:
    """|E*[chi(r^k) eps_chi^{2k}]| against 3(2|k|+1) q^{-1/2}."""
    q = fam.q
    form = hecke.get_form(fam.label)
    group = chargroup.build(q, allow_small=True)
    eps = fam.gauss if fam.gauss is not None else chargroup.gauss_all(group)
    out = {}
    for k in [k for k in range(-k_max, k_max + 1) if k]:
        val = pair_sum(group.chi_all(pow(form.level, abs(k), q))[1:] ** np.sign(k) * eps[1:] ** (2 * k)) / (q - 2)
        out[k] = (abs(val), 3 * (2 * abs(k) + 1) / math.sqrt(q))
    return out


# -------------------------------------------------------------- resonator


@dataclass
class ResonatorSpec:
    label: str
    variant: str = "extreme"  # or "many"
    L: float = 9.0
    A: float = 2.0
    c: float = 1.0
    x0: float = 0.0
    N: int | None = None  # polynomial length; defaults to q - 1

    def window(self, N: int) -> tuple[float, float]:
        if self.variant == "extreme":
            return self.L**2, math.exp(math.log(self.L) ** 2)
        if self.variant == "many":
            a0 = max(self.A, self.x0)
            return a0**2, N ** (self.c / a0**2)
        raise ValueError(f"unknown resonator variant {self.variant!r}")

    def r_prime(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, float)
        if self.variant == "extreme":
            return self.L / (np.sqrt(p) * np.log(p))
        return self.A / np.sqrt(p)


def resonator_support(form: hecke.Newform, spec: ResonatorSpec, N: int):
    """Squarefree n <= N built from window primes, with r(n) and a_f(n) = mu^2(n) lambda(n)."""
    lo, hi = spec.window(N)
    ps = primes_upto(int(min(hi, N)))
    ps = ps[ps >= lo]
    if ps.size == 0:
        warnings.warn("resonator prime window is empty; using the trivial resonator", stacklevel=2)
    form.ensure(max(N, 2))
    lam = form.lam_array(max(N, 2))
    rp = spec.r_prime(ps) if ps.size else np.zeros(0)
    ns, rs, afs = [1], [1.0], [1.0]
    for p, r in zip(ps.tolist(), rp.tolist()):
        for i in range(len(ns)):
            m = ns[i] * p
            if m <= N:
                ns.append(m)
                rs.append(rs[i] * r)
                afs.append(afs[i] * lam[p])
    order = np.argsort(ns)
    return (np.array(ns)[order], np.array(rs)[order], np.array(afs)[order], ps, rp)


@dataclass
class ResonatorReport:
    q: int
    spec: ResonatorSpec
    primes: list[int]
    Q1: float
    Q1_exact: float
    Q1_product: float
    Q2: float
    Q2_product: float
    ratio: float
    argmax_j: int
    argmax_abs_L: float
    median_abs_L: float
    max_abs_L_resonated: float


def resonator_run(fam: CentralValueFamily, spec: ResonatorSpec) -> ResonatorReport:
    q = fam.q
    N = spec.N if spec.N is not None else q - 1
    if N > q:
        raise ValueError("resonator length N must not exceed q")
    form = hecke.get_form(fam.label)
    ns, rs, afs, ps, rp = resonator_support(form, spec, N)
    coef = rs * afs
    group = chargroup.build(q, allow_small=True)
    R = group.mellin(group.fold(coef, ns), sign=1)[1:]
    R2 = np.abs(R) ** 2
    Q1 = pair_sum(R2).real / (q - 2)
    # orthogonality over all characters, minus the trivial one
    exact = ((q - 1) * math.fsum(coef**2) - math.fsum(coef) ** 2) / (q - 2)
    lam = form.lam_array(max(N, 2))
    omega = lam[ps] ** 2 if ps.size else np.zeros(0)
    prod1 = float(np.prod(1 + rp**2 * omega))
    prod2 = float(np.prod(1 + rp**2 * omega + rp / np.sqrt(ps) * omega)) if ps.size else 1.0
    # psi = cos: |L| cos(theta) = Re L
    Q2 = pair_sum(R2 * fam.values.real).real / (q - 2)
    score = R2 * np.abs(fam.values)
    jm = int(np.argmax(score))
    absL = np.abs(fam.values)
    top = np.argsort(-R2)[: max(1, len(R2) // 100)]
    return ResonatorReport(q, spec, ps.tolist(), Q1, exact, prod1, Q2, prod2, Q2 / Q1,
                           jm + 1, float(absL[jm]), float(np.median(absL)), float(absL[top].max()))


# -------------------------------------------------------------- rank bound


@dataclass
class RankBoundSpec:
    """Test function phi, even, supported in [-1, 1], phi_hat >= 0 on the imaginary axis, phi_hat(0) = 1.

    kernel "plateau": phi = h * h with h a smoothed indicator of [-1/2, 1/2].
    kernel "fejer2": phi(x) = max(0, 1 - |x|)^2 rescaled.
    """

    xi: float | None = None  # default log(q)/3
    kernel: str = "plateau"
    taper: float = 0.05
    c: float = 0.1
    nodes: int = 4001

    def __post_init__(self):
        half = np.linspace(-0.5, 0.5, self.nodes)
        dx = half[1] - half[0]
        x = np.linspace(-1.0, 1.0, 2 * self.nodes - 1)
        if self.kernel == "plateau":
            # C-infinity step from 1 at |x| = 1/2 - taper down to 0 at |x| = 1/2
            edge = (np.abs(half) - (0.5 - self.taper)) / self.taper
            h = np.where(edge <= 0, 1.0, 0.0)
            mid = (edge > 0) & (edge < 1)
            e = edge[mid]
            f0 = np.exp(-1 / (1 - e))
            f1 = np.exp(-1 / e)
            h[mid] = f0 / (f0 + f1)
            h /= trapezoid(h, dx=dx)
            phi = np.convolve(h, h) * dx
        elif self.kernel == "fejer2":
            phi = np.maximum(0.0, 1 - np.abs(x)) ** 2
        else:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        phi /= trapezoid(phi, dx=dx)
        self._x, self._phi, self._dx = x, phi, dx

    def phi_hat_imag(self, t) -> np.ndarray:
        """phi_hat(i t) = int phi(x) cos(t x) dx."""
        t = np.atleast_1d(np.asarray(t, float))
        out = np.empty(t.shape)
        for i in range(0, t.size, 256):
            blk = t[i : i + 256]
            out[i : i + 256] = trapezoid(self._phi * np.cos(np.outer(blk, self._x)), dx=self._dx, axis=1)
        return out

    def phi(self, y) -> np.ndarray:
        return np.interp(np.asarray(y, float), self._x, self._phi, left=0.0, right=0.0)

    @property
    def phi0(self) -> float:
        return float(self._phi[self.nodes - 1])

    def hat_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """(u, phi_hat(i u)) on [0, 2000]; independent of xi, so computed once."""
        if not hasattr(self, "_hat"):
            u = np.linspace(0.0, 2000.0, 20001)
            self._hat = (u, self.phi_hat_imag(u))
        return self._hat


def gamma_term(form: hecke.Newform, spec: RankBoundSpec, xi: float) -> float:
    """(1/2 pi) int 2 Re(psi((k/2) + i u/xi) - log 2 pi) phi_hat(i u) du over the real line."""
    u, ph = spec.hat_grid()
    g = 2 * (digamma(form.weight / 2 + 1j * u / xi).real - math.log(2 * math.pi))
    return float(2 * trapezoid(g * ph, u) / (2 * math.pi))  # even integrand


@dataclass
class RankReport:
    q: int
    xi: float
    phi0: float
    C_phi: float
    gamma: float
    bounds: np.ndarray = field(repr=False)
    S: np.ndarray = field(repr=False)
    P2: np.ndarray = field(repr=False)
    mean: float = 0.0
    exp_moment: float = 0.0
    max_p2_over_xi: float = 0.0
    min_bound_at_zeros: float | None = None


def rank_bound(fam: CentralValueFamily, spec: RankBoundSpec = RankBoundSpec(),
               max_prime: int = 5_000_000) -> RankReport:
    """Per-character explicit-formula bounds with the zero sum dropped."""
    q = fam.q
    form = hecke.get_form(fam.label)
    xi = spec.xi if spec.xi is not None else math.log(q) / 3
    X = math.exp(xi)
    if X > max_prime:
        raise ValueError(f"prime cutoff e^xi = {X:.3g} beyond the supported depth {max_prime}")
    n_max = int(X) + 1
    lam = form.ensure(n_max).lam_array(n_max)
    ps = primes_upto(int(X))
    group = chargroup.build(q, allow_small=True)
    lp = np.log(ps)
    w1 = lam[ps] * lp / np.sqrt(ps) * spec.phi(lp / xi)
    S = group.mellin(group.fold(w1, ps), sign=1)[1:]
    # prime powers l >= 2: Lambda_f(p^l) = (alpha^l + beta^l) log p
    vals, res = [], []
    for p in ps.tolist():
        if p * p > X:
            break
        chi_r = form.chi_r(p)
        s_prev, s_cur = 2.0 if chi_r else 1.0, lam[p]
        pl, l = p, 1
        while pl * p <= X:
            s_prev, s_cur = s_cur, lam[p] * s_cur - chi_r * s_prev
            pl *= p
            l += 1
            vals.append(s_cur * math.log(p) / math.sqrt(pl) * float(spec.phi(l * math.log(p) / xi)))
            res.append(pl)
    if vals:
        P = group.mellin(group.fold(np.array(vals), np.array(res)), sign=1)[1:]
    else:
        P = np.zeros(q - 2, dtype=np.complex128)
    p_layer = 2 * P.real  # chi and conj chi together
    gam = gamma_term(form, spec, xi)
    C_xi = spec.phi0 * math.log(form.level) + gam + float(np.max(-p_layer))
    bounds = (2 * spec.phi0 * math.log(q) - 2 * S.real + C_xi) / xi
    zero = np.abs(fam.values) < 1e-6
    rep = RankReport(q, xi, spec.phi0, C_xi / xi, gam, bounds, S, P)
    rep.mean = pair_sum(bounds).real / (q - 2)
    rep.exp_moment = pair_sum(np.exp(spec.c * bounds)).real / (q - 2)
    rep.max_p2_over_xi = float(np.max(np.abs(p_layer))) / xi
    rep.min_bound_at_zeros = float(bounds[zero].min()) if zero.any() else None
    return rep


# ------------------------------------------------------------- Evans sums


def evans_values(q: int) -> np.ndarray:
    """Evans sums for every chi_j, j = 0..q-2 (real parts; imaginary parts are rounding)."""
    return chargroup.evans_all(chargroup.build(q, allow_small=True)).real


def semicircle_cdf(x):
    x = np.clip(np.asarray(x, float), -2.0, 2.0)
    return 0.5 + (x * np.sqrt(4 - x * x)) / (4 * math.pi) + np.arcsin(x / 2) / math.pi


def evans_ks(q: int) -> float:
    """Kolmogorov-Smirnov distance of the Evans sums at q to the Sato-Tate law."""
    return float(kstest(evans_values(q)[1:], semicircle_cdf).statistic)


def evans_twisted_first_moment(fam: CentralValueFamily, ell: int = 1,
                               evans: np.ndarray | None = None) -> MomentReport:
    q = fam.q
    if ell % q == 0:
        raise ValueError("q divides ell")
    te = evans_values(q) if evans is None else np.asarray(evans)
    group = chargroup.build(q, allow_small=True)
    w = group.chi_all(ell)[1:] * te[1:]
    comp = pair_sum(fam.values * w) / (q - 2)
    return MomentReport("evans-first", {"q": q, "form": fam.label, "ell": ell}, comp, 0.0)


def evans_trace(q: int) -> np.ndarray:
    """t_e(a) = e((a - abar)/q) for a = 0..q-1 (entry 0 set to 0)."""
    a = np.arange(q)
    inv = np.zeros(q, dtype=np.int64)
    inv[1:] = [pow(int(x), -1, q) for x in a[1:]]
    t = chargroup.additive(q, a - inv)
    t[0] = 0
    return t


def modsym_trace_correlation(tab: ModularSymbolTable, trace: np.ndarray | None = None) -> complex:
    """C_f(t) = (1/phi(q)) sum_a <a/q> conj(t(a)); the Evans trace function by default."""
    q = tab.q
    t = evans_trace(q) if trace is None else np.asarray(trace)
    z = tab.values[1:] * np.conj(t[1:])
    return complex(math.fsum(z.real), math.fsum(z.imag)) / (q - 1)


def quasi_monotone(values, factor: float = 2.0) -> bool:
    """True if v_j <= factor * v_i for every i < j (non-increasing up to factor)."""
    v = np.abs(np.asarray(values, float))
    return all(v[j] <= factor * v[i] for i in range(len(v)) for j in range(i + 1, len(v)))


__all__ = [
    "MollifierSpec", "ResonatorSpec", "RankBoundSpec", "Eta3Estimate", "NonvanishingReport",
    "ResonatorReport", "RankReport", "mu_f_array", "mollifier_coeffs", "mollifier_values",
    "mollified_moments", "eta3_sum", "eta3_local_factor", "eta3_estimate",
    "nonvanishing_report", "angle_weyl_sums", "resonator_run", "resonator_support",
    "rank_bound", "gamma_term", "evans_values", "evans_ks", "semicircle_cdf",
    "evans_twisted_first_moment", "evans_trace", "modsym_trace_correlation", "quasi_monotone",
]
