"""Smoothed-sum evaluation of twisted L-values.

The weight functions are contour integrals

    V(y) = (1/2 pi i) int_(c) prod_j Gamma_R(a_j + u) / Gamma_R(a_j) G(u) y^{-u} du / u

with G(u) = cos(pi u / 4A)^{-16A}.  They are evaluated with the
trapezoid rule on a vertical line (Re u = 2 for y >= 1, and Re u = -0.45
plus the residue 1 for y < 1, which avoids cancellation near y = 0) and
then tabulated on a logarithmic grid for the batched paths.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import j0, j1, jv, loggamma, roots_legendre

from . import chargroup
from .chargroup import CharacterGroup, SumTables
from .hecke import Newform

LOG_PI = math.log(math.pi)


def log_gamma_r(z):
    """log Gamma_R(z) = log(pi^{-z/2} Gamma(z/2)), principal branch."""
    z = np.asarray(z, dtype=np.complex128)
    return -0.5 * z * LOG_PI + loggamma(0.5 * z)


def gamma_shifts(form: Newform, s: complex) -> tuple[complex, complex]:
    """Arguments of the two Gamma_R factors of L_infty(f, s).

    Gamma_R(z) Gamma_R(z + 1) = Gamma_C(z), so the pair is
    (s + (k-1)/2, s + (k+1)/2), i.e. L_infty = Gamma_C(s + (k-1)/2).
    """
    k = form.weight
    return (complex(s) + (k - 1) / 2, complex(s) + (k + 1) / 2)


def log_L_inf(form: Newform, s: complex) -> complex:
    return complex(np.sum(log_gamma_r(np.array(gamma_shifts(form, s)))))


@dataclass(frozen=True)
class AFEConfig:
    """Quadrature and truncation parameters shared by every weight."""

    A: int = 64
    c_right: float = 2.0
    c_left: float = -0.45
    T: float = 32.0
    h: float = 1 / 32
    grid: int = 16384
    y_min: float = 1e-8
    tail_tol: float = 1e-15
    length_factor: float = 1.0


def log_G(u: np.ndarray, A: int) -> np.ndarray:
    return -16 * A * np.log(np.cos(np.pi * u / (4 * A)))


class GammaWeight:
    """V(y) for a fixed list of Gamma_R shifts.

    ``direct`` is the reference quadrature; ``__call__`` interpolates a
    precomputed table (a cubic spline in log y) and falls back to the
    direct route outside the tabulated range.
    """

    def __init__(self, shifts, cfg: AFEConfig = AFEConfig()):
        self.shifts = tuple(complex(a) for a in shifts)
        self.cfg = cfg
        t = np.arange(-cfg.T, cfg.T + cfg.h / 2, cfg.h)
        self._lines = {}
        a = np.array(self.shifts)[:, None]
        base = np.sum(log_gamma_r(a), axis=0)
        for name, c in (("right", cfg.c_right), ("left", cfg.c_left)):
            u = c + 1j * t
            lk = np.sum(log_gamma_r(a + u[None, :]), axis=0) - base + log_G(u, cfg.A) - np.log(u)
            # du = i dt, so (1/2 pi i) du -> dt / 2 pi
            self._lines[name] = (u, np.exp(lk) * cfg.h / (2 * np.pi))
        self._spline = None
        self._y_cut = None

    # -- reference path
    def direct(self, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        if np.any(y <= 0):
            raise ValueError("y must be positive")
        out = np.empty(y.shape, dtype=np.complex128)
        logy = np.log(y)
        for name, mask in (("right", y >= 1), ("left", y < 1)):
            if not mask.any():
                continue
            u, w = self._lines[name]
            ly = logy[mask]
            vals = np.empty(ly.shape, dtype=np.complex128)
            step = max(1, 2_000_000 // len(u))
            for i in range(0, len(ly), step):
                blk = ly[i : i + step]
                vals[i : i + step] = np.exp(-np.outer(blk, u)) @ w
            out[mask] = vals + (1.0 if name == "left" else 0.0)
        return out

    def tail_estimate(self) -> float:
        """Magnitude of the last retained trapezoid node (truncation proxy)."""
        u, w = self._lines["right"]
        return float(max(abs(w[0]), abs(w[-1])) / self.cfg.h)

    @property
    def y_cut(self) -> float:
        """Smallest y on a fine grid beyond which |V| stays below tail_tol."""
        if self._y_cut is None:
            ys = np.exp(np.linspace(0.0, math.log(200.0), 1200))
            v = np.abs(self.direct(ys))
            above = np.flatnonzero(v >= self.cfg.tail_tol)
            self._y_cut = float(ys[min(above[-1] + 1, len(ys) - 1)]) if above.size else 1.0
        return self._y_cut

    def _build_spline(self) -> None:
        lo = math.log(self.cfg.y_min)
        hi = math.log(2 * self.y_cut)
        x = np.linspace(lo, hi, self.cfg.grid)
        self._spline = (lo, hi, CubicSpline(x, self.direct(np.exp(x))))

    def __call__(self, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        if self._spline is None:
            self._build_spline()
        lo, hi, sp = self._spline
        ly = np.log(y)
        out = np.zeros(y.shape, dtype=np.complex128)
        inside = (ly >= lo) & (ly <= hi)
        out[inside] = sp(ly[inside])
        outside = ~inside
        if outside.any():
            out[outside] = self.direct(y[outside])
        return out


@lru_cache(maxsize=64)
def _weight_cached(shifts: tuple, cfg: AFEConfig) -> GammaWeight:
    return GammaWeight(shifts, cfg)


def weight_for(form: Newform, s: complex, cfg: AFEConfig = AFEConfig()) -> GammaWeight:
    return _weight_cached(tuple(np.round(gamma_shifts(form, s), 14)), cfg)


def weight_V(form: Newform, parity: int, s: complex, y, cfg: AFEConfig = AFEConfig()):
    """V_{f,s}(y) by direct quadrature; parity is accepted but unused."""
    if parity not in (1, -1):
        raise ValueError("parity must be +1 or -1")
    return weight_for(form, s, cfg).direct(y)


def weight_W(f: Newform, g: Newform, s: complex, cfg: AFEConfig = AFEConfig()) -> GammaWeight:
    """W_{f,g,s}: Gamma shifts of f at s and of g at conj(s)."""
    shifts = gamma_shifts(f, s) + gamma_shifts(g, complex(s).conjugate())
    return _weight_cached(tuple(np.round(shifts, 14)), cfg)


def truncation(weight: GammaWeight, X: float, cfg: AFEConfig) -> int:
    return int(math.ceil(weight.y_cut * X * cfg.length_factor))


# ------------------------------------------------------------------- family


@dataclass
class CentralValueFamily:
    label: str
    q: int
    s: complex
    values: np.ndarray  # index j - 1 for j = 1 .. q - 2
    root_numbers: np.ndarray  # eps(f) chi(N) eps_chi^2, same indexing
    m_max: int
    meta: dict = field(default_factory=dict)
    gauss: np.ndarray | None = field(default=None, repr=False)  # eps_chi_j, j = 0..q-2

    @property
    def j(self) -> np.ndarray:
        return np.arange(1, self.q - 1)

    @property
    def parity(self) -> np.ndarray:
        return np.where(self.j % 2 == 0, 1, -1)

    @property
    def angles(self) -> np.ndarray:
        """theta in [0, pi) with L = |L| e^{i theta}."""
        return np.mod(np.angle(self.values), np.pi)

    def value(self, j: int) -> complex:
        return complex(self.values[j - 1])


def _root_factor(form: Newform, group: CharacterGroup, gauss: np.ndarray, s: complex) -> np.ndarray:
    """eps(f) chi(N) eps_chi^2 (q^2 N)^{1/2-s} L_inf(1-s)/L_inf(s) for j = 1..n-1."""
    q, n = group.q, group.n
    j = np.arange(1, n)
    chiN = chargroup.unit_roots(n, j * int(group.dlog[form.level % q]))
    eps = form.eps() * chiN * gauss[1:] ** 2
    s = complex(s)
    arch = np.exp((0.5 - s) * math.log(q * q * form.level) + log_L_inf(form, 1 - s) - log_L_inf(form, s))
    return eps * arch


def _terms(form: Newform, weight: GammaWeight, expo: complex, X: float, m_max: int, q: int) -> np.ndarray:
    m = np.arange(1, m_max + 1, dtype=np.float64)
    lamv = form.lam_array(m_max)[1:]
    t = lamv * np.exp(-complex(expo) * np.log(m)) * weight(m / X)
    t[(np.arange(1, m_max + 1) % q) == 0] = 0.0
    return t


def _symmetrise(S: np.ndarray) -> np.ndarray:
    """Average S_j with conj(S_{n-j}) so conjugate pairs agree exactly."""
    n = len(S)
    out = S.copy()
    j = np.arange(1, n)
    out[j] = 0.5 * (S[j] + np.conj(S[n - j]))
    return out


def central_values_batch(form: Newform, group: CharacterGroup, tables: SumTables | None,
                         s: complex = 0.5, cfg: AFEConfig = AFEConfig()) -> CentralValueFamily:
    """L(f x chi_j, s) for every nontrivial chi mod q (two folds and two DFTs)."""
    q = group.q
    if form.level % q == 0:
        raise ValueError(f"q={q} divides the level {form.level}")
    s = complex(s)
    if abs(s.real - 0.5) > 0.1 + 1e-12 or abs(s.imag) > 10:
        raise ValueError("s outside |Re s - 1/2| <= 0.1, |Im s| <= 10")
    gauss = tables.gauss if tables is not None else chargroup.gauss_all(group)
    X = q * math.sqrt(form.level)
    w1 = weight_for(form, s, cfg)
    w2 = weight_for(form, 1 - s, cfg)
    m_max = max(truncation(w1, X, cfg), truncation(w2, X, cfg))
    form.ensure(m_max)
    m = np.arange(1, m_max + 1)
    central = abs(s - 0.5) < 1e-15
    t1 = _terms(form, w1, s, X, m_max, q)
    c1 = group.fold(t1, m)
    S1 = group.mellin(c1, sign=1)
    if central:
        # real coefficients: the second sum is the conjugate of the first
        S1 = _symmetrise(S1)
        S2 = np.conj(S1)
    else:
        t2 = _terms(form, w2, 1 - s, X, m_max, q)
        S2 = group.mellin(group.fold(t2, m), sign=-1)
    rf = _root_factor(form, group, gauss, s)
    vals = S1[1:] + rf * S2[1:]
    return CentralValueFamily(form.label, q, s, vals, rf, m_max,
                              meta={"X": X, "y_cut": max(w1.y_cut, w2.y_cut)}, gauss=gauss)


@lru_cache(maxsize=32)
def family(label: str, q: int, s: complex = 0.5, cfg: AFEConfig = AFEConfig(),
           allow_small: bool = False) -> CentralValueFamily:
    """Cached batch family for a built-in form (treat the result as read-only)."""
    from .hecke import get_form

    group = chargroup.build(q, allow_small=allow_small)
    return central_values_batch(get_form(label), group, None, complex(s), cfg)


def direct_value(form: Newform, group: CharacterGroup, j: int, s: complex = 0.5,
                 cfg: AFEConfig = AFEConfig(), gauss: complex | None = None,
                 m_max: int | None = None) -> complex:
    """Single-character reference: plain sums, direct quadrature for V."""
    q = group.q
    s = complex(s)
    X = q * math.sqrt(form.level)
    w1 = weight_for(form, s, cfg)
    w2 = weight_for(form, 1 - s, cfg)
    if m_max is None:
        m_max = max(truncation(w1, X, cfg), truncation(w2, X, cfg))
    form.ensure(m_max)
    m = np.arange(1, m_max + 1)
    lamv = form.lam_array(m_max)[1:]
    chi = group.chi(j, m)
    v1 = w1.direct(m / X)
    v2 = v1 if abs(s - 0.5) < 1e-15 else w2.direct(m / X)
    a = lamv * chi * np.exp(-s * np.log(m)) * v1
    b = lamv * np.conj(chi) * np.exp(-(1 - s) * np.log(m)) * v2
    S1 = complex(math.fsum(a.real), math.fsum(a.imag))
    S2 = complex(math.fsum(b.real), math.fsum(b.imag))
    if gauss is None:
        gauss = chargroup.gauss_direct(group, j)
    chiN = complex(group.chi(j, form.level)[()])
    arch = np.exp((0.5 - s) * math.log(q * q * form.level) + log_L_inf(form, 1 - s) - log_L_inf(form, s))
    return S1 + form.eps() * chiN * gauss**2 * arch * S2


def pair_products(fam_f: CentralValueFamily, fam_g: CentralValueFamily) -> np.ndarray:
    if fam_f.q != fam_g.q:
        raise ValueError("families have different q")
    if abs(fam_f.s - fam_g.s) > 1e-15:
        raise ValueError("families have different s")
    return fam_f.values * np.conj(fam_g.values)


def dump_lvalues_csv(cache: Path, fam: CentralValueFamily) -> Path:
    path = Path(cache) / "lvalues" / f"{fam.label}_q{fam.q}_s{fam.s.real:g}_{fam.s.imag:g}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_lvalues_csv(path, fam)
    return path


def write_lvalues_csv(path_or_fh, fam: CentralValueFamily) -> None:
    own = not hasattr(path_or_fh, "write")
    fh = open(path_or_fh, "w", newline="") if own else path_or_fh
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["j", "re", "im", "theta", "parity"])
        for j, v, th, par in zip(fam.j, fam.values, fam.angles, fam.parity):
            w.writerow([int(j), repr(float(v.real)), repr(float(v.imag)), repr(float(th)), int(par)])
    finally:
        if own:
            fh.close()


# ---------------------------------------------------------- root numbers


@dataclass(frozen=True)
class RootNumberEstimate:
    sign: int
    residual: float
    other_residual: float
    points: tuple[complex, ...]


def _completed_parts(form: Newform, s: complex, t: float, cfg: AFEConfig) -> tuple[complex, complex]:
    """A_t(s), B_t(s) with Lambda(s) = A_t(s) + eps B_t(s) for every t > 0."""
    N = form.level
    rN = math.sqrt(N)
    wa = weight_for(form, s, cfg)
    wb = weight_for(form, 1 - s, cfg)
    na = int(math.ceil(wa.y_cut * rN / t)) + 1
    nb = int(math.ceil(wb.y_cut * rN * t)) + 1
    lamv = form.ensure(max(na, nb)).lam_array(max(na, nb))
    n = np.arange(1, na + 1)
    A = np.sum(lamv[1 : na + 1] * np.exp(-s * np.log(n)) * wa.direct(n * t / rN))
    n = np.arange(1, nb + 1)
    B = np.sum(lamv[1 : nb + 1] * np.exp(-(1 - s) * np.log(n)) * wb.direct(n / (t * rN)))
    A *= np.exp(0.5 * s * math.log(N) + log_L_inf(form, s))
    B *= np.exp(0.5 * (1 - s) * math.log(N) + log_L_inf(form, 1 - s))
    return complex(A), complex(B)


def root_number_estimate(form: Newform, points=(0.75 + 0.2j, 0.6 + 1.0j), t: float = 1.25,
                         cfg: AFEConfig = AFEConfig()) -> RootNumberEstimate:
    """Sign of the untwisted functional equation, read off numerically.

    For each trial sign, Lambda is assembled at s0 and 1 - s0 from the
    smoothed sums with splitting parameter t != 1; only the true sign
    makes Lambda(s0) = eps Lambda(1 - s0) hold.
    """
    res = {1: 0.0, -1: 0.0}
    for s0 in points:
        A1, B1 = _completed_parts(form, complex(s0), t, cfg)
        A2, B2 = _completed_parts(form, 1 - complex(s0), t, cfg)
        for e in (1, -1):
            lam1 = A1 + e * B1
            lam2 = A2 + e * B2
            r = abs(lam1 - e * lam2) / max(abs(lam1), abs(lam2), 1e-300)
            res[e] = max(res[e], r)
    sign = 1 if res[1] <= res[-1] else -1
    if res[sign] > 1e-6:
        raise RuntimeError(f"root number undetermined: residuals {res}")
    return RootNumberEstimate(sign, res[sign], res[-sign], tuple(complex(p) for p in points))


def untwisted_central_value(form: Newform, cfg: AFEConfig = AFEConfig()) -> float:
    """L(f, 1/2) from the balanced two-term smoothed series."""
    A, B = _completed_parts(form, 0.5 + 0j, 1.0, cfg)
    lam_ = A + form.eps() * B
    return float((lam_ / np.exp(0.5 * 0.5 * math.log(form.level) + log_L_inf(form, 0.5))).real)


# ---------------------------------------------------------------- Voronoi


@dataclass(frozen=True)
class Bump:
    """W(u) = scale * exp(beta - beta/(1 - t^2)) on [lo, hi], t the affine image in [-1, 1].

    Larger beta sharpens the endpoint flatness, which makes the Bessel
    transform decay faster (roughly exp(-sqrt(2 beta omega))).
    """

    lo: float = 0.5
    hi: float = 2.0
    scale: float = 1.0
    beta: float = 8.0

    def __call__(self, u):
        u = np.asarray(u, dtype=np.float64)
        t = (2 * u - (self.lo + self.hi)) / (self.hi - self.lo)
        out = np.zeros(u.shape)
        inside = np.abs(t) < 1
        out[inside] = self.scale * np.exp(self.beta - self.beta / (1 - t[inside] ** 2))
        return out


@dataclass(frozen=True)
class VoronoiResult:
    lhs: float | complex
    rhs: float | complex
    diff: float
    n_dual: int


def bessel_j(nu: int, x: np.ndarray) -> np.ndarray:
    """J_nu(x) for integer nu >= 0.

    Upward recurrence from J_0, J_1 where x > 2 nu + 10 (stable there and
    several times faster than the general routine), jv elsewhere.
    """
    x = np.asarray(x, dtype=np.float64)
    if nu == 0:
        return j0(x)
    if nu == 1:
        return j1(x)
    out = np.empty_like(x)
    big = x > 2 * nu + 10
    if big.any():
        xb = x[big]
        a, b = j0(xb), j1(xb)
        for m in range(1, nu):
            a, b = b, (2 * m / xb) * b - a
        out[big] = b
    if (~big).any():
        out[~big] = jv(nu, x[~big])
    return out


def bessel_transform(form: Newform, W: Bump, y: np.ndarray, nodes: int = 2048) -> np.ndarray:
    """W~(y) = int W(u) 2 pi i^k J_{k-1}(4 pi sqrt(u y)) du by Gauss-Legendre."""
    x, wts = roots_legendre(nodes)
    u = 0.5 * (W.hi - W.lo) * x + 0.5 * (W.hi + W.lo)
    wu = W(u) * wts * 0.5 * (W.hi - W.lo)
    k = form.weight
    phase = (1j) ** k
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    out = np.empty(y.shape, dtype=np.complex128)
    step = max(1, 4_000_000 // nodes)
    for i in range(0, len(y), step):
        arg = 4 * np.pi * np.sqrt(np.outer(y[i : i + step], u))
        out[i : i + step] = 2 * np.pi * phase * (bessel_j(k - 1, arg) @ wu)
    return out


def atkin_lehner_sign(form: Newform) -> int:
    """eta_f with eps(f) = i^k eta_f; this sign multiplies the i^k J kernel."""
    return form.eps() * (-1) ** (form.weight // 2)


def voronoi_check(form: Newform, a: int, q: int, W: Bump | None, N_scale: float,
                  y_max: float = 1200.0, nodes: int = 1024, sign: int = 1) -> VoronoiResult:
    """Both sides of the congruence-class Voronoi identity.

    lhs = sqrt(q) sum_{n = a (q)} lambda(n) W(n/N)
    rhs = q^{-1/2} sum_n lambda(n) W(n/N)
          + eta_f N/(q sqrt r) sum_n lambda(n) W~(nN/(q^2 r)) Kl_2(sign * a rbar n; q)
    with eta_f the Atkin-Lehner sign and W~ built on 2 pi i^k J_{k-1}.
    The dual sum runs while nN/(q^2 r) <= y_max.
    """
    if a % q == 0:
        raise ValueError("a must be a unit mod q")
    if form.level % q == 0:
        raise ValueError("q divides the level")
    if W is None or W.scale == 0:
        return VoronoiResult(0.0, 0.0, 0.0, 0)
    r = form.level
    n_hi = int(math.floor(W.hi * N_scale))
    n_lo = max(1, int(math.ceil(W.lo * N_scale)))
    lamv = form.ensure(n_hi).lam_array(n_hi)
    n = np.arange(n_lo, n_hi + 1)
    wv = W(n / N_scale) * lamv[n]
    lhs = math.sqrt(q) * math.fsum(wv[(n - a) % q == 0])
    rhs0 = math.fsum(wv) / math.sqrt(q)
    n_dual = int(y_max * q * q * r / N_scale)
    lamd = form.ensure(n_dual).lam_array(n_dual)
    nd = np.arange(1, n_dual + 1)
    wt = bessel_transform(form, W, nd * N_scale / (q * q * r), nodes)
    kl = chargroup.kloosterman_direct(q, 2).copy()
    kl[0] = -1 / math.sqrt(q)  # Ramanujan sum at m = 0
    rbar = pow(r, -1, q)
    idx = (sign * a * rbar * nd) % q
    terms = lamd[1:] * wt * kl[idx]
    dual = complex(math.fsum(terms.real), math.fsum(terms.imag))
    rhs = rhs0 + atkin_lehner_sign(form) * N_scale / (q * math.sqrt(r)) * dual
    return VoronoiResult(lhs, rhs, abs(lhs - rhs), n_dual)


# ------------------------------------------------------- symmetric square


def sym2_afe(form: Newform, A: int = 64, length_factor: float = 1.0) -> tuple[float, int]:
    """L(Sym^2 f, 1) through its approximate functional equation.

    Degree 3, conductor N^2, Gamma_R(s+1)Gamma_R(s+k-1)Gamma_R(s+k),
    root number +1.  Returns (value, number of terms).
    """
    from .hecke import sym2_coefficients

    k = form.weight
    N = form.level
    cfg = AFEConfig(A=A, length_factor=length_factor)
    mu = (1.0, k - 1.0, float(k))
    w1 = _weight_cached(tuple(complex(1 + m) for m in mu), cfg)
    w0 = _weight_cached(tuple(complex(0 + m) for m in mu), cfg)
    X = float(N)
    n_max = int(math.ceil(max(w1.y_cut, w0.y_cut) * X * length_factor))
    b = sym2_coefficients(form, n_max)
    n = np.arange(1, n_max + 1, dtype=np.float64)
    # a few hundred terms at most, so direct quadrature beats a spline build
    s1 = np.sum(b[1:] / n * w1.direct(n / X)).real
    s0 = np.sum(b[1:] * w0.direct(n / X)).real
    lg1 = float(np.sum(log_gamma_r(np.array(mu) + 1)).real)
    lg0 = float(np.sum(log_gamma_r(np.array(mu))).real)
    factor = math.exp((0.5 - 1.0) * math.log(N * N) + lg0 - lg1)
    return float(s1 + factor * s0), n_max


__all__ = [
    "AFEConfig", "GammaWeight", "CentralValueFamily", "RootNumberEstimate", "Bump",
    "VoronoiResult", "weight_V", "weight_W", "weight_for", "central_values_batch",
    "direct_value", "family", "pair_products", "root_number_estimate", "voronoi_check",
    "bessel_transform", "sym2_afe", "dump_lvalues_csv", "untwisted_central_value",
]
