"""Holomorphic newforms with exact integer Fourier coefficients.

Coefficients come either from an eta product (expanded with Euler's
pentagonal series and exact Kronecker-substitution multiplication) or
from a list of Hecke eigenvalues a(p) supplied by the modular-symbol
module, extended to all n through the Hecke relations.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import gmpy2
import numpy as np

from .numtheory import factorize, is_squarefree, primes_upto, smallest_prime_factor

CACHE_VERSION = 1


# ------------------------------------------------- exact series arithmetic


def pentagonal(n_max: int) -> np.ndarray:
    """Coefficients of prod_{n>=1} (1 - x^n) up to x^n_max."""
    c = np.zeros(n_max + 1, dtype=np.int64)
    c[0] = 1
    k = 1
    while True:
        e1 = k * (3 * k - 1) // 2
        if e1 > n_max:
            break
        s = -1 if k % 2 else 1
        c[e1] += s
        e2 = k * (3 * k + 1) // 2
        if e2 <= n_max:
            c[e2] += s
        k += 1
    return c


def _as_object(a) -> np.ndarray:
    a = np.asarray(a)
    return a if a.dtype == object else a.astype(object)


def _max_abs(a: np.ndarray) -> int:
    if a.dtype == object:
        return max((abs(int(v)) for v in a), default=0)
    return int(np.max(np.abs(a))) if a.size else 0


def _limbs(a: np.ndarray, nlimb: int) -> np.ndarray:
    """Non-negative integers -> (len, nlimb) little-endian uint64 limbs."""
    out = np.zeros((len(a), nlimb), dtype=np.uint64)
    if a.dtype != object and nlimb >= 1:
        out[:, 0] = a.astype(np.uint64)
        return out
    mask = (1 << 64) - 1
    cur = _as_object(a)
    for i in range(nlimb):
        out[:, i] = np.array([int(v) & mask for v in cur], dtype=np.uint64)
        cur = cur >> 64
    return out


def _pack(a: np.ndarray, bits: int) -> gmpy2.mpz:
    """sum_i a_i 2^(bits i) for signed integer coefficients a_i."""
    nlimb = bits // 64
    if a.dtype == object:
        pos = np.array([v if v > 0 else 0 for v in a], dtype=object)
        neg = np.array([-v if v < 0 else 0 for v in a], dtype=object)
    else:
        pos = np.where(a > 0, a, 0)
        neg = np.where(a < 0, -a, 0)
    P = gmpy2.mpz(int.from_bytes(_limbs(pos, nlimb).tobytes(), "little"))
    N = gmpy2.mpz(int.from_bytes(_limbs(neg, nlimb).tobytes(), "little"))
    return P - N


def _unpack(z: gmpy2.mpz, bits: int, n: int) -> np.ndarray:
    """Inverse of _pack for the first n slots, digits assumed < 2^(bits-1)."""
    nlimb = bits // 64
    half = 1 << (bits - 1)
    offset = int.from_bytes((b"\x00" * (bits // 8 - 1) + b"\x80") * n, "little")
    w = gmpy2.f_mod_2exp(z + offset, bits * n)
    raw = int(w).to_bytes(bits // 8 * n, "little")
    limbs = np.frombuffer(raw, dtype=np.uint64).reshape(n, nlimb)
    if nlimb == 1:
        return (limbs[:, 0] ^ np.uint64(1 << 63)).view(np.int64).copy()
    vals = limbs[:, nlimb - 1].astype(object)
    for i in range(nlimb - 2, -1, -1):
        vals = (vals << 64) + limbs[:, i].astype(object)
    vals = vals - half
    return _shrink(vals)


def _shrink(a: np.ndarray) -> np.ndarray:
    """Use int64 storage whenever the values fit."""
    if a.dtype != object:
        return a
    if _max_abs(a) < (1 << 62):
        return a.astype(np.int64)
    return a


def series_mul(a: np.ndarray, b: np.ndarray, n_max: int) -> np.ndarray:
    """Exact truncated product of integer power series (Kronecker substitution)."""
    a = a[: n_max + 1]
    b = b[: n_max + 1]
    nnz = min(int(np.count_nonzero(a)), int(np.count_nonzero(b)))
    if nnz == 0:
        return np.zeros(n_max + 1, dtype=np.int64)
    bound = nnz * _max_abs(a) * _max_abs(b)
    bits = bound.bit_length() + 2
    bits = 64 * ((bits + 63) // 64)
    za = _pack(a, bits)
    zb = za if b is a else _pack(b, bits)
    out = _unpack(za * zb, bits, n_max + 1)
    return out


def series_pow(a: np.ndarray, e: int, n_max: int) -> np.ndarray:
    result = np.zeros(n_max + 1, dtype=np.int64)
    result[0] = 1
    base = a[: n_max + 1]
    first = True
    while e > 0:
        if e & 1:
            result = base.copy() if first else series_mul(result, base, n_max)
            first = False
        e >>= 1
        if e:
            base = series_mul(base, base, n_max)
    return result


def partition_series(n_max: int) -> np.ndarray:
    """1 / prod(1 - x^n) by Euler's recurrence (exact)."""
    p = [0] * (n_max + 1)
    p[0] = 1
    pents = []
    k = 1
    while True:
        g1 = k * (3 * k - 1) // 2
        if g1 > n_max:
            break
        pents.append((g1, 1 if k % 2 else -1))
        g2 = k * (3 * k + 1) // 2
        if g2 <= n_max:
            pents.append((g2, 1 if k % 2 else -1))
        k += 1
    for n in range(1, n_max + 1):
        s = 0
        for g, sg in pents:
            if g > n:
                break
            s += sg * p[n - g]
        p[n] = s
    return _shrink(np.array(p, dtype=object))


def _dilate(a: np.ndarray, d: int, n_max: int) -> np.ndarray:
    out = np.zeros(n_max + 1, dtype=a.dtype)
    m = min(len(a) - 1, n_max // d)
    out[: d * m + 1 : d] = a[: m + 1]
    return out


def eta_expansion(exponents: dict[int, int], n_max: int) -> np.ndarray:
    """a(1..n_max) of prod_d eta(d z)^{e_d} with the leading power removed.

    Returned array has length n_max + 1 with index 0 unused (set to 0) so
    that out[n] = a(n).
    """
    if n_max < 1:
        raise ValueError("n_max must be positive")
    if not exponents:
        raise ValueError("empty exponent map")
    if any(int(d) <= 0 for d in exponents):
        raise ValueError("divisors must be positive")
    total = sum(exponents.values())
    if total % 2 or (total // 2) % 2 or total < 0:
        raise ValueError("total weight sum(e_d)/2 must be an even non-negative integer")
    m = n_max - 1
    series = np.zeros(m + 1, dtype=np.int64)
    series[0] = 1
    for d, e in sorted(exponents.items()):
        if e == 0:
            continue
        base = pentagonal(m // d) if e > 0 else partition_series(m // d)
        factor = series_pow(base, abs(e), m // d)
        series = series_mul(series, _dilate(factor, d, m), m)
    out = np.zeros(n_max + 1, dtype=series.dtype)
    out[1:] = series
    return out


def coeffs_from_ap(ap: dict[int, int], level: int, weight: int, n_max: int) -> np.ndarray:
    """Extend prime eigenvalues to a(1..n_max) through the Hecke relations."""
    spf = smallest_prime_factor(max(n_max, 2))
    a: list[int] = [0] * (n_max + 1)
    if n_max >= 1:
        a[1] = 1
    pk = weight - 1
    for n in range(2, n_max + 1):
        p = int(spf[n])
        m, e = n, 0
        while m % p == 0:
            m //= p
            e += 1
        if m > 1:
            a[n] = a[m] * a[n // m]
            continue
        if p not in ap:
            raise KeyError(f"a({p}) not supplied")
        if e == 1:
            a[n] = int(ap[p])
        else:
            chi = 0 if level % p == 0 else 1
            a[n] = ap[p] * a[n // p] - chi * p**pk * a[n // (p * p)]
    return _shrink(np.array(a, dtype=object))


# --------------------------------------------------------------- newforms


@dataclass(frozen=True)
class EtaSource:
    exponents: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class ManinSource:
    level: int
    system: str  # eigen-system id, e.g. "a2=-2"


@dataclass
class Newform:
    label: str
    weight: int
    level: int
    source: EtaSource | ManinSource
    root_number: int | None = None  # +1, -1 or None (unknown)
    coeffs: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=np.int64), repr=False)
    _lam: np.ndarray | None = field(default=None, repr=False)
    _ap: dict | None = field(default=None, repr=False)  # a_p already known (Manin source)

    @property
    def n_max(self) -> int:
        return len(self.coeffs) - 1

    @property
    def mu1(self) -> float:
        return -(self.weight - 1) / 2

    @property
    def mu2(self) -> float:
        return -(self.weight + 1) / 2

    def chi_r(self, p: int) -> int:
        return 0 if self.level % p == 0 else 1

    def ensure(self, n: int) -> "Newform":
        """Extend the coefficient cache to cover 1..n (single writer)."""
        if n <= self.n_max:
            return self
        target = max(n, int(1.25 * self.n_max))
        self.coeffs = _generate(self, target)
        self._lam = None
        _save_cache(self)
        return self

    def a(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        self.ensure(n)
        return int(self.coeffs[n])

    def lam_array(self, n: int) -> np.ndarray:
        """float64 lambda(0..n) with lambda(0) = 0."""
        self.ensure(n)
        if self._lam is None or len(self._lam) < self.n_max + 1:
            idx = np.arange(self.n_max + 1, dtype=np.float64)
            idx[0] = 1.0
            c = self.coeffs
            if c.dtype == object:
                # exact integer -> nearest double, then scale by n^{-(k-1)/2}
                cf = np.array([float(v) for v in c], dtype=np.float64)
            else:
                cf = c.astype(np.float64)
            lam = cf / idx ** ((self.weight - 1) / 2)
            lam[0] = 0.0
            self._lam = lam
        return self._lam[: n + 1]

    def eps(self) -> int:
        if self.root_number is None:
            from .afe import root_number_estimate

            self.root_number = root_number_estimate(self).sign
        return self.root_number


def lam(form: Newform, n: int) -> float:
    """Normalised Hecke eigenvalue a(n) / n^{(k-1)/2}."""
    if n <= 0:
        raise ValueError("n must be positive")
    return float(form.lam_array(n)[n])


def _generate(form: Newform, n_max: int) -> np.ndarray:
    src = form.source
    if isinstance(src, EtaSource):
        return eta_expansion(dict(src.exponents), n_max)
    from . import modsym

    # a_p costs O(p) each, so only primes beyond the previous bound are computed
    known = form._ap or {}
    lo = max(known) if known else 0
    if n_max > lo:
        known = {**known, **modsym.eigen_ap(src.level, src.system, n_max, lo)}
    form._ap = known
    return coeffs_from_ap(known, form.level, form.weight, n_max)


# ----------------------------------------------------------------- cache


def cache_root() -> Path | None:
    env = os.environ.get("TWISTLAB_CACHE")
    return Path(env) if env else None


def _cache_path(label: str) -> Path | None:
    root = cache_root()
    return None if root is None else root / "coeffs" / f"{label}.csv"


def _save_cache(form: Newform) -> None:
    path = _cache_path(form.label)
    if path is None:
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".csv.tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "a_n"])
        for n in range(1, form.n_max + 1):
            w.writerow([n, int(form.coeffs[n])])
    tmp.replace(path)
    meta = {"version": CACHE_VERSION, "label": form.label, "n_max": form.n_max,
            "weight": form.weight, "level": form.level}
    path.with_suffix(".meta.json").write_text(json.dumps(meta, sort_keys=True) + "\n")


def _load_cache(form: Newform) -> None:
    path = _cache_path(form.label)
    if path is None or not path.exists():
        return
    meta_path = path.with_suffix(".meta.json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        if meta.get("version") != CACHE_VERSION:
            return
    vals = [0]
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != ["n", "a_n"]:
            return
        for i, row in enumerate(rd, start=1):
            if int(row[0]) != i:
                return
            vals.append(int(row[1]))
    if len(vals) > 1:
        form.coeffs = _shrink(np.array(vals, dtype=object))


# --------------------------------------------------------------- registry

_BUILTIN: dict[str, Callable[[], Newform]] = {
    "Delta": lambda: Newform("Delta", 12, 1, EtaSource(((1, 24),))),
    "11a": lambda: Newform("11a", 2, 11, EtaSource(((1, 2), (11, 2)))),
    "37a": lambda: Newform("37a", 2, 37, ManinSource(37, "a2=-2")),
    "37b": lambda: Newform("37b", 2, 37, ManinSource(37, "a2=0")),
}
_ALIASES = {"delta": "Delta", "Δ": "Delta", "D": "Delta"}
_REGISTRY: dict[str, Newform] = {}


def builtin_labels() -> list[str]:
    return list(_BUILTIN)


def get_form(label: str, n_max: int = 0) -> Newform:
    label = _ALIASES.get(label, label)
    if label not in _BUILTIN:
        raise KeyError(f"unknown form {label!r}; built-ins: {', '.join(_BUILTIN)}")
    form = _REGISTRY.get(label)
    if form is None:
        form = _BUILTIN[label]()
        _load_cache(form)
        if isinstance(form.source, ManinSource):
            from . import modsym

            form.root_number = modsym.eigen_root_number(form.source.level, form.source.system)
        _REGISTRY[label] = form
    if n_max:
        form.ensure(n_max)
    return form


# --------------------------------------------------------- symmetric square


def zeta_partial(s: float, level: int) -> float:
    """zeta^{(N)}(s): the Riemann zeta function with Euler factors at p | N removed."""
    from scipy.special import zeta

    z = float(zeta(s))
    for p in factorize(level) if level > 1 else {}:
        z *= 1 - p ** (-s)
    return z


def lambda_prime_power_table(form: Newform, p: int, e_max: int) -> list[float]:
    """lambda(p^e), e = 0..e_max, from lambda(p) and the Hecke recursion."""
    lp = lam(form, p)
    chi = form.chi_r(p)
    out = [1.0, lp]
    for _ in range(2, e_max + 1):
        out.append(lp * out[-1] - chi * out[-2])
    return out[: e_max + 1]


def lambda_squares(form: Newform, n_max: int) -> np.ndarray:
    """lambda(n^2) for n <= n_max, built multiplicatively from lambda(p)."""
    spf = smallest_prime_factor(max(n_max, 2))
    form.ensure(max(n_max, 2))
    lamv = form.lam_array(n_max)
    out = np.zeros(n_max + 1)
    out[1] = 1.0
    cache: dict[int, list[float]] = {}
    for n in range(2, n_max + 1):
        p = int(spf[n])
        m, e = n, 0
        while m % p == 0:
            m //= p
            e += 1
        if m > 1:
            out[n] = out[m] * out[n // m]
            continue
        tab = cache.get(p)
        if tab is None or len(tab) <= 2 * e:
            lp = float(lamv[p])
            chi = form.chi_r(p)
            tab = [1.0, lp]
            while len(tab) <= 2 * max(e, 8):
                tab.append(lp * tab[-1] - chi * tab[-2])
            cache[p] = tab
        out[n] = tab[2 * e]
    return out


def sym2_coefficients(form: Newform, n_max: int) -> np.ndarray:
    """Dirichlet coefficients of L(Sym^2 f, s) (analytic normalisation).

    Unramified p: 1 / (1 - (l^2 - 1) x + (l^2 - 1) x^2 - x^3) with l = lambda(p).
    p | N (squarefree level): 1 / (1 - l^2 x) with l^2 = 1/p.
    """
    form.ensure(max(n_max, 2))
    lamv = form.lam_array(n_max)
    b = np.zeros(n_max + 1)
    b[1] = 1.0
    spf = smallest_prime_factor(max(n_max, 2))
    local: dict[int, list[float]] = {}
    for p in primes_upto(n_max):
        p = int(p)
        l2 = float(lamv[p]) ** 2
        emax = int(math.log(n_max) / math.log(p)) + 1
        c = [1.0]
        for e in range(1, emax + 1):
            if form.level % p:
                v = (l2 - 1) * c[e - 1]
                if e >= 2:
                    v -= (l2 - 1) * c[e - 2]
                if e >= 3:
                    v += c[e - 3]
            else:
                v = l2 * c[e - 1]
            c.append(v)
        local[p] = c
    for n in range(2, n_max + 1):
        p = int(spf[n])
        m, e = n, 0
        while m % p == 0:
            m //= p
            e += 1
        b[n] = local[p][e] * b[m]
    return b


@dataclass(frozen=True)
class Sym2Value:
    label: str
    value: float
    cutoffs: tuple[int, ...]
    error: float
    method: str = "afe"


def sym2_value(form: Newform) -> Sym2Value:
    """L*(Sym^2 f, 1) for squarefree level (equal to L(Sym^2 f, 1) there).

    Evaluated through the approximate functional equation of the degree-3
    L-function: conductor N^2, gamma factor
    Gamma_R(s+1) Gamma_R(s+k-1) Gamma_R(s+k), root number +1.  The error
    estimate compares two weight parameters and two truncations.
    """
    if not is_squarefree(form.level):
        raise ValueError("non-squarefree level is unsupported")
    from .afe import sym2_afe

    v1, n1 = sym2_afe(form, A=64)
    v2, n2 = sym2_afe(form, A=48)
    v3, _ = sym2_afe(form, A=64, length_factor=2.0)
    err = max(abs(v1 - v2), abs(v1 - v3), 1e-15 * abs(v1))
    return Sym2Value(form.label, float(v1), (n1, n2), float(err))


def sym2_smoothed(form: Newform, X: float, n_max: int | None = None) -> float:
    """zeta^{(N)}(2) sum_n lambda(n^2) e^{-n/X} / n (slowly convergent check)."""
    if n_max is None:
        n_max = int(40 * X)
    ls = lambda_squares(form, n_max)
    n = np.arange(1, n_max + 1)
    s = math.fsum(ls[1:] * np.exp(-n / X) / n)
    return zeta_partial(2.0, form.level) * s


def pnt_check(form: Newform, x: int) -> float:
    """(sum_{p <= x} lambda(p)^2 log p) / x."""
    if form.n_max < x:
        raise ValueError(f"coefficient cache covers n <= {form.n_max} < x = {x}")
    ps = primes_upto(x)
    lv = form.lam_array(x)[ps]
    return math.fsum(lv**2 * np.log(ps)) / x
