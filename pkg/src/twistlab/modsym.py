"""Weight-2 modular symbols for Gamma_0(N), squarefree N.

Exact layer: Manin symbols (c:d) in P^1(Z/N), the two- and three-term
relations, the quotient basis over Q (Fractions), Hecke matrices from
Heilbronn-Merel matrices and the star involution.  Rational eigen-systems
are cut out as common left kernels of T_p - a_p for p <= 19.

Numeric layer: the two periods turning the rational functionals into
<a/q> = 2 pi i int_{i oo}^{a/q} f(z) dz, and fully vectorised
continued-fraction evaluation of whole tables of such symbols.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import gcd
from pathlib import Path

import numpy as np

from .numtheory import is_prime, is_squarefree, primes_upto

FINGERPRINT_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19)


# --------------------------------------------------------------- P^1(Z/N)


class P1List:
    """Canonical representatives of P^1(Z/N) and an O(1) index lookup."""

    def __init__(self, N: int):
        self.N = N
        units = [u for u in range(1, N + 1) if gcd(u, N) == 1] if N > 1 else [1]
        canon = {}
        reps = []
        lookup = np.full((N, N), -1, dtype=np.int64)
        for c in range(N):
            for d in range(N):
                if gcd(gcd(c, d), N) != 1 and N > 1:
                    continue
                key = min(((u * c) % N, (u * d) % N) for u in units)
                if key not in canon:
                    canon[key] = len(reps)
                    reps.append(key)
                lookup[c, d] = canon[key]
        if N == 1:
            reps = [(0, 0)]
            lookup[0, 0] = 0
        self.reps = reps
        self.lookup = lookup

    def __len__(self) -> int:
        return len(self.reps)

    def index(self, c: int, d: int) -> int:
        return int(self.lookup[c % self.N, d % self.N])


# ------------------------------------------------------------ exact algebra


def _rref(rows: list[list[Fraction]], ncols: int) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form over Q; returns (nonzero rows, pivot columns)."""
    m = [r[:] for r in rows if any(r)]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def nullspace(mat: list[list[Fraction]], ncols: int) -> list[list[Fraction]]:
    """Basis of {x : mat x = 0} as a list of vectors."""
    red, piv = _rref(mat, ncols)
    free = [c for c in range(ncols) if c not in piv]
    basis = []
    for fcol in free:
        v = [Fraction(0)] * ncols
        v[fcol] = Fraction(1)
        for row, pc in zip(red, piv):
            v[pc] = -row[fcol]
        basis.append(v)
    return basis


def _matmul(A, B):
    n, k, m = len(A), len(B), len(B[0]) if B else 0
    return [[sum((A[i][t] * B[t][j] for t in range(k)), Fraction(0)) for j in range(m)] for i in range(n)]


def _transpose(A):
    return [list(r) for r in zip(*A)] if A else []


def _primitive_int(v: list[Fraction]) -> list[int]:
    den = 1
    for x in v:
        den = den * x.denominator // gcd(den, x.denominator)
    ints = [int(x * den) for x in v]
    g = 0
    for x in ints:
        g = gcd(g, abs(x))
    g = g or 1
    first = next((x for x in ints if x), 1)
    sgn = 1 if first > 0 else -1
    return [sgn * x // g for x in ints]


# ------------------------------------------------------------- the space


@dataclass
class ManinSymbolSpace:
    N: int
    p1: P1List = field(repr=False)
    dim: int
    # coords[i] = coordinates of Manin symbol i in the quotient basis
    coords: list[list[Fraction]] = field(repr=False)
    basis_symbols: list[int] = field(repr=False)
    _hecke: dict = field(default_factory=dict, repr=False)
    _systems: list | None = field(default=None, repr=False)

    def symbol_vector(self, c: int, d: int) -> list[Fraction]:
        return self.coords[self.p1.index(c, d)]


def build_space(N: int) -> ManinSymbolSpace:
    """Quotient of the free module on P^1(Z/N) by the Manin relations."""
    if N < 1 or N > 200 or not is_squarefree(N):
        raise ValueError(f"unsupported level N={N} (need squarefree N <= 200)")
    p1 = P1List(N)
    n = len(p1)
    sig = [p1.index(d, -c) for c, d in p1.reps]
    tau = [p1.index(d, -c - d) for c, d in p1.reps]
    # two-term relations: x = -x sigma; fixed points vanish
    free_of = [0] * n  # signed pointer: +(g+1) / -(g+1) / 0 for zero
    gens: list[int] = []
    for i in range(n):
        if free_of[i] != 0 or (i in gens):
            continue
        j = sig[i]
        if j == i:
            free_of[i] = 0
            continue
        if i < j:
            g = len(gens)
            gens.append(i)
            free_of[i] = g + 1
            free_of[j] = -(g + 1)
    ng = len(gens)

    def gen_vec(i: int) -> list[Fraction]:
        v = [Fraction(0)] * ng
        f = free_of[i]
        if f:
            v[abs(f) - 1] += 1 if f > 0 else -1
        return v

    rows = []
    seen = set()
    for i in range(n):
        if i in seen:
            continue
        orbit = [i, tau[i], tau[tau[i]]]
        seen.update(orbit)
        v = [Fraction(0)] * ng
        for x in orbit:
            v = [a + b for a, b in zip(v, gen_vec(x))]
        if orbit[0] == orbit[1]:
            v = gen_vec(i)  # x tau = x forces 3x = 0
        if any(v):
            rows.append(v)
    red, piv = _rref(rows, ng)
    nonpiv = [c for c in range(ng) if c not in piv]
    dim = len(nonpiv)
    pos = {c: k for k, c in enumerate(nonpiv)}
    gen_coords: list[list[Fraction]] = []
    for g in range(ng):
        v = [Fraction(0)] * dim
        if g in pos:
            v[pos[g]] = Fraction(1)
        else:
            row = red[piv.index(g)]
            for c in nonpiv:
                if row[c]:
                    v[pos[c]] = -row[c]
        gen_coords.append(v)
    coords = []
    for i in range(n):
        f = free_of[i]
        if f == 0:
            coords.append([Fraction(0)] * dim)
        elif f > 0:
            coords.append(gen_coords[f - 1][:])
        else:
            coords.append([-x for x in gen_coords[-f - 1]])
    basis_symbols = [gens[c] for c in nonpiv]
    return ManinSymbolSpace(N, p1, dim, coords, basis_symbols)


def heilbronn_merel(n: int) -> list[tuple[int, int, int, int]]:
    """Integer matrices (a b; c d), det n, a > b >= 0, d > c >= 0."""
    out = []
    for a in range(1, n + 1):
        for d in range(1, n + 2 - a):
            bc = a * d - n
            if bc < 0:
                continue
            if bc == 0:
                for c in range(d):
                    out.append((a, 0, c, d))
                for b in range(1, a):
                    out.append((a, b, 0, d))
                continue
            for b in range(1, a):
                if bc % b == 0 and bc // b < d:
                    out.append((a, b, bc // b, d))
    return out


def _action_matrix(space: ManinSymbolSpace, mats) -> list[list[Fraction]]:
    """Columns: image of each basis symbol under sum_M (c:d) M."""
    N = space.N
    cols = []
    for i in space.basis_symbols:
        c, d = space.p1.reps[i]
        v = [Fraction(0)] * space.dim
        for a, b, cc, dd in mats:
            x, y = c * a + d * cc, c * b + d * dd
            if N > 1 and gcd(gcd(x, y), N) != 1:
                continue
            w = space.coords[space.p1.index(x, y)]
            v = [s + t for s, t in zip(v, w)]
        cols.append(v)
    return _transpose(cols)


def hecke_matrix(space: ManinSymbolSpace, p: int) -> list[list[Fraction]]:
    """T_p on the quotient basis (matrix acting on column coordinates)."""
    if not is_prime(p):
        raise ValueError("p must be prime")
    if space.N % p == 0:
        raise ValueError(f"p={p} divides the level")
    if p not in space._hecke:
        space._hecke[p] = _action_matrix(space, heilbronn_merel(p))
    return space._hecke[p]


def star_matrix(space: ManinSymbolSpace) -> list[list[Fraction]]:
    """The involution (c:d) -> (-c:d), i.e. {a, b} -> {-a, -b}."""
    cols = []
    for i in space.basis_symbols:
        c, d = space.p1.reps[i]
        cols.append(space.symbol_vector(-c, d))
    return _transpose(cols)


# ----------------------------------------------------------- eigen-systems


@dataclass(frozen=True)
class EigenSystem:
    level: int
    ap: tuple[tuple[int, int], ...]
    dual_basis: tuple[tuple[Fraction, ...], ...]

    @property
    def id(self) -> str:
        return ",".join(f"a{p}={a}" for p, a in self.ap)

    @property
    def eisenstein(self) -> bool:
        return all(a == p + 1 for p, a in self.ap)


def _intersect(basis: list[list[Fraction]], cond: list[list[Fraction]], dim: int) -> list[list[Fraction]]:
    """Vectors v in span(basis) with cond v = 0."""
    if not basis:
        return []
    B = _transpose(basis)  # dim x k
    CB = _matmul(cond, B)
    ker = nullspace(CB, len(basis))
    return [[sum((B[i][j] * kv[j] for j in range(len(basis))), Fraction(0)) for i in range(dim)] for kv in ker]


def eigen_systems(space: ManinSymbolSpace) -> list[EigenSystem]:
    """All rational systems (a_p)_{p<=19, p not | N} with their left eigenspaces."""
    if space._systems is not None:
        return space._systems
    ps = [p for p in FINGERPRINT_PRIMES if space.N % p]
    dim = space.dim
    ident = [[Fraction(int(i == j)) for j in range(dim)] for i in range(dim)]
    frontier = [((), ident)]
    for p in ps:
        Tt = _transpose(hecke_matrix(space, p))
        bound = int(math.isqrt(4 * p))
        cands = list(range(-bound, bound + 1)) + [p + 1]
        nxt = []
        for ap, basis in frontier:
            for a in cands:
                cond = [[Tt[i][j] - (a if i == j else 0) for j in range(dim)] for i in range(dim)]
                sub = _intersect(basis, cond, dim)
                if sub:
                    nxt.append((ap + ((p, a),), sub))
        frontier = nxt
    systems = [EigenSystem(space.N, ap, tuple(tuple(v) for v in basis)) for ap, basis in frontier]
    systems.sort(key=lambda s: (s.eisenstein, [a for _, a in s.ap]))
    space._systems = systems
    return systems


def find_system(space: ManinSymbolSpace, key: str) -> EigenSystem:
    """Select a cuspidal system by a partial fingerprint such as 'a2=-2'."""
    want = {}
    for part in filter(None, key.split(",")):
        p, a = part.strip().lstrip("a").split("=")
        want[int(p)] = int(a)
    hits = [s for s in eigen_systems(space)
            if not s.eisenstein and all(dict(s.ap).get(p) == a for p, a in want.items())]
    if len(hits) != 1:
        raise KeyError(f"{len(hits)} systems at level {space.N} match {key!r}")
    return hits[0]


# ------------------------------------------------------ continued fractions


def cf_symbol_sum(table: np.ndarray, N: int, lookup: np.ndarray, num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """sum over the path {oo, num/den} of table[Manin symbol], vectorised.

    {oo, u/v} = sum_{k=0}^{n} ((-1)^{k-1} q_k : q_{k-1}) with q_k the
    convergent denominators (q_{-1} = 0, q_0 = 1).  Paths still being
    expanded are kept in compacted arrays, so each Euclid step only
    touches live entries.
    """
    num = np.asarray(num, dtype=np.int64)
    den = np.asarray(den, dtype=np.int64)
    if np.any(den <= 0):
        raise ValueError("denominators must be positive")
    flat = lookup.reshape(-1)
    acc = np.zeros((len(num),) + table.shape[1:], dtype=table.dtype)
    # k = 0 term: (-1 : 0)
    acc += table[flat[((-1) % N) * N]]
    a0 = np.floor_divide(num, den)
    n_, d_ = den, num - a0 * den
    qprev = np.zeros(len(num), dtype=np.int64)
    qcur = np.ones(len(num), dtype=np.int64)
    pos = np.arange(len(num))
    keep = d_ > 0
    n_, d_, qprev, qcur, pos = n_[keep], d_[keep], qprev[keep], qcur[keep], pos[keep]
    k = 0
    while len(pos):
        k += 1
        a = n_ // d_
        n_, d_ = d_, n_ - a * d_
        qprev, qcur = qcur, a * qcur + qprev
        cc = qcur % N if k % 2 == 1 else (-qcur) % N  # (-1)^{k-1} q_k
        acc[pos] += table[flat[cc * N + qprev % N]]
        keep = d_ > 0
        if not keep.all():
            n_, d_, qprev, qcur, pos = n_[keep], d_[keep], qprev[keep], qcur[keep], pos[keep]
    return acc


@dataclass
class EigenSymbol:
    """Rational +/- functionals of one eigen-system and its periods.

    <x> = Omega_plus * phi_plus(x) + Omega_minus * phi_minus(x), with
    Omega_plus real and Omega_minus purely imaginary.
    """

    space: ManinSymbolSpace = field(repr=False)
    system: EigenSystem
    phi_plus: list[int]
    phi_minus: list[int]
    per_symbol: np.ndarray = field(repr=False)  # (|P1|, 2) int64 values of phi+/-
    omega_plus: float = float("nan")
    omega_minus: complex = complex("nan")
    period_check: float = float("nan")

    def rational(self, a: int, q: int) -> tuple[int, int]:
        v = cf_symbol_sum(self.per_symbol, self.space.N, self.space.p1.lookup, np.array([a]), np.array([q]))[0]
        return int(v[0]), int(v[1])


def _per_symbol_values(space: ManinSymbolSpace, phi: list[Fraction]) -> np.ndarray:
    return np.array([sum((c * x for c, x in zip(phi, v)), Fraction(0)) for v in space.coords], dtype=object)


def _functionals(space: ManinSymbolSpace, system: EigenSystem) -> tuple[list[int], list[int]]:
    J = star_matrix(space)
    basis = [list(v) for v in system.dual_basis]
    dim = space.dim
    Jt = _transpose(J)
    out = []
    for sgn in (1, -1):
        cond = [[Jt[i][j] - (sgn if i == j else 0) for j in range(dim)] for i in range(dim)]
        sub = _intersect(basis, cond, dim)
        if len(sub) != 1:
            raise ValueError(f"system {system.id} is not one-dimensional in the {'+-'[sgn < 0]} part")
        out.append(_primitive_int(sub[0]))
    return out[0], out[1]


def _period_value(coeffs: np.ndarray, N: int, gamma: tuple[int, int, int, int]) -> complex:
    """2 pi i int_{z0}^{gamma z0} f dz with z0 = -d/c + i/c (so c z0 + d = i)."""
    a, b, c, d = gamma
    z0 = complex(-d / c, 1 / c)
    z1 = complex(a / c, 1 / c)
    n = np.arange(1, len(coeffs))
    y = 1 / c
    nmax = int(math.ceil(40 / (2 * math.pi * y)))
    if nmax >= len(coeffs):
        raise ValueError("not enough coefficients for the period integral")
    n = n[:nmax]
    an = coeffs[1 : nmax + 1].astype(np.float64)
    e1 = np.exp(2j * np.pi * n * z1)
    e0 = np.exp(2j * np.pi * n * z0)
    return complex(np.sum(an / n * (e1 - e0)))


def _gamma_candidates(N: int):
    """Matrices (a b; N c' d) in Gamma_0(N), by increasing size."""
    for c in (N, 2 * N, 3 * N):
        for a in range(1, 4 * c):
            if gcd(a, c) != 1:
                continue
            d = pow(a, -1, c)
            b = (a * d - 1) // c
            yield (a, b, c, d)


def eigen_symbol(space: ManinSymbolSpace, system: EigenSystem, coeffs: np.ndarray | None = None) -> EigenSymbol:
    """Functionals plus periods calibrated by two independent gammas."""
    pp, pm = _functionals(space, system)
    table = np.zeros((len(space.p1), 2), dtype=np.int64)
    vp = _per_symbol_values(space, [Fraction(x) for x in pp])
    vm = _per_symbol_values(space, [Fraction(x) for x in pm])
    for i in range(len(space.p1)):
        if vp[i].denominator != 1 or vm[i].denominator != 1:
            raise ValueError("non-integral symbol value; rescale failed")
        table[i, 0] = int(vp[i])
        table[i, 1] = int(vm[i])
    es = EigenSymbol(space, system, pp, pm, table)
    if coeffs is None:
        ap = dict(system.ap)
        ap.update(_ap_fast(es, space.N, 60 * space.N))
        from .hecke import coeffs_from_ap

        coeffs = coeffs_from_ap(ap, space.N, 2, 60 * space.N)
    found = []
    for g in _gamma_candidates(space.N):
        if found and g[2] == found[0][0][2]:
            continue  # cross-check gamma comes from a different bottom-left entry
        x, y = es.rational(g[0], g[2])
        if x != 0 and y != 0:
            found.append((g, x, y))
            if len(found) == 2:
                break
    if len(found) < 2:
        raise ValueError("no gamma with both symbol parts nonzero")
    om = []
    for g, x, y in found:
        v = _period_value(coeffs, space.N, g)
        om.append((v.real / x, v.imag / y))
    es.omega_plus = om[0][0]
    es.omega_minus = 1j * om[0][1]
    es.period_check = max(abs(om[0][0] - om[1][0]) / abs(om[0][0]), abs(om[0][1] - om[1][1]) / abs(om[0][1]))
    return es


# ------------------------------------------------------- fast eigenvalues


def _ap_fast(es: EigenSymbol, N: int, pmax: int, pmin: int = 0) -> dict[int, int]:
    """a_p for pmin < p <= pmax from phi(T_p {oo, beta}) = a_p phi({oo, beta}).

    T_p {oo, beta} = sum_{j<p} {oo, (beta + j)/p} + {oo, p beta} (p not | N);
    U_N drops the last term.
    """
    table = es.per_symbol
    lookup = es.space.p1.lookup
    beta = None
    for cden in range(1, 50):
        for bnum in range(0, cden):
            if gcd(bnum, cden) != 1:
                continue
            v = cf_symbol_sum(table, N, lookup, np.array([bnum]), np.array([cden]))[0]
            for col in (0, 1):
                if v[col] != 0:
                    beta = (bnum, cden, col, int(v[col]))
                    break
            if beta:
                break
        if beta:
            break
    b, c, col, base = beta
    out = {}
    primes = [int(p) for p in primes_upto(pmax) if p > pmin]
    # batch primes so each vectorised pass handles ~2e6 paths
    batch: list[int] = []
    size = 0

    def flush(batch):
        nums, dens, owner = [], [], []
        for p in batch:
            j = np.arange(p, dtype=np.int64)
            nums.append(b + j * c)
            dens.append(np.full(p, p * c, dtype=np.int64))
            owner.append(np.full(p, p))
            if N % p:
                g = gcd(p * b, c)
                nums.append(np.array([p * b // g]))
                dens.append(np.array([c // g]))
                owner.append(np.array([p]))
        nums = np.concatenate(nums)
        dens = np.concatenate(dens)
        sizes = np.array([len(o) for o in owner])
        vals = cf_symbol_sum(np.ascontiguousarray(table[:, col]), N, lookup, nums, dens)
        starts = np.concatenate(([0], np.cumsum(sizes)[:-1]))
        tots = np.add.reduceat(vals, starts)
        # owner blocks come in pairs (j-paths, then p*beta) for p not | N
        bi = 0
        for p in batch:
            nblk = 2 if N % p else 1
            tot = int(tots[bi : bi + nblk].sum())
            bi += nblk
            if tot % base:
                raise ArithmeticError(f"a_{p} not integral")
            out[p] = tot // base

    for p in primes:
        batch.append(p)
        size += p
        if size > 2_000_000:
            flush(batch)
            batch, size = [], 0
    if batch:
        flush(batch)
    return out


@lru_cache(maxsize=8)
def _space_cached(N: int) -> ManinSymbolSpace:
    return build_space(N)


@lru_cache(maxsize=16)
def _eigen_symbol_cached(N: int, key: str) -> EigenSymbol:
    space = _space_cached(N)
    return eigen_symbol(space, find_system(space, key))


def eigen_ap(level: int, key: str, pmax: int, pmin: int = 0) -> dict[int, int]:
    """Hecke eigenvalues a_p, pmin < p <= pmax (including p | N) of a rational system."""
    es = _eigen_symbol_cached(level, key)
    return _ap_fast(es, level, max(pmax, 2), pmin)


def eigen_root_number(level: int, key: str) -> int:
    """eps(f) = -w_N = a_N for weight 2 and prime level."""
    if not is_prime(level):
        raise ValueError("root number from a_N needs prime level")
    return eigen_ap(level, key, level)[level]


# ----------------------------------------------------------- symbol tables


@dataclass
class ModularSymbolTable:
    label: str
    q: int
    values: np.ndarray  # index a = 0..q-1, entry 0 unused (nan)
    rational: np.ndarray = field(repr=False)  # (q, 2) int64 phi+/- values

    @property
    def units(self) -> np.ndarray:
        return np.arange(1, self.q)

    @property
    def mean(self) -> complex:
        v = self.values[1:]
        return complex(math.fsum(v.real), math.fsum(v.imag)) / (self.q - 1)

    @property
    def variance(self) -> float:
        v = self.values[1:] - self.mean
        return math.fsum(np.abs(v) ** 2) / (self.q - 1)

    @property
    def plus(self) -> np.ndarray:
        a = self.units
        return 0.5 * (self.values[a] + self.values[(-a) % self.q])

    @property
    def minus(self) -> np.ndarray:
        a = self.units
        return 0.5 * (self.values[a] - self.values[(-a) % self.q])


def symbol(es: EigenSymbol, a: int, q: int) -> complex:
    """<a/q> for a unit a mod q."""
    if a % q == 0:
        raise ValueError("a must be a unit mod q")
    if es.space.N % q == 0:
        raise ValueError("q divides the level")
    x, y = es.rational(a % q, q)
    return es.omega_plus * x + es.omega_minus * y


def table(es: EigenSymbol, q: int, label: str = "") -> ModularSymbolTable:
    if q < 2 or not is_prime(q):
        raise ValueError(f"q={q} is not prime")
    if es.space.N % q == 0:
        raise ValueError("q divides the level")
    a = np.arange(1, q, dtype=np.int64)
    rat = np.zeros((q, 2), dtype=np.int64)
    rat[1:] = cf_symbol_sum(es.per_symbol, es.space.N, es.space.p1.lookup, a, np.full(q - 1, q))
    vals = np.full(q, np.nan, dtype=np.complex128)
    vals[1:] = es.omega_plus * rat[1:, 0] + es.omega_minus * rat[1:, 1]
    return ModularSymbolTable(label or es.system.id, q, vals, rat)


def dump_table_csv(cache: Path, tab: ModularSymbolTable) -> Path:
    path = Path(cache) / "modsym" / f"{tab.label}_q{tab.q}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["a", "re", "im"])
        for a in range(1, tab.q):
            v = tab.values[a]
            w.writerow([a, repr(float(v.real)), repr(float(v.imag))])
    return path


def for_form(label: str) -> EigenSymbol:
    """Eigen-symbol for a built-in weight-2 form (11a, 37a, 37b)."""
    from .hecke import get_form

    form = get_form(label)
    if form.weight != 2:
        raise ValueError("modular symbols are implemented for weight 2 only")
    space = _space_cached(form.level)
    key = {"11a": "a2=-2", "37a": "a2=-2", "37b": "a2=0"}.get(form.label)
    if key is None:
        raise KeyError(f"no modular-symbol system for {label}")
    sysm = find_system(space, key)
    es = _eigen_symbol_cached(form.level, key)
    assert es.system == sysm
    return es
