"""Dirichlet characters modulo a prime and the complete exponential sums
built from them (Gauss, hyper-Kloosterman, Evans).

Characters are indexed by j in [0, q-2] through a fixed primitive root g:
chi_j(g^t) = omega^(j t) with omega = exp(2 pi i / (q-1)).  Every
character-indexed table is produced by one length-(q-1) DFT taken in
discrete-log order; the DFT itself is a Bluestein chirp-z transform on
top of a power-of-two FFT.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numtheory import is_prime, primitive_root

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------- DFT core


def unit_roots(n: int, k: np.ndarray) -> np.ndarray:
    """exp(2 pi i k / n) with k reduced exactly mod n before scaling."""
    k = np.mod(np.asarray(k, dtype=np.int64), n)
    return np.exp(1j * (TWO_PI / n) * k)


def _next_pow2(m: int) -> int:
    return 1 << (m - 1).bit_length()


def bluestein_dft(x: np.ndarray, sign: int = 1) -> np.ndarray:
    """X_j = sum_t x_t exp(sign * 2 pi i j t / n) for arbitrary length n.

    Uses j t = (j^2 + t^2 - (j - t)^2) / 2 so the transform becomes a
    linear convolution with the chirp c_k = exp(sign * i pi k^2 / n),
    evaluated by zero-padded power-of-two FFTs.  Chirp phases are reduced
    exactly: k^2 mod 2n is an integer before any floating point enters.
    """
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if n == 0:
        return x.copy()
    if n == 1:
        return x.copy()
    k = np.arange(n, dtype=np.int64)
    phase = (k * k) % (2 * n)
    chirp = np.exp(sign * 1j * np.pi * phase / n)
    m = _next_pow2(2 * n - 1)
    a = np.zeros(x.shape[:-1] + (m,), dtype=np.complex128)
    a[..., :n] = x * chirp
    b = np.zeros(m, dtype=np.complex128)
    b[:n] = np.conj(chirp)
    b[m - n + 1 :] = np.conj(chirp[1:][::-1])
    conv = np.fft.ifft(np.fft.fft(a, axis=-1) * np.fft.fft(b), axis=-1)
    return chirp * conv[..., :n]


# ------------------------------------------------------- character group


@dataclass(frozen=True)
class CharacterGroup:
    q: int
    g: int
    dlog: np.ndarray = field(repr=False)  # dlog[g^t mod q] = t, dlog[0] = -1
    gpow: np.ndarray = field(repr=False)  # gpow[t] = g^t mod q

    @property
    def n(self) -> int:
        return self.q - 1

    @property
    def phi(self) -> int:
        return self.q - 1

    @property
    def phi_star(self) -> int:
        return self.q - 2

    @property
    def omega(self) -> complex:
        return complex(unit_roots(self.n, np.array([1]))[0])

    def chi(self, j: int, a) -> np.ndarray:
        """chi_j(a) for integer(s) a; zero where q | a."""
        a = np.mod(np.asarray(a, dtype=np.int64), self.q)
        t = self.dlog[a]
        val = unit_roots(self.n, (j % self.n) * t)
        return np.where(a == 0, 0.0, val)

    def chi_all(self, a: int) -> np.ndarray:
        """chi_j(a) for every j in [0, q-2]."""
        a %= self.q
        if a == 0:
            return np.zeros(self.n, dtype=np.complex128)
        j = np.arange(self.n, dtype=np.int64)
        return unit_roots(self.n, j * int(self.dlog[a]))

    def table(self) -> np.ndarray:
        """Full (q-1) x q character table; only sensible for small q."""
        j = np.arange(self.n, dtype=np.int64)[:, None]
        t = self.dlog[None, 1:]
        tab = np.zeros((self.n, self.q), dtype=np.complex128)
        tab[:, 1:] = unit_roots(self.n, j * t)
        return tab

    def parity(self) -> np.ndarray:
        """chi_j(-1) = (-1)^j."""
        return np.where(np.arange(self.n) % 2 == 0, 1, -1)

    def fold(self, values: np.ndarray, residues: np.ndarray) -> np.ndarray:
        """Accumulate values by residue class, returned in dlog order.

        Each class is summed with math.fsum so the fold is exact to
        rounding regardless of how many terms land in a class.
        """
        from math import fsum

        residues = np.mod(np.asarray(residues, dtype=np.int64), self.q)
        keep = residues != 0
        t = self.dlog[residues[keep]]
        v = np.asarray(values)[keep]
        order = np.argsort(t, kind="stable")
        t = t[order]
        v = v[order]
        bounds = np.searchsorted(t, np.arange(self.n + 1))
        out = np.zeros(self.n, dtype=np.complex128)
        re = np.real(v)
        im = np.imag(v)
        for s in range(self.n):
            lo, hi = bounds[s], bounds[s + 1]
            if hi > lo:
                out[s] = complex(fsum(re[lo:hi]), fsum(im[lo:hi]))
        return out

    def mellin(self, seq_dlog: np.ndarray, sign: int = 1) -> np.ndarray:
        """sum_t seq[t] chi_j(g^t)^sign for all j (one DFT)."""
        return bluestein_dft(seq_dlog, sign=sign)


def build(q: int, allow_small: bool = False) -> CharacterGroup:
    """Character group of (Z/qZ)^* for a prime q.

    q >= 5 is required unless allow_small is set (Birch-Stevens at q = 3
    is the one caller that needs it).
    """
    if not isinstance(q, (int, np.integer)) or not is_prime(int(q)):
        raise ValueError(f"q={q} is not prime")
    q = int(q)
    if q < (3 if allow_small else 5):
        raise ValueError(f"q={q} is too small (need q >= 5)")
    g = primitive_root(q)
    gpow = np.empty(q - 1, dtype=np.int64)
    x = 1
    for t in range(q - 1):
        gpow[t] = x
        x = x * g % q
    dlog = np.full(q, -1, dtype=np.int64)
    dlog[gpow] = np.arange(q - 1, dtype=np.int64)
    return CharacterGroup(q=q, g=g, dlog=dlog, gpow=gpow)


def orthogonality_residual(group: CharacterGroup) -> float:
    tab = group.table()[:, 1:]
    gram = tab @ tab.conj().T
    return float(np.max(np.abs(gram - group.n * np.eye(group.n))))


# ------------------------------------------------------------- sum tables


def additive(q: int, a) -> np.ndarray:
    """e(a/q) with exact reduction of a mod q."""
    return unit_roots(q, a)


def gauss_all(group: CharacterGroup) -> np.ndarray:
    """Normalised Gauss sums eps_{chi_j}, j = 0..q-2.

    The DFT value at j = 0 is replaced by the exact -q^{-1/2}.
    """
    q = group.q
    seq = additive(q, group.gpow)
    eps = group.mellin(seq) / np.sqrt(q)
    eps[0] = -1.0 / np.sqrt(q)
    return eps


def gauss_direct(group: CharacterGroup, j: int) -> complex:
    a = np.arange(1, group.q)
    return complex(np.sum(group.chi(j, a) * additive(group.q, a)) / np.sqrt(group.q))


def _kl_from_fft(group: CharacterGroup, gauss: np.ndarray, k: int) -> np.ndarray:
    """Kl_k(m; q) for k >= 1 via the all-character identity."""
    q, n = group.q, group.n
    # K_t = sum_j chi_j(g^t) eps_j^k = phi(q) q^{-1/2} Kl_k(g^{-t})
    kt = group.mellin(gauss**k) * np.sqrt(q) / n
    out = np.full(q, np.nan, dtype=np.complex128)
    # m = g^{-t}
    out[group.gpow[(-np.arange(n)) % n]] = kt
    return out


@dataclass
class SumTables:
    q: int
    gauss: np.ndarray
    kloosterman: dict[int, np.ndarray] = field(default_factory=dict)
    evans: np.ndarray | None = None
    diagnostics: dict[str, float] = field(default_factory=dict)


def kloosterman_table(group: CharacterGroup, k: int, gauss: np.ndarray | None = None,
                      diagnostics: dict | None = None) -> np.ndarray:
    """Normalised hyper-Kloosterman sums Kl_k(m; q) indexed by m in [0, q).

    Entry 0 is NaN.  Negative k uses Kl_k(m) = Kl_|k|((-1)^k m^{-1}), and
    k = 0 is sqrt(q) at m = 1 and 0 elsewhere.
    """
    if abs(k) > 8:
        raise ValueError("|k| must be <= 8")
    q = group.q
    if gauss is None:
        gauss = gauss_all(group)
    if k == 0:
        out = np.zeros(q, dtype=np.complex128)
        out[0] = np.nan
        out[1] = np.sqrt(q)
        return out
    base = _kl_from_fft(group, gauss, abs(k))
    if diagnostics is not None:
        raw0 = group.mellin(additive(q, group.gpow))[0] / np.sqrt(q)
        diagnostics[f"gauss_j0_fft_residual_k{k}"] = float(abs(raw0 + 1 / np.sqrt(q)))
        diagnostics[f"max_imag_k{k}"] = float(np.nanmax(np.abs(base[1:].imag)))
    if k > 0:
        return base
    m = np.arange(1, q)
    inv = np.array([pow(int(x), -1, q) for x in m], dtype=np.int64)
    src = ((1 if k % 2 == 0 else -1) * inv) % q
    out = np.full(q, np.nan, dtype=np.complex128)
    out[m] = base[src]
    return out


def kloosterman_direct(q: int, k: int, m: int | None = None) -> np.ndarray:
    """Reference Kl_k(.; q) without any Mellin transform, k >= 1.

    Kl_1(x) = e(x/q) and Kl_k(x) = q^{-1/2} sum_y Kl_{k-1}(x y^{-1}) e(y/q),
    i.e. repeated multiplicative convolution with the additive character.
    Cost O(k q^2).
    """
    if k < 1:
        raise ValueError("direct route needs k >= 1")
    units = np.arange(1, q, dtype=np.int64)
    inv = np.array([pow(int(y), -1, q) for y in units], dtype=np.int64)
    cur = np.zeros(q, dtype=np.complex128)
    cur[1:] = additive(q, units)
    ey = additive(q, units)
    for _ in range(k - 1):
        nxt = np.zeros(q, dtype=np.complex128)
        # nxt[x] = sum_y cur[x * inv(y)] e(y/q)
        idx = (units[:, None] * inv[None, :]) % q
        nxt[1:] = (cur[idx] * ey[None, :]).sum(axis=1) / np.sqrt(q)
        cur = nxt
    cur[0] = np.nan
    if m is not None:
        return cur[m % q]
    return cur


def evans_all(group: CharacterGroup) -> np.ndarray:
    """t_e(chi_j) = q^{-1/2} sum_x chi_j(x) e((x - x^{-1})/q) for all j."""
    q, n = group.q, group.n
    x = group.gpow
    xinv = group.gpow[(-np.arange(n)) % n]
    seq = additive(q, x - xinv)
    return group.mellin(seq) / np.sqrt(q)


def evans_direct(group: CharacterGroup, j: int) -> complex:
    q = group.q
    x = np.arange(1, q)
    xinv = np.array([pow(int(v), -1, q) for v in x])
    return complex(np.sum(group.chi(j, x) * additive(q, x - xinv)) / np.sqrt(q))


def build_tables(group: CharacterGroup, ks=(), with_evans: bool = False) -> SumTables:
    tabs = SumTables(q=group.q, gauss=gauss_all(group))
    for k in ks:
        tabs.kloosterman[k] = kloosterman_table(group, k, tabs.gauss, tabs.diagnostics)
    if with_evans:
        tabs.evans = evans_all(group)
    return tabs


def bilinear_kloosterman(group: CharacterGroup, k: int, alpha, beta, a: int,
                         tables: SumTables) -> tuple[complex, float]:
    """B = sum_{m<=M, n<=N} alpha_m beta_n Kl_k(a m n; q) and the ratio
    |B| / (|alpha|_2 |beta|_2 sqrt(MN))."""
    q = group.q
    if a % q == 0:
        raise ValueError("a must be a unit mod q")
    if k not in tables.kloosterman:
        raise KeyError(f"no Kl_{k} table")
    alpha = np.asarray(alpha, dtype=np.complex128)
    beta = np.asarray(beta, dtype=np.complex128)
    M, N = len(alpha), len(beta)
    if M > q or N > q:
        raise ValueError("M, N must not exceed q")
    kl = tables.kloosterman[k]
    m = np.arange(1, M + 1, dtype=np.int64)
    n = np.arange(1, N + 1, dtype=np.int64)
    arg = (a * (m[:, None] * n[None, :])) % q
    vals = np.where(arg == 0, 0.0, kl[np.where(arg == 0, 1, arg)])
    B = complex(alpha @ vals @ beta)
    norm = np.linalg.norm(alpha) * np.linalg.norm(beta) * np.sqrt(M * N)
    return B, float(abs(B) / norm) if norm > 0 else 0.0


def dump_sums_csv(cache: Path, q: int, k: int, table: np.ndarray) -> Path:
    path = Path(cache) / "sums" / f"{q}_k{k}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "re", "im"])
        for m in range(1, q):
            w.writerow([m, repr(float(table[m].real)), repr(float(table[m].imag))])
    return path
