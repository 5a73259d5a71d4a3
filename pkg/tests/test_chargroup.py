import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twistlab import chargroup as cg

import oracles

PRIMES = [5, 7, 11, 13, 31, 101, 211]


def test_build_q5():
    g = cg.build(5, allow_small=True)
    assert g.g == 2 and g.dlog[4] == 2


def test_build_q7():
    assert cg.build(7, allow_small=True).g == 3


def test_build_rejects_composite():
    with pytest.raises(ValueError, match="not prime"):
        cg.build(4, allow_small=True)


@given(st.sampled_from(PRIMES), st.data())
def test_character_matches_brute_force(q, data):
    grp = cg.build(q, allow_small=True)
    j = data.draw(st.integers(0, q - 2))
    a = data.draw(st.integers(0, 3 * q))
    assert complex(grp.chi(j, a)) == pytest.approx(oracles.brute_chi(q, grp.g, j, a), abs=1e-12)


@given(st.sampled_from(PRIMES), st.data())
def test_character_multiplicative(q, data):
    grp = cg.build(q, allow_small=True)
    j = data.draw(st.integers(0, q - 2))
    a, b = data.draw(st.integers(1, q - 1)), data.draw(st.integers(1, q - 1))
    assert complex(grp.chi(j, a * b)) == pytest.approx(complex(grp.chi(j, a) * grp.chi(j, b)), abs=1e-12)


@pytest.mark.parametrize("q", PRIMES)
def test_orthogonality(q):
    assert cg.orthogonality_residual(cg.build(q, allow_small=True)) <= 1e-9 * q


@given(st.sampled_from(PRIMES), st.data())
def test_fold_mellin_is_character_sum(q, data):
    grp = cg.build(q, allow_small=True)
    res = np.array(data.draw(st.lists(st.integers(1, 10 * q), min_size=1, max_size=30)))
    vals = np.array(data.draw(st.lists(st.floats(-5, 5), min_size=len(res), max_size=len(res))))
    got = grp.mellin(grp.fold(vals, res), sign=1)
    for j in (0, 1, q - 2):
        want = sum(v * complex(grp.chi(j, int(r))) for v, r in zip(vals, res))
        assert got[j] == pytest.approx(want, abs=1e-9)


def test_gauss_quadratic_q5():
    eps = cg.gauss_all(cg.build(5, allow_small=True))
    assert abs(eps[2] - 1.0) < 1e-12


def test_gauss_trivial_exact():
    eps = cg.gauss_all(cg.build(5, allow_small=True))
    assert eps[0] == -1 / math.sqrt(5)


def test_gauss_unit_modulus_q101():
    grp = cg.build(101)
    eps = cg.gauss_all(grp)
    assert np.max(np.abs(np.abs(eps[1:]) - 1)) < 1e-10
    for j in (1, 17, 50, 64, 99):
        assert eps[j] == pytest.approx(oracles.gauss_sum(101, grp.g, j), abs=1e-10)


@pytest.mark.parametrize("q", PRIMES)
def test_gauss_conjugate_identity(q):
    grp = cg.build(q, allow_small=True)
    eps = cg.gauss_all(grp)
    j = np.arange(1, q - 1)
    # eps_chi eps_chibar = chi(-1) = (-1)^j
    assert np.max(np.abs(eps[j] * eps[(q - 1 - j)] - (-1.0) ** j)) < 1e-10


def test_kloosterman_q5_value():
    kl = cg.kloosterman_table(cg.build(5, allow_small=True), 2)
    assert kl[1].real == pytest.approx((3 - math.sqrt(5)) / (2 * math.sqrt(5)), abs=1e-12)
    assert kl[1].real == pytest.approx(0.170820, abs=1e-6)


def test_kloosterman_k0():
    kl = cg.kloosterman_table(cg.build(7, allow_small=True), 0)
    assert np.allclose(kl[1:], [math.sqrt(7), 0, 0, 0, 0, 0])


def test_kloosterman_deligne_q97():
    kl = cg.kloosterman_table(cg.build(97), 3)
    assert np.max(np.abs(kl[1:])) <= 3


@pytest.mark.parametrize("q,k", [(5, 2), (7, 3), (11, 2), (13, 3), (7, -2), (11, -3)])
def test_kloosterman_against_nested_loops(q, k):
    kl = cg.kloosterman_table(cg.build(q, allow_small=True), k)
    for m in range(1, q):
        src = m if k > 0 else ((-1) ** abs(k) * pow(m, -1, q)) % q
        assert kl[m] == pytest.approx(oracles.kloosterman(q, abs(k), src), abs=1e-10)


@pytest.mark.parametrize("q", [7, 13, 101])
def test_evans_against_direct(q):
    grp = cg.build(q, allow_small=True)
    ev = cg.evans_all(grp)
    assert np.max(np.abs(ev.imag)) < 1e-10
    for j in range(0, q - 1, max(1, q // 7)):
        assert ev[j] == pytest.approx(oracles.evans(q, grp.g, j), abs=1e-10)


@pytest.mark.parametrize("q", [7, 101, 1009])
def test_evans_bounded_by_two(q):
    assert np.max(np.abs(cg.evans_all(cg.build(q, allow_small=True)))) <= 2 + 1e-9


def _tables(q, k):
    grp = cg.build(q)
    return grp, cg.build_tables(grp, ks=(k,))


def test_bilinear_single_term():
    grp, tab = _tables(101, 2)
    B, _ = cg.bilinear_kloosterman(grp, 2, [1.0], [1.0], 7, tab)
    assert B == pytest.approx(tab.kloosterman[2][7], abs=1e-14)


def test_bilinear_random_signs_ratio():
    grp, tab = _tables(1009, 2)
    rng = np.random.default_rng(1)
    M = int(math.isqrt(1009))
    alpha = rng.choice([-1.0, 1.0], M)
    beta = rng.choice([-1.0, 1.0], M)
    B, ratio = cg.bilinear_kloosterman(grp, 2, alpha, beta, 1, tab)
    brute = sum(alpha[m - 1] * beta[n - 1] * tab.kloosterman[2][m * n % 1009]
                for m in range(1, M + 1) for n in range(1, M + 1))
    assert B == pytest.approx(brute, abs=1e-9)
    assert ratio < 0.8


def test_bilinear_trivial_bound():
    grp, tab = _tables(101, 2)
    rng = np.random.default_rng(2)
    alpha = rng.normal(size=101)
    alpha[100] = 0.0  # m = q would hit the non-unit residue
    B, _ = cg.bilinear_kloosterman(grp, 2, alpha, [1.0], 3, tab)
    assert abs(B) <= np.sum(np.abs(alpha)) * 2 + 1e-9
