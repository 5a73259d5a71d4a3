import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twistlab import afe, analysis, chargroup, hecke, modsym, moments
from twistlab.config import DEFAULT_QS

import oracles

F11 = hecke.get_form("11a")
ES11 = modsym.for_form("11a")


@pytest.fixture(scope="module")
def fam101():
    return afe.family("11a", 101)


@pytest.fixture(scope="module")
def tab101():
    return modsym.table(ES11, 101, "11a")


# ------------------------------------------------------------ first moment


def _naive_first(fam, ell, k):
    q = fam.q
    g = chargroup.build(q).g
    tot = 0
    for j in range(1, q - 1):
        eps = oracles.gauss_sum(q, g, j)
        tot += fam.value(j) * eps**k * oracles.brute_chi(q, g, j, ell)
    return tot / (q - 2)


@pytest.mark.parametrize("ell,k", [(1, 0), (2, 0), (5, 1), (1, -2), (3, 3)])
def test_first_moment_matches_naive_sum(fam101, ell, k):
    rep = moments.first_moment(fam101, ell, k)
    assert abs(rep.computed - _naive_first(fam101, ell, k)) < 1e-10


def test_first_moment_prediction_ell2(fam101):
    rep = moments.first_moment(fam101, 2, 0)
    # 2^{-1} = 51 mod 101 and a(51) = a(3) a(17) = 2
    assert rep.predicted == pytest.approx(2 / 51)
    assert rep.predicted == pytest.approx(hecke.lam(F11, 51) / math.sqrt(51))


def test_first_moment_prediction_k_minus2(fam101):
    rep = moments.first_moment(fam101, 1, -2)
    assert rep.predicted == pytest.approx(F11.eps() * hecke.lam(F11, 11) / math.sqrt(11))


def test_first_moment_real_at_k0(fam101):
    assert abs(moments.first_moment(fam101, 1, 0).computed.imag) < 1e-12


def test_first_moment_errors(fam101):
    with pytest.raises(ValueError):
        moments.first_moment(fam101, 101)
    with pytest.raises(ValueError):
        moments.first_moment(fam101, 1, 7)


def test_first_moment_near_one_at_3001():
    rep = moments.first_moment(afe.family("11a", 3001))
    assert rep.abs_err < 0.5 * 3001 ** (-0.1)


def _first_errors(k):
    return [moments.first_moment(afe.family("11a", q), 1, k).abs_err for q in DEFAULT_QS]


@pytest.mark.xfail(strict=True, reason="error 0.040 at q=3001 exceeds twice 0.011 at q=1009; ledgered")
def test_first_moment_decay_k0():
    assert analysis.quasi_monotone(_first_errors(0))


@pytest.mark.xfail(strict=True, reason="error 0.068 at q=2003 exceeds twice 0.027 at q=1009; ledgered")
def test_first_moment_decay_k1():
    assert analysis.quasi_monotone(_first_errors(1))


# ----------------------------------------------------------- second moment


def test_second_moment_ell_gcd_invariance(fam101):
    a = moments.second_moment(fam101, fam101, 2, 3).computed
    b = moments.second_moment(fam101, fam101, 4, 6).computed
    assert abs(a - b) < 1e-12


def test_second_moment_exact_zero():
    rep = moments.second_moment(afe.family("37a", 101), afe.family("37b", 101))
    assert abs(rep.computed) < 1e-8


@pytest.mark.parametrize("q", DEFAULT_QS[:4])
def test_second_moment_diagonal_real_positive(q):
    fam = afe.family("11a", q)
    c = moments.second_moment(fam, fam).computed
    assert c.real >= 0 and abs(c.imag) < 1e-10


def test_second_moment_mismatch():
    with pytest.raises(ValueError):
        moments.second_moment(afe.family("11a", 101), afe.family("11a", 103))


def test_main_term_swap_is_conjugate():
    a = moments.main_term_MT(F11, F11, 101, 0.5, 2, 3)
    b = moments.main_term_MT(F11, F11, 101, 0.5, 3, 2)
    assert abs(a - np.conj(b)) < 1e-12


def test_main_term_requires_coprime_ell():
    with pytest.raises(ValueError):
        moments.main_term_MT(F11, F11, 101, 0.5, 11, 1)


def test_leading_constant_level37_degenerates():
    assert moments.mt_leading_constant(hecke.get_form("37a"), hecke.get_form("37b")) == 0.0
    assert moments.mt_leading_constant(F11, F11) == pytest.approx(2.0)


def test_main_term_tracks_second_moment_at_2003():
    fam = afe.family("11a", 2003)
    Q = moments.second_moment(fam, fam).computed.real
    assert abs(Q / moments.main_term_MT(F11, F11, 2003).real - 1) < 0.08


# ---------------------------------------------------- modular-symbol side


@pytest.mark.parametrize("q", [101, 1009])
def test_mean_identity(q):
    rep = moments.mean_identity_check(modsym.table(ES11, q, "11a"))
    assert rep.rel_err < 1e-8


@pytest.mark.parametrize("uv", [(1, 1), (2, 3), (5, 7)])
def test_correlation_identity(fam101, tab101, uv):
    rep = moments.correlation_identity_check(tab101, tab101, fam101, fam101, *uv)
    assert rep.rel_err < 1e-6


@given(st.integers(1, 100))
def test_correlation_diagonal_real(tab101, u):
    c = moments.correlation_lhs(tab101, tab101, u, u)
    assert abs(c.imag) < 1e-9


def test_correlation_cross_forms():
    tf = modsym.table(modsym.for_form("37a"), 101, "37a")
    tg = modsym.table(modsym.for_form("37b"), 101, "37b")
    rep = moments.correlation_identity_check(tf, tg, afe.family("37a", 101), afe.family("37b", 101), 2, 3)
    assert rep.abs_err < 1e-6


@pytest.mark.parametrize("q", [3, 7, 13, 101])
def test_birch_stevens(q):
    tab = modsym.table(ES11, q, "11a")
    fam = afe.family("11a", q, allow_small=True)
    tol = 1e-10 if q == 3 else 1e-8
    assert moments.birch_stevens_check(tab, fam) < tol


def test_birch_stevens_q3_brute():
    # the single primitive character mod 3 is the Legendre symbol
    q = 3
    tab = modsym.table(ES11, q, "11a")
    eps = oracles.gauss_sum(q, 2, 1)
    bs = eps / math.sqrt(q) * sum(oracles.brute_chi(q, 2, 1, (-pow(a, -1, q)) % q) * tab.values[a]
                                  for a in (1, 2))
    assert abs(bs - afe.family("11a", 3, allow_small=True).values[0]) < 1e-10


def test_birch_stevens_conjugate(tab101):
    bs = moments.birch_stevens_values(tab101)[1:]
    assert np.max(np.abs(bs - np.conj(bs[::-1]))) < 1e-9


@pytest.mark.parametrize("check", ["birch", "corr", "zero"])
def test_identities_survive_longer_truncation(check):
    cfg = afe.AFEConfig(length_factor=1.3)
    if check == "birch":
        assert moments.birch_stevens_check(modsym.table(ES11, 211, "11a"), afe.family("11a", 211, cfg=cfg)) < 1e-8
    elif check == "corr":
        fam = afe.family("11a", 101, cfg=cfg)
        tab = modsym.table(ES11, 101, "11a")
        assert moments.correlation_identity_check(tab, tab, fam, fam, 2, 3).rel_err < 1e-6
    else:
        rep = moments.second_moment(afe.family("37a", 101, cfg=cfg), afe.family("37b", 101, cfg=cfg))
        assert abs(rep.computed) < 1e-8


# ----------------------------------------------------------- slope fits


@pytest.fixture(scope="module")
def var_report():
    return moments.variance_asymptotic("11a", DEFAULT_QS[:5])


def test_variance_slope(var_report):
    assert var_report.rel_dev < 0.25


def test_second_moment_slope_agrees_with_variance(var_report):
    rep = moments.second_moment_slope("11a", DEFAULT_QS[:5])
    assert rep.rel_dev < 0.25
    assert np.allclose(rep.values, var_report.values, rtol=1e-3)


@pytest.mark.xfail(strict=True, reason="V(101)=7.21 exceeds V(211)=5.93; ledgered")
def test_variance_increasing(var_report):
    assert all(b > a for a, b in zip(var_report.values, var_report.values[1:]))


@pytest.mark.xfail(strict=True, reason="dropping q=101 moves the intercept from 1.02 to -3.24; ledgered")
def test_intercept_jackknife(var_report):
    c = var_report.intercept
    assert all(abs(j - c) <= 0.3 * abs(c) for j in var_report.jackknife_intercepts)


def test_slope_grid_too_small():
    with pytest.raises(ValueError):
        moments.variance_asymptotic("11a", (101, 211, 499))
    with pytest.raises(ValueError):
        moments.variance_asymptotic("11a", (101, 211, 499, 1009, 11))


# --------------------------------------------------------------- output


def test_reports_csv_and_json(fam101):
    reps = [moments.first_moment(fam101, 1, 0), moments.second_moment(fam101, fam101, 2, 3)]
    buf = io.StringIO()
    moments.write_reports_csv(buf, reps)
    head = buf.getvalue().splitlines()[0].split(",")
    assert head[:2] == ["kind", "q"]
    assert head[-7:] == ["computed_re", "computed_im", "predicted_re", "predicted_im", "abs_err", "rel_err",
                         "notes"]
    data = json.loads(moments.reports_json(reps, {"q": 101}))
    assert data["config"] == {"q": 101}
    assert len(data["records"]) == 2


def test_rel_err_definition():
    r = moments.MomentReport("x", {}, 0.5, 0.25)
    assert r.rel_err == 0.25
    r = moments.MomentReport("x", {}, 3.0, 2.0)
    assert r.rel_err == 0.5


@given(st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=40))
def test_pair_sum_equals_sum(xs):
    assert abs(moments.pair_sum(np.array(xs)) - sum(xs)) < 1e-9 * (1 + sum(abs(x) for x in xs))
