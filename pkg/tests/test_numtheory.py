from math import gcd

from hypothesis import given, strategies as st

from twistlab import numtheory as nt


def _slow_prime(n):
    return n >= 2 and all(n % d for d in range(2, int(n**0.5) + 1))


def test_primes_upto_matches_trial_division():
    assert nt.primes_upto(200).tolist() == [n for n in range(201) if _slow_prime(n)]


@given(st.integers(min_value=0, max_value=20000))
def test_is_prime_matches_trial_division(n):
    assert nt.is_prime(n) == _slow_prime(n)


@given(st.integers(min_value=2, max_value=10**6))
def test_factorize_reconstructs(n):
    fac = nt.factorize(n)
    prod = 1
    for p, e in fac.items():
        assert _slow_prime(p)
        prod *= p**e
    assert prod == n


@given(st.integers(min_value=1, max_value=5000), st.integers(min_value=1, max_value=5000))
def test_mobius_multiplicative(m, n):
    if gcd(m, n) == 1:
        assert nt.mobius(m * n) == nt.mobius(m) * nt.mobius(n)


def test_smallest_prime_factor_table():
    spf = nt.smallest_prime_factor(1000)
    for n in range(2, 1001):
        assert spf[n] == min(p for p in range(2, n + 1) if n % p == 0)


@given(st.sampled_from([5, 7, 11, 13, 101, 499, 1009]))
def test_primitive_root_generates(q):
    g = nt.primitive_root(q)
    assert len({pow(g, t, q) for t in range(q - 1)}) == q - 1


@given(st.integers(min_value=1, max_value=10**6), st.sampled_from([101, 1009, 10007]))
def test_modinv(a, q):
    if a % q:
        assert a * nt.modinv(a, q) % q == 1
