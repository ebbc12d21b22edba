import math
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncprob.exceptions import NotCentralized, NotNormalized, TruncationError, Unsupported
from ncprob.functional import (
    CovarianceMatrix,
    GeneratorFunctional,
    MomentFunctional,
    clt_functional,
    clt_value,
    commutator_ideal_check,
    conv_exp,
    conv_log,
    conv_power,
    convolve,
    counit_functional,
    cumulant_functional,
    euler_functional,
    gaussian_functional,
    gaussian_moments,
    gaussian_poly,
    pair_partitions,
    random_functional,
)
from ncprob.ncpoly import Alphabet, NCPolynomial, words_up_to

from conftest import REFERENCE_Q, random_psd

SA1 = Alphabet.self_adjoint(1)
SA2 = Alphabet.self_adjoint(2)
U2 = Alphabet.matrix_unitary(2)


def wick(Q, w):
    """Recursive Wick expansion: pair the first letter with each later one."""
    Q = np.asarray(Q)

    @lru_cache(maxsize=None)
    def rec(rest):
        if not rest:
            return 1.0 + 0j
        if len(rest) % 2:
            return 0j
        a = rest[0]
        return sum(Q[a, rest[k]] * rec(rest[1:k] + rest[k + 1:]) for k in range(1, len(rest)))

    return rec(tuple(w))


def test_reference_values():
    assert abs(gaussian_functional(REFERENCE_Q, (0, 1)) - 0.5j) <= 1e-12
    assert abs(gaussian_functional(REFERENCE_Q, (1, 0)) + 0.5j) <= 1e-12
    comm = NCPolynomial.parse(SA2, "x1x2") - NCPolynomial.parse(SA2, "x2x1")
    assert abs(gaussian_poly(REFERENCE_Q, comm) - 1j) <= 1e-12


@pytest.mark.parametrize("k, count", [(1, 1), (2, 3), (3, 15), (4, 105), (5, 945)])
def test_pair_partition_counts(k, count):
    assert sum(1 for _ in pair_partitions(2 * k)) == count


def test_odd_moments_vanish_and_d1_double_factorial():
    g = gaussian_moments(np.eye(1), 8)
    for n in range(9):
        expected = 0 if n % 2 else math.prod(range(n - 1, 0, -2))
        assert g.value((0,) * n) == pytest.approx(expected)


def test_gaussian_matches_wick_recursion(rng):
    Q = random_psd(2, rng)
    g = gaussian_moments(Q, 6)
    for w, v in g.items():
        assert abs(v - wick(Q, w)) <= 1e-12


def test_covariance_validation():
    with pytest.raises(ValueError):
        CovarianceMatrix([[1, 1], [0, 1]])
    assert not CovarianceMatrix([[-1.0]]).psd
    assert CovarianceMatrix(REFERENCE_Q).psd


def test_functional_access_and_truncation():
    phi = gaussian_moments(REFERENCE_Q, 4)
    assert phi("x1x2") == pytest.approx(0.5j)
    with pytest.raises(TruncationError):
        phi.value((0,) * 5)
    assert phi.truncate(2).max_degree == 2


def test_generator_must_vanish_on_unit():
    with pytest.raises(ValueError):
        GeneratorFunctional(SA1, 1, [np.ones(1), np.zeros(1)])


def test_json_roundtrip(rng):
    phi = random_functional(U2, 2, rng)
    assert MomentFunctional.from_json(phi.to_json()).max_abs_diff(phi) == 0


def test_counit_is_convolution_unit(rng):
    for A in (SA2, U2):
        phi = random_functional(A, 3, rng)
        e = counit_functional(A, 3)
        assert convolve(e, phi).max_abs_diff(phi) <= 1e-12
        assert convolve(phi, e).max_abs_diff(phi) <= 1e-12


@pytest.mark.parametrize("A", [SA2, U2])
def test_convolution_associative(A, rng):
    a, b, c = (random_functional(A, 3, rng) for _ in range(3))
    assert convolve(convolve(a, b), c).max_abs_diff(convolve(a, convolve(b, c))) <= 1e-10


def test_conv_power_matches_repeated_convolution(rng):
    phi = random_functional(SA2, 4, rng, scale=0.3)
    acc = counit_functional(SA2, 4)
    for _ in range(5):
        acc = convolve(acc, phi)
    assert conv_power(phi, 5).max_abs_diff(acc) <= 1e-10


def test_exp_log_inverse(rng):
    psi = random_functional(SA2, 5, rng, generator=True)
    assert conv_log(conv_exp(psi)).max_abs_diff(psi) <= 1e-10
    with pytest.raises(Unsupported):
        conv_log(random_functional(U2, 2, rng))


@pytest.mark.parametrize("A", [SA2, U2])
def test_exponential_semigroup(A, rng):
    psi = random_functional(A, 3, rng, scale=0.4, generator=True)
    s, t = 0.3, 0.9
    lhs = convolve(conv_exp(s * psi), conv_exp(t * psi))
    assert lhs.max_abs_diff(conv_exp((s + t) * psi)) <= 1e-10


def test_unitary_exponential_matches_series(rng):
    psi = random_functional(U2, 2, rng, scale=0.3, generator=True)
    series = counit_functional(U2, 2)
    term = counit_functional(U2, 2)
    for k in range(1, 40):
        term = convolve(term, psi) / k
        series = series + term
    assert conv_exp(psi).max_abs_diff(series) <= 1e-12


def test_hermiticity_transported_by_exp(rng):
    psi = random_functional(SA2, 4, rng, hermitian=True, generator=True)
    assert psi.is_hermitian()
    assert conv_exp(psi).is_hermitian(1e-10)


def test_exp_of_cumulant_is_gaussian(reference_q):
    assert conv_exp(cumulant_functional(reference_q, 8)).max_abs_diff(gaussian_moments(reference_q, 8)) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 1), st.integers(0, 1), st.integers(0, 10**6))
def test_commutator_ideal_annihilated(lu, lw, i, j, seed):
    rng = np.random.default_rng(seed)
    u = tuple(rng.integers(0, 2, size=lu).tolist())
    w = tuple(rng.integers(0, 2, size=lw).tolist())
    assert abs(commutator_ideal_check(REFERENCE_Q, u, w, i, j)) <= 1e-12


def bernoulli(N):
    return MomentFunctional.from_function(SA1, N, lambda w: 1.0 if len(w) % 2 == 0 else 0.0)


@pytest.mark.parametrize("n", [1, 2, 4, 8, 64])
def test_bernoulli_clt_fourth_moment(n):
    assert abs(clt_value(bernoulli(4), n, (0,) * 4) - (3 - 2 / n)) <= 1e-12


def test_clt_n1_is_identity(reference_q):
    phi = counit_functional(SA2, 4) + cumulant_functional(reference_q, 4)
    assert clt_functional(phi, 1).max_abs_diff(phi) <= 1e-14


def test_clt_input_validation():
    phi = bernoulli(2)
    with pytest.raises(NotNormalized):
        clt_functional(2.0 * phi, 2)
    shifted = MomentFunctional.from_dict(SA1, 2, {(): 1, (0,): 0.1})
    with pytest.raises(NotCentralized):
        clt_functional(shifted, 2)


def test_euler_limit_gaussian_fourth_moment():
    g = cumulant_functional(np.eye(1), 4)
    for n in (1, 2, 10):
        assert euler_functional(g, n).value((0,) * 4) == pytest.approx(3 * (1 - 1 / n))
