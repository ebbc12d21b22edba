import numpy as np
import pytest
from hypothesis import strategies as st

from ncprob.ncpoly import Alphabet, NCPolynomial

REFERENCE_Q = 0.5 * np.array([[1, 1j], [-1j, 1]])

ALPHABETS = [Alphabet.self_adjoint(1), Alphabet.self_adjoint(2), Alphabet.self_adjoint(3),
             Alphabet.matrix_unitary(1), Alphabet.matrix_unitary(2)]


def words(alphabet, max_len=4, min_len=0):
    return st.lists(st.integers(0, alphabet.n_letters - 1), min_size=min_len, max_size=max_len).map(tuple)


def coeffs():
    small = st.floats(-3, 3, allow_nan=False, allow_infinity=False)
    return st.builds(complex, small, small)


def polys(alphabet, max_terms=4, max_len=3):
    return st.dictionaries(words(alphabet, max_len), coeffs(), max_size=max_terms).map(
        lambda t: NCPolynomial(alphabet, t))


def random_psd(d, rng, unit_norm=True):
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    Q = X @ X.conj().T
    return Q / np.linalg.norm(Q, 2) if unit_norm else Q


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def reference_q():
    return REFERENCE_Q.copy()
