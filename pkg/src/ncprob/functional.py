"""Moment and generator functionals and the convolution calculus on them.

A functional truncated at degree ``N`` is stored as one dense complex array per
degree ``n <= N``; entry ``k`` of array ``n`` is the value on the ``k``-th word
of length ``n`` in lexicographic order (see :func:`ncprob.ncpoly.word_index`).

Convolution ``φ⋆ψ = (φ⊗ψ)∘Δ`` is evaluated for all words of a degree at once
from a precomputed table of coproduct index pairs.  On the self-adjoint kind
the coproduct splits degrees, so with ``ψ(1) = 0`` the exponential and
logarithm series are finite on every word.  On the unitary kind the
coproduct preserves degree legwise and convolution on degree ``n`` becomes a
matrix product over the column indices; the exponential is then an ordinary
matrix exponential.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Iterator, List, Mapping, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from .exceptions import (
    AlphabetMismatch,
    NotCentralized,
    NotNormalized,
    TruncationError,
    Unsupported,
)
from .ncpoly import (
    Alphabet,
    NCPolynomial,
    Word,
    word_from_index,
    word_index,
    word_table,
)

UNITARY_EXP_MAX_DEGREE = 4


@dataclass(frozen=True)
class CovarianceMatrix:
    """Hermitian ``d x d`` covariance; ``psd`` records min eigenvalue >= -1e-10."""

    Q: np.ndarray = field(repr=False)
    psd: bool = field(init=False)

    def __post_init__(self):
        Q = np.array(self.Q, dtype=complex)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("covariance must be a square matrix")
        if not np.all(np.isfinite(Q)):
            raise ValueError("covariance has non-finite entries")
        if np.max(np.abs(Q - Q.conj().T), initial=0.0) > 1e-12:
            raise ValueError("covariance must be hermitian")
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "psd", bool(np.linalg.eigvalsh(Q).min() >= -1e-10))

    @property
    def d(self) -> int:
        return self.Q.shape[0]

    def __repr__(self):
        return f"CovarianceMatrix(d={self.d}, psd={self.psd}, Q={self.Q.tolist()})"


def _as_matrix(Q) -> np.ndarray:
    return Q.Q if isinstance(Q, CovarianceMatrix) else np.asarray(Q, dtype=complex)


# ---------------------------------------------------------------------------
# functionals


class MomentFunctional:
    """Linear functional on words of degree ``<= max_degree``."""

    __slots__ = ("alphabet", "max_degree", "_values")

    def __init__(self, alphabet: Alphabet, max_degree: int, values: Sequence[np.ndarray]):
        if len(values) != max_degree + 1:
            raise ValueError("need one value array per degree 0..max_degree")
        L = alphabet.n_letters
        arrays = []
        for n, v in enumerate(values):
            v = np.array(v, dtype=complex).reshape(-1)
            if v.shape[0] != L ** n:
                raise ValueError(f"degree {n} array must have {L ** n} entries")
            if not np.all(np.isfinite(v)):
                raise ValueError("non-finite functional value")
            v.setflags(write=False)
            arrays.append(v)
        self.alphabet = alphabet
        self.max_degree = max_degree
        self._values = tuple(arrays)
        self._validate()

    def _validate(self):
        pass

    # constructors
    @classmethod
    def zeros(cls, alphabet: Alphabet, max_degree: int):
        L = alphabet.n_letters
        return cls(alphabet, max_degree, [np.zeros(L ** n, complex) for n in range(max_degree + 1)])

    @classmethod
    def from_dict(cls, alphabet: Alphabet, max_degree: int, values: Mapping[Word, complex]):
        arrays = [np.zeros(alphabet.n_letters ** n, complex) for n in range(max_degree + 1)]
        for w, c in values.items():
            w = tuple(w)
            if len(w) > max_degree:
                raise TruncationError(f"word of degree {len(w)} exceeds max_degree {max_degree}")
            arrays[len(w)][word_index(alphabet, w)] += c
        return cls(alphabet, max_degree, arrays)

    @classmethod
    def from_function(cls, alphabet: Alphabet, max_degree: int, f: Callable[[Word], complex]):
        arrays = []
        for n in range(max_degree + 1):
            arrays.append(np.array([f(tuple(int(a) for a in w)) for w in word_table(alphabet, n)], dtype=complex))
        return cls(alphabet, max_degree, arrays)

    @property
    def arrays(self) -> Tuple[np.ndarray, ...]:
        return self._values

    def value(self, w: Word) -> complex:
        w = tuple(w)
        if len(w) > self.max_degree:
            raise TruncationError(
                f"functional is truncated at degree {self.max_degree}; queried degree {len(w)}"
            )
        return complex(self._values[len(w)][word_index(self.alphabet, w)])

    def __call__(self, arg) -> complex:
        if isinstance(arg, NCPolynomial):
            if arg.alphabet != self.alphabet:
                raise AlphabetMismatch(f"{arg.alphabet} vs {self.alphabet}")
            return sum((c * self.value(w) for w, c in arg.items()), 0j)
        if isinstance(arg, str):
            arg = self.alphabet.parse_word(arg)
        return self.value(arg)

    def items(self) -> Iterator[Tuple[Word, complex]]:
        for n, arr in enumerate(self._values):
            for k in np.flatnonzero(arr):
                yield word_from_index(self.alphabet, n, int(k)), complex(arr[k])

    def _like(self, arrays, cls=None):
        return (cls or type(self))(self.alphabet, len(arrays) - 1, arrays)

    def truncate(self, max_degree: int):
        if max_degree > self.max_degree:
            raise TruncationError(f"cannot extend a functional truncated at {self.max_degree}")
        return self._like(self._values[: max_degree + 1])

    def _check(self, other: "MomentFunctional"):
        if self.alphabet != other.alphabet:
            raise AlphabetMismatch(f"{self.alphabet} vs {other.alphabet}")

    def __add__(self, other):
        self._check(other)
        N = min(self.max_degree, other.max_degree)
        return self._like([self._values[n] + other._values[n] for n in range(N + 1)], MomentFunctional)

    def __sub__(self, other):
        self._check(other)
        N = min(self.max_degree, other.max_degree)
        return self._like([self._values[n] - other._values[n] for n in range(N + 1)], MomentFunctional)

    def __neg__(self):
        return self._like([-v for v in self._values])

    def __rmul__(self, scalar):
        return self._like([scalar * v for v in self._values])

    def __mul__(self, scalar):
        if isinstance(scalar, MomentFunctional):
            return NotImplemented
        return self.__rmul__(scalar)

    def __truediv__(self, scalar):
        return self.__rmul__(1.0 / scalar)

    def max_abs_diff(self, other: "MomentFunctional", max_degree: int | None = None) -> float:
        self._check(other)
        N = min(self.max_degree, other.max_degree) if max_degree is None else max_degree
        return max(float(np.max(np.abs(self._values[n] - other._values[n]))) for n in range(N + 1))

    @property
    def is_normalized(self) -> bool:
        return abs(self._values[0][0] - 1) <= 1e-12

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        for n, v in enumerate(self._values):
            if np.max(np.abs(v[_involution_perm(self.alphabet, n)] - v.conj()), initial=0.0) > tol:
                return False
        return True

    def to_json(self) -> dict:
        A = self.alphabet
        return {
            "alphabet": A.to_json(),
            "max_degree": self.max_degree,
            "terms": [
                {"word": [A.letter_name(a) for a in w], "coeff": [c.real, c.imag]} for w, c in self.items()
            ],
        }

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        A = Alphabet.from_json(obj["alphabet"])
        vals = {}
        for t in obj["terms"]:
            w = A.parse_word(t["word"])
            vals[w] = vals.get(w, 0) + complex(*t["coeff"])
        return cls.from_dict(A, int(obj["max_degree"]), vals)

    def __repr__(self):
        return f"{type(self).__name__}({self.alphabet.kind}, d={self.alphabet.d}, N={self.max_degree})"


class GeneratorFunctional(MomentFunctional):
    """Functional with ``ψ(1) = 0``."""

    __slots__ = ()

    def _validate(self):
        if abs(self._values[0][0]) > 1e-12:
            raise ValueError("a generator functional must vanish on the unit")


def counit_functional(alphabet: Alphabet, max_degree: int) -> MomentFunctional:
    """The counit δ as a functional (the unit for convolution)."""
    arrays = []
    for n in range(max_degree + 1):
        if alphabet.is_self_adjoint:
            v = np.zeros(alphabet.n_letters ** n, complex)
            if n == 0:
                v[0] = 1
        else:
            W = word_table(alphabet, n)
            ij = W // 2
            v = np.all(ij // alphabet.d == ij % alphabet.d, axis=1).astype(complex)
        arrays.append(v)
    return MomentFunctional(alphabet, max_degree, arrays)


# ---------------------------------------------------------------------------
# coproduct index tables


@lru_cache(maxsize=None)
def _involution_perm(alphabet: Alphabet, n: int) -> np.ndarray:
    W = word_table(alphabet, n)
    if n == 0:
        return np.zeros(1, dtype=np.int64)
    star = W[:, ::-1]
    if not alphabet.is_self_adjoint:
        star = star ^ 1
    return _index_of(star, alphabet.n_letters)


def _index_of(letters: np.ndarray, L: int) -> np.ndarray:
    idx = np.zeros(letters.shape[0], dtype=np.int64)
    for k in range(letters.shape[1]):
        idx = idx * L + letters[:, k]
    return idx


@lru_cache(maxsize=None)
def coproduct_table(alphabet: Alphabet, n: int) -> Tuple[Tuple[int, np.ndarray, int, np.ndarray, float], ...]:
    """Index form of Δ on all words of degree ``n`` simultaneously.

    Returns terms ``(ldeg, lidx, rdeg, ridx, coeff)`` such that for the word
    with index ``k``, ``Δw_k = Σ coeff * word(ldeg, lidx[k]) ⊗ word(rdeg, ridx[k])``.
    """
    W = word_table(alphabet, n)
    L = alphabet.n_letters
    terms = []
    if alphabet.is_self_adjoint:
        for mask in range(1 << n):
            left = [k for k in range(n) if mask >> k & 1]
            right = [k for k in range(n) if not mask >> k & 1]
            terms.append((len(left), _index_of(W[:, left], L), len(right), _index_of(W[:, right], L), 1.0))
    else:
        d = alphabet.d
        ij, s = W // 2, W % 2
        i, j = ij // d, ij % d
        for mid in np.ndindex(*(d,) * n):
            m = np.array(mid, dtype=np.int64)
            lidx = _index_of(2 * (i * d + m) + s, L)
            ridx = _index_of(2 * (m * d + j) + s, L)
            terms.append((n, lidx, n, ridx, 1.0))
    return tuple(terms)


def convolve(phi: MomentFunctional, psi: MomentFunctional, out_cls=None) -> MomentFunctional:
    """``(φ⋆ψ)(w) = Σ φ(w_(1)) ψ(w_(2))``, truncated at ``min(N_φ, N_ψ)``."""
    if phi.alphabet != psi.alphabet:
        raise AlphabetMismatch(f"{phi.alphabet} vs {psi.alphabet}")
    A = phi.alphabet
    N = min(phi.max_degree, psi.max_degree)
    a, b = phi.arrays, psi.arrays
    out = []
    for n in range(N + 1):
        acc = np.zeros(A.n_letters ** n, complex)
        for ld, li, rd, ri, c in coproduct_table(A, n):
            acc += c * a[ld][li] * b[rd][ri]
        out.append(acc)
    return (out_cls or MomentFunctional)(A, N, out)


def conv_power(phi: MomentFunctional, n: int) -> MomentFunctional:
    """``φ^{⋆n}`` by binary squaring (O(log n) convolutions)."""
    if int(n) != n or n < 1:
        raise ValueError("power must be a positive integer")
    result = None
    base = phi
    n = int(n)
    while True:
        if n & 1:
            result = base if result is None else convolve(result, base, MomentFunctional)
        n >>= 1
        if not n:
            return result
        base = convolve(base, base, MomentFunctional)


def _check_generator(psi: MomentFunctional):
    if abs(psi.arrays[0][0]) > 1e-12:
        raise ValueError(f"generator must vanish on the unit, got ψ(1) = {psi.arrays[0][0]}")


def _unitary_blocks(alphabet: Alphabet, n: int) -> np.ndarray:
    """Word indices arranged as ``[star pattern, row tuple, column tuple]``."""
    d = alphabet.d
    D = d ** n
    rows = np.array(list(np.ndindex(*(d,) * n)), dtype=np.int64).reshape(D, n)
    stars = np.array(list(np.ndindex(*(2,) * n)), dtype=np.int64).reshape(2 ** n, n)
    letters = 2 * (rows[None, :, None, :] * d + rows[None, None, :, :]) + stars[:, None, None, :]
    return _index_of(letters.reshape(-1, n), alphabet.n_letters).reshape(2 ** n, D, D)


def conv_exp(psi: MomentFunctional, max_degree: int | None = None) -> MomentFunctional:
    """Convolution exponential ``exp_⋆ψ`` on all words up to the truncation.

    Self-adjoint kind: the finite sum ``Σ_{k<=deg w} ψ^{⋆k}(w)/k!``.
    Unitary kind: on degree ``n`` and star pattern ``s`` the map
    ``(id⊗ψ)∘Δ`` restricted to words with fixed row indices is the matrix
    ``Ψ_s[r, c] = ψ(x_{r c}^s)``; ``exp_⋆ψ(x_{r c}^s) = expm(Ψ_s)[r, c]``
    (Padé scaling and squaring).  Degree is capped at 4 by default.
    """
    _check_generator(psi)
    A = psi.alphabet
    N = psi.max_degree if max_degree is None else max_degree
    psi = psi.truncate(N)
    if A.is_self_adjoint:
        delta = counit_functional(A, N)
        total = delta
        term = delta
        for k in range(1, N + 1):
            term = convolve(term, psi, MomentFunctional) / k
            total = total + term
        return MomentFunctional(A, N, total.arrays)
    if N > UNITARY_EXP_MAX_DEGREE and max_degree is None:
        raise Unsupported(
            f"unitary-kind exponential is capped at degree {UNITARY_EXP_MAX_DEGREE}; "
            "pass max_degree explicitly to go higher"
        )
    out = [np.ones(1, complex)]
    for n in range(1, N + 1):
        idx = _unitary_blocks(A, n)
        vals = np.empty(A.n_letters ** n, complex)
        for s in range(idx.shape[0]):
            vals[idx[s]] = expm(psi.arrays[n][idx[s]])
        out.append(vals)
    return MomentFunctional(A, N, out)


def conv_log(phi: MomentFunctional) -> GeneratorFunctional:
    """``log_⋆φ = Σ_{k>=1} (-1)^{k+1} (φ-δ)^{⋆k}/k`` (self-adjoint kind only)."""
    A = phi.alphabet
    if not A.is_self_adjoint:
        raise Unsupported("convolution logarithm is implemented for the self-adjoint kind only")
    if not phi.is_normalized:
        raise NotNormalized(f"φ(1) = {phi.arrays[0][0]} but must be 1")
    N = phi.max_degree
    x = phi - counit_functional(A, N)
    total = MomentFunctional.zeros(A, N)
    power = x
    for k in range(1, N + 1):
        total = total + ((-1) ** (k + 1) / k) * power
        power = convolve(power, x, MomentFunctional)
    arrays = list(total.arrays)
    arrays[0] = np.zeros(1, complex)
    return GeneratorFunctional(A, N, arrays)


# ---------------------------------------------------------------------------
# gaussians


def pair_partitions(n: int) -> Iterator[Tuple[Tuple[int, int], ...]]:
    """All pair partitions of ``range(n)``; the smallest unpaired index pairs first."""
    def rec(rest: Tuple[int, ...]):
        if not rest:
            yield ()
            return
        first = rest[0]
        for k in range(1, len(rest)):
            pair = (first, rest[k])
            for tail in rec(rest[1:k] + rest[k + 1:]):
                yield (pair,) + tail

    if n % 2:
        return iter(())
    return rec(tuple(range(n)))


@lru_cache(maxsize=None)
def _pair_partition_array(n: int) -> np.ndarray:
    parts = list(pair_partitions(n))
    return np.array(parts, dtype=np.int64).reshape(len(parts), n // 2, 2)


def gaussian_functional(Q, w: Word, alphabet: Alphabet | None = None) -> complex:
    """``γ_Q(x_i1 ... x_in)``: zero for odd ``n``, else the sum over pair partitions
    of ``Π Q[i_k, i_l]`` (``k < l`` in each pair)."""
    Qm = _as_matrix(Q)
    if alphabet is not None and (not alphabet.is_self_adjoint or alphabet.d != Qm.shape[0]):
        raise AlphabetMismatch(f"gaussian needs a self-adjoint alphabet with d={Qm.shape[0]}")
    w = tuple(w)
    if any(not 0 <= a < Qm.shape[0] for a in w):
        raise AlphabetMismatch("word letters exceed the covariance dimension")
    total = 0j
    for partition in pair_partitions(len(w)):
        term = 1 + 0j
        for k, l in partition:
            term *= Qm[w[k], w[l]]
        total += term
    return total


def gaussian_poly(Q, p: NCPolynomial) -> complex:
    return sum((c * gaussian_functional(Q, w, p.alphabet) for w, c in p.items()), 0j)


def gaussian_moments(Q, max_degree: int) -> MomentFunctional:
    """γ_Q on every word up to ``max_degree``, vectorized over words."""
    Qm = _as_matrix(Q)
    A = Alphabet.self_adjoint(Qm.shape[0])
    out = []
    for n in range(max_degree + 1):
        if n % 2:
            out.append(np.zeros(A.n_letters ** n, complex))
            continue
        W = word_table(A, n)
        acc = np.zeros(W.shape[0], complex)
        for part in _pair_partition_array(n):
            term = np.ones(W.shape[0], complex)
            for k, l in part:
                term *= Qm[W[:, k], W[:, l]]
            acc += term
        out.append(acc)
    return MomentFunctional(A, max_degree, out)


def cumulant_functional(Q, max_degree: int = 8) -> GeneratorFunctional:
    """``g_Q(x_i x_j) = Q_ij`` and zero on all other words."""
    Qm = _as_matrix(Q)
    A = Alphabet.self_adjoint(Qm.shape[0])
    arrays = [np.zeros(A.n_letters ** n, complex) for n in range(max_degree + 1)]
    if max_degree >= 2:
        arrays[2] = Qm.reshape(-1).copy()
    return GeneratorFunctional(A, max_degree, arrays)


# ---------------------------------------------------------------------------
# limits


def dilate(phi: MomentFunctional, lam: complex) -> MomentFunctional:
    """``w -> lam**deg(w) * φ(w)``; the functional composed with generator scaling."""
    return phi._like([lam ** n * v for n, v in enumerate(phi.arrays)])


def _check_clt_input(phi: MomentFunctional):
    if not phi.is_normalized:
        raise NotNormalized(f"φ(1) = {phi.arrays[0][0]} but must be 1")
    if phi.max_degree >= 1 and np.max(np.abs(phi.arrays[1])) > 1e-12:
        raise NotCentralized("φ(x_i) must vanish for every generator")


def clt_functional(phi: MomentFunctional, n: int, max_degree: int | None = None) -> MomentFunctional:
    """``φ^{⋆n}`` composed with ``x_i -> x_i/√n`` on all words up to ``max_degree``."""
    _check_clt_input(phi)
    if max_degree is not None:
        phi = phi.truncate(max_degree)
    return conv_power(dilate(phi, 1 / math.sqrt(n)), n)


def clt_value(phi: MomentFunctional, n: int, w) -> complex:
    """``φ^{⋆n}(p(x/√n))`` for a word or polynomial ``w``."""
    deg = w.degree if isinstance(w, NCPolynomial) else len(w)
    return clt_functional(phi, n, max(deg, 1))(w)


def commutator_ideal_element(alphabet: Alphabet, Q, u: Word, w: Word, i: int, j: int) -> NCPolynomial:
    """``u (x_i x_j - x_j x_i - (Q_ij - Q_ji) 1) w``."""
    Qm = _as_matrix(Q)
    one = NCPolynomial.one(alphabet)
    xi, xj = NCPolynomial.gen(alphabet, i), NCPolynomial.gen(alphabet, j)
    core = xi * xj - xj * xi - (Qm[i, j] - Qm[j, i]) * one
    return NCPolynomial.word(alphabet, u) * core * NCPolynomial.word(alphabet, w)


def commutator_ideal_check(Q, u: Word, w: Word, i: int, j: int) -> complex:
    """γ_Q evaluated on the ideal element ``u (x_i x_j - x_j x_i - (Q_ij - Q_ji)) w``."""
    Qm = _as_matrix(Q)
    A = Alphabet.self_adjoint(Qm.shape[0])
    return gaussian_poly(Qm, commutator_ideal_element(A, Qm, u, w, i, j))


def euler_functional(psi: MomentFunctional, n: int, max_degree: int | None = None) -> MomentFunctional:
    """``(δ + ψ/n)^{⋆n}`` on all words up to the truncation."""
    _check_generator(psi)
    if max_degree is not None:
        psi = psi.truncate(max_degree)
    base = counit_functional(psi.alphabet, psi.max_degree) + psi / n
    return conv_power(base, n)


def euler_limit(psi: MomentFunctional, n: int, w) -> complex:
    deg = w.degree if isinstance(w, NCPolynomial) else len(w)
    return euler_functional(psi, n, max(deg, 0))(w)


def random_functional(alphabet: Alphabet, max_degree: int, rng: np.random.Generator,
                      scale: float = 1.0, hermitian: bool = False, generator: bool = False) -> MomentFunctional:
    """Gaussian random values, optionally symmetrized to be hermitian."""
    arrays = []
    for n in range(max_degree + 1):
        size = alphabet.n_letters ** n
        v = scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))
        if hermitian:
            v = 0.5 * (v + v[_involution_perm(alphabet, n)].conj())
        arrays.append(v)
    if generator:
        arrays[0] = np.zeros(1, complex)
        return GeneratorFunctional(alphabet, max_degree, arrays)
    arrays[0] = np.ones(1, complex)
    return MomentFunctional(alphabet, max_degree, arrays)
