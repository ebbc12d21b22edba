"""Coalgebra structure on the two built-in alphabet kinds.

For the self-adjoint kind the generators are primitive,
``Δx = x⊗1 + 1⊗x``, so the coproduct of a word sums over all ways of splitting
its letters into two order-preserving subwords.  For the unitary kind
``Δx_ij = Σ_n x_in⊗x_nj`` (and likewise for ``x_ij*``), so a word of degree
``m`` has ``d**m`` coproduct terms; everything here enumerates them eagerly.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Dict, Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np

from .exceptions import AlphabetMismatch, Unsupported, ZeroElement
from .ncpoly import (
    PRUNE_TOL,
    Alphabet,
    NCPolynomial,
    Word,
    word_involution,
    word_order_key,
)

RANK_RTOL = 1e-10


class TensorElement:
    """Sparse element of ``B⊗...⊗B`` over the word basis.

    ``terms`` maps a tuple of words (one per leg) to a complex coefficient.
    """

    __slots__ = ("alphabet", "arity", "_terms")

    def __init__(self, alphabet: Alphabet, terms: Dict[Tuple[Word, ...], complex] | None = None, arity: int = 2):
        self.alphabet = alphabet
        self.arity = arity
        clean = {}
        for key, c in (terms or {}).items():
            if len(key) != arity:
                raise ValueError(f"expected {arity} legs, got {len(key)}")
            c = complex(c)
            if not np.isfinite(c):
                raise ValueError("non-finite coefficient")
            if abs(c) >= PRUNE_TOL:
                clean[tuple(tuple(w) for w in key)] = c
        self._terms = dict(
            sorted(clean.items(), key=lambda kv: tuple(word_order_key(w) for w in kv[0]))
        )

    def items(self):
        return self._terms.items()

    @property
    def terms(self):
        return dict(self._terms)

    def coeff(self, *legs: Word) -> complex:
        return self._terms.get(tuple(tuple(w) for w in legs), 0j)

    def __len__(self):
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def _like(self, terms):
        return type(self)(self.alphabet, terms, self.arity) if type(self) is TensorElement else type(self)(self.alphabet, terms)

    def __add__(self, other: "TensorElement"):
        if self.alphabet != other.alphabet or self.arity != other.arity:
            raise AlphabetMismatch("tensor operands differ in alphabet or arity")
        out = dict(self._terms)
        for k, c in other.items():
            out[k] = out.get(k, 0) + c
        return self._like(out)

    def __neg__(self):
        return self._like({k: -c for k, c in self.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rmul__(self, scalar):
        return self._like({k: scalar * c for k, c in self.items()})

    def __mul__(self, other):
        if isinstance(other, TensorElement):
            # componentwise concatenation in the tensor-product algebra
            if self.alphabet != other.alphabet or self.arity != other.arity:
                raise AlphabetMismatch("tensor operands differ in alphabet or arity")
            out: Dict = {}
            for k1, a in self.items():
                for k2, b in other.items():
                    k = tuple(u + v for u, v in zip(k1, k2))
                    out[k] = out.get(k, 0) + a * b
            return self._like(out)
        return self.__rmul__(other)

    def star(self):
        A = self.alphabet
        return self._like(
            {tuple(word_involution(A, w) for w in k): c.conjugate() for k, c in self.items()}
        )

    def __eq__(self, other):
        if not isinstance(other, TensorElement):
            return NotImplemented
        return (self.alphabet, self.arity, self._terms) == (other.alphabet, other.arity, other._terms)

    def max_abs_diff(self, other: "TensorElement") -> float:
        return max((abs(c) for _, c in (self - other).items()), default=0.0)

    def __repr__(self):
        A = self.alphabet
        parts = [
            f"{c:g}*" + "⊗".join(A.word_name(w) for w in k) for k, c in self.items()
        ]
        return " + ".join(parts) if parts else "0"

    def to_json(self) -> dict:
        A = self.alphabet
        name = lambda w: [A.letter_name(a) for a in w]
        if self.arity == 2:
            rows = [
                {"left": name(l), "right": name(r), "coeff": [c.real, c.imag]}
                for (l, r), c in self.items()
            ]
        else:
            rows = [{"legs": [name(w) for w in k], "coeff": [c.real, c.imag]} for k, c in self.items()]
        return {"alphabet": A.to_json(), "terms": rows}

    @classmethod
    def from_json(cls, obj) -> "TensorElement":
        A = Alphabet.from_json(obj["alphabet"])
        terms: Dict = {}
        arity = 2
        for t in obj["terms"]:
            if "legs" in t:
                key = tuple(A.parse_word(w) for w in t["legs"])
                arity = len(key)
            else:
                key = (A.parse_word(t["left"]), A.parse_word(t["right"]))
            terms[key] = terms.get(key, 0) + complex(*t["coeff"])
        return cls(A, terms, arity)


class TripleTensorElement(TensorElement):
    __slots__ = ()

    def __init__(self, alphabet: Alphabet, terms=None, arity: int = 3):
        super().__init__(alphabet, terms, 3)


@lru_cache(maxsize=1 << 16)
def _coproduct_word(alphabet: Alphabet, w: Word) -> Tuple[Tuple[Word, Word, complex], ...]:
    terms: Dict[Tuple[Word, Word], complex] = {((), ()): 1.0}
    for a in w:
        new: Dict[Tuple[Word, Word], complex] = {}
        if alphabet.is_self_adjoint:
            for (l, r), c in terms.items():
                k1, k2 = (l + (a,), r), (l, r + (a,))
                new[k1] = new.get(k1, 0) + c
                new[k2] = new.get(k2, 0) + c
        else:
            i, j, s = alphabet.entry(a)
            for (l, r), c in terms.items():
                for n in range(alphabet.d):
                    k = (l + (alphabet.unitary_letter(i, n, s),), r + (alphabet.unitary_letter(n, j, s),))
                    new[k] = new.get(k, 0) + c
        terms = new
    return tuple((l, r, c) for (l, r), c in terms.items())


def coproduct(alphabet: Alphabet, w: Word) -> TensorElement:
    """Coproduct of a single word."""
    return TensorElement(alphabet, {(l, r): c for l, r, c in _coproduct_word(alphabet, tuple(w))})


def coproduct_poly(p: NCPolynomial) -> TensorElement:
    out: Dict = {}
    for w, a in p.items():
        for l, r, c in _coproduct_word(p.alphabet, w):
            out[(l, r)] = out.get((l, r), 0) + a * c
    return TensorElement(p.alphabet, out)


def counit(alphabet: Alphabet, w: Word) -> complex:
    if alphabet.is_self_adjoint:
        return 1.0 + 0j if len(w) == 0 else 0j
    for a in w:
        i, j, _ = alphabet.entry(a)
        if i != j:
            return 0j
    return 1.0 + 0j


def counit_poly(p: NCPolynomial) -> complex:
    return sum((c * counit(p.alphabet, w) for w, c in p.items()), 0j)


def antipode(p: NCPolynomial) -> NCPolynomial:
    """``S(x_i1 ... x_im) = (-1)**m x_im ... x_i1`` on the self-adjoint kind."""
    if not p.alphabet.is_self_adjoint:
        raise Unsupported(
            "the unitary-kind bialgebra has no antipode"
        )
    return NCPolynomial(p.alphabet, {tuple(reversed(w)): c * (-1) ** len(w) for w, c in p.items()})


def multiply_legs(T: TensorElement) -> NCPolynomial:
    """The multiplication map ``M(a⊗b) = ab`` (any arity)."""
    out: Dict[Word, complex] = {}
    for key, c in T.items():
        w = tuple(a for leg in key for a in leg)
        out[w] = out.get(w, 0) + c
    return NCPolynomial(T.alphabet, out)


def apply_legwise(T: TensorElement, *maps) -> TensorElement:
    """Apply linear maps word -> NCPolynomial (or None for identity) to each leg."""
    out: Dict = {}
    for key, c in T.items():
        partial = {(): c}
        for leg, f in zip(key, maps):
            img = {leg: 1.0} if f is None else f(leg).terms
            partial = {k + (w,): a * b for k, a in partial.items() for w, b in img.items()}
        for k, a in partial.items():
            out[k] = out.get(k, 0) + a
    return TensorElement(T.alphabet, out, T.arity)


def coproduct_on_leg(T: TensorElement, leg: int) -> TensorElement:
    """``(id⊗..⊗Δ⊗..⊗id) T`` with Δ on the given leg; raises arity by one."""
    A = T.alphabet
    out: Dict = {}
    for key, c in T.items():
        for l, r, b in _coproduct_word(A, key[leg]):
            k = key[:leg] + (l, r) + key[leg + 1:]
            out[k] = out.get(k, 0) + c * b
    if T.arity + 1 == 3:
        return TripleTensorElement(A, out)
    return TensorElement(A, out, T.arity + 1)


def counit_on_leg(T: TensorElement, leg: int):
    """Contract one leg with the counit; returns a polynomial for arity 2."""
    A = T.alphabet
    out: Dict = {}
    for key, c in T.items():
        e = counit(A, key[leg])
        if e != 0:
            k = key[:leg] + key[leg + 1:]
            out[k] = out.get(k, 0) + c * e
    if T.arity == 2:
        return NCPolynomial(A, {k[0]: c for k, c in out.items()})
    return TensorElement(A, out, T.arity - 1)


def coassociativity_check(alphabet: Alphabet, w: Word) -> Tuple[TripleTensorElement, TripleTensorElement]:
    """Return ``((Δ⊗id)Δw, (id⊗Δ)Δw)``; the two agree for a coassociative Δ."""
    D = coproduct(alphabet, w)
    return coproduct_on_leg(D, 0), coproduct_on_leg(D, 1)


# ---------------------------------------------------------------------------
# linear algebra on word coordinates


def _coordinates(polys: Sequence[NCPolynomial], extra_words: Iterable[Word] = ()):
    words = set(extra_words)
    for p in polys:
        words.update(p.terms)
    words = sorted(words, key=word_order_key)
    index = {w: k for k, w in enumerate(words)}
    M = np.zeros((len(words), len(polys)), dtype=complex)
    for j, p in enumerate(polys):
        for w, c in p.items():
            M[index[w], j] = c
    return words, index, M


def _rank(s: np.ndarray, rtol: float) -> int:
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def _canonical_columns(Q: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis of ``range(Q)`` that depends only on the subspace.

    Gram-Schmidt on the projector columns taken in word order, so the first
    vector is the normalized projection of the first word with a non-trivial
    image, and so on.
    """
    r = Q.shape[1]
    if r == 0:
        return Q
    P = Q @ Q.conj().T
    basis: List[np.ndarray] = []
    for k in range(P.shape[0]):
        v = P[:, k].copy()
        for b in basis:
            v -= (b.conj() @ v) * b
        for b in basis:  # second pass for stability
            v -= (b.conj() @ v) * b
        nv = np.linalg.norm(v)
        if nv > tol:
            basis.append(v / nv)
            if len(basis) == r:
                break
    return np.column_stack(basis)


def _polys_from_columns(alphabet: Alphabet, words: Sequence[Word], B: np.ndarray) -> List[NCPolynomial]:
    out = []
    for j in range(B.shape[1]):
        col = B[:, j]
        out.append(NCPolynomial(alphabet, {w: col[k] for k, w in enumerate(words) if abs(col[k]) >= PRUNE_TOL}))
    return out


def orthonormal_basis(polys: Sequence[NCPolynomial], rtol: float = RANK_RTOL) -> List[NCPolynomial]:
    """Canonical orthonormal basis (word-coefficient inner product) of a span."""
    polys = [p for p in polys if not p.is_zero()]
    if not polys:
        return []
    A = polys[0].alphabet
    words, _, M = _coordinates(polys)
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    r = _rank(s, rtol)
    return _polys_from_columns(A, words, _canonical_columns(U[:, :r]))


def span_residual(basis: Sequence[NCPolynomial], p: NCPolynomial) -> float:
    """Largest coefficient of ``p`` minus its projection onto an orthonormal basis."""
    words, _, M = _coordinates(list(basis) + [p])
    B, v = M[:, :-1], M[:, -1]
    return float(np.max(np.abs(v - B @ (B.conj().T @ v)), initial=0.0))


def subspace_intersection(basis1: Sequence[NCPolynomial], basis2: Sequence[NCPolynomial], rtol: float = 1e-9) -> List[NCPolynomial]:
    """Intersection of two spans, as a canonical orthonormal basis."""
    if not basis1 or not basis2:
        return []
    A = basis1[0].alphabet
    n1 = len(basis1)
    words, _, M = _coordinates(list(basis1) + list(basis2))
    # null space of [B1, -B2] gives coefficient pairs with B1 a = B2 b
    K = np.hstack([M[:, :n1], -M[:, n1:]])
    _, s, Vh = np.linalg.svd(K)
    smax = s[0] if s.size else 0.0
    null = [k for k in range(Vh.shape[0]) if (k >= s.size or s[k] <= rtol * max(smax, 1.0))]
    if not null:
        return []
    coeffs = Vh[null].conj().T[:n1]
    vecs = M[:, :n1] @ coeffs
    U, sv, _ = np.linalg.svd(vecs, full_matrices=False)
    r = _rank(sv, rtol)
    return _polys_from_columns(A, words, _canonical_columns(U[:, :r]))


def invariance_defect(basis: Sequence[NCPolynomial]) -> float:
    """Max coefficient of ``Δb - (P⊗P)Δb`` over basis vectors ``b``.

    ``P`` is the orthogonal projector onto the span of ``basis`` (which must be
    orthonormal in word coordinates).  Zero iff the span is a subcoalgebra.
    """
    if not basis:
        return 0.0
    deltas = [coproduct_poly(b) for b in basis]
    extra = {w for D in deltas for k, _ in D.items() for w in k}
    words, index, B = _coordinates(list(basis), extra)
    P = B @ B.conj().T
    worst = 0.0
    for D in deltas:
        M = np.zeros((len(words), len(words)), dtype=complex)
        for (l, r), c in D.items():
            M[index[l], index[r]] += c
        worst = max(worst, float(np.max(np.abs(M - P @ M @ P.T))))
    return worst


class MinimalRepresentation(NamedTuple):
    left: List[NCPolynomial]
    middle: np.ndarray
    right: List[NCPolynomial]

    @property
    def rank(self) -> int:
        return self.middle.shape[0]

    def reconstruct(self) -> TensorElement:
        A = self.left[0].alphabet
        out: Dict = {}
        for i, u in enumerate(self.left):
            for j, w in enumerate(self.right):
                c = self.middle[i, j]
                if c == 0:
                    continue
                for a, ca in u.items():
                    for b, cb in w.items():
                        out[(a, b)] = out.get((a, b), 0) + c * ca * cb
        return TensorElement(A, out)


def minimal_tensor_representation(T: TensorElement, rtol: float = RANK_RTOL) -> MinimalRepresentation:
    """Shortest representation ``T = Σ c_ij u_i⊗w_j`` with independent legs.

    The coefficient matrix of ``T`` over the word basis is factored by SVD;
    the number of terms equals its numerical rank.
    """
    if T.arity != 2:
        raise ValueError("minimal representations are defined for two legs")
    if T.is_zero():
        raise ZeroElement("the zero tensor has no minimal representation")
    A = T.alphabet
    lwords = sorted({l for (l, _), _ in T.items()}, key=word_order_key)
    rwords = sorted({r for (_, r), _ in T.items()}, key=word_order_key)
    li = {w: k for k, w in enumerate(lwords)}
    ri = {w: k for k, w in enumerate(rwords)}
    M = np.zeros((len(lwords), len(rwords)), dtype=complex)
    for (l, r), c in T.items():
        M[li[l], ri[r]] += c
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    n = _rank(s, rtol)
    left = _polys_from_columns(A, lwords, U[:, :n])
    right = _polys_from_columns(A, rwords, Vh[:n].T)
    return MinimalRepresentation(left, np.diag(s[:n]).astype(complex), right)


def generated_subcoalgebra(c, rtol: float = RANK_RTOL) -> List[NCPolynomial]:
    """Finite-dimensional subcoalgebra containing ``c``.

    ``(Δ⊗id)Δc`` is written as ``Σ_ij u_i⊗v_ij⊗w_j`` with the ``u_i`` and the
    ``w_j`` linearly independent; the span of the middle vectors ``v_ij`` is a
    subcoalgebra containing ``c``.  A sequence of polynomials yields the sum
    of the individual subcoalgebras.

    Returns a canonical orthonormal basis in word coordinates.
    """
    if not isinstance(c, NCPolynomial):
        polys = list(c)
        if not polys:
            raise ZeroElement("empty generating set")
        parts = [v for p in polys if not p.is_zero() for v in generated_subcoalgebra(p, rtol)]
        if not parts:
            raise ZeroElement("generating set spans the zero space")
        return orthonormal_basis(parts, rtol)
    if c.is_zero():
        raise ZeroElement("the zero element generates the zero subcoalgebra")
    A = c.alphabet
    X3 = coproduct_on_leg(coproduct_poly(c), 0)
    legs = [sorted({k[i] for k, _ in X3.items()}, key=word_order_key) for i in range(3)]
    idx = [{w: n for n, w in enumerate(ws)} for ws in legs]
    X = np.zeros(tuple(len(ws) for ws in legs), dtype=complex)
    for (a, b, e), val in X3.items():
        X[idx[0][a], idx[1][b], idx[2][e]] += val
    na, nb, ne = X.shape

    U, s, _ = np.linalg.svd(X.reshape(na, nb * ne), full_matrices=False)
    U = U[:, : _rank(s, rtol)]
    W, s, _ = np.linalg.svd(X.transpose(2, 0, 1).reshape(ne, na * nb), full_matrices=False)
    W = W[:, : _rank(s, rtol)]
    # v_ij = (u_i^H ⊗ id ⊗ w_j^H) X
    V = np.einsum("ai,abe,ej->bij", U.conj(), X, W.conj()).reshape(nb, -1)
    Q, s, _ = np.linalg.svd(V, full_matrices=False)
    Q = Q[:, : _rank(s, rtol)]
    return _polys_from_columns(A, legs[1], _canonical_columns(Q))
