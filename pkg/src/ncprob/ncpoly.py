"""Words and sparse polynomials over involutive generator alphabets.

Two alphabet kinds are supported:

* ``selfadjoint``: letters ``x1 .. xd`` with ``xi* = xi``;
* ``unitary``: letters ``xij`` and ``xij*`` for ``i, j`` in ``1..d``, the
  star swapping the two.

Letters are stored as small integers so that words are plain tuples of ints.
For the unitary kind the letter code is ``2 * (i * d + j) + star`` with
zero-based ``i, j``.  Words are ordered by ``(degree, letters)``, which is also
the order of the dense per-degree arrays used by :mod:`ncprob.functional`.
"""

from __future__ import annotations

import cmath
import itertools
import json
import re
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, Mapping, Tuple

import numpy as np

from .exceptions import AlphabetMismatch

Word = Tuple[int, ...]

PRUNE_TOL = 1e-14

SELF_ADJOINT = "selfadjoint"
UNITARY = "unitary"


@dataclass(frozen=True)
class Alphabet:
    kind: str
    d: int

    def __post_init__(self):
        if self.kind not in (SELF_ADJOINT, UNITARY):
            raise ValueError(f"unknown alphabet kind {self.kind!r}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("d must be a positive integer")

    @classmethod
    def self_adjoint(cls, d: int) -> "Alphabet":
        return cls(SELF_ADJOINT, d)

    @classmethod
    def matrix_unitary(cls, d: int) -> "Alphabet":
        return cls(UNITARY, d)

    @property
    def is_self_adjoint(self) -> bool:
        return self.kind == SELF_ADJOINT

    @property
    def n_letters(self) -> int:
        return self.d if self.is_self_adjoint else 2 * self.d * self.d

    def letters(self) -> range:
        return range(self.n_letters)

    def star(self, letter: int) -> int:
        return letter if self.is_self_adjoint else letter ^ 1

    # unitary letters only
    def entry(self, letter: int) -> Tuple[int, int, int]:
        """Return zero-based ``(i, j, starred)`` of a unitary letter."""
        ij, s = divmod(letter, 2)
        i, j = divmod(ij, self.d)
        return i, j, s

    def unitary_letter(self, i: int, j: int, starred: int = 0) -> int:
        return 2 * (i * self.d + j) + int(starred)

    def letter_name(self, letter: int) -> str:
        if self.is_self_adjoint:
            return f"x{letter + 1}"
        i, j, s = self.entry(letter)
        sep = "" if self.d < 10 else "_"
        return f"x{i + 1}{sep}{j + 1}" + ("*" if s else "")

    def parse_letter(self, name: str) -> int:
        m = re.fullmatch(r"x(\d+)(?:_(\d+))?(\*?)", name.strip())
        if m is None:
            raise ValueError(f"cannot parse letter {name!r}")
        head, tail, star = m.groups()
        if self.is_self_adjoint:
            if tail is not None:
                raise ValueError(f"{name!r} is not a self-adjoint letter")
            i = int(head) - 1
            if not 0 <= i < self.d:
                raise ValueError(f"letter {name!r} out of range for d={self.d}")
            # x_i* is accepted and equals x_i
            return i
        if tail is None:
            if len(head) != 2:
                raise ValueError(f"ambiguous unitary letter {name!r}; use x<i>_<j>")
            i, j = int(head[0]) - 1, int(head[1]) - 1
        else:
            i, j = int(head) - 1, int(tail) - 1
        if not (0 <= i < self.d and 0 <= j < self.d):
            raise ValueError(f"letter {name!r} out of range for d={self.d}")
        return self.unitary_letter(i, j, 1 if star else 0)

    def parse_word(self, text) -> Word:
        """Parse ``"x1 x2"``, ``"x12x21*"``, ``"1"`` or a list of letter names."""
        if isinstance(text, str):
            if text.strip() in ("", "1"):
                return ()
            parts = re.findall(r"x\d+(?:_\d+)?\*?", text)
            if "".join(parts) != re.sub(r"[\s·.]", "", text):
                raise ValueError(f"cannot parse word {text!r}")
        else:
            parts = list(text)
        return tuple(self.parse_letter(p) for p in parts)

    def word_name(self, w: Word) -> str:
        return "".join(self.letter_name(a) for a in w) if w else "1"

    def to_json(self) -> dict:
        return {"kind": self.kind, "d": self.d}

    @classmethod
    def from_json(cls, obj: Mapping) -> "Alphabet":
        return cls(obj["kind"], int(obj["d"]))


def word_involution(alphabet: Alphabet, w: Word) -> Word:
    """``(a1 ... an)* = an* ... a1*``."""
    return tuple(alphabet.star(a) for a in reversed(w))


def word_order_key(w: Word):
    return (len(w), w)


def words_of_degree(alphabet: Alphabet, n: int) -> Iterator[Word]:
    """All words of length ``n`` in lexicographic order."""
    return itertools.product(alphabet.letters(), repeat=n)


def words_up_to(alphabet: Alphabet, n: int) -> Iterator[Word]:
    for k in range(n + 1):
        yield from words_of_degree(alphabet, k)


def word_index(alphabet: Alphabet, w: Word) -> int:
    """Position of ``w`` among the words of its degree."""
    idx = 0
    L = alphabet.n_letters
    for a in w:
        idx = idx * L + a
    return idx


def word_from_index(alphabet: Alphabet, n: int, idx: int) -> Word:
    L = alphabet.n_letters
    out = []
    for _ in range(n):
        idx, a = divmod(idx, L)
        out.append(a)
    return tuple(reversed(out))


def word_table(alphabet: Alphabet, n: int) -> np.ndarray:
    """``(L**n, n)`` integer array listing all degree-``n`` words in order."""
    L = alphabet.n_letters
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices((L,) * n, dtype=np.int64).reshape(n, -1)
    return grids.T.copy()


def _check_scalar(c) -> complex:
    c = complex(c)
    if not (cmath.isfinite(c)):
        raise ValueError(f"non-finite coefficient {c!r}")
    return c


class NCPolynomial:
    """Sparse complex linear combination of words.

    Instances are immutable; all arithmetic returns new polynomials in
    canonical form (coefficients with modulus below ``1e-14`` are dropped).
    """

    __slots__ = ("alphabet", "_terms")

    def __init__(self, alphabet: Alphabet, terms: Mapping[Word, complex] | None = None):
        self.alphabet = alphabet
        clean: Dict[Word, complex] = {}
        n = alphabet.n_letters
        for w, c in (terms or {}).items():
            w = tuple(int(a) for a in w)
            if any(not 0 <= a < n for a in w):
                raise ValueError(f"word {w} has letters outside the alphabet")
            c = _check_scalar(c)
            if abs(c) >= PRUNE_TOL:
                clean[w] = c
        self._terms = dict(sorted(clean.items(), key=lambda kv: word_order_key(kv[0])))

    # constructors
    @classmethod
    def one(cls, alphabet: Alphabet) -> "NCPolynomial":
        return cls(alphabet, {(): 1.0})

    @classmethod
    def zero(cls, alphabet: Alphabet) -> "NCPolynomial":
        return cls(alphabet)

    @classmethod
    def word(cls, alphabet: Alphabet, w: Iterable[int], coeff: complex = 1.0) -> "NCPolynomial":
        return cls(alphabet, {tuple(w): coeff})

    @classmethod
    def gen(cls, alphabet: Alphabet, letter: int) -> "NCPolynomial":
        return cls(alphabet, {(letter,): 1.0})

    @classmethod
    def parse(cls, alphabet: Alphabet, text: str) -> "NCPolynomial":
        return cls.word(alphabet, alphabet.parse_word(text))

    # inspection
    @property
    def terms(self) -> Dict[Word, complex]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coeff(self, w: Word) -> complex:
        return self._terms.get(tuple(w), 0.0j)

    @property
    def degree(self) -> int:
        """Largest word length; ``-1`` for the zero polynomial."""
        return max((len(w) for w in self._terms), default=-1)

    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    # arithmetic
    def _check(self, other: "NCPolynomial"):
        if self.alphabet != other.alphabet:
            raise AlphabetMismatch(f"{self.alphabet} vs {other.alphabet}")

    def _coerce(self, other):
        if isinstance(other, NCPolynomial):
            self._check(other)
            return other
        if isinstance(other, (int, float, complex, np.number)):
            return NCPolynomial(self.alphabet, {(): other})
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for w, c in other._terms.items():
            out[w] = out.get(w, 0) + c
        return NCPolynomial(self.alphabet, out)

    __radd__ = __add__

    def __neg__(self):
        return NCPolynomial(self.alphabet, {w: -c for w, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, NCPolynomial):
            return poly_mul(self, other)
        if isinstance(other, (int, float, complex, np.number)):
            return NCPolynomial(self.alphabet, {w: c * other for w, c in self._terms.items()})
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self * other
        return NotImplemented

    def __truediv__(self, other):
        return self * (1.0 / other)

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative powers are not defined")
        out = NCPolynomial.one(self.alphabet)
        for _ in range(n):
            out = out * self
        return out

    def star(self) -> "NCPolynomial":
        return poly_involution(self)

    def __eq__(self, other):
        if not isinstance(other, NCPolynomial):
            return NotImplemented
        return self.alphabet == other.alphabet and self._terms == other._terms

    def __hash__(self):
        return hash((self.alphabet, tuple(self._terms.items())))

    def allclose(self, other: "NCPolynomial", atol: float = 1e-12) -> bool:
        self._check(other)
        return all(abs(c) <= atol for c in (self - other)._terms.values())

    def __repr__(self):
        if not self._terms:
            return "0"
        parts = []
        for w, c in self._terms.items():
            parts.append(f"({c.real:g}{c.imag:+g}j)*{self.alphabet.word_name(w)}")
        return " + ".join(parts)

    # serialization
    def to_json(self) -> dict:
        return {
            "alphabet": self.alphabet.to_json(),
            "terms": [
                {"word": [self.alphabet.letter_name(a) for a in w], "coeff": [c.real, c.imag]}
                for w, c in self._terms.items()
            ],
        }

    @classmethod
    def from_json(cls, obj) -> "NCPolynomial":
        if isinstance(obj, str):
            obj = json.loads(obj)
        alphabet = Alphabet.from_json(obj["alphabet"])
        terms: Dict[Word, complex] = {}
        for t in obj["terms"]:
            w = alphabet.parse_word(t["word"])
            re_, im_ = t["coeff"]
            terms[w] = terms.get(w, 0) + complex(re_, im_)
        return cls(alphabet, terms)


def poly_mul(p: NCPolynomial, q: NCPolynomial) -> NCPolynomial:
    """Bilinear extension of word concatenation."""
    if p.alphabet != q.alphabet:
        raise AlphabetMismatch(f"{p.alphabet} vs {q.alphabet}")
    out: Dict[Word, complex] = {}
    for u, a in p.items():
        for v, b in q.items():
            w = u + v
            out[w] = out.get(w, 0) + a * b
    return NCPolynomial(p.alphabet, out)


def poly_involution(p: NCPolynomial) -> NCPolynomial:
    """Antilinear, anti-multiplicative involution."""
    A = p.alphabet
    return NCPolynomial(A, {word_involution(A, w): c.conjugate() for w, c in p.items()})


def scale_generators(p: NCPolynomial, lam: complex) -> NCPolynomial:
    """Substitute ``x -> lam * x`` in every generator; word ``w`` picks up ``lam**len(w)``."""
    return NCPolynomial(p.alphabet, {w: c * lam ** len(w) for w, c in p.items()})
