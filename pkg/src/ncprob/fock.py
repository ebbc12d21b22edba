"""Generator triplets and the truncated symmetric Fock space.

The one-particle space is ``C^{n_bins} ⊗ C^h``: bin ``b`` carries the
normalized indicator ``χ_bin / sqrt(dt)`` and mode ``b*h + k`` is that
indicator tensored with the ``k``-th basis vector of ``H = C^h``.  On this
space ``χ_[s,t) ⊗ x`` has coefficient ``sqrt(dt) x_k`` on every covered bin,
so all fixed-grid computations are exact finite sums.

Fock vectors are sparse maps from occupation states to amplitudes.  A state
is a sorted tuple of mode indices with repetition (a multiset), so ``()``
is the vacuum and ``(3, 3, 7)`` has two particles in mode 3 and one in 7.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .exceptions import CutoffError, OffGridError
from .functional import GeneratorFunctional, MomentFunctional
from .ncpoly import Alphabet, Word

State = Tuple[int, ...]

GRID_TOL = 1e-9


# ---------------------------------------------------------------------------
# triplets


@dataclass(frozen=True)
class Triplet:
    """Triplet ``(ρ0, η0, ψ0)`` on ``T(V)`` for self-adjoint letters.

    Arrays are indexed by letter: ``rho0[i]`` is ``h x h``, ``eta0[i]`` is in
    ``C^h`` and ``psi0[i]`` is a scalar.  Since each letter is its own adjoint,
    the ``*``-map condition makes every ``rho0[i]`` hermitian and every
    ``psi0[i]`` real.
    """

    rho0: np.ndarray = field(repr=False)
    eta0: np.ndarray = field(repr=False)
    psi0: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho0 = np.array(self.rho0, dtype=complex)
        eta0 = np.array(self.eta0, dtype=complex)
        psi0 = np.array(self.psi0, dtype=complex).reshape(-1)
        if eta0.ndim != 2:
            raise ValueError("eta0 must have shape (d, h)")
        d, h = eta0.shape
        if rho0.shape != (d, h, h):
            raise ValueError(f"rho0 must have shape {(d, h, h)}, got {rho0.shape}")
        if psi0.shape != (d,):
            raise ValueError(f"psi0 must have length {d}, got {psi0.shape}")
        if np.max(np.abs(rho0 - rho0.conj().transpose(0, 2, 1)), initial=0.0) > 1e-12:
            raise ValueError("rho0(x_i) must be hermitian")
        if np.max(np.abs(psi0.imag), initial=0.0) > 1e-12:
            raise ValueError("psi0(x_i) must be real")
        object.__setattr__(self, "rho0", rho0)
        object.__setattr__(self, "eta0", eta0)
        object.__setattr__(self, "psi0", psi0)

    @property
    def d(self) -> int:
        return self.eta0.shape[0]

    @property
    def h(self) -> int:
        return self.eta0.shape[1]

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet.self_adjoint(self.d)

    def to_json(self) -> dict:
        A = self.alphabet
        return {
            "h": self.h,
            "rho0": {A.letter_name(i): [[[z.real, z.imag] for z in row] for row in self.rho0[i]]
                     for i in range(self.d)},
            "eta0": {A.letter_name(i): [[z.real, z.imag] for z in self.eta0[i]] for i in range(self.d)},
            "psi0": {A.letter_name(i): [self.psi0[i].real, self.psi0[i].imag] for i in range(self.d)},
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "Triplet":
        h = int(obj["h"])
        names = list(obj["eta0"])
        d = len(names)
        A = Alphabet.self_adjoint(d)
        rho0 = np.zeros((d, h, h), complex)
        eta0 = np.zeros((d, h), complex)
        psi0 = np.zeros(d, complex)
        for name in names:
            i = A.parse_letter(name)
            eta0[i] = _complex_array(obj["eta0"][name], (h,))
            if name in obj.get("rho0", {}):
                rho0[i] = _complex_array(obj["rho0"][name], (h, h))
            if name in obj.get("psi0", {}):
                psi0[i] = _complex_array(obj["psi0"][name], ())
        return cls(rho0, eta0, psi0)


def _complex_array(x, shape: Tuple[int, ...] | None = None) -> np.ndarray:
    """Parse complex data from JSON.

    Entries are numbers, strings such as ``"0.5j"``, or ``[re, im]`` pairs.
    With ``shape`` given, a trailing axis of length 2 is read as pairs only
    when the plain reading does not already have that shape.
    """
    a = np.asarray(x)
    if a.dtype.kind in "USO":
        out = np.vectorize(lambda z: complex(str(z).replace(" ", "")), otypes=[complex])(a)
        if shape is not None and out.shape != tuple(shape):
            raise ValueError(f"expected shape {tuple(shape)}, got {out.shape}")
        return out
    a = a.astype(float)
    if shape is not None:
        shape = tuple(shape)
        if a.shape == shape:
            return a.astype(complex)
        if a.shape == shape + (2,):
            return a[..., 0] + 1j * a[..., 1]
        raise ValueError(f"expected shape {shape} (or {shape + (2,)} as [re, im] pairs), got {a.shape}")
    if a.ndim == 0:
        return a.astype(complex)
    if a.shape[-1] != 2:
        raise ValueError("complex entries must be given as [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def psd_sqrt(Q) -> np.ndarray:
    """Hermitian square root of a PSD matrix."""
    Q = np.asarray(Q, dtype=complex)
    lam, V = np.linalg.eigh(0.5 * (Q + Q.conj().T))
    if lam.min(initial=0.0) < -1e-10 * max(1.0, np.abs(lam).max(initial=0.0)):
        raise ValueError("covariance is not positive semidefinite")
    return (V * np.sqrt(np.clip(lam, 0, None))) @ V.conj().T


def gaussian_triplet(Q) -> Triplet:
    """``η0(x_i) = Q^{1/2} e_i``, ``ρ0 = 0``, ``ψ0 = 0``: generator ``g_Q``."""
    R = psd_sqrt(Q)
    d = R.shape[0]
    # eta0[i] must be the i-th column of Q^{1/2}
    return Triplet(np.zeros((d, d, d)), R.T.copy(), np.zeros(d))


def random_triplet(d: int, h: int, rng: np.random.Generator, scale: float = 1.0) -> Triplet:
    X = rng.normal(size=(d, h, h)) + 1j * rng.normal(size=(d, h, h))
    rho0 = 0.5 * scale * (X + X.conj().transpose(0, 2, 1)) / math.sqrt(2 * h)
    eta0 = scale * (rng.normal(size=(d, h)) + 1j * rng.normal(size=(d, h))) / math.sqrt(2 * h)
    psi0 = scale * rng.normal(size=d)
    return Triplet(rho0, eta0, psi0)


def triplet_generator(T: Triplet, w: Word) -> complex:
    """``ψ(v1...vn) = <η0(v1*), ρ0(v2)...ρ0(v_{n-1}) η0(vn)>``, ``ψ(v) = ψ0(v)``."""
    w = tuple(w)
    if any(not 0 <= a < T.d for a in w):
        raise ValueError(f"word {w} has letters outside 0..{T.d - 1}")
    if not w:
        return 0j
    if len(w) == 1:
        return complex(T.psi0[w[0]])
    v = T.eta0[w[-1]]
    for a in reversed(w[1:-1]):
        v = T.rho0[a] @ v
    return complex(np.vdot(T.eta0[w[0]], v))


def triplet_functional(T: Triplet, max_degree: int) -> GeneratorFunctional:
    """All generator values up to ``max_degree`` at once."""
    d, h = T.d, T.h
    arrays = [np.zeros(1, complex)]
    if max_degree >= 1:
        arrays.append(T.psi0.copy())
    V = T.eta0  # rows: ρ0(suffix[:-1]) η0(suffix[-1]) for suffixes of length k
    for n in range(2, max_degree + 1):
        arrays.append((T.eta0.conj() @ V.T).reshape(-1))
        V = np.einsum("aij,rj->ari", T.rho0, V).reshape(-1, h)
    return GeneratorFunctional(Alphabet.self_adjoint(d), max_degree, arrays[: max_degree + 1])


# ---------------------------------------------------------------------------
# time grid


@dataclass(frozen=True)
class BinGrid:
    t_max: float
    n_bins: int

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if int(self.n_bins) != self.n_bins or self.n_bins < 1:
            raise ValueError("n_bins must be a positive integer")

    @property
    def dt(self) -> float:
        return self.t_max / self.n_bins

    def bin_index(self, t: float) -> int:
        """Grid index of ``t``; raises :class:`OffGridError` off the grid."""
        x = t / self.dt
        k = int(round(x))
        if abs(x - k) > GRID_TOL * max(1.0, abs(x)) or not 0 <= k <= self.n_bins:
            raise OffGridError(f"t={t} is not a grid point of {self}")
        return k

    def times(self) -> np.ndarray:
        return np.arange(self.n_bins + 1) * self.dt

    def to_json(self) -> dict:
        return {"t_max": self.t_max, "n_bins": self.n_bins}

    @classmethod
    def from_json(cls, obj: Mapping) -> "BinGrid":
        return cls(float(obj["t_max"]), int(obj["n_bins"]))


def time_indexed(kind: str, t: float, x, grid: BinGrid, s: float = 0.0) -> np.ndarray:
    """One-particle argument for ``χ_[s,t) ⊗ x``.

    ``kind`` is ``"A"``/``"A*"`` (``x`` in ``C^h``; returns a vector of length
    ``n_bins*h``) or ``"Lambda"`` (``x`` an ``h x h`` operator; returns the
    block-diagonal ``m x m`` matrix acting as ``x`` on covered bins).
    """
    b0, b1 = grid.bin_index(s), grid.bin_index(t)
    if b1 < b0:
        raise ValueError("need s <= t")
    x = np.asarray(x, dtype=complex)
    if kind in ("A", "A*"):
        h = x.shape[0]
        out = np.zeros((grid.n_bins, h), complex)
        out[b0:b1] = math.sqrt(grid.dt) * x
        return out.reshape(-1)
    if kind == "Lambda":
        h = x.shape[0]
        m = grid.n_bins * h
        out = np.zeros((m, m), complex)
        for b in range(b0, b1):
            out[b * h:(b + 1) * h, b * h:(b + 1) * h] = x
        return out
    raise ValueError(f"unknown operator kind {kind!r}")


# ---------------------------------------------------------------------------
# sparse Fock vectors


def _add_particle(s: State, i: int) -> State:
    k = bisect.bisect_left(s, i)
    return s[:k] + (i,) + s[k:]


def _remove_particle(s: State, i: int) -> State:
    k = bisect.bisect_left(s, i)
    return s[:k] + s[k + 1:]


def _occupation_counts(s: State) -> Dict[int, int]:
    counts: Dict[int, int] = {}
    for i in s:
        counts[i] = counts.get(i, 0) + 1
    return counts


class FockVector:
    """Immutable sparse vector in the symmetric Fock space truncated at ``cutoff``.

    ``saturated`` is set once a creation operator had to drop a component
    that would have exceeded the cutoff.
    """

    __slots__ = ("n_modes", "cutoff", "_amps", "saturated")

    def __init__(self, n_modes: int, cutoff: int, amps: Mapping[State, complex] | None = None,
                 saturated: bool = False):
        self.n_modes = int(n_modes)
        self.cutoff = int(cutoff)
        self._amps: Dict[State, complex] = {}
        for s, c in (amps or {}).items():
            s = tuple(sorted(s))
            if len(s) > cutoff:
                raise CutoffError(f"state {s} exceeds cutoff {cutoff}")
            if s and not (0 <= s[0] and s[-1] < n_modes):
                raise ValueError(f"state {s} has modes outside 0..{n_modes - 1}")
            if c != 0:
                self._amps[s] = self._amps.get(s, 0j) + complex(c)
        self.saturated = bool(saturated)

    @classmethod
    def vacuum(cls, n_modes: int, cutoff: int) -> "FockVector":
        return cls(n_modes, cutoff, {(): 1.0})

    @classmethod
    def basis(cls, n_modes: int, cutoff: int, state: Sequence[int]) -> "FockVector":
        """Normalized occupation basis vector for the multiset ``state``."""
        return cls(n_modes, cutoff, {tuple(state): 1.0})

    @classmethod
    def _raw(cls, n_modes, cutoff, amps, saturated=False) -> "FockVector":
        v = cls.__new__(cls)
        v.n_modes, v.cutoff, v._amps, v.saturated = n_modes, cutoff, amps, saturated
        return v

    def items(self):
        return self._amps.items()

    def amplitude(self, state: Sequence[int]) -> complex:
        return self._amps.get(tuple(sorted(state)), 0j)

    def __len__(self):
        return len(self._amps)

    def max_particles(self) -> int:
        return max((len(s) for s in self._amps), default=0)

    def _check(self, other: "FockVector"):
        if (self.n_modes, self.cutoff) != (other.n_modes, other.cutoff):
            raise ValueError("Fock vectors live on different spaces")

    def __add__(self, other: "FockVector") -> "FockVector":
        self._check(other)
        out = dict(self._amps)
        for s, c in other._amps.items():
            out[s] = out.get(s, 0j) + c
        return FockVector._raw(self.n_modes, self.cutoff, out, self.saturated or other.saturated)

    def __sub__(self, other: "FockVector") -> "FockVector":
        return self + (-1.0) * other

    def __rmul__(self, scalar) -> "FockVector":
        scalar = complex(scalar)
        return FockVector._raw(self.n_modes, self.cutoff,
                               {s: scalar * c for s, c in self._amps.items()}, self.saturated)

    __mul__ = __rmul__

    def inner(self, other: "FockVector") -> complex:
        """``<self, other>``, antilinear in ``self``."""
        self._check(other)
        small, big = (self._amps, other._amps) if len(self) <= len(other) else (other._amps, self._amps)
        acc = 0j
        for s in small:
            if s in big:
                acc += self._amps[s].conjugate() * other._amps[s]
        return acc

    def norm(self) -> float:
        return math.sqrt(sum(abs(c) ** 2 for c in self._amps.values()))

    def prune(self, max_particles: int) -> "FockVector":
        """Drop components with more than ``max_particles`` particles."""
        return FockVector._raw(self.n_modes, self.cutoff,
                               {s: c for s, c in self._amps.items() if len(s) <= max_particles},
                               self.saturated)

    def to_dense(self, states: Sequence[State]) -> np.ndarray:
        return np.array([self.amplitude(s) for s in states], complex)

    def __repr__(self):
        return f"FockVector(m={self.n_modes}, cutoff={self.cutoff}, nnz={len(self)})"


def _check_dim(xi: np.ndarray, v: FockVector):
    if xi.shape[0] != v.n_modes:
        raise ValueError(f"one-particle argument has dimension {xi.shape[0]}, space has {v.n_modes}")


def create(xi, v: FockVector) -> FockVector:
    """``A*(ξ) v``; components pushed above the cutoff are dropped and flagged."""
    xi = np.asarray(xi, dtype=complex)
    _check_dim(xi, v)
    nz = [(int(i), xi[i]) for i in np.flatnonzero(xi)]
    out: Dict[State, complex] = {}
    saturated = v.saturated
    for s, c in v.items():
        if len(s) >= v.cutoff:
            saturated = saturated or bool(nz)
            continue
        counts = _occupation_counts(s)
        for i, x in nz:
            t = _add_particle(s, i)
            out[t] = out.get(t, 0j) + c * x * math.sqrt(counts.get(i, 0) + 1)
    return FockVector._raw(v.n_modes, v.cutoff, out, saturated)


def annihilate(xi, v: FockVector) -> FockVector:
    """``A(ξ) v``, antilinear in ``ξ`` so that ``A(ξ)† = A*(ξ)``."""
    xi = np.asarray(xi, dtype=complex)
    _check_dim(xi, v)
    xc = xi.conj()
    out: Dict[State, complex] = {}
    for s, c in v.items():
        for i, n in _occupation_counts(s).items():
            if xc[i] != 0:
                t = _remove_particle(s, i)
                out[t] = out.get(t, 0j) + c * xc[i] * math.sqrt(n)
    return FockVector._raw(v.n_modes, v.cutoff, out, v.saturated)


def _columns(T: np.ndarray) -> List[List[Tuple[int, complex]]]:
    rows, cols = np.nonzero(T)
    out: List[List[Tuple[int, complex]]] = [[] for _ in range(T.shape[1])]
    for i, j in zip(rows.tolist(), cols.tolist()):
        out[j].append((i, T[i, j]))
    return out


def preserve(T, v: FockVector, _cols=None) -> FockVector:
    """``Λ(T) v = Σ T_ij A*(e_i) A(e_j) v`` (particle-number conserving)."""
    T = np.asarray(T, dtype=complex)
    if T.shape != (v.n_modes, v.n_modes):
        raise ValueError(f"operator has shape {T.shape}, space has {v.n_modes} modes")
    cols = _cols if _cols is not None else _columns(T)
    out: Dict[State, complex] = {}
    for s, c in v.items():
        counts = _occupation_counts(s)
        for j, nj in counts.items():
            if not cols[j]:
                continue
            r = _remove_particle(s, j)
            base = c * math.sqrt(nj)
            for i, x in cols[j]:
                ni = counts.get(i, 0) - (i == j)
                t = _add_particle(r, i)
                out[t] = out.get(t, 0j) + base * x * math.sqrt(ni + 1)
    return FockVector._raw(v.n_modes, v.cutoff, out, v.saturated)


def random_fock_vector(n_modes: int, cutoff: int, n_terms: int, rng: np.random.Generator,
                       max_particles: int | None = None) -> FockVector:
    top = cutoff if max_particles is None else max_particles
    amps = {}
    for _ in range(n_terms):
        k = int(rng.integers(0, top + 1))
        s = tuple(sorted(rng.integers(0, n_modes, size=k).tolist()))
        amps[s] = complex(rng.normal(), rng.normal())
    return FockVector(n_modes, cutoff, amps)


# ---------------------------------------------------------------------------
# additive process


class AdditiveOperator:
    """``F_{s,t}(v) = A(η0(v*)) + Λ(ρ0(v)) + A*(η0(v)) + ψ0(v)(t - s)`` on ``[s, t)``."""

    def __init__(self, triplet: Triplet, grid: BinGrid, letter: int, t: float, s: float = 0.0,
                 cutoff: int | None = None):
        if not 0 <= letter < triplet.d:
            raise ValueError(f"letter {letter} outside 0..{triplet.d - 1}")
        self.triplet, self.grid, self.letter = triplet, grid, int(letter)
        self.s, self.t = float(s), float(t)
        self.cutoff = cutoff
        self.n_modes = grid.n_bins * triplet.h
        # letters are self-adjoint, so η0(v*) = η0(v)
        self.xi = time_indexed("A*", t, triplet.eta0[letter], grid, s)
        self.lam = time_indexed("Lambda", t, triplet.rho0[letter], grid, s)
        self._cols = _columns(self.lam)
        self.scalar = complex(triplet.psi0[letter]) * (self.t - self.s)

    def adjoint(self) -> "AdditiveOperator":
        return AdditiveOperator(self.triplet, self.grid, self.letter, self.t, self.s, self.cutoff)

    def __call__(self, v: FockVector) -> FockVector:
        out = annihilate(self.xi, v) + create(self.xi, v)
        if self._cols and any(self._cols):
            out = out + preserve(self.lam, v, self._cols)
        if self.scalar != 0:
            out = out + self.scalar * v
        return out


def additive_operator(T: Triplet, t: float, grid: BinGrid, letter: int, s: float = 0.0) -> AdditiveOperator:
    return AdditiveOperator(T, grid, letter, t, s)


def vacuum_moment(ops: Sequence[AdditiveOperator], cutoff: int) -> complex:
    """``<Ω, F1 F2 ... Fn Ω>``; exact once ``cutoff >= n``."""
    ops = list(ops)
    if cutoff < len(ops):
        raise CutoffError(f"cutoff {cutoff} is below the {len(ops)} operators of the moment")
    if not ops:
        return 1 + 0j
    m = ops[0].n_modes
    if any(op.n_modes != m for op in ops):
        raise ValueError("operators act on different one-particle spaces")
    v = FockVector.vacuum(m, cutoff)
    for k, op in enumerate(reversed(ops)):
        remaining = len(ops) - k - 1
        # a component with more particles than operators left cannot return to Ω
        v = op(v).prune(remaining)
    return v.amplitude(())


def fock_moments(T: Triplet, t: float, grid: BinGrid, max_degree: int,
                 cutoff: int | None = None) -> MomentFunctional:
    """Vacuum moments ``Φ(F_t(w))`` for all words up to ``max_degree``.

    Words sharing a suffix share the vector ``F_t(suffix) Ω``.
    """
    cutoff = max_degree if cutoff is None else cutoff
    if cutoff < max_degree:
        raise CutoffError(f"cutoff {cutoff} is below degree {max_degree}")
    d = T.d
    ops = [additive_operator(T, t, grid, a) for a in range(d)]
    m = grid.n_bins * T.h
    arrays = [np.zeros(d ** n, complex) for n in range(max_degree + 1)]
    arrays[0][0] = 1.0

    def walk(vec: FockVector, depth: int, suffix_index: int):
        # vec = F(w) Ω for the current suffix w of length depth
        if depth == max_degree:
            return
        for a in range(d):
            nxt = ops[a](vec).prune(max_degree - depth - 1)
            idx = a * d ** depth + suffix_index
            arrays[depth + 1][idx] = nxt.amplitude(())
            walk(nxt, depth + 1, idx)

    walk(FockVector.vacuum(m, cutoff), 0, 0)
    return MomentFunctional(Alphabet.self_adjoint(d), max_degree, arrays)


# ---------------------------------------------------------------------------
# dense bin-local Fock spaces


def local_fock_basis(h: int, cutoff: int) -> List[State]:
    """Occupation states of ``h`` modes with at most ``cutoff`` particles, by particle number."""
    from itertools import combinations_with_replacement

    return [s for n in range(cutoff + 1) for s in combinations_with_replacement(range(h), n)]


def local_annihilators(h: int, cutoff: int) -> np.ndarray:
    """Dense matrices ``a_k`` (shape ``(h, D, D)``) on the truncated local space.

    ``a_k`` is exact; its adjoint is the creation operator with the top
    sector truncated.
    """
    basis = local_fock_basis(h, cutoff)
    index = {s: n for n, s in enumerate(basis)}
    D = len(basis)
    a = np.zeros((h, D, D))
    for col, s in enumerate(basis):
        for k, n in _occupation_counts(s).items():
            a[k, index[_remove_particle(s, k)], col] = math.sqrt(n)
    return a
