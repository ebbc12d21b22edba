"""Unitary processes on ``K<d>`` from a bin-wise discretized QSDE ``dU = U dI``.

Each bin carries its own truncated Fock space of ``h`` modes.  One step on
bin ``b`` multiplies ``U`` on the right by a ``d x d`` block matrix ``M`` of
operators on that local space, so after ``n`` steps

    U_ij = Σ (M_0)_{i a1} (M_1)_{a1 a2} ... (M_{n-1})_{a_{n-1} j},

a matrix-product operator with bond dimension ``d``.  Matrix elements of
``U†U`` between product probe vectors then reduce to products of
``d² x d²`` transfer matrices, one per bin, which is what makes 256 or 512
bins cheap.  A sparse global route through :mod:`ncprob.fock` is kept for
cross-checks on small grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, List, Mapping, Sequence, Tuple

import numpy as np
from scipy.linalg import expm
from scipy.stats import unitary_group

from .exceptions import CutoffError, Unsupported
from .fock import (
    BinGrid,
    FockVector,
    _complex_array,
    annihilate,
    create,
    local_annihilators,
    local_fock_basis,
    preserve,
)

DRIFT_MODES = ("consistent", "paper-literal")
DEFAULT_CUTOFF = 4
DEFAULT_BINS = 256


def _pairs(a: np.ndarray):
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


@dataclass(frozen=True, eq=False)
class QSDEModel:
    """Coefficients ``(L, W, D)``.

    ``L`` has shape ``(d, d, h)`` with ``L[i, j]`` the vector ``η(x_ij)``;
    ``W`` is a unitary ``(d h) x (d h)`` matrix whose ``h x h`` block
    ``(i, j)`` is ``ρ(x_ij)``; ``D`` is a hermitian ``d x d`` matrix.
    """

    L: np.ndarray = field(repr=False)
    W: np.ndarray = field(repr=False)
    D: np.ndarray = field(repr=False)

    def __post_init__(self):
        L = np.array(self.L, dtype=complex)
        if L.ndim != 3 or L.shape[0] != L.shape[1]:
            raise ValueError("L must have shape (d, d, h)")
        d, _, h = L.shape
        W = np.array(self.W, dtype=complex)
        D = np.array(self.D, dtype=complex)
        if W.shape != (d * h, d * h):
            raise ValueError(f"W must have shape {(d * h, d * h)}, got {W.shape}")
        if D.shape != (d, d):
            raise ValueError(f"D must have shape {(d, d)}, got {D.shape}")
        if np.max(np.abs(W.conj().T @ W - np.eye(d * h)), initial=0.0) > 1e-10:
            raise ValueError("W must be unitary")
        if np.max(np.abs(D - D.conj().T), initial=0.0) > 1e-12:
            raise ValueError("D must be hermitian")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "D", D)

    @property
    def d(self) -> int:
        return self.L.shape[0]

    @property
    def h(self) -> int:
        return self.L.shape[2]

    def W_block(self, i: int, j: int) -> np.ndarray:
        h = self.h
        return self.W[i * h:(i + 1) * h, j * h:(j + 1) * h]

    @property
    def W_is_identity(self) -> bool:
        return bool(np.max(np.abs(self.W - np.eye(self.W.shape[0])), initial=0.0) <= 1e-12)

    def annihilation_vectors(self) -> np.ndarray:
        """``K[i, j] = (W*L)_ji = Σ_k W_kj† L_ki``, the argument of the annihilator in ``ΔI_ij``."""
        d, h = self.d, self.h
        Wb = self.W.reshape(d, h, d, h).transpose(0, 2, 1, 3)  # Wb[k, j] = W_kj
        return np.einsum("kjab,kia->ijb", Wb.conj(), self.L)

    def to_json(self) -> dict:
        return {"d": self.d, "h": self.h, "L": _pairs(self.L), "W": _pairs(self.W), "D": _pairs(self.D)}

    @classmethod
    def from_json(cls, obj: Mapping) -> "QSDEModel":
        d, h = int(obj["d"]), int(obj["h"])
        L = _complex_array(obj["L"], (d, d, h))
        W = _complex_array(obj["W"], (d * h, d * h)) if "W" in obj else np.eye(d * h)
        D = _complex_array(obj["D"], (d, d)) if "D" in obj else np.zeros((d, d))
        return cls(L, W, D)

    @classmethod
    def zero(cls, d: int, h: int) -> "QSDEModel":
        return cls(np.zeros((d, d, h)), np.eye(d * h), np.zeros((d, d)))

    @classmethod
    def scalar(cls, l: complex = 1.0) -> "QSDEModel":
        return cls(np.full((1, 1, 1), l), np.eye(1), np.zeros((1, 1)))


def random_model(d: int, h: int, rng: np.random.Generator, scale: float = 1.0,
                 identity_W: bool = False) -> QSDEModel:
    L = scale * (rng.normal(size=(d, d, h)) + 1j * rng.normal(size=(d, d, h))) / math.sqrt(2 * d * h)
    if identity_W:
        W = np.eye(d * h)
    elif d * h == 1:
        W = np.exp(2j * np.pi * rng.random()) * np.eye(1)
    else:
        W = unitary_group.rvs(d * h, random_state=rng)
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    D = 0.5 * scale * (X + X.conj().T) / math.sqrt(2 * d)
    return QSDEModel(L, W, D)


# ---------------------------------------------------------------------------
# drift


@dataclass(frozen=True)
class DriftMatrix:
    G: np.ndarray
    mode: str = "consistent"

    def dissipation(self) -> np.ndarray:
        return self.G + self.G.conj().T

    def is_dissipative(self, tol: float = 1e-12) -> bool:
        return bool(np.linalg.eigvalsh(self.dissipation()).max() <= tol)


def lindblad_gram(model: QSDEModel) -> np.ndarray:
    """``(L*L)_ij = Σ_k <L_ki, L_kj>``."""
    return np.einsum("kia,kja->ij", model.L.conj(), model.L)


def drift_matrix(model: QSDEModel, mode: str = "consistent") -> DriftMatrix:
    """``G = iD - ½ L*L``, or ``D - ½ L*L`` in ``"paper-literal"`` mode."""
    if mode not in DRIFT_MODES:
        raise ValueError(f"drift mode must be one of {DRIFT_MODES}")
    H = 1j * model.D if mode == "consistent" else model.D
    return DriftMatrix(H - 0.5 * lindblad_gram(model), mode)


# ---------------------------------------------------------------------------
# bin-local step factors


@lru_cache(maxsize=64)
def _ladders(h: int, cutoff: int) -> np.ndarray:
    return local_annihilators(h, cutoff)


def _local_noise(model: QSDEModel, dt: float, cutoff: int) -> np.ndarray:
    """Blocks ``sqrt(dt) a†(L_ij) + Λ((W-1)_ij) - sqrt(dt) a(K_ij)`` on one bin."""
    d, h = model.d, model.h
    a = _ladders(h, cutoff)
    ad = a.transpose(0, 2, 1)
    K = model.annihilation_vectors()
    sq = math.sqrt(dt)
    num = np.einsum("kxy,lyz->klxz", ad, a)  # a_k† a_l
    out = np.zeros((d, d) + a.shape[1:], complex)
    for i in range(d):
        for j in range(d):
            T = model.W_block(i, j) - (np.eye(h) if i == j else 0)
            out[i, j] = (sq * np.einsum("k,kxy->xy", model.L[i, j], ad)
                         - sq * np.einsum("k,kxy->xy", K[i, j].conj(), a)
                         + np.einsum("kl,klxy->xy", T, num))
    return out


def ito_increment_local(model: QSDEModel, dt: float, cutoff: int = DEFAULT_CUTOFF,
                        drift: str = "consistent") -> np.ndarray:
    """``ΔI`` on the truncated Fock space of a single bin, shape ``(d, d, D, D)``."""
    G = drift_matrix(model, drift).G
    noise = _local_noise(model, dt, cutoff)
    Dloc = noise.shape[-1]
    return noise + dt * G[:, :, None, None] * np.eye(Dloc)


@lru_cache(maxsize=64)
def euler_factor(model: QSDEModel, dt: float, cutoff: int = DEFAULT_CUTOFF,
                 drift: str = "consistent") -> np.ndarray:
    """``1 + ΔI`` on one bin."""
    dI = ito_increment_local(model, dt, cutoff, drift)
    d, Dloc = dI.shape[0], dI.shape[-1]
    return dI + np.eye(d)[:, :, None, None] * np.eye(Dloc)


@lru_cache(maxsize=64)
def exponential_factor(model: QSDEModel, dt: float, cutoff: int = DEFAULT_CUTOFF,
                       drift: str = "consistent") -> np.ndarray:
    """``exp(Z)`` with ``Z_ij = sqrt(dt)(a†(L_ij) - a(L_ji)) + iD_ij dt`` for ``W = 1``.

    ``Z`` is anti-hermitian on the truncated space, so the factor is unitary
    there; its vacuum expansion reproduces the Itô drift ``-½ L*L dt``.
    """
    if not model.W_is_identity:
        raise Unsupported("the exponential step is only available for W = 1")
    d = model.d
    noise = _local_noise(model, dt, cutoff)
    Dloc = noise.shape[-1]
    H = drift_matrix(model, drift).G + 0.5 * lindblad_gram(model)
    Z = noise + dt * H[:, :, None, None] * np.eye(Dloc)
    E = expm(Z.transpose(0, 2, 1, 3).reshape(d * Dloc, d * Dloc))
    return E.reshape(d, Dloc, d, Dloc).transpose(0, 2, 1, 3)


# ---------------------------------------------------------------------------
# process state


@dataclass(frozen=True)
class UnitaryProcessState:
    """``U`` after ``len(factors)`` bins; ``factors[b]`` is bin ``b``'s block factor.

    Identical factors are shared by reference, which the defect routines use
    to reuse transfer-matrix powers.
    """

    grid: BinGrid
    d: int
    h: int
    cutoff: int = DEFAULT_CUTOFF
    factors: Tuple[np.ndarray, ...] = field(default=(), repr=False)

    @classmethod
    def initial(cls, grid: BinGrid, d: int, h: int, cutoff: int = DEFAULT_CUTOFF) -> "UnitaryProcessState":
        if cutoff < 1:
            raise CutoffError("cutoff must be at least 1")
        return cls(grid, d, h, cutoff)

    @property
    def current_bin(self) -> int:
        return len(self.factors)

    @property
    def time(self) -> float:
        return self.current_bin * self.grid.dt

    @property
    def saturated(self) -> bool:
        """True when creation on a two-particle probe would leave the local space."""
        return self.cutoff < 3

    def advance(self, factor: np.ndarray) -> "UnitaryProcessState":
        if self.current_bin >= self.grid.n_bins:
            raise ValueError("grid exhausted: no bins left to integrate")
        if factor.shape[:2] != (self.d, self.d):
            raise ValueError("step factor does not match the system dimension")
        return UnitaryProcessState(self.grid, self.d, self.h, self.cutoff, self.factors + (factor,))

    def _check_model(self, model: QSDEModel):
        if (model.d, model.h) != (self.d, self.h):
            raise ValueError(f"model has (d, h) = {(model.d, model.h)}, state has {(self.d, self.h)}")


def euler_step(state: UnitaryProcessState, model: QSDEModel, drift: str = "consistent") -> UnitaryProcessState:
    """``U <- U (1 + ΔI)`` on the next bin."""
    state._check_model(model)
    return state.advance(euler_factor(model, state.grid.dt, state.cutoff, drift))


def exponential_step(state: UnitaryProcessState, model: QSDEModel,
                     drift: str = "consistent") -> UnitaryProcessState:
    """``U <- U exp(Z)`` on the next bin (``W = 1`` only)."""
    state._check_model(model)
    return state.advance(exponential_factor(model, state.grid.dt, state.cutoff, drift))


STEPPERS: Mapping[str, Callable] = {"euler": euler_step, "exponential": exponential_step}


def integrate(model: QSDEModel, grid: BinGrid, method: str = "euler", cutoff: int = DEFAULT_CUTOFF,
              drift: str = "consistent", n_steps: int | None = None,
              state: UnitaryProcessState | None = None) -> UnitaryProcessState:
    """Fold ``n_steps`` (default: all remaining) steps into ``state``."""
    if method not in STEPPERS:
        raise ValueError(f"method must be one of {sorted(STEPPERS)}")
    step = STEPPERS[method]
    if state is None:
        state = UnitaryProcessState.initial(grid, model.d, model.h, cutoff)
    if n_steps is None:
        n_steps = grid.n_bins - state.current_bin
    for _ in range(n_steps):
        state = step(state, model, drift)
    return state


# ---------------------------------------------------------------------------
# vacuum transition


def vacuum_transition(state: UnitaryProcessState) -> np.ndarray:
    """``Φ(U_ij) = <Ω, U_ij Ω>`` as a ``d x d`` matrix."""
    out = np.eye(state.d, dtype=complex)
    for M, count in _runs(state.factors):
        out = out @ np.linalg.matrix_power(M[:, :, 0, 0], count)
    return out


def vacuum_error(state: UnitaryProcessState, model: QSDEModel, drift: str = "consistent") -> float:
    """``max |Φ(U_t) - exp(t G)|`` entrywise."""
    ref = expm(state.time * drift_matrix(model, drift).G)
    return float(np.max(np.abs(vacuum_transition(state) - ref)))


def _runs(factors: Sequence[np.ndarray]) -> List[Tuple[np.ndarray, int]]:
    runs: List[Tuple[np.ndarray, int]] = []
    for M in factors:
        if runs and runs[-1][0] is M:
            runs[-1] = (M, runs[-1][1] + 1)
        else:
            runs.append((M, 1))
    return runs


# ---------------------------------------------------------------------------
# probe family and defects


@dataclass(frozen=True)
class ProbeSet:
    """Product probe vectors: at most two non-vacuum bins each.

    ``bins[p]`` and ``states[p]`` list the non-vacuum bins of probe ``p`` and
    their local occupation-state index; unused slots hold bin ``-1``.
    """

    bins: np.ndarray
    states: np.ndarray

    def __len__(self):
        return self.bins.shape[0]


def probe_set(n_bins: int, h: int, cutoff: int, n_two_particle: int = 32,
              seed: int = 0) -> ProbeSet:
    """Vacuum, every one-particle basis vector, and sampled two-particle vectors."""
    basis = local_fock_basis(h, min(cutoff, 2))
    index = {s: k for k, s in enumerate(basis)}
    bins, states = [[-1, -1]], [[0, 0]]
    if cutoff >= 1:
        for b in range(n_bins):
            for k in range(h):
                bins.append([b, -1])
                states.append([index[(k,)], 0])
    if cutoff >= 2 and n_bins > 0:
        rng = np.random.default_rng(seed)
        seen = set()
        tries = 0
        while len(seen) < n_two_particle and tries < 20 * n_two_particle:
            tries += 1
            b1, b2 = sorted(rng.integers(0, n_bins, size=2).tolist())
            k1, k2 = sorted(rng.integers(0, h, size=2).tolist())
            key = (b1, b2, k1, k2)
            if key in seen:
                continue
            seen.add(key)
            if b1 == b2:
                bins.append([b1, -1])
                states.append([index[(k1, k2)], 0])
            else:
                bins.append([b1, b2])
                states.append([index[(k1,)], index[(k2,)]])
    return ProbeSet(np.array(bins, dtype=np.int64), np.array(states, dtype=np.int64))


def _transfers(M: np.ndarray, n_local: int) -> np.ndarray:
    """``E[α, β, (a,c), (a',c')] = <M_aa' α, M_cc' β>`` for local states ``α, β < n_local``."""
    d = M.shape[0]
    X = M[:, :, :, :n_local]
    E = np.einsum("abxp,cexq->pqacbe", X.conj(), X)
    return E.reshape(n_local, n_local, d * d, d * d)


def _adjoint_factor(M: np.ndarray) -> np.ndarray:
    """Block adjoint: ``N[a', a] = M[a, a']†``."""
    return M.transpose(1, 0, 3, 2).conj()


def _gram_of_product(factors: Sequence[np.ndarray], probes: ProbeSet, d: int,
                     chunk: int = 200_000) -> np.ndarray:
    """``R[p, q, i, j] = <p, (V†V)_ij q>`` for ``V = factors[0] ... factors[-1]`` (block product)."""
    n = len(factors)
    P = len(probes)
    d2 = d * d
    n_local = int(probes.states.max()) + 1
    # distinct factors and per-bin factor ids
    uniq: List[np.ndarray] = []
    fid = np.zeros(n, dtype=np.int64)
    for b, M in enumerate(factors):
        for u, N in enumerate(uniq):
            if N is M:
                fid[b] = u
                break
        else:
            uniq.append(M)
            fid[b] = len(uniq) - 1
    E = np.stack([_transfers(M, n_local) for M in uniq]) if uniq else np.zeros((0, n_local, n_local, d2, d2))
    I = np.eye(d2, dtype=complex)
    if len(uniq) <= 1:
        Evac = E[0, 0, 0] if uniq else I
        powers = np.empty((n + 1, d2, d2), complex)
        powers[0] = I
        for k in range(1, n + 1):
            powers[k] = powers[k - 1] @ Evac

        def gap(x, y):
            return powers[y - x]
    else:
        table = np.empty((n + 1, n + 1, d2, d2), complex)
        for x in range(n + 1):
            table[x, x] = I
            for y in range(x + 1, n + 1):
                table[x, y] = table[x, y - 1] @ E[fid[y - 1], 0, 0]

        def gap(x, y):
            return table[x, y]

    pb, ps = probes.bins, probes.states
    ell = np.eye(d).reshape(-1).astype(complex)
    out = np.empty((P, P, d2), complex)
    rows_per_chunk = max(1, chunk // max(P, 1))
    q_idx = np.arange(P)
    for r0 in range(0, P, rows_per_chunk):
        rows = np.arange(r0, min(P, r0 + rows_per_chunk))
        p_i = np.repeat(rows, P)
        q_i = np.tile(q_idx, rows.size)
        Bp, Sp, Bq, Sq = pb[p_i], ps[p_i], pb[q_i], ps[q_i]

        def state_at(B, S, b):
            return np.where(B[:, 0] == b, S[:, 0], np.where(B[:, 1] == b, S[:, 1], 0))

        ev_bin, ev_a, ev_b = [], [], []
        for slot in range(2):
            b = Bp[:, slot]
            ev_bin.append(np.where(b >= 0, b, n))
            ev_a.append(Sp[:, slot])
            ev_b.append(state_at(Bq, Sq, b))
        for slot in range(2):
            b = Bq[:, slot]
            dup = (b == Bp[:, 0]) | (b == Bp[:, 1])
            ev_bin.append(np.where((b >= 0) & ~dup, b, n))
            ev_a.append(state_at(Bp, Sp, b))
            ev_b.append(Sq[:, slot])
        ev_bin = np.stack(ev_bin, 1)
        ev_a = np.stack(ev_a, 1)
        ev_b = np.stack(ev_b, 1)
        order = np.argsort(ev_bin, axis=1, kind="stable")
        ev_bin = np.take_along_axis(ev_bin, order, 1)
        ev_a = np.take_along_axis(ev_a, order, 1)
        ev_b = np.take_along_axis(ev_b, order, 1)

        v = np.broadcast_to(ell, (p_i.size, d2)).copy()
        prev = np.zeros(p_i.size, dtype=np.int64)
        for slot in range(4):
            b = ev_bin[:, slot]
            live = b < n
            if not live.any():
                continue
            bl = np.where(live, b, prev)
            v = np.einsum("ni,nij->nj", v, gap(prev, bl))
            Eb = E[fid[np.minimum(bl, n - 1)], ev_a[:, slot], ev_b[:, slot]]
            Eb = np.where(live[:, None, None], Eb, I)
            v = np.einsum("ni,nij->nj", v, Eb)
            prev = np.where(live, b + 1, prev)
        v = np.einsum("ni,nij->nj", v, gap(prev, np.full_like(prev, n)))
        out[rows] = v.reshape(rows.size, P, d2)
    return out.reshape(P, P, d, d)


def _compression_norm(R: np.ndarray) -> float:
    """Spectral norm of ``[<p,(X)_ij q>] - I`` over the orthonormal probe family."""
    P, _, d, _ = R.shape
    C = R.transpose(2, 0, 3, 1).reshape(d * P, d * P) - np.eye(d * P)
    C = 0.5 * (C + C.conj().T)
    return float(np.max(np.abs(np.linalg.eigvalsh(C)), initial=0.0))


def _default_probes(state: UnitaryProcessState, n_two_particle: int, seed: int) -> ProbeSet:
    if state.cutoff < 3:
        raise CutoffError("probe matrix elements are exact only for cutoff >= 3")
    return probe_set(state.current_bin, state.h, state.cutoff, n_two_particle, seed)


def unitarity_defect(state: UnitaryProcessState, n_two_particle: int = 32, seed: int = 0,
                     probes: ProbeSet | None = None) -> float:
    """Norm of ``U†U - I`` compressed to the probe span (integrated bins only).

    Bins not yet integrated carry ``U = 1`` and contribute nothing.
    """
    if state.current_bin == 0:
        return 0.0
    probes = probes or _default_probes(state, n_two_particle, seed)
    return _compression_norm(_gram_of_product(state.factors, probes, state.d))


def co_unitarity_defect(state: UnitaryProcessState, n_two_particle: int = 32, seed: int = 0,
                        probes: ProbeSet | None = None) -> float:
    """Norm of ``U U† - I`` compressed to the probe span."""
    if state.current_bin == 0:
        return 0.0
    probes = probes or _default_probes(state, n_two_particle, seed)
    n = state.current_bin
    # U† is the block product of adjoint factors in reverse bin order
    adjoint = {id(M): _adjoint_factor(M) for M in state.factors}
    rev = [adjoint[id(M)] for M in reversed(state.factors)]
    mirrored = ProbeSet(np.where(probes.bins >= 0, n - 1 - probes.bins, -1), probes.states)
    return _compression_norm(_gram_of_product(rev, mirrored, state.d))


def bgw_relation_defect(state: UnitaryProcessState, n_two_particle: int = 32, seed: int = 0) -> float:
    """Largest violation of ``Σ_n j(x_in) j(x_jn)* = δ_ij`` and ``Σ_n j(x_ni)* j(x_nj) = δ_ij``."""
    return max(unitarity_defect(state, n_two_particle, seed),
               co_unitarity_defect(state, n_two_particle, seed))


# ---------------------------------------------------------------------------
# global sparse route (small grids)


class ItoIncrement:
    """``ΔI`` on bin ``b`` as operator blocks acting on global :class:`FockVector` s."""

    def __init__(self, model: QSDEModel, grid: BinGrid, b: int, drift: str = "consistent"):
        if not 0 <= b < grid.n_bins:
            raise ValueError(f"bin {b} outside 0..{grid.n_bins - 1}")
        self.model, self.grid, self.bin = model, grid, b
        d, h = model.d, model.h
        m = grid.n_bins * h
        sl = slice(b * h, (b + 1) * h)
        sq = math.sqrt(grid.dt)
        K = model.annihilation_vectors()
        self.G = drift_matrix(model, drift).G
        self.cre = np.zeros((d, d, m), complex)
        self.ann = np.zeros((d, d, m), complex)
        self.lam = np.zeros((d, d, m, m), complex)
        for i in range(d):
            for j in range(d):
                self.cre[i, j, sl] = sq * model.L[i, j]
                self.ann[i, j, sl] = sq * K[i, j]
                self.lam[i, j, sl, sl] = model.W_block(i, j) - (np.eye(h) if i == j else 0)

    def apply(self, i: int, j: int, v: FockVector) -> FockVector:
        out = create(self.cre[i, j], v) - annihilate(self.ann[i, j], v)
        if np.any(self.lam[i, j]):
            out = out + preserve(self.lam[i, j], v)
        return out + (self.G[i, j] * self.grid.dt) * v


def ito_increment(model: QSDEModel, grid: BinGrid, b: int, drift: str = "consistent") -> ItoIncrement:
    return ItoIncrement(model, grid, b, drift)


def apply_euler_process(model: QSDEModel, grid: BinGrid, n_steps: int, v: FockVector,
                        drift: str = "consistent") -> List[List[FockVector]]:
    """``[[U_ij v]]`` for the Euler process after ``n_steps`` bins, computed globally."""
    d = model.d
    incs = [ito_increment(model, grid, b, drift) for b in range(n_steps)]
    # w[a][j] = (M_b ... M_{n-1})_{a j} v, built from the last bin backwards
    zero = 0.0 * v
    w = [[v if a == j else zero for j in range(d)] for a in range(d)]
    for inc in reversed(incs):
        new = []
        for a in range(d):
            row = []
            for j in range(d):
                acc = w[a][j]
                for c in range(d):
                    acc = acc + _apply_sum(inc, a, c, w[c][j])
                row.append(acc)
            new.append(row)
        w = new
    return w


def _apply_sum(inc: ItoIncrement, a: int, c: int, v: FockVector) -> FockVector:
    return inc.apply(a, c, v) if len(v) else v


def probe_vector(probes: ProbeSet, p: int, grid: BinGrid, h: int, cutoff: int) -> FockVector:
    """Probe ``p`` as a global occupation basis vector on ``grid.n_bins * h`` modes."""
    local = local_fock_basis(h, 2)
    modes: List[int] = []
    for b, s in zip(probes.bins[p], probes.states[p]):
        if b >= 0:
            modes.extend(int(b) * h + k for k in local[s])
    return FockVector.basis(grid.n_bins * h, cutoff, modes)
