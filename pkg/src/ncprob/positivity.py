"""Positivity of functionals through Gram (moment) matrices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .exceptions import NotNormalized, TruncationError
from .functional import MomentFunctional, _involution_perm, conv_exp, convolve
from .ncpoly import Alphabet, Word, word_table, words_up_to

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class MomentMatrix:
    basis: List[Word]
    entries: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.basis)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0) <= tol)


@dataclass(frozen=True)
class PSDReport:
    min_eigenvalue: float
    is_psd: bool
    tolerance: float
    t: float | None = None
    K: int | None = None

    def to_json(self) -> dict:
        return {"t": self.t, "K": self.K, "min_eigenvalue": self.min_eigenvalue,
                "is_psd": self.is_psd, "tolerance": self.tolerance}


def _gram_blocks(phi: MomentFunctional, degrees: Sequence[int]) -> np.ndarray:
    """``M[u, w] = φ(u* w)`` for ``u, w`` ranging over words of the given degrees."""
    A = phi.alphabet
    L = A.n_letters
    rows = []
    for p in degrees:
        star_idx = _involution_perm(A, p)  # index of u* for u in degree-p order
        row = []
        for q in degrees:
            vals = phi.arrays[p + q]
            idx = star_idx[:, None] * L ** q + np.arange(L ** q)[None, :]
            row.append(vals[idx])
        rows.append(np.hstack(row))
    return np.vstack(rows)


def moment_matrix(phi: MomentFunctional, K: int) -> MomentMatrix:
    """Gram matrix ``φ(u* w)`` over all words of degree ``<= K`` (word order)."""
    if 2 * K > phi.max_degree:
        raise TruncationError(f"moment matrix at K={K} needs degree {2 * K}, functional stops at {phi.max_degree}")
    basis = list(words_up_to(phi.alphabet, K))
    return MomentMatrix(basis, _gram_blocks(phi, range(K + 1)))


def psd_report(M: np.ndarray, tol: float = DEFAULT_TOL, **meta) -> PSDReport:
    """Eigenvalue test with threshold ``tol * ||M||_1``.

    A non-hermitian matrix is never reported PSD.
    """
    M = np.asarray(M, dtype=complex)
    if M.size == 0:
        return PSDReport(0.0, True, tol, **meta)
    thresh = tol * float(np.linalg.norm(M, 1))
    herm_defect = float(np.max(np.abs(M - M.conj().T)))
    lam = float(np.linalg.eigvalsh(0.5 * (M + M.conj().T)).min())
    return PSDReport(lam, bool(lam >= -thresh and herm_defect <= thresh), thresh, **meta)


def is_positive(phi: MomentFunctional, K: int, tol: float = DEFAULT_TOL) -> PSDReport:
    return psd_report(moment_matrix(phi, K).entries, tol, K=K)


def counit_kernel_gram(psi: MomentFunctional, K: int) -> MomentMatrix:
    """``ψ(b* c)`` over ``b = w - δ(w) 1`` for words ``1 <= deg w <= K``."""
    if 2 * K > psi.max_degree:
        raise TruncationError(f"need degree {2 * K}, functional stops at {psi.max_degree}")
    A = psi.alphabet
    M = _gram_blocks(psi, range(K + 1))
    if A.is_self_adjoint:
        # δ vanishes on non-empty words: drop the unit row and column
        return MomentMatrix(list(words_up_to(A, K))[1:], M[1:, 1:])
    eps = np.concatenate([_counit_vector(A, n) for n in range(K + 1)])
    # ψ((u - δu)*(w - δw)) = ψ(u*w) - conj(δu) ψ(w) - δw ψ(u*) + conj(δu) δw ψ(1)
    first_row = M[0, :]  # ψ(1* w) = ψ(w)
    first_col = M[:, 0]  # ψ(u* 1) = ψ(u*)
    G = M - np.outer(eps.conj(), first_row) - np.outer(first_col, eps) + np.outer(eps.conj(), eps) * M[0, 0]
    return MomentMatrix(list(words_up_to(A, K))[1:], G[1:, 1:])


def _counit_vector(A: Alphabet, n: int) -> np.ndarray:
    if A.is_self_adjoint:
        return np.array([1.0 + 0j]) if n == 0 else np.zeros(A.n_letters ** n, complex)
    ij = word_table(A, n) // 2
    return np.all(ij // A.d == ij % A.d, axis=1).astype(complex)


def is_conditionally_positive(psi: MomentFunctional, K: int, tol: float = DEFAULT_TOL) -> PSDReport:
    return psd_report(counit_kernel_gram(psi, K).entries, tol, K=K)


def is_hermitian_functional(psi: MomentFunctional, tol: float = 1e-12) -> bool:
    return psi.is_hermitian(tol)


def schoenberg_verify(psi: MomentFunctional, t_list: Sequence[float], K: int,
                      tol: float = DEFAULT_TOL) -> List[PSDReport]:
    """Positivity of ``exp_⋆(tψ)`` at degree ``K`` for each ``t``.

    For conditionally positive hermitian ``ψ`` with ``ψ(1) = 0`` all reports
    should be PSD; a failure for some ``t >= 0`` shows ``ψ`` is not such a
    generator.
    """
    psi = psi.truncate(2 * K) if psi.max_degree > 2 * K else psi
    reports = []
    for t in t_list:
        if t < 0:
            raise ValueError("only t >= 0 is meaningful here")
        phi = conv_exp(t * psi)
        if abs(phi.arrays[0][0] - 1) > 1e-12:
            raise NotNormalized(f"exp_⋆(tψ)(1) = {phi.arrays[0][0]}")
        r = is_positive(phi, K, tol)
        reports.append(PSDReport(r.min_eigenvalue, r.is_psd, r.tolerance, t=float(t), K=K))
    return reports


def convolution_of_positive(phi1: MomentFunctional, phi2: MomentFunctional, K: int,
                            tol: float = DEFAULT_TOL) -> PSDReport:
    return is_positive(convolve(phi1, phi2), K, tol)
