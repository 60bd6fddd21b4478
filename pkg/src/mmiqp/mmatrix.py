"""M-matrix checks and pairwise decompositions of quadratic forms.

Every quadratic ``y'Qy`` with an M-matrix ``Q`` splits into row-sum weighted
squares plus weighted squared differences::

    y'Qy = sum_i Qbar_i y_i^2 + sum_{i<j} (-Q_ij) (y_i - y_j)^2,  Qbar_i = sum_j Q_ij

General symmetric matrices additionally produce ``(y_i + y_j)^2`` terms for the
positive off-diagonal entries.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

PAIR_TOL = 1e-12


class NotMMatrixError(ValueError):
    pass


@dataclass(frozen=True)
class MMatrixCheck:
    ok: bool
    min_eigenvalue: float
    positive_offdiagonals: List[Tuple[int, int, float]]

    def __bool__(self):
        return self.ok


@dataclass(frozen=True)
class PairDecomposition:
    """Diagonal weights plus weighted pair terms.

    ``neg_pairs`` hold ``(i, j, w)`` with ``w = -Q_ij > 0`` contributing
    ``w (y_i - y_j)^2``; ``pos_pairs`` hold ``(i, j, v)`` with ``v = A_ij > 0``
    contributing ``v (y_i + y_j)^2``.
    """

    diag_weights: np.ndarray
    neg_pairs: List[Tuple[int, int, float]]
    pos_pairs: List[Tuple[int, int, float]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.diag_weights.shape[0]

    @property
    def pos_set(self) -> np.ndarray:
        return np.flatnonzero(self.diag_weights > 0)

    @property
    def nonpos_set(self) -> np.ndarray:
        return np.flatnonzero(self.diag_weights <= 0)

    def quad_form(self, y: np.ndarray) -> float:
        y = np.asarray(y, dtype=float)
        val = float(self.diag_weights @ (y * y))
        for i, j, w in self.neg_pairs:
            val += w * (y[i] - y[j]) ** 2
        for i, j, v in self.pos_pairs:
            val += v * (y[i] + y[j]) ** 2
        return val

    def laplacian(self) -> np.ndarray:
        """Matrix of the ``neg_pairs`` part alone (a weighted graph Laplacian)."""
        L = np.zeros((self.n, self.n))
        for i, j, w in self.neg_pairs:
            L[i, i] += w
            L[j, j] += w
            L[i, j] -= w
            L[j, i] -= w
        return L


def _check_symmetric(Q: np.ndarray, name: str = "Q") -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError(f"{name} must be a square matrix")
    if not np.allclose(Q, Q.T, atol=1e-12, rtol=0):
        raise ValueError(f"{name} must be symmetric")
    return Q


def min_eigenvalue(Q: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(Q)[0])


def is_psd(Q: np.ndarray, tol: float = 1e-9) -> bool:
    return min_eigenvalue(Q) >= -tol


def is_m_matrix(Q: np.ndarray, tol: float = 1e-9) -> MMatrixCheck:
    """Check nonpositive off-diagonals and positive semidefiniteness."""
    Q = _check_symmetric(Q)
    n = Q.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    bad = [(int(i), int(j), float(Q[i, j])) for i, j in zip(iu, ju) if Q[i, j] > tol]
    lam = min_eigenvalue(Q)
    return MMatrixCheck(ok=not bad and lam >= -tol, min_eigenvalue=lam,
                        positive_offdiagonals=bad)


def decompose(Q: np.ndarray, tol: float = 1e-9) -> PairDecomposition:
    check = is_m_matrix(Q, tol)
    if not check:
        raise NotMMatrixError(
            f"not an M-matrix (min eigenvalue {check.min_eigenvalue:.3g}, "
            f"positive off-diagonals {check.positive_offdiagonals[:3]})")
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    pairs = [(i, j, float(-Q[i, j])) for i in range(n) for j in range(i + 1, n)
             if -Q[i, j] > PAIR_TOL]
    return PairDecomposition(diag_weights=Q.sum(axis=1), neg_pairs=pairs)


def general_decompose(A: np.ndarray) -> PairDecomposition:
    A = _check_symmetric(A, "A")
    n = A.shape[0]
    off = np.abs(A - np.diag(np.diag(A)))
    neg, pos = [], []
    for i in range(n):
        for j in range(i + 1, n):
            if A[i, j] < -PAIR_TOL:
                neg.append((i, j, float(-A[i, j])))
            elif A[i, j] > PAIR_TOL:
                pos.append((i, j, float(A[i, j])))
    return PairDecomposition(diag_weights=np.diag(A) - off.sum(axis=1),
                             neg_pairs=neg, pos_pairs=pos)


def m_part(A: np.ndarray) -> np.ndarray:
    """Off-diagonals ``min(0, A_ij)`` with zero row sums."""
    A = _check_symmetric(A, "A")
    Q = np.minimum(A, 0.0)
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Q


def extract_m_part(A: np.ndarray, residual_diag=None, psd_tol: float = 1e-8):
    """Split ``A = Q + diag(v) + R`` with ``Q`` the zero-row-sum M-part.

    Returns ``(Q, R, residual_is_psd)``; a non-PSD residual only warns.
    """
    A = _check_symmetric(A, "A")
    n = A.shape[0]
    v = np.zeros(n) if residual_diag is None else np.asarray(residual_diag, dtype=float)
    if v.shape != (n,) or np.any(v < 0):
        raise ValueError("residual_diag must be a nonnegative vector of length n")
    Q = m_part(A)
    R = A - Q - np.diag(v)
    ok = min_eigenvalue(R) >= -psd_tol
    if not ok:
        warnings.warn(f"residual A - Q - diag(v) is not PSD (min eigenvalue {min_eigenvalue(R):.3g})")
    return Q, R, ok


def inverse_positive_check(Q: np.ndarray, tol: float = 1e-9) -> bool:
    Q = _check_symmetric(Q)
    try:
        np.linalg.cholesky(Q)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("matrix is not positive definite") from exc
    return bool(np.all(np.linalg.inv(Q) >= -tol))
