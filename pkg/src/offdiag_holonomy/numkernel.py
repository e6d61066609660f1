"""Dense complex linear-algebra kernels.

Everything here is a pure function of its inputs. Matrices are plain
``numpy.ndarray`` objects of dtype ``complex128``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class KernelError(ArithmeticError):
    """Raised when a kernel cannot produce a finite, well-formed result."""


@dataclass(frozen=True)
class RankTolerance:
    """Cutoff used to decide which singular values count as nonzero.

    A singular value ``s_i`` is kept when
    ``s_i > max(relative_cutoff * s_max, absolute_cutoff)``.

    The absolute floor matters for tiny matrices such as 1x1 gamma
    products, where a purely relative test would call any roundoff
    residue "rank one".
    """

    relative_cutoff: float = 1e-10
    absolute_cutoff: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.relative_cutoff < 1.0:
            raise ValueError(
                f"relative_cutoff must lie in (0, 1), got {self.relative_cutoff}"
            )
        if self.absolute_cutoff < 0.0:
            raise ValueError(
                f"absolute_cutoff must be nonnegative, got {self.absolute_cutoff}"
            )

    def threshold(self, s_max: float) -> float:
        return max(self.relative_cutoff * s_max, self.absolute_cutoff)


DEFAULT_TOLERANCE = RankTolerance()


def as_matrix(M) -> np.ndarray:
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2:
        raise KernelError(f"expected a 2-d matrix, got shape {A.shape}")
    return A


def _require_finite(A: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(A)):
        raise KernelError(f"{what}: matrix of shape {A.shape} has NaN/Inf entries")


def _require_square(A: np.ndarray, what: str) -> None:
    if A.shape[0] != A.shape[1]:
        raise KernelError(f"{what}: expected a square matrix, got shape {A.shape}")


def dagger(A: np.ndarray) -> np.ndarray:
    return A.conj().T


def svd(M):
    """Thin singular value decomposition ``M = U @ diag(s) @ V^dagger``.

    Parameters
    ----------
    M : array_like, shape (m, n)

    Returns
    -------
    U : ndarray, shape (m, k)
    s : ndarray, shape (k,)
        Nonnegative, sorted in descending order.
    V : ndarray, shape (n, k)
        Note that ``V`` (not ``V^dagger``) is returned.
    """
    A = as_matrix(M)
    _require_finite(A, "svd")
    try:
        U, s, Vh = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise KernelError(
            f"SVD did not converge for a {A.shape[0]}x{A.shape[1]} matrix"
        ) from exc
    return U, s, dagger(Vh)


def numerical_rank(M, tol: RankTolerance = DEFAULT_TOLERANCE) -> int:
    """Number of singular values above the cutoff; 0 for the zero matrix."""
    A = as_matrix(M)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol.threshold(s[0])))


def phi_map(Z, tol: RankTolerance = DEFAULT_TOLERANCE) -> np.ndarray:
    """Partial-isometric polar factor ``(sqrt(Z Z^dagger))^+ Z`` of a square matrix.

    Computed in SVD form: with ``Z = U diag(s) V^dagger`` the result is
    ``U diag(1 if s_i above cutoff else 0) V^dagger``. The zero matrix maps
    to the zero matrix.
    """
    A = as_matrix(Z)
    _require_square(A, "phi_map")
    U, s, V = svd(A)
    r = 0 if s.size == 0 or s[0] == 0.0 else int(np.count_nonzero(s > tol.threshold(s[0])))
    return U[:, :r] @ dagger(V[:, :r])


def unitary_completion(Z, tol: RankTolerance = DEFAULT_TOLERANCE) -> np.ndarray:
    """A unitary that agrees with ``phi_map(Z)`` on the support of ``Z``.

    The null-space freedom is fixed by pairing the left and right null
    singular vectors in SVD order.
    """
    A = as_matrix(Z)
    _require_square(A, "unitary_completion")
    _require_finite(A, "unitary_completion")
    U, _, Vh = np.linalg.svd(A)
    return U @ Vh


def polar_unitary(M) -> np.ndarray:
    """Nearest unitary (or column-orthonormal) matrix; used for re-unitarization."""
    A = as_matrix(M)
    _require_finite(A, "polar_unitary")
    U, _, Vh = np.linalg.svd(A, full_matrices=False)
    return U @ Vh


def is_unitary(M, eps: float = 1e-10) -> bool:
    A = as_matrix(M)
    _require_square(A, "is_unitary")
    return unitarity_defect(A) <= eps


def unitarity_defect(M) -> float:
    """``max |M^dagger M - I|`` entrywise."""
    A = as_matrix(M)
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(dagger(A) @ A - np.eye(A.shape[1]))))


def is_partial_isometry(W, eps: float = 1e-12) -> bool:
    A = as_matrix(W)
    if A.size == 0:
        return True
    return float(np.max(np.abs(A @ dagger(A) @ A - A))) <= eps


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B - B @ A
