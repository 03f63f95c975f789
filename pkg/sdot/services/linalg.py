"""
Symmetric eigen-tools for matrices whose kernel contains the all-ones direction.

"On the orthogonal complement" always means: eigen-decompose, then drop the one
eigenvector most aligned with 1/sqrt(J). Pseudo-inverses and square roots treat
eigenvalues below `rcond * lambda_max` as zero.
"""
import math
from typing import Tuple

import numpy as np
from scipy.linalg import eigh

from sdot.core.exceptions import RankDeficiencyError

RCOND = 1e-10


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def centering_matrix(size: int) -> np.ndarray:
    """P_J = I - 11^T / J."""
    return np.eye(size) - np.full((size, size), 1.0 / size)


def project_matrix(matrix: np.ndarray) -> np.ndarray:
    """P_J M P_J without forming P_J."""
    centered = matrix - matrix.mean(axis=0, keepdims=True)
    return centered - centered.mean(axis=1, keepdims=True)


def eigh_perp(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of P M P with the kernel direction 1/sqrt(J) removed (J - 1 pairs)."""
    size = matrix.shape[0]
    values, vectors = eigh(symmetrize(project_matrix(matrix)))
    kernel = np.argmax(np.abs(vectors.sum(axis=0)))
    keep = np.arange(size) != kernel
    return values[keep], vectors[:, keep]


def lambda_min_perp(matrix: np.ndarray) -> float:
    values, _ = eigh_perp(matrix)
    return float(values.min()) if values.size else math.inf


def lambda_max_perp(matrix: np.ndarray) -> float:
    values, _ = eigh_perp(matrix)
    return float(values.max()) if values.size else -math.inf


def _kept(values: np.ndarray, rcond: float) -> np.ndarray:
    top = values.max() if values.size else 0.0
    if top <= 0:
        return np.zeros(values.shape, dtype=bool)
    return values > rcond * top


def pinv_psd(matrix: np.ndarray, rcond: float = RCOND) -> np.ndarray:
    values, vectors = eigh(symmetrize(matrix))
    keep = _kept(values, rcond)
    basis = vectors[:, keep]
    return (basis / values[keep]) @ basis.T


def sqrt_psd(matrix: np.ndarray) -> np.ndarray:
    values, vectors = eigh(symmetrize(matrix))
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.T


def sqrt_pinv_psd(matrix: np.ndarray, rcond: float = RCOND) -> np.ndarray:
    """Moore-Penrose inverse of the PSD square root."""
    values, vectors = eigh(symmetrize(matrix))
    keep = _kept(values, rcond)
    basis = vectors[:, keep]
    return (basis / np.sqrt(values[keep])) @ basis.T


def psd_rank(matrix: np.ndarray, rcond: float = RCOND) -> int:
    values = eigh(symmetrize(matrix), eigvals_only=True)
    return int(np.count_nonzero(_kept(values, rcond)))


def require_full_rank_perp(matrix: np.ndarray, name: str, rcond: float = RCOND) -> None:
    """Raise unless the kernel of `matrix` is exactly the all-ones line."""
    size = matrix.shape[0]
    rank = psd_rank(matrix, rcond)
    if size > 1 and rank < size - 1:
        raise RankDeficiencyError(
            f"{name} is rank deficient beyond the all-ones kernel",
            {"rank": rank, "expected": size - 1},
        )
