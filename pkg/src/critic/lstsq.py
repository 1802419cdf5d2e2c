from typing import NamedTuple

import numpy as np
from scipy import linalg

from util.logging import logger

# Singular values below RANK_CUTOFF * sigma_max are treated as zero
RANK_CUTOFF = 1e-10


class LeastSquares(NamedTuple):
    x: np.ndarray
    rank: int
    singular_values: np.ndarray
    residual_norm: float


def min_norm_solve(matrix: np.ndarray, rhs: np.ndarray, cutoff: float = RANK_CUTOFF) -> LeastSquares:
    """Minimum-norm solution of ``matrix @ x = rhs`` via SVD (gelsd).

    Rank deficiency is expected and handled by the relative cutoff.
    """
    matrix = np.asarray(matrix, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if matrix.shape[1] == 0:
        return LeastSquares(np.zeros(0), 0, np.zeros(0), float(np.linalg.norm(rhs)))
    x, _, rank, sv = linalg.lstsq(matrix, rhs, cond=cutoff, lapack_driver="gelsd")
    residual = float(np.linalg.norm(matrix @ x - rhs))
    logger.debug(
        f"Min-norm solve: n={matrix.shape[1]}, rank={rank}, residual={residual:.3g}"
    )
    return LeastSquares(x=x, rank=int(rank), singular_values=sv, residual_norm=residual)


def nullspace(matrix: np.ndarray, cutoff: float = RANK_CUTOFF) -> np.ndarray:
    """Orthonormal basis (as columns) of the null space under the same cutoff."""
    return linalg.null_space(np.asarray(matrix, dtype=float), rcond=cutoff)


def weighted_gram(weights: np.ndarray, features: np.ndarray) -> np.ndarray:
    """sum_{s,a} weights(s, a) phi(s, a) phi(s, a)^T for features (S, A, k)."""
    return np.einsum("sa,sak,sal->kl", weights, features, features)


def weighted_moment(weights: np.ndarray, features: np.ndarray, target: np.ndarray) -> np.ndarray:
    """sum_{s,a} weights(s, a) target(s, a) phi(s, a)."""
    scaled = np.where(weights != 0.0, weights * target, 0.0)
    return np.tensordot(scaled, features, axes=([0, 1], [0, 1]))
