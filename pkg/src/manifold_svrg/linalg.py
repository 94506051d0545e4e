"""Dense small-matrix kernels used by the retractions.

All kernels are pure functions on numpy arrays (row-major, float64) and
reject non-finite input.  Matrices here are small: d x r iterates and
r x r (or 2r x 2r) Gram blocks.
"""

import numpy as np
import scipy.linalg

from .errors import NonFiniteInput, NotSPD, RankDeficient

__all__ = [
    "check_finite",
    "qr_positive",
    "polar_project",
    "inv_sqrt_spd",
    "expm",
    "pinv_gram",
    "skew",
    "sym",
]


def check_finite(A, name="matrix"):
    """Raise NonFiniteInput if A holds NaN or Inf."""
    if not np.all(np.isfinite(A)):
        raise NonFiniteInput(f"{name} contains NaN or Inf entries")
    return A


def qr_positive(A):
    """Thin QR factorization with positive diagonal of R.

    Returns (Q, R) with A = Q R, Q orthonormal columns, R upper triangular
    with strictly positive diagonal.  The sign convention makes the
    factorization unique, which the QR retraction needs to be a smooth map.
    """
    A = np.asarray(A, dtype=float)
    check_finite(A, "qr input")
    Q, R = np.linalg.qr(A)
    diag = np.diagonal(R).copy()
    if np.any(np.abs(diag) <= 1e-12 * max(np.linalg.norm(A), 1e-300)):
        raise RankDeficient("input to qr_positive is (numerically) rank deficient")
    signs = np.sign(diag)
    return Q * signs, R * signs[:, None]


def polar_project(A):
    """Nearest matrix with orthonormal columns: U V^T from the compact SVD.

    Equals A (A^T A)^{-1/2} whenever A has full column rank.
    """
    A = np.asarray(A, dtype=float)
    check_finite(A, "polar input")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s[-1] <= 1e-12 * s[0]:
        raise RankDeficient("input to polar_project is (numerically) rank deficient")
    return U @ Vt


def inv_sqrt_spd(S):
    """Inverse square root of a symmetric positive definite matrix."""
    S = np.asarray(S, dtype=float)
    check_finite(S, "inv_sqrt input")
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    if w[0] <= 0.0:
        raise NotSPD(f"smallest eigenvalue {w[0]:g} is not positive")
    return (V / np.sqrt(w)) @ V.T


def expm(A):
    """Matrix exponential (scaling-and-squaring with Pade approximation).

    Only small blocks (size at most 2r) arise, so cost is negligible.
    """
    A = np.asarray(A, dtype=float)
    check_finite(A, "expm input")
    return scipy.linalg.expm(A)


def pinv_gram(G):
    """Moore-Penrose pseudo-inverse of a symmetric PSD Gram matrix.

    Eigenvalues below 1e-12 * lambda_max are treated as zero; the Gram
    matrix of a gradient-reflection step can be near singular when a step
    nearly annihilates a column.
    """
    G = np.asarray(G, dtype=float)
    check_finite(G, "pinv input")
    G = 0.5 * (G + G.T)
    w, V = np.linalg.eigh(G)
    cutoff = 1e-12 * max(w[-1], 0.0)
    inv = np.where(w > cutoff, 1.0 / np.where(w > cutoff, w, 1.0), 0.0)
    return (V * inv) @ V.T


def skew(A):
    """Skew part (A - A^T)/2 of a square matrix."""
    A = np.asarray(A, dtype=float)
    return 0.5 * (A - A.T)


def sym(A):
    """Symmetric part (A + A^T)/2 of a square matrix."""
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + A.T)
