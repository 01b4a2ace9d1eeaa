"""Geometry of the positive-definite symmetric 2x2 matrices.

The space P of such matrices carries the scale-invariant inner product

    <d1, d2>_G = (1/2) Tr(G^-1 d1 G^-1 d2)

on symmetric perturbations d1, d2 of a base point G.  Congruences
G -> A^T G A by invertible A act as isometries, and the induced geodesic
distance between A and B depends only on the eigenvalues of A^-1 B.

Everything here is built on a closed-form eigendecomposition of symmetric
2x2 matrices (quadratic formula plus a Givens rotation), so no iterative
eigensolver is involved.  All functions accept stacked inputs: leading
axes broadcast, the last two axes are the matrix.
"""

import numpy as np

# Relative tolerance for symmetry / positive-definiteness checks.
SPD_TOL = 1e-12


def sym_eig2(A):
    """Eigendecomposition of symmetric 2x2 matrices in closed form.

    Parameters
    ----------
    A : array_like, shape (..., 2, 2)
        Symmetric matrices; the off-diagonal entries are averaged.

    Returns
    -------
    w : ndarray, shape (..., 2)
        Eigenvalues in ascending order.
    V : ndarray, shape (..., 2, 2)
        Orthonormal eigenvectors; ``V[..., :, k]`` belongs to ``w[..., k]``,
        so ``A = V @ diag(w) @ V.T`` up to round-off.
    """
    A = np.asarray(A, dtype=float)
    a = A[..., 0, 0]
    d = A[..., 1, 1]
    b = 0.5 * (A[..., 0, 1] + A[..., 1, 0])
    mean = 0.5 * (a + d)
    rad = np.hypot(0.5 * (a - d), b)
    # Rotation angle that diagonalizes [[a, b], [b, d]]; the (cos, sin)
    # direction always carries the larger eigenvalue mean + rad.
    theta = 0.5 * np.arctan2(2.0 * b, a - d)
    c = np.cos(theta)
    s = np.sin(theta)
    w = np.stack([mean - rad, mean + rad], axis=-1)
    lo = np.stack([-s, c], axis=-1)
    hi = np.stack([c, s], axis=-1)
    V = np.stack([lo, hi], axis=-1)
    return w, V


def _sym_apply(func, A):
    """Apply a scalar function to a symmetric matrix via its eigenvalues."""
    w, V = sym_eig2(A)
    B = (V * func(w)[..., None, :]) @ np.swapaxes(V, -1, -2)
    return 0.5 * (B + np.swapaxes(B, -1, -2))


def _matrix_scale(A):
    flat = np.abs(A).reshape(A.shape[:-2] + (4,))
    return np.maximum(flat.max(axis=-1), np.finfo(float).tiny)


def require_spd(A, what="matrix"):
    """Validate that ``A`` is symmetric positive-definite within SPD_TOL.

    Returns ``A`` as a float ndarray.  Raises ValueError otherwise.
    """
    A = np.asarray(A, dtype=float)
    if A.shape[-2:] != (2, 2):
        raise ValueError(f"{what} must have shape (..., 2, 2), got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{what} has non-finite entries")
    scale = _matrix_scale(A)
    asym = np.abs(A[..., 0, 1] - A[..., 1, 0])
    if np.any(asym > SPD_TOL * scale):
        raise ValueError(f"{what} is not symmetric")
    w, _ = sym_eig2(A)
    if np.any(w[..., 0] <= SPD_TOL * scale):
        raise ValueError(f"{what} is not positive-definite")
    return A


def inv2(A):
    """Inverse of 2x2 matrices by the adjugate formula."""
    A = np.asarray(A, dtype=float)
    det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    out = np.empty_like(A)
    out[..., 0, 0] = A[..., 1, 1]
    out[..., 0, 1] = -A[..., 0, 1]
    out[..., 1, 0] = -A[..., 1, 0]
    out[..., 1, 1] = A[..., 0, 0]
    return out / det[..., None, None]


def det2(A):
    """Determinant of 2x2 matrices."""
    A = np.asarray(A, dtype=float)
    return A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]


def sym_log(A):
    """Matrix logarithm of a positive-definite symmetric 2x2 matrix."""
    A = require_spd(A, "sym_log argument")
    return _sym_apply(np.log, A)


def sym_exp(X):
    """Matrix exponential of a symmetric 2x2 matrix."""
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ValueError("sym_exp argument has non-finite entries")
    return _sym_apply(np.exp, X)


def spd_inner(G, dA, dB):
    """Inner product (1/2) Tr(G^-1 dA G^-1 dB) of two symmetric perturbations.

    Parameters
    ----------
    G : array_like, shape (..., 2, 2)
        Positive-definite base point.
    dA, dB : array_like, shape (..., 2, 2)
        Symmetric perturbations (symmetrized internally).

    Returns
    -------
    ndarray, shape (...)
        The inner product; positive when ``dA == dB != 0``.
    """
    G = require_spd(G, "spd_inner base point")
    dA = np.asarray(dA, dtype=float)
    dB = np.asarray(dB, dtype=float)
    dA = 0.5 * (dA + np.swapaxes(dA, -1, -2))
    dB = 0.5 * (dB + np.swapaxes(dB, -1, -2))
    Gi = inv2(G)
    M = Gi @ dA @ Gi @ dB
    return 0.5 * (M[..., 0, 0] + M[..., 1, 1])


def spd_distance(A, B):
    """Geodesic distance sqrt((1/2) sum_i ln(lam_i)^2), lam_i eig of A^-1 B.

    Computed through the congruence-symmetrized pencil
    A^{-1/2} B A^{-1/2}, which is positive-definite, so the closed-form
    symmetric eigendecomposition applies.
    """
    A = require_spd(A, "spd_distance first argument")
    B = require_spd(B, "spd_distance second argument")
    S = _sym_apply(lambda w: 1.0 / np.sqrt(w), A)
    C = S @ B @ S
    C = 0.5 * (C + np.swapaxes(C, -1, -2))
    w, _ = sym_eig2(C)
    # Round-off can push an eigenvalue of the congruence slightly below 0
    # only for pathologically conditioned inputs; clip defensively.
    w = np.maximum(w, np.finfo(float).tiny)
    return np.sqrt(0.5 * np.sum(np.log(w) ** 2, axis=-1))


def phi_map(u, M):
    """Splitting map (u, M) -> e^u M^T M from scale times unimodular shape.

    Parameters
    ----------
    u : array_like
        Log-scale factor(s).
    M : array_like, shape (..., 2, 2)
        Real matrices with determinant 1.

    Returns
    -------
    ndarray, shape (..., 2, 2)
        Positive-definite symmetric matrices with det = e^{2u}.
    """
    u = np.asarray(u, dtype=float)
    M = np.asarray(M, dtype=float)
    det = det2(M)
    if np.any(np.abs(det - 1.0) > 1e-9):
        raise ValueError("phi_map requires det(M) = 1")
    G = np.swapaxes(M, -1, -2) @ M
    G = 0.5 * (G + np.swapaxes(G, -1, -2))
    return np.exp(u)[..., None, None] * G


def _as_matrix(H):
    """Accept a bare 2x2 array or any object exposing a ``matrix`` field."""
    mat = getattr(H, "matrix", H)
    mat = np.asarray(mat, dtype=float)
    if mat.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {mat.shape}")
    return mat


def sol_limit_data(H):
    """Asymptotic data extracted from a hyperbolic twist matrix.

    For a real 2x2 matrix H with det H = 1 and |Tr H| > 2 (eigenvalues
    e^{+-c} up to sign), the translation length of the congruence
    G -> H^T G H on the positive-definite matrices is 2c, and the
    self-similar solutions twisted by H have base metric growing with
    slope 4 c^2.

    Returns
    -------
    dict with keys
        ``X`` : symmetric log of H^T H,
        ``c`` : log of the spectral radius of H, arccosh(|Tr H| / 2),
        ``slope`` : 4 c^2, invariant under conjugation of H,
        ``half_tr_x_sq`` : (1/2) Tr(X^2); equals ``slope`` exactly when
        H is normal (H^T H = H H^T) and exceeds it otherwise.

    Raises
    ------
    ValueError
        If det H != 1 or |Tr H| <= 2 (twist not hyperbolic).
    """
    mat = _as_matrix(H)
    det = det2(mat)
    if abs(det - 1.0) > 1e-9:
        raise ValueError("twist matrix must have determinant 1")
    tr = mat[0, 0] + mat[1, 1]
    if abs(tr) <= 2.0:
        raise ValueError(
            "sol_limit_data requires a hyperbolic twist (|trace| > 2), "
            f"got trace {tr}"
        )
    HtH = np.swapaxes(mat, -1, -2) @ mat
    HtH = 0.5 * (HtH + HtH.T)
    X = sym_log(HtH)
    half_tr_x_sq = 0.5 * float(np.trace(X @ X))
    c = float(np.arccosh(abs(tr) / 2.0))
    return {
        "X": X,
        "c": c,
        "slope": 4.0 * c * c,
        "half_tr_x_sq": half_tr_x_sq,
    }
