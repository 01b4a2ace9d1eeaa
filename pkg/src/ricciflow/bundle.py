"""Twisted two-torus bundles over the circle: states, curvature, flow terms.

The metric is

    h = G_ij(y) dx^i dx^j + g_yy(y) dy^2,      y in [0, 1),

where G(y) is a positive-definite symmetric 2x2 matrix (the fiber metric)
and g_yy > 0 is the base metric coefficient.  The fields close up around
the circle through an integer twist H with det H = 1:

    G(y + 1) = H^T G(y) H,        g_yy(y + 1) = g_yy(y).

Grid convention: n uniform nodes y_k = k/n.  All y-derivatives are
second-order centered differences evaluated through ghost nodes generated
by the twist, so discrete fields live on the quotient exactly.  The
covariant second derivative of G along the base is

    G_;yy = G_,yy - (1/2) (g_yy,y / g_yy) G_,y.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import spd

_I2 = np.eye(2)


def _tr(M):
    return M[..., 0, 0] + M[..., 1, 1]


def _sym(M):
    return 0.5 * (M + np.swapaxes(M, -1, -2))


class Holonomy:
    """Twist matrix identifying the fiber with itself across one base loop.

    Parameters
    ----------
    matrix : array_like, shape (2, 2)
        Real matrix with determinant 1.  Integer entries describe a genuine
        torus bundle; non-integer matrices are accepted for synthetic
        self-similar data (e.g. diag(e^c, e^-c)).
    """

    def __init__(self, matrix):
        mat = np.array(matrix, dtype=float)
        if mat.shape != (2, 2):
            raise ValueError(f"twist matrix must be 2x2, got shape {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise ValueError("twist matrix has non-finite entries")
        if abs(spd.det2(mat) - 1.0) > 1e-9:
            raise ValueError("twist matrix must have determinant 1")
        mat.setflags(write=False)
        self.matrix = mat

    @classmethod
    def from_entries(cls, a, b, c, d):
        """Build from four integers [[a, b], [c, d]] with ad - bc = 1."""
        entries = np.array([[a, b], [c, d]], dtype=float)
        if np.any(entries != np.round(entries)):
            raise ValueError("holonomy entries must be integers")
        return cls(entries)

    @classmethod
    def identity(cls):
        return cls(_I2)

    @property
    def entries(self):
        return self.matrix

    @property
    def trace(self):
        return float(self.matrix[0, 0] + self.matrix[1, 1])

    @property
    def inverse_matrix(self):
        # adjugate; exact for integer entries since det = 1
        a, b = self.matrix[0]
        c, d = self.matrix[1]
        return np.array([[d, -b], [-c, a]])

    @property
    def holonomy_class(self):
        """One of 'elliptic', 'parabolic', 'hyperbolic'.

        elliptic: finite order (|trace| < 2, or the twist is +-identity);
        parabolic: |trace| = 2 but not +-identity;
        hyperbolic: |trace| > 2 (no eigenvalues on the unit circle).
        """
        tr = abs(self.trace)
        if np.array_equal(self.matrix, _I2) or np.array_equal(self.matrix, -_I2):
            return "elliptic"
        if tr < 2.0 - 1e-12:
            return "elliptic"
        if tr <= 2.0 + 1e-12:
            return "parabolic"
        return "hyperbolic"

    def __repr__(self):
        rows = self.matrix.tolist()
        return f"Holonomy({rows}, class={self.holonomy_class})"

    def __eq__(self, other):
        return isinstance(other, Holonomy) and np.array_equal(
            self.matrix, other.matrix
        )


def first_spd_violation(gyy, G):
    """Index of the first node where (gyy, G) fails positivity, else None.

    A node passes when gyy > 0 and G is finite, symmetric within SPD_TOL
    (relative), with positive leading entry and determinant.
    """
    gyy = np.asarray(gyy, dtype=float)
    G = np.asarray(G, dtype=float)
    scale = np.abs(G).reshape(len(G), 4).max(axis=1)
    scale = np.maximum(scale, np.finfo(float).tiny)
    ok = (
        np.isfinite(gyy)
        & (gyy > 0.0)
        & np.all(np.isfinite(G), axis=(1, 2))
        & (G[:, 0, 0] > 0.0)
        & (spd.det2(G) > 0.0)
        & (np.abs(G[:, 0, 1] - G[:, 1, 0]) <= spd.SPD_TOL * scale)
    )
    bad = np.flatnonzero(~ok)
    return int(bad[0]) if bad.size else None


@dataclass
class BundleState:
    """Flow state of a twisted torus bundle over the circle.

    gyy : (n,) positive base metric coefficients at nodes y_k = k/n
    G : (n, 2, 2) positive-definite symmetric fiber metrics
    holonomy : twist applied when wrapping past y = 1
    time : nonnegative flow time
    """

    gyy: np.ndarray
    G: np.ndarray
    holonomy: Holonomy
    time: float = 0.0

    def __post_init__(self):
        self.gyy = np.asarray(self.gyy, dtype=float)
        self.G = np.asarray(self.G, dtype=float)
        if self.gyy.ndim != 1 or len(self.gyy) < 4:
            raise ValueError("gyy must be a 1-d array with at least 4 nodes")
        if self.G.shape != (len(self.gyy), 2, 2):
            raise ValueError(
                f"G must have shape ({len(self.gyy)}, 2, 2), got {self.G.shape}"
            )
        if not isinstance(self.holonomy, Holonomy):
            raise TypeError("holonomy must be a Holonomy instance")
        if not (np.isfinite(self.time) and self.time >= 0.0):
            raise ValueError("time must be a nonnegative real")
        bad = first_spd_violation(self.gyy, self.G)
        if bad is not None:
            raise ValueError(f"state is not positive-definite at node {bad}")

    @property
    def n(self):
        return len(self.gyy)

    @property
    def spacing(self):
        return 1.0 / self.n

    @property
    def y(self):
        return np.arange(self.n) / self.n


class ExtendedField(NamedTuple):
    """Ghost-extended node arrays; index width + k matches interior node k."""

    gyy: np.ndarray
    G: np.ndarray


def extend_with_holonomy(state, width):
    """Extend the node arrays by ghost nodes on both sides of [0, 1).

    Ghost fiber metrics past y = 1 carry H^T G H, past y = 0 carry
    (H^-1)^T G H^-1; gyy extends periodically.  Requires 1 <= width <= n.
    """
    n = state.n
    if not 1 <= width <= n:
        raise ValueError(f"ghost width must be in [1, {n}], got {width}")
    H = state.holonomy.matrix
    Hi = state.holonomy.inverse_matrix
    right = H.T @ state.G[:width] @ H
    left = Hi.T @ state.G[n - width:] @ Hi
    G_ext = np.concatenate([left, state.G, right])
    gyy_ext = np.concatenate(
        [state.gyy[n - width:], state.gyy, state.gyy[:width]]
    )
    return ExtendedField(gyy_ext, G_ext)


def _derivatives(state):
    """Centered G_,y, covariant G_;yy, and g_yy,y through ghost nodes."""
    h = state.spacing
    ext = extend_with_holonomy(state, 1)
    Gp = ext.G[2:]
    Gm = ext.G[:-2]
    G_y = (Gp - Gm) / (2.0 * h)
    G_yy = (Gp - 2.0 * state.G + Gm) / (h * h)
    gyy_y = (ext.gyy[2:] - ext.gyy[:-2]) / (2.0 * h)
    G_cov = G_yy - (0.5 * gyy_y / state.gyy)[:, None, None] * G_y
    return G_y, G_cov, gyy_y


def _require_valid(state):
    bad = first_spd_violation(state.gyy, state.G)
    if bad is not None:
        raise ValueError(f"state is not positive-definite at node {bad}")


def curvature_bundle(state):
    """Curvature of the bundle metric, per node.

    Returns a dict with keys

    ``R1212``        fiber-fiber curvature component R_1212
    ``B``            mixed components B_ij = R_iyjy as (n, 2, 2)
    ``ric_G``        fiber block of the Ricci tensor, (n, 2, 2)
    ``ric_yy``       base component of the Ricci tensor, (n,)
    ``R``            scalar curvature, (n,)
    ``riem_norm_sq`` full curvature norm |Rm|^2, (n,)

    The component formulas are

        R_1212 = -(1/4) g^yy det(G_,y)
        B      = -(1/2) G_;yy + (1/4) G_,y G^-1 G_,y
        Ric_G  = g^yy [ -(1/2) G_;yy - (1/4) Tr(G^-1 G_,y) G_,y
                        + (1/2) G_,y G^-1 G_,y ]
        Ric_yy = -(1/2) Tr(G^-1 G_;yy) + (1/4) Tr((G^-1 G_,y)^2)
        R      = g^yy [ -Tr(G^-1 G_;yy) + (3/4) Tr((G^-1 G_,y)^2)
                        - (1/4) (Tr(G^-1 G_,y))^2 ]

    and |Rm|^2 contracts the two blocks with the inverse metric:

        |Rm|^2 = (1/4) (g^yy)^2 det(G_,y)^2 / det(G)^2
                 + 4 (g^yy)^2 Tr((G^-1 B)^2).
    """
    _require_valid(state)
    G = state.G
    gi = 1.0 / state.gyy
    G_y, G_cov, _ = _derivatives(state)
    Ginv = spd.inv2(G)
    A1 = Ginv @ G_y
    tr_A1 = _tr(A1)
    tr_A1sq = _tr(A1 @ A1)
    GyGiGy = G_y @ Ginv @ G_y
    tr_cov = _tr(Ginv @ G_cov)

    R1212 = -0.25 * gi * spd.det2(G_y)
    B = _sym(-0.5 * G_cov + 0.25 * GyGiGy)
    ric_G = _sym(
        gi[:, None, None]
        * (-0.5 * G_cov - 0.25 * tr_A1[:, None, None] * G_y + 0.5 * GyGiGy)
    )
    ric_yy = -0.5 * tr_cov + 0.25 * tr_A1sq
    R = gi * (-tr_cov + 0.75 * tr_A1sq - 0.25 * tr_A1 ** 2)
    GiB = Ginv @ B
    riem_norm_sq = gi * gi * (
        0.25 * spd.det2(G_y) ** 2 / spd.det2(G) ** 2 + 4.0 * _tr(GiB @ GiB)
    )
    return {
        "R1212": R1212,
        "B": B,
        "ric_G": ric_G,
        "ric_yy": ric_yy,
        "R": R,
        "riem_norm_sq": riem_norm_sq,
    }


def rhs_bundle(state, mode):
    """Flow right-hand side for (gyy, G).

    mode='unmodified' is minus twice the Ricci tensor:

        dgyy = Tr(G^-1 G_;yy) - (1/2) Tr((G^-1 G_,y)^2)
        dG   = g^yy [ G_;yy + (1/2) Tr(G^-1 G_,y) G_,y - G_,y G^-1 G_,y ]

    mode='modified' adds the Lie derivative along -grad ln sqrt(det G),
    which cancels the base stretching into a pure gauge term:

        dgyy = (1/2) Tr((G^-1 G_,y)^2)
        dG   = g^yy ( G_;yy - G_,y G^-1 G_,y )
    """
    if mode not in ("unmodified", "modified"):
        raise ValueError(f"mode must be 'unmodified' or 'modified', got {mode!r}")
    _require_valid(state)
    gi = 1.0 / state.gyy
    G_y, G_cov, _ = _derivatives(state)
    Ginv = spd.inv2(state.G)
    A1 = Ginv @ G_y
    tr_A1sq = _tr(A1 @ A1)
    GyGiGy = G_y @ Ginv @ G_y
    if mode == "modified":
        dgyy = 0.5 * tr_A1sq
        dG = gi[:, None, None] * (G_cov - GyGiGy)
    else:
        tr_A1 = _tr(A1)
        dgyy = _tr(Ginv @ G_cov) - 0.5 * tr_A1sq
        dG = gi[:, None, None] * (
            G_cov + 0.5 * tr_A1[:, None, None] * G_y - GyGiGy
        )
    return {"dgyy": dgyy, "dG": _sym(dG)}


def energy_density(state):
    """Pointwise fiber stretching energy g^yy Tr((G^-1 G_,y)^2) >= 0.

    Shares the centered G_,y stencil with rhs_bundle, so the identity
    dL/dt = (1/4) integral of (energy density) sqrt(g_yy) dy holds exactly
    at the spatially discrete level along the modified flow.
    """
    G_y, _, _ = _derivatives(state)
    A1 = spd.inv2(state.G) @ G_y
    return np.maximum((1.0 / state.gyy) * _tr(A1 @ A1), 0.0)


def fiber_volume(state):
    """sqrt(det G) per node; well defined on the circle since det H = 1."""
    return np.sqrt(spd.det2(state.G))


def base_length(state):
    """Length of the circle base, integral of sqrt(g_yy) over [0, 1)."""
    return float(np.mean(np.sqrt(state.gyy)))
