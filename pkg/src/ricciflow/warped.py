"""Warped-product metrics over closed surfaces: states, curvature, flow terms.

The three-dimensional metric is  h = g + e^{2u} dtheta^2  where g is a
metric on a closed surface M and u a scalar potential on M.  With

    A = Hess(u) + du (x) du,

the curvature of h decomposes as

    R^N        = R^M - 2 lap(u) - 2 |grad u|^2,
    |Rm^N|^2   = (R^M)^2 + 2 |A|_g^2,
    Ric^N_ij   = Ric^M_ij - A_ij          (surface block, Ric^M = R^M g / 2),
    Ric^N_tt   = -e^{2u} (lap(u) + |grad u|^2).

Two base topologies are supported.

Torus: g = (g11, g12, g22) on an n x n periodic grid over [0,1)^2, spacing
h = 1/n, node x_i = i/n.  The scalar curvature is computed from the
orthonormal co-frame e1 = alpha dx + beta dy, e2 = gamma dy with
alpha = sqrt(g11), beta = g12/alpha, gamma = sqrt(det g)/alpha: solving
the torsion-free structure equations gives the connection form

    w_x = -(d_x beta - d_y alpha)/gamma,
    w_y = (w_x beta - d_x gamma)/alpha,
    R^M = 2 (d_x w_y - d_y w_x)/sqrt(det g).

Summing the curl over the periodic grid telescopes, so the discrete
integral of R^M dV vanishes to round-off, matching the torus
Gauss-Bonnet value exactly.

Sphere (rotationally symmetric): the surface metric is
a(x)^2 dx^2 + f(x)^2 dphi^2 on x in [0, pi], phi in [0, 2pi), with u = u(x).
Profiles live on the staggered grid x_j = (j + 1/2) h, h = pi/n, so no node
sits on a pole; ghost nodes reflect f oddly and a, u evenly across the
poles, which realizes the smoothness conditions f(pole) = 0,
|f'(pole)|/a(pole) = 1 without any special-cased pole formula.  Frozen
reduction formulas (derived once, gated on the round sphere closed form):

    R^M        = -2 (f'/a)' / (a f)         (flux form through half nodes),
    |grad u|^2 = (u')^2 / a^2,
    Hess_xx    = u'' - (a'/a) u',      Hess_pp = (f f'/a^2) u',
    lap u      = Hess_xx / a^2 + Hess_pp / f^2,
    A_xx       = Hess_xx + (u')^2,     A_pp    = Hess_pp.

Flow right-hand sides (mode='unmodified' is minus twice the Ricci tensor
of h; mode='modified' adds the Lie derivative along -grad u, after which
the surface block in two dimensions collapses to -R^M g + 2 du (x) du):

    unmodified:  dg = -R^M g + 2 Hess(u) + 2 du (x) du,   du = lap u + |grad u|^2
    modified:    dg = -R^M g + 2 du (x) du,               du = lap u

specialized on the sphere to rates of the profiles (da, df):

    unmodified:  da = -R a/2 + A_xx / a,  df = -R f/2 + f' u'/a^2
    modified:    da = -R a/2 + (u')^2/a,  df = -R f/2
"""

from dataclasses import dataclass

import numpy as np

TORUS = "torus"
SPHERE = "sphere-rotsym"

# Relative tolerance on |f'(pole)| / a(pole) = 1.
POLE_TOL = 0.05


def _dx(F, h):
    return (np.roll(F, -1, axis=0) - np.roll(F, 1, axis=0)) / (2.0 * h)


def _dy(F, h):
    return (np.roll(F, -1, axis=1) - np.roll(F, 1, axis=1)) / (2.0 * h)


def _dxx(F, h):
    return (np.roll(F, -1, axis=0) - 2.0 * F + np.roll(F, 1, axis=0)) / (h * h)


def _dyy(F, h):
    return (np.roll(F, -1, axis=1) - 2.0 * F + np.roll(F, 1, axis=1)) / (h * h)


def _dxy(F, h):
    return (
        np.roll(F, (-1, -1), axis=(0, 1))
        + np.roll(F, (1, 1), axis=(0, 1))
        - np.roll(F, (-1, 1), axis=(0, 1))
        - np.roll(F, (1, -1), axis=(0, 1))
    ) / (4.0 * h * h)


def _ghost(arr, parity):
    """Pad a staggered profile with one reflected node at each pole."""
    return np.concatenate(([parity * arr[0]], arr, [parity * arr[-1]]))


def torus_positivity_violation(g11, g12, g22):
    """Index pair of the first non-positive-definite torus node, else None."""
    ok = (
        np.isfinite(g11) & np.isfinite(g12) & np.isfinite(g22)
        & (g11 > 0.0) & (g11 * g22 - g12 * g12 > 0.0)
    )
    bad = np.argwhere(~ok)
    return tuple(int(v) for v in bad[0]) if bad.size else None


def sphere_positivity_violation(a, f):
    """Index of the first non-positive sphere profile node, else None."""
    ok = np.isfinite(a) & np.isfinite(f) & (a > 0.0) & (f > 0.0)
    bad = np.flatnonzero(~ok)
    return int(bad[0]) if bad.size else None


class SurfaceMetric:
    """Metric on the base surface.

    Torus: components g11, g12, g22 on an n x n periodic grid over [0,1)^2.
    Sphere: profiles a, f on the staggered grid (j+1/2) pi/n over [0, pi],
    metric a^2 dx^2 + f^2 dphi^2.
    """

    def __init__(self, topology, components):
        if topology not in (TORUS, SPHERE):
            raise ValueError(f"unknown topology {topology!r}")
        comp = np.asarray(components, dtype=float)
        if topology == TORUS:
            if comp.ndim != 3 or comp.shape[0] != 3 or comp.shape[1] != comp.shape[2]:
                raise ValueError(
                    f"torus metric needs components (3, n, n), got {comp.shape}"
                )
            if comp.shape[1] < 4:
                raise ValueError("torus grid needs at least 4 nodes per side")
            bad = torus_positivity_violation(comp[0], comp[1], comp[2])
            if bad is not None:
                raise ValueError(f"metric is not positive-definite at node {bad}")
        else:
            if comp.ndim != 2 or comp.shape[0] != 2:
                raise ValueError(
                    f"sphere metric needs components (2, n), got {comp.shape}"
                )
            if comp.shape[1] < 8:
                raise ValueError("sphere grid needs at least 8 nodes")
            bad = sphere_positivity_violation(comp[0], comp[1])
            if bad is not None:
                raise ValueError(f"metric profile is not positive at node {bad}")
        self.topology = topology
        self.components = comp

    @classmethod
    def torus(cls, g11, g12, g22):
        return cls(TORUS, np.stack([g11, g12, g22]))

    @classmethod
    def sphere_profile(cls, a, f):
        return cls(SPHERE, np.stack([a, f]))

    @property
    def n(self):
        return self.components.shape[-1]

    @property
    def spacing(self):
        return (1.0 if self.topology == TORUS else np.pi) / self.n

    @property
    def g11(self):
        return self.components[0]

    @property
    def g12(self):
        return self.components[1]

    @property
    def g22(self):
        return self.components[2]

    @property
    def a(self):
        return self.components[0]

    @property
    def f(self):
        return self.components[1]

    @property
    def x(self):
        """Node coordinates along the first (or only) axis."""
        if self.topology == TORUS:
            return np.arange(self.n) / self.n
        return (np.arange(self.n) + 0.5) * self.spacing

    def copy(self):
        return SurfaceMetric(self.topology, self.components.copy())


@dataclass
class WarpedState:
    """Warped-product flow state: surface metric, warp potential, time."""

    metric: SurfaceMetric
    u: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        want = (
            (self.metric.n, self.metric.n)
            if self.metric.topology == TORUS
            else (self.metric.n,)
        )
        if self.u.shape != want:
            raise ValueError(f"u must have shape {want}, got {self.u.shape}")
        if not np.all(np.isfinite(self.u)):
            raise ValueError("u has non-finite entries")
        if not (np.isfinite(self.time) and self.time >= 0.0):
            raise ValueError("time must be a nonnegative real")

    @property
    def topology(self):
        return self.metric.topology


def pole_regularity_deviation(metric):
    """Max relative deviation of |f'|/a from 1 at the two poles.

    The staggered first node gives f'(pole) ~ f_0 / x_0 to second order
    since f is odd across the pole.
    """
    if metric.topology != SPHERE:
        raise ValueError("pole regularity applies to sphere profiles only")
    a, f = metric.a, metric.f
    x0 = 0.5 * metric.spacing
    left = abs(f[0] / (x0 * a[0]) - 1.0)
    right = abs(f[-1] / (x0 * a[-1]) - 1.0)
    return max(left, right)


def _require_valid(state):
    m = state.metric
    if m.topology == TORUS:
        bad = torus_positivity_violation(m.g11, m.g12, m.g22)
        if bad is not None:
            raise ValueError(f"metric is not positive-definite at node {bad}")
    else:
        bad = sphere_positivity_violation(m.a, m.f)
        if bad is not None:
            raise ValueError(f"metric profile is not positive at node {bad}")
        dev = pole_regularity_deviation(m)
        if dev > POLE_TOL:
            raise ValueError(
                f"pole regularity violated: |f'|/a deviates from 1 by {dev:.3g}"
            )
    if not np.all(np.isfinite(state.u)):
        raise ValueError("u has non-finite entries")


def _torus_geometry(metric, u):
    """All pointwise geometric fields of a torus warped state."""
    h = metric.spacing
    g11, g12, g22 = metric.g11, metric.g12, metric.g22
    det = g11 * g22 - g12 * g12
    sq = np.sqrt(det)
    gi11 = g22 / det
    gi12 = -g12 / det
    gi22 = g11 / det

    # scalar curvature through the orthonormal co-frame connection
    alpha = np.sqrt(g11)
    beta = g12 / alpha
    gamma = sq / alpha
    wx = -(_dx(beta, h) - _dy(alpha, h)) / gamma
    wy = (wx * beta - _dx(gamma, h)) / alpha
    curl = _dx(wy, h) - _dy(wx, h)
    R_M = 2.0 * curl / sq

    # Christoffel symbols for the Hessian of u
    d1 = {k: _dx(v, h) for k, v in (("11", g11), ("12", g12), ("22", g22))}
    d2 = {k: _dy(v, h) for k, v in (("11", g11), ("12", g12), ("22", g22))}
    # first kind: c[l][ij] = (g_li,j + g_lj,i - g_ij,l)/2
    c1_11 = 0.5 * d1["11"]
    c1_12 = 0.5 * d2["11"]
    c1_22 = d2["12"] - 0.5 * d1["22"]
    c2_11 = d1["12"] - 0.5 * d2["11"]
    c2_12 = 0.5 * d1["22"]
    c2_22 = 0.5 * d2["22"]
    G1_11 = gi11 * c1_11 + gi12 * c2_11
    G1_12 = gi11 * c1_12 + gi12 * c2_12
    G1_22 = gi11 * c1_22 + gi12 * c2_22
    G2_11 = gi12 * c1_11 + gi22 * c2_11
    G2_12 = gi12 * c1_12 + gi22 * c2_12
    G2_22 = gi12 * c1_22 + gi22 * c2_22

    ux = _dx(u, h)
    uy = _dy(u, h)
    H11 = _dxx(u, h) - G1_11 * ux - G2_11 * uy
    H12 = _dxy(u, h) - G1_12 * ux - G2_12 * uy
    H22 = _dyy(u, h) - G1_22 * ux - G2_22 * uy

    lap_u = gi11 * H11 + 2.0 * gi12 * H12 + gi22 * H22
    grad_u_sq = gi11 * ux * ux + 2.0 * gi12 * ux * uy + gi22 * uy * uy

    A11 = H11 + ux * ux
    A12 = H12 + ux * uy
    A22 = H22 + uy * uy
    # tr((g^-1 A)^2)
    M11 = gi11 * A11 + gi12 * A12
    M12 = gi11 * A12 + gi12 * A22
    M21 = gi12 * A11 + gi22 * A12
    M22 = gi12 * A12 + gi22 * A22
    A_norm_sq = M11 * M11 + 2.0 * M12 * M21 + M22 * M22

    return {
        "det": det,
        "sqrt_det": sq,
        "R_M": R_M,
        "ux": ux,
        "uy": uy,
        "hess": (H11, H12, H22),
        "lap_u": lap_u,
        "grad_u_sq": grad_u_sq,
        "A": (A11, A12, A22),
        "A_norm_sq": A_norm_sq,
    }


def _sphere_geometry(metric, u):
    """All pointwise geometric fields of a rotationally symmetric state."""
    h = metric.spacing
    a, f = metric.a, metric.f
    ae = _ghost(a, +1.0)
    fe = _ghost(f, -1.0)
    ue = _ghost(u, +1.0)

    # flux form of the Gauss curvature: exactly uniform on round profiles
    a_half = 0.5 * (ae[1:] + ae[:-1])
    slope_half = (fe[1:] - fe[:-1]) / (h * a_half)
    K = -(slope_half[1:] - slope_half[:-1]) / (h * a * f)
    R_M = 2.0 * K

    a_x = (ae[2:] - ae[:-2]) / (2.0 * h)
    f_x = (fe[2:] - fe[:-2]) / (2.0 * h)
    u_x = (ue[2:] - ue[:-2]) / (2.0 * h)
    u_xx = (ue[2:] - 2.0 * u + ue[:-2]) / (h * h)

    H_xx = u_xx - (a_x / a) * u_x
    H_pp = (f * f_x / (a * a)) * u_x
    lap_u = H_xx / (a * a) + f_x * u_x / (f * a * a)
    grad_u_sq = (u_x / a) ** 2

    A_xx = H_xx + u_x * u_x
    A_pp = H_pp
    A_norm_sq = (A_xx / (a * a)) ** 2 + (A_pp / (f * f)) ** 2

    return {
        "R_M": R_M,
        "a_x": a_x,
        "f_x": f_x,
        "u_x": u_x,
        "hess": (H_xx, H_pp),
        "lap_u": lap_u,
        "grad_u_sq": grad_u_sq,
        "A": (A_xx, A_pp),
        "A_norm_sq": A_norm_sq,
    }


def curvature_warped(state):
    """Pointwise curvature of the warped-product metric.

    Returns a dict with keys

    ``R_M``          scalar curvature of the base surface
    ``R_N``          scalar curvature of the warped product,
                     R_M - 2 lap(u) - 2 |grad u|^2
    ``riem_norm_sq`` (R_M)^2 + 2 |A|_g^2 with A = Hess(u) + du (x) du
    ``ric_base``     surface block R_M g / 2 - A, stacked like the metric
                     components ((3,n,n) torus / (2,n) sphere diagonal)
    ``ric_theta``    fiber component -e^{2u} (lap(u) + |grad u|^2)
    ``lap_u``, ``grad_u_sq``  the scalar ingredients (shared stencils, so
                     R_N is the exact trace of the Ricci components)
    """
    _require_valid(state)
    m = state.metric
    u = state.u
    if m.topology == TORUS:
        geo = _torus_geometry(m, u)
        A11, A12, A22 = geo["A"]
        ric_base = np.stack(
            [
                0.5 * geo["R_M"] * m.g11 - A11,
                0.5 * geo["R_M"] * m.g12 - A12,
                0.5 * geo["R_M"] * m.g22 - A22,
            ]
        )
    else:
        geo = _sphere_geometry(m, u)
        A_xx, A_pp = geo["A"]
        ric_base = np.stack(
            [
                0.5 * geo["R_M"] * m.a ** 2 - A_xx,
                0.5 * geo["R_M"] * m.f ** 2 - A_pp,
            ]
        )
    lap_u = geo["lap_u"]
    grad_u_sq = geo["grad_u_sq"]
    R_N = geo["R_M"] - 2.0 * lap_u - 2.0 * grad_u_sq
    return {
        "R_M": geo["R_M"],
        "R_N": R_N,
        "riem_norm_sq": geo["R_M"] ** 2 + 2.0 * geo["A_norm_sq"],
        "ric_base": ric_base,
        "ric_theta": -np.exp(2.0 * u) * (lap_u + grad_u_sq),
        "lap_u": lap_u,
        "grad_u_sq": grad_u_sq,
    }


def rhs_warped(state, mode):
    """Flow right-hand side for (metric, u).

    Returns {"dg": rates, "du": rate} where dg is stacked like the metric
    components: (3, n, n) rates of (g11, g12, g22) on the torus, (2, n)
    rates of the profiles (a, f) on the sphere.
    """
    if mode not in ("unmodified", "modified"):
        raise ValueError(f"mode must be 'unmodified' or 'modified', got {mode!r}")
    _require_valid(state)
    m = state.metric
    u = state.u
    if m.topology == TORUS:
        geo = _torus_geometry(m, u)
        R, ux, uy = geo["R_M"], geo["ux"], geo["uy"]
        if mode == "modified":
            dg = np.stack(
                [
                    -R * m.g11 + 2.0 * ux * ux,
                    -R * m.g12 + 2.0 * ux * uy,
                    -R * m.g22 + 2.0 * uy * uy,
                ]
            )
            du = geo["lap_u"]
        else:
            H11, H12, H22 = geo["hess"]
            dg = np.stack(
                [
                    -R * m.g11 + 2.0 * H11 + 2.0 * ux * ux,
                    -R * m.g12 + 2.0 * H12 + 2.0 * ux * uy,
                    -R * m.g22 + 2.0 * H22 + 2.0 * uy * uy,
                ]
            )
            du = geo["lap_u"] + geo["grad_u_sq"]
        return {"dg": dg, "du": du}

    geo = _sphere_geometry(m, u)
    R, a, f = geo["R_M"], m.a, m.f
    u_x, f_x = geo["u_x"], geo["f_x"]
    if mode == "modified":
        da = -0.5 * R * a + u_x * u_x / a
        df = -0.5 * R * f
        du = geo["lap_u"]
    else:
        A_xx, _ = geo["A"]
        da = -0.5 * R * a + A_xx / a
        df = -0.5 * R * f + f_x * u_x / (a * a)
        du = geo["lap_u"] + geo["grad_u_sq"]
    return {"dg": np.stack([da, df]), "du": du}


def scalar_gradient_sq(metric, field):
    """Pointwise |grad field|^2 of a scalar on the base surface.

    Sphere profiles are taken even across the poles, which is the parity
    of any smooth rotationally symmetric function.
    """
    field = np.asarray(field, dtype=float)
    if metric.topology == TORUS:
        if field.shape != (metric.n, metric.n):
            raise ValueError(
                f"field must have shape {(metric.n, metric.n)}, got {field.shape}"
            )
        h = metric.spacing
        fx = _dx(field, h)
        fy = _dy(field, h)
        det = metric.g11 * metric.g22 - metric.g12 ** 2
        return (
            metric.g22 * fx * fx
            - 2.0 * metric.g12 * fx * fy
            + metric.g11 * fy * fy
        ) / det
    if field.shape != (metric.n,):
        raise ValueError(f"field must have shape {(metric.n,)}, got {field.shape}")
    fe = _ghost(field, +1.0)
    f_x = (fe[2:] - fe[:-2]) / (2.0 * metric.spacing)
    return (f_x / metric.a) ** 2


def volume_element(metric):
    """Per-node measure weights; their sum is the surface volume."""
    if metric.topology == TORUS:
        h = metric.spacing
        det = metric.g11 * metric.g22 - metric.g12 ** 2
        return np.sqrt(det) * h * h
    h = metric.spacing
    return 2.0 * np.pi * metric.a * metric.f * h


def volume(metric):
    """Total volume (area) of the base surface."""
    return float(np.sum(volume_element(metric)))


def gauss_bonnet(metric):
    """Integral of the base scalar curvature over the surface.

    Equals 4 pi times the Euler characteristic up to discretization error:
    0 for the torus (exact to round-off here, by telescoping of the frame
    connection curl), 8 pi for the sphere.
    """
    if metric.topology == TORUS:
        zero_u = np.zeros((metric.n, metric.n))
        geo = _torus_geometry(metric, zero_u)
    else:
        geo = _sphere_geometry(metric, np.zeros(metric.n))
    return float(np.sum(geo["R_M"] * volume_element(metric)))


def coordinate_loop_lengths(metric):
    """Lengths of the coordinate loops of a torus metric.

    Returns (row_lengths, col_lengths): row_lengths[j] is the length of the
    x-direction loop at fixed y_j, col_lengths[i] the y-direction loop at
    fixed x_i.  The minimum over both families is a systole proxy; their
    maxima give a diameter proxy.
    """
    if metric.topology != TORUS:
        raise ValueError("coordinate loops apply to torus metrics only")
    h = metric.spacing
    row = h * np.sum(np.sqrt(metric.g11), axis=0)
    col = h * np.sum(np.sqrt(metric.g22), axis=1)
    return row, col


def loop_diameter_ratio(metric):
    """Scale-invariant shape diagnostic (shortest loop)(longest loop)/V.

    The longest coordinate loop is a diameter proxy, so the ratio tracks
    sys * diam / V without asserting any particular constant; on a flat
    torus with diagonal metric it is exactly 1.
    """
    row, col = coordinate_loop_lengths(metric)
    shortest = min(float(np.min(row)), float(np.min(col)))
    longest = max(float(np.max(row)), float(np.max(col)))
    return shortest * longest / float(np.sum(volume_element(metric)))


def _rk4_step(state, mode, dt):
    """One classical Runge-Kutta step, for the gauge probe only."""

    def rate(metric_comp, u_val):
        st = WarpedState(
            SurfaceMetric(state.metric.topology, metric_comp), u_val, state.time
        )
        r = rhs_warped(st, mode)
        return r["dg"], r["du"]

    m0 = state.metric.components
    u0 = state.u
    k1g, k1u = rate(m0, u0)
    k2g, k2u = rate(m0 + 0.5 * dt * k1g, u0 + 0.5 * dt * k1u)
    k3g, k3u = rate(m0 + 0.5 * dt * k2g, u0 + 0.5 * dt * k2u)
    k4g, k4u = rate(m0 + dt * k3g, u0 + dt * k3u)
    m1 = m0 + (dt / 6.0) * (k1g + 2.0 * k2g + 2.0 * k3g + k4g)
    u1 = u0 + (dt / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
    return WarpedState(
        SurfaceMetric(state.metric.topology, m1), u1, state.time + dt
    )


def lie_gauge_equivalence_probe(state, dt):
    """Compare one step of the two flow modes on gauge-invariant scalars.

    The modes differ by the flow of the vector field -grad u, so volume,
    max |Rm^N| and the curvature integral must agree to O(dt^2) + O(h^2).
    Returns a dict of absolute differences.
    """
    outs = {}
    for mode in ("unmodified", "modified"):
        stepped = _rk4_step(state, mode, dt)
        curv = curvature_warped(stepped)
        outs[mode] = (
            volume(stepped.metric),
            float(np.max(np.sqrt(np.maximum(curv["riem_norm_sq"], 0.0)))),
            gauss_bonnet(stepped.metric),
        )
    un, mo = outs["unmodified"], outs["modified"]
    return {
        "delta_volume": abs(un[0] - mo[0]),
        "delta_max_riem": abs(un[1] - mo[1]),
        "delta_gauss_bonnet": abs(un[2] - mo[2]),
    }
