import numpy as np
import pytest
from numpy.testing import assert_allclose

from ricciflow import spd
from ricciflow.bundle import (
    BundleState,
    Holonomy,
    base_length,
    curvature_bundle,
    energy_density,
    extend_with_holonomy,
    fiber_volume,
    first_spd_violation,
    rhs_bundle,
)
from ricciflow.bundle import _derivatives, _tr

H_HYP = Holonomy.from_entries(2, 1, 1, 1)


def sol_state(n=256, c=1.0, t=1.0, a=0.0):
    """Self-similar diagonal solution: gyy = 4c^2(t+a), G = diag(e^{+-2cy})."""
    y = np.arange(n) / n
    gyy = np.full(n, 4.0 * c * c * (t + a))
    G = np.zeros((n, 2, 2))
    G[:, 0, 0] = np.exp(2.0 * c * y)
    G[:, 1, 1] = np.exp(-2.0 * c * y)
    hol = Holonomy(np.diag([np.exp(c), np.exp(-c)]))
    return BundleState(gyy, G, hol, time=t)


def twisted_state(n=128, t=1.0, amps=(0.25, 0.2, 0.15)):
    """Smooth non-trivial state satisfying the twist condition for H_HYP.

    G(y) = S(y)^T Q(y) S(y) with S(y) = H^y (H is symmetric positive) and
    Q a periodic SPD perturbation, so G(y+1) = H^T G(y) H analytically.
    """
    y = np.arange(n) / n
    w, V = np.linalg.eigh(H_HYP.matrix)
    S = np.einsum("ab,kb,cb->kac", V, w[None, :] ** y[:, None], V)
    W = np.zeros((n, 2, 2))
    W[:, 0, 0] = amps[0] * np.sin(2 * np.pi * y + 0.4)
    W[:, 0, 1] = W[:, 1, 0] = amps[1] * np.cos(2 * np.pi * y)
    W[:, 1, 1] = amps[2] * np.sin(4 * np.pi * y)
    Q = spd.sym_exp(W)
    G = np.swapaxes(S, -1, -2) @ Q @ S
    G = 0.5 * (G + np.swapaxes(G, -1, -2))
    gyy = 4.0 * t * (1.0 + 0.2 * np.cos(2 * np.pi * y))
    return BundleState(gyy, G, H_HYP, time=t)


def roll_state(state, m):
    """Relabel the base origin by m nodes, conjugating wrapped fibers."""
    n = state.n
    H = state.holonomy.matrix
    G2 = np.empty_like(state.G)
    for k in range(n):
        j = k + m
        if j < n:
            G2[k] = state.G[j]
        else:
            G2[k] = H.T @ state.G[j - n] @ H
    return BundleState(
        np.roll(state.gyy, -m), G2, state.holonomy, state.time
    )


class TestHolonomy:
    @pytest.mark.parametrize(
        "entries,cls",
        [
            ((1, 0, 0, 1), "elliptic"),
            ((-1, 0, 0, -1), "elliptic"),
            ((0, -1, 1, 0), "elliptic"),
            ((0, -1, 1, 1), "elliptic"),
            ((1, 1, 0, 1), "parabolic"),
            ((-1, 1, 0, -1), "parabolic"),
            ((1, 2, 0, 1), "parabolic"),
            ((2, 1, 1, 1), "hyperbolic"),
            ((3, 1, -1, 0), "hyperbolic"),
        ],
    )
    def test_classification(self, entries, cls):
        assert Holonomy.from_entries(*entries).holonomy_class == cls

    def test_rejects_non_unimodular(self):
        with pytest.raises(ValueError):
            Holonomy.from_entries(1, 0, 0, 2)

    def test_rejects_non_integer_entries(self):
        with pytest.raises(ValueError):
            Holonomy.from_entries(1.5, 0.5, 0.5, 1.5)

    def test_synthetic_float_twist(self):
        hol = Holonomy(np.diag([np.e, 1 / np.e]))
        assert hol.holonomy_class == "hyperbolic"

    def test_inverse_exact(self):
        H = Holonomy.from_entries(2, 1, 1, 1)
        assert np.array_equal(H.matrix @ H.inverse_matrix, np.eye(2))
        assert np.array_equal(H.inverse_matrix @ H.matrix, np.eye(2))

    def test_equality(self):
        assert Holonomy.from_entries(2, 1, 1, 1) == H_HYP
        assert Holonomy.identity() != H_HYP


class TestExtendWithHolonomy:
    def test_identity_twist_is_periodic(self):
        n = 16
        rng = np.random.default_rng(3)
        W = 0.2 * rng.normal(size=(n, 2, 2))
        G = spd.sym_exp(0.5 * (W + np.swapaxes(W, -1, -2)))
        gyy = 1.0 + 0.3 * rng.random(n)
        st = BundleState(gyy, G, Holonomy.identity())
        ext = extend_with_holonomy(st, 2)
        assert np.array_equal(ext.G[2:-2], G)
        assert np.array_equal(ext.G[:2], G[-2:])
        assert np.array_equal(ext.G[-2:], G[:2])
        assert np.array_equal(ext.gyy[:2], gyy[-2:])

    def test_hyperbolic_ghosts_exact(self):
        n = 8
        st = BundleState(np.ones(n), np.tile(np.eye(2), (n, 1, 1)), H_HYP)
        ext = extend_with_holonomy(st, 1)
        assert np.array_equal(ext.G[-1], [[5.0, 3.0], [3.0, 2.0]])
        assert np.array_equal(ext.G[0], [[2.0, -3.0], [-3.0, 5.0]])

    def test_alignment(self):
        st = twisted_state(n=32)
        ext = extend_with_holonomy(st, 3)
        assert np.array_equal(ext.G[3:-3], st.G)
        assert np.array_equal(ext.gyy[3:-3], st.gyy)

    def test_two_unit_shifts_equal_squared_twist(self):
        H = H_HYP.matrix
        Gi = np.array([[3.0, 1.0], [1.0, 2.0]])
        once = H.T @ Gi @ H
        twice = H.T @ once @ H
        H2 = H @ H
        assert np.array_equal(twice, H2.T @ Gi @ H2)

    def test_width_bounds(self):
        st = twisted_state(n=16)
        with pytest.raises(ValueError):
            extend_with_holonomy(st, 0)
        with pytest.raises(ValueError):
            extend_with_holonomy(st, 17)


class TestFlatStates:
    @pytest.mark.parametrize(
        "hol",
        [Holonomy.identity(), Holonomy.from_entries(0, -1, 1, 0)],
    )
    def test_flat_three_torus(self, hol):
        n = 32
        st = BundleState(np.ones(n), np.tile(np.eye(2), (n, 1, 1)), hol)
        curv = curvature_bundle(st)
        for key in ("R1212", "B", "ric_G", "ric_yy", "R", "riem_norm_sq"):
            assert np.all(curv[key] == 0.0)
        for mode in ("unmodified", "modified"):
            rhs = rhs_bundle(st, mode)
            assert np.all(rhs["dgyy"] == 0.0)
            assert np.all(rhs["dG"] == 0.0)
        assert np.all(energy_density(st) == 0.0)
        assert np.all(fiber_volume(st) == 1.0)
        assert base_length(st) == 1.0


class TestSolSlice:
    def test_sectional_curvatures(self):
        st = sol_state(n=256)
        curv = curvature_bundle(st)
        detG = spd.det2(st.G)
        K12 = curv["R1212"] / detG
        K1y = curv["B"][:, 0, 0] / (st.G[:, 0, 0] * st.gyy)
        K2y = curv["B"][:, 1, 1] / (st.G[:, 1, 1] * st.gyy)
        assert_allclose(K12, 0.25, rtol=1e-4)
        assert_allclose(K1y, -0.25, rtol=1e-4)
        assert_allclose(K2y, -0.25, rtol=1e-4)

    def test_scalar_curvature(self):
        st = sol_state(n=256)
        assert_allclose(curvature_bundle(st)["R"], -0.5, rtol=1e-4)

    def test_riem_norm(self):
        st = sol_state(n=256)
        assert_allclose(curvature_bundle(st)["riem_norm_sq"], 0.75, rtol=1e-4)

    def test_riem_norm_later_time(self):
        t = 2.0
        st = sol_state(n=256, t=t)
        assert_allclose(
            curvature_bundle(st)["riem_norm_sq"], 0.75 / t**2, rtol=1e-4
        )

    def test_energy_density_saturates_bound(self):
        for t in (1.0, 2.0, 5.0):
            st = sol_state(n=256, t=t)
            assert_allclose(energy_density(st), 2.0 / t, rtol=1e-4)

    def test_fiber_volume_and_length(self):
        st = sol_state(n=256)
        assert_allclose(fiber_volume(st), 1.0, rtol=1e-12)
        assert base_length(st) == 2.0

    def test_length_grows_like_sqrt_t(self):
        for t in (1.0, 4.0, 9.0):
            st = sol_state(n=64, t=t)
            assert base_length(st) == pytest.approx(2.0 * np.sqrt(t), rel=1e-14)

    def test_scalar_curvature_second_order_convergence(self):
        errs = []
        for n in (64, 128):
            st = sol_state(n=n)
            errs.append(np.max(np.abs(curvature_bundle(st)["R"] + 0.5)))
        ratio = errs[0] / errs[1]
        assert 3.5 < ratio < 4.5


class TestRhsBundle:
    def test_sol_is_modified_fixed_point(self):
        st = sol_state(n=256)
        rhs = rhs_bundle(st, "modified")
        h = st.spacing
        assert_allclose(rhs["dgyy"], 4.0, rtol=1e-4)
        assert np.max(np.abs(rhs["dG"])) < 2.0 * h * h * np.exp(2.0)

    def test_dgyy_independent_of_gyy(self):
        st = sol_state(n=128)
        st2 = BundleState(7.3 * np.ones(st.n), st.G, st.holonomy, st.time)
        r1 = rhs_bundle(st, "modified")["dgyy"]
        r2 = rhs_bundle(st2, "modified")["dgyy"]
        assert np.array_equal(r1, r2)
        assert_allclose(r1, 4.0, rtol=1e-3)

    def test_sol_unmodified_matches_continuum(self):
        st = sol_state(n=256)
        rhs = rhs_bundle(st, "unmodified")
        h = st.spacing
        assert_allclose(rhs["dgyy"], 4.0, rtol=1e-3)
        assert np.max(np.abs(rhs["dG"])) < 4.0 * h * h * np.exp(2.0)

    def test_rejects_unknown_mode(self):
        with pytest.raises(ValueError):
            rhs_bundle(sol_state(n=16), "gauge-fixed")

    def test_rhs_symmetric_output(self):
        st = twisted_state()
        for mode in ("unmodified", "modified"):
            dG = rhs_bundle(st, mode)["dG"]
            assert np.array_equal(dG, np.swapaxes(dG, -1, -2))


class TestCurvatureIdentities:
    def test_scalar_is_trace_of_ricci(self):
        st = twisted_state()
        curv = curvature_bundle(st)
        trace = curv["ric_yy"] / st.gyy + _tr(spd.inv2(st.G) @ curv["ric_G"])
        assert_allclose(curv["R"], trace, rtol=1e-12, atol=1e-12)

    def test_riem_norm_scales_quadratically(self):
        st = twisted_state()
        s = 4.0
        scaled = BundleState(st.gyy / s, st.G, st.holonomy, st.time)
        r1 = curvature_bundle(st)["riem_norm_sq"]
        r2 = curvature_bundle(scaled)["riem_norm_sq"]
        assert_allclose(r2, s * s * r1, rtol=1e-13)

    def test_roll_invariance_of_scalars(self):
        st = twisted_state()
        m = 7
        rolled = roll_state(st, m)
        c1 = curvature_bundle(st)
        c2 = curvature_bundle(rolled)
        for key in ("R", "riem_norm_sq", "ric_yy"):
            assert_allclose(c2[key], np.roll(c1[key], -m), rtol=1e-10,
                            atol=1e-10 * np.max(np.abs(c1[key])))
        assert_allclose(
            energy_density(rolled), np.roll(energy_density(st), -m),
            rtol=1e-10, atol=1e-13,
        )
        assert_allclose(
            fiber_volume(rolled), np.roll(fiber_volume(st), -m), rtol=1e-12
        )
        assert base_length(rolled) == pytest.approx(base_length(st), rel=1e-14)

    def test_energy_density_nonnegative(self):
        assert np.all(energy_density(twisted_state()) >= 0.0)

    def test_length_derivative_identity_is_spatially_exact(self):
        # d/dt of integral sqrt(gyy) dy, computed through the modified-mode
        # dgyy, coincides with (1/4) integral (energy) sqrt(gyy) dy without
        # any spatial truncation error: both sides share the G_,y stencil.
        st = twisted_state()
        rhs = rhs_bundle(st, "modified")
        lhs = np.mean(rhs["dgyy"] / (2.0 * np.sqrt(st.gyy)))
        rhs_int = 0.25 * np.mean(energy_density(st) * np.sqrt(st.gyy))
        assert lhs == pytest.approx(rhs_int, rel=1e-13)

    def test_energy_decay_deficit_is_nonpositive(self):
        # The energy evolution bound rests on two squares: the energy
        # density squared, and Tr of the square of M = G^-1 G_;yy -
        # (G^-1 G_,y)^2, which is similar to a symmetric matrix.
        st = twisted_state()
        G_y, G_cov, _ = _derivatives(st)
        Ginv = spd.inv2(st.G)
        A1 = Ginv @ G_y
        M = Ginv @ G_cov - A1 @ A1
        tr_M_sq = _tr(M @ M)
        assert np.all(tr_M_sq >= -1e-12 * np.max(np.abs(tr_M_sq)))


class TestValidation:
    def test_rejects_non_spd_node(self):
        n = 16
        G = np.tile(np.eye(2), (n, 1, 1))
        G[5] = [[1.0, 2.0], [2.0, 1.0]]
        with pytest.raises(ValueError, match="node 5"):
            BundleState(np.ones(n), G, Holonomy.identity())

    def test_rejects_negative_gyy(self):
        n = 16
        gyy = np.ones(n)
        gyy[3] = -1.0
        with pytest.raises(ValueError, match="node 3"):
            BundleState(gyy, np.tile(np.eye(2), (n, 1, 1)), Holonomy.identity())

    def test_curvature_rejects_mutated_state(self):
        st = twisted_state(n=16)
        st.G[4] = [[-1.0, 0.0], [0.0, -1.0]]
        with pytest.raises(ValueError, match="node 4"):
            curvature_bundle(st)

    def test_first_spd_violation(self):
        st = twisted_state(n=16)
        assert first_spd_violation(st.gyy, st.G) is None
        G = st.G.copy()
        G[9, 0, 1] = G[9, 1, 0] = 10.0
        assert first_spd_violation(st.gyy, G) == 9

    def test_rejects_negative_time(self):
        n = 8
        with pytest.raises(ValueError):
            BundleState(
                np.ones(n), np.tile(np.eye(2), (n, 1, 1)),
                Holonomy.identity(), time=-1.0,
            )


class TestFiberVolume:
    def test_scaling_homogeneity(self):
        st = twisted_state(n=32)
        lam = 2.25
        scaled = BundleState(st.gyy, lam * st.G, st.holonomy, st.time)
        assert_allclose(fiber_volume(scaled), lam * fiber_volume(st), rtol=1e-14)
