"""Verification checks and asymptotic fits on small reference runs."""

import math

import numpy as np
import pytest

from ricciflow import engine, functionals as fn, io, presets, verify
from ricciflow.engine import StepController


@pytest.fixture(scope="module")
def elliptic_run():
    state = presets.build_initial("flat-elliptic", n=32)
    return engine.run(state, StepController(t_end=0.3, cfl=0.3),
                      mode="modified", snapshot_dt=0.01, record_steps=True)


@pytest.fixture(scope="module")
def sol_run():
    # n large enough that the h^2 drift of the discrete self-similar
    # solution stays inside the per-step monotonicity slack
    state = presets.build_initial("sol-exact", n=256)
    return engine.run(state, StepController(t_end=1.05, cfl=0.4),
                      mode="modified", snapshot_dt=0.005, record_steps=True)


@pytest.fixture(scope="module")
def torus_run():
    # the dissipation identity carries an h^2 quadrature floor, so the
    # grid cannot be coarser than the preset default
    state = presets.build_initial("flat-torus-warped", n=128)
    return engine.run(state, StepController(t_end=0.6, cfl=0.2),
                      mode="modified", snapshot_dt=0.02, record_steps=True)


@pytest.fixture(scope="module")
def nil_run():
    state = presets.build_initial("nil-parabolic", n=32)
    return engine.run(state, StepController(t_end=0.3, cfl=0.3),
                      mode="modified", snapshot_dt=0.01, record_steps=True)


@pytest.fixture(scope="module")
def sphere_run():
    state = presets.build_initial("sphere-collapse", n=96,
                                  initial={"u_amp": 0.05})
    return engine.run(state, StepController(t_end=0.1, cfl=0.2),
                      mode="modified", snapshot_dt=0.005, record_steps=True)


class TestSelection:
    def test_default_checks_run_once_each(self, elliptic_run):
        report = verify.verify_bounds(elliptic_run)
        assert [r.name for r in report.results] == list(verify.DEFAULT_CHECKS)

    def test_all_checks(self, elliptic_run):
        report = verify.verify_bounds(elliptic_run, checks="all")
        assert [r.name for r in report.results] == list(verify.CHECK_NAMES)

    def test_subset_preserves_canonical_order(self, elliptic_run):
        report = verify.verify_bounds(
            elliptic_run, checks=("detg-extrema-monotone", "stop-reason"))
        assert [r.name for r in report.results] == [
            "stop-reason", "detg-extrema-monotone"]

    def test_unknown_check_rejected(self, elliptic_run):
        with pytest.raises(ValueError, match="unknown check"):
            verify.verify_bounds(elliptic_run, checks=("volume",))

    def test_unknown_tolerance_rejected(self, elliptic_run):
        with pytest.raises(ValueError, match="tolerance override"):
            verify.verify_bounds(elliptic_run, tolerances={"volume": 1.0})

    def test_result_lookup(self, elliptic_run):
        report = verify.verify_bounds(elliptic_run)
        assert report.result("stop-reason").name == "stop-reason"
        with pytest.raises(KeyError):
            report.result("no-such-check")


class TestBundleChecks:
    def test_elliptic_passes_defaults(self, elliptic_run):
        report = verify.verify_bounds(
            elliptic_run,
            expectations={"stop_reason": "reached_t_end",
                          "family": "flat-bundle", "mode": "modified"})
        assert report.passed
        assert report.result("stop-reason").status == "pass"
        assert report.result("detg-extrema-monotone").status == "pass"
        assert report.result("energy-density-bound").status == "pass"
        assert report.result("length-rate-identity").status == "pass"

    def test_sol_passes_defaults(self, sol_run):
        report = verify.verify_bounds(
            sol_run, expectations={"stop_reason": "reached_t_end",
                                   "family": "sol", "mode": "modified"})
        assert report.passed
        # the discrete stencil overshoots the 2/t ceiling by (2ch)^2/3,
        # far inside the 1e-3 relative allowance at this resolution
        margin = report.result("energy-density-bound").margin
        assert 0.0 < margin < 1e-3
        assert report.result("normalized-length-monotone").status == "pass"
        assert report.result("length-rate-identity").status == "pass"

    def test_stop_reason_mismatch_fails(self, sol_run):
        report = verify.verify_bounds(
            sol_run, checks=("stop-reason",),
            expectations={"stop_reason": "curvature_blowup"})
        assert not report.passed
        assert report.result("stop-reason").status == "fail"

    def test_unmodified_mode_skips_length_rate(self, sol_run):
        report = verify.verify_bounds(
            sol_run, checks=("length-rate-identity",),
            expectations={"mode": "unmodified"})
        assert report.result("length-rate-identity").status == "not-applicable"

    def test_length_lower_bound_needs_late_times(self, sol_run):
        report = verify.verify_bounds(sol_run, checks=("length-lower-bound",))
        assert report.result("length-lower-bound").status == "not-applicable"

    def test_conjugate_pair_on_self_similar_run(self, sol_run):
        report = verify.verify_bounds(
            sol_run, checks=("w-plus-monotone", "mass-conservation"))
        assert report.result("w-plus-monotone").status == "pass"
        assert report.result("mass-conservation").status == "pass"
        drift = report.result("mass-conservation").detail
        assert "mass drift" in drift

    def test_entropy_value_matches_closed_form(self, sol_run):
        # on the self-similar solution the entropy is 1/2 - ln(c/sqrt(pi)),
        # independent of time
        fields = fn.conjugate_heat_backward(sol_run)
        times, values = fn.w_plus_series(sol_run, fields)
        expected = 0.5 + 0.5 * math.log(math.pi)
        assert np.max(np.abs(np.array(values) - expected)) < 5e-3

    def test_tolerance_override_changes_outcome(self, sol_run):
        report = verify.verify_bounds(
            sol_run, checks=("energy-density-bound",),
            tolerances={"energy-density-bound": 1e-9})
        assert report.result("energy-density-bound").status == "fail"


class TestWarpedChecks:
    def test_torus_passes_defaults(self, torus_run):
        report = verify.verify_bounds(
            torus_run,
            expectations={"stop_reason": "reached_t_end",
                          "family": "flat-warped", "mode": "modified"})
        assert report.passed
        for name in ("u-extrema-monotone", "gradient-bound",
                     "volume-identity", "energy-dissipation",
                     "loop-length-nondecreasing"):
            assert report.result(name).status == "pass", name

    def test_sphere_passes_defaults(self, sphere_run):
        report = verify.verify_bounds(
            sphere_run, expectations={"stop_reason": "reached_t_end",
                                      "family": "collapse",
                                      "mode": "modified"})
        assert report.passed
        for name in ("gradient-bound", "volume-identity",
                     "volume-upper-bound", "volume-lower-bound"):
            assert report.result(name).status == "pass", name

    def test_collapse_family_skips_trend(self, sphere_run):
        report = verify.verify_bounds(
            sphere_run, checks=("curvature-trend",),
            expectations={"family": "collapse"})
        assert report.result("curvature-trend").status == "not-applicable"

    def test_corrupted_volume_column_caught(self, torus_run, tmp_path):
        run_dir = tmp_path / "out"
        io.save_run(run_dir, torus_run)
        csv_path = run_dir / io.DIAGNOSTICS_FILE
        lines = csv_path.read_text(encoding="ascii").splitlines()
        row = len(lines) // 2
        cells = lines[row].split(",")
        t_bad = float(cells[0])
        cells[2] = repr(-float(cells[2]))
        lines[row] = ",".join(cells)
        csv_path.write_text("\n".join(lines) + "\n", encoding="ascii")
        loaded, _, _ = io.load_run(run_dir)
        report = verify.verify_bounds(loaded, checks=("volume-identity",))
        result = report.result("volume-identity")
        assert result.status == "fail"
        assert result.worst_time == pytest.approx(t_bad, abs=0.02)


class TestHelpers:
    def test_uniform_segments_split(self):
        times = np.concatenate([np.arange(6) * 0.1,
                                0.5 + np.arange(1, 8) * 0.25])
        segments = verify._uniform_segments(times, 5)
        assert segments == [(0, 6), (5, 13)]

    def test_uniform_segments_reject_short(self):
        assert verify._uniform_segments(np.array([0.0, 0.1, 0.3]), 5) == []

    def test_fit_line_perfect(self):
        x = np.arange(10, dtype=float)
        slope, intercept, r_sq = verify._fit_line(x, 3.0 * x + 1.0)
        assert slope == pytest.approx(3.0)
        assert intercept == pytest.approx(1.0)
        assert r_sq == pytest.approx(1.0)


class TestFits:
    def test_exp_flat_decay(self, elliptic_run):
        fit = verify.fit_asymptotics(elliptic_run, "exp-flat")
        assert fit["slope"] < -1.0
        assert fit["r_squared"] > 0.95

    def test_growth_exponent_on_self_similar(self, sol_run):
        fit = verify.fit_asymptotics(sol_run, "growth-exponent")
        assert fit["exponent"] == pytest.approx(0.5, abs=0.01)
        assert "reference" not in fit

    def test_growth_exponent_elliptic_no_reference(self, elliptic_run):
        fit = verify.fit_asymptotics(elliptic_run, "growth-exponent")
        assert "reference" not in fit

    def test_growth_exponent_parabolic_reference(self, nil_run):
        fit = verify.fit_asymptotics(nil_run, "growth-exponent")
        assert fit["reference"] == pytest.approx(1.0 / 6.0)
        assert math.isfinite(fit["exponent"])

    def test_sol_power_structure(self, sol_run):
        fit = verify.fit_asymptotics(sol_run, "sol-power")
        assert fit["target"] == pytest.approx(4.0)
        assert math.isfinite(fit["slope"])

    def test_unknown_kind_rejected(self, sol_run):
        with pytest.raises(ValueError, match="kind must be one of"):
            verify.fit_asymptotics(sol_run, "linear")

    def test_sol_power_needs_bundle(self, sphere_run):
        with pytest.raises(ValueError, match="bundle"):
            verify.fit_asymptotics(sphere_run, "sol-power")

    def test_window_too_narrow_rejected(self, elliptic_run):
        with pytest.raises(ValueError, match="too few"):
            verify.fit_asymptotics(elliptic_run, "exp-flat",
                                   window=(0.29999, 0.3))
