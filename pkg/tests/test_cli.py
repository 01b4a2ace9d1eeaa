"""Command-line workflows: run, verify, fit, rescale, and exit codes."""

import json
import shutil
import subprocess

import pytest

from ricciflow import cli, engine, functionals as fn, io, presets, verify
from ricciflow.engine import StepController

BASE_CONFIG = "[run]\nscenario = flat-elliptic\nn = 32\nt_end = 0.3\n"


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def run_dir(work):
    cfg = work / "elliptic.ini"
    cfg.write_text(BASE_CONFIG, encoding="ascii")
    out = work / "out-elliptic"
    assert cli.main(["run", str(cfg), "--output", str(out)]) == cli.EXIT_OK
    return out


class TestRun:
    def test_run_directory_contents(self, run_dir):
        for name in (io.TRAJECTORY_FILE, io.DIAGNOSTICS_FILE, io.CONFIG_FILE):
            assert (run_dir / name).exists(), name

    def test_stored_config_round_trips(self, run_dir):
        trajectory, cfg, profile = io.load_run(run_dir)
        assert cfg is not None
        assert profile is None
        assert trajectory.stop_reason == "reached_t_end"

    def test_bad_config_exits_3(self, work, capsys):
        path = work / "bad.ini"
        path.write_text(BASE_CONFIG + "colour = blue\n", encoding="ascii")
        assert cli.main(["run", str(path)]) == cli.EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_missing_config_exits_3(self, work):
        assert cli.main(["run", str(work / "nope.ini")]) == cli.EXIT_CONFIG

    def test_unexpected_stop_exits_2(self, work, capsys):
        path = work / "mismatch.ini"
        path.write_text(
            "[run]\nscenario = flat-elliptic\nn = 32\nt_end = 0.05\n"
            "expected_stop = curvature_blowup\n", encoding="ascii")
        out = work / "out-mismatch"
        assert cli.main(["run", str(path), "--output", str(out)]) \
            == cli.EXIT_VERIFY
        captured = capsys.readouterr()
        assert "expected stop reason curvature_blowup" in captured.err
        # the run itself is still stored for inspection
        assert (out / io.TRAJECTORY_FILE).exists()

    def test_step_budget_exhaustion_exits_4(self, work, capsys):
        path = work / "tiny-budget.ini"
        path.write_text(BASE_CONFIG + "max_steps = 3\n", encoding="ascii")
        assert cli.main(["run", str(path), "--output",
                         str(work / "out-budget")]) == cli.EXIT_NUMERICAL
        assert "numerical failure" in capsys.readouterr().err


class TestVerify:
    def test_verify_passes(self, run_dir):
        assert cli.main(["verify", str(run_dir)]) == cli.EXIT_OK
        with open(run_dir / io.REPORT_FILE, encoding="ascii") as handle:
            report = json.load(handle)
        assert report["passed"] is True
        names = [c["name"] for c in report["checks"]]
        assert names == list(verify.DEFAULT_CHECKS)

    def test_checks_override_subset(self, run_dir, capsys):
        code = cli.main(["verify", str(run_dir),
                         "--checks", "detg-extrema-monotone,stop-reason"])
        assert code == cli.EXIT_OK
        assert "detg-extrema-monotone" in capsys.readouterr().out
        with open(run_dir / io.REPORT_FILE, encoding="ascii") as handle:
            report = json.load(handle)
        assert [c["name"] for c in report["checks"]] == [
            "stop-reason", "detg-extrema-monotone"]

    def test_checks_all_includes_conjugate_pair(self, run_dir):
        assert cli.main(["verify", str(run_dir), "--checks", "all"]) \
            == cli.EXIT_OK
        with open(run_dir / io.REPORT_FILE, encoding="ascii") as handle:
            report = json.load(handle)
        assert [c["name"] for c in report["checks"]] == list(verify.CHECK_NAMES)

    def test_unknown_check_exits_3(self, run_dir, capsys):
        assert cli.main(["verify", str(run_dir), "--checks", "bogus"]) \
            == cli.EXIT_CONFIG
        assert "verification setup error" in capsys.readouterr().err

    def test_missing_run_dir_exits_3(self, work, capsys):
        assert cli.main(["verify", str(work / "no-such-run")]) \
            == cli.EXIT_CONFIG
        assert "cannot load run directory" in capsys.readouterr().err

    def test_failing_check_exits_2(self, run_dir, work):
        broken = work / "out-broken"
        shutil.copytree(run_dir, broken)
        csv_path = broken / io.DIAGNOSTICS_FILE
        lines = csv_path.read_text(encoding="ascii").splitlines()
        col = fn.DIAGNOSTIC_COLUMNS.index("detG_max")
        cells = lines[len(lines) // 2].split(",")
        cells[col] = repr(-float(cells[col]))
        lines[len(lines) // 2] = ",".join(cells)
        csv_path.write_text("\n".join(lines) + "\n", encoding="ascii")
        assert cli.main(["verify", str(broken)]) == cli.EXIT_VERIFY
        with open(broken / io.REPORT_FILE, encoding="ascii") as handle:
            report = json.load(handle)
        assert report["passed"] is False
        failed = {c["name"] for c in report["checks"]
                  if c["status"] == "fail"}
        assert "detg-extrema-monotone" in failed

    def test_corrupted_header_exits_3(self, run_dir, work, capsys):
        broken = work / "out-bad-header"
        shutil.copytree(run_dir, broken)
        csv_path = broken / io.DIAGNOSTICS_FILE
        lines = csv_path.read_text(encoding="ascii").splitlines()
        lines[0] = lines[0].replace("max_riem", "maxriem")
        csv_path.write_text("\n".join(lines) + "\n", encoding="ascii")
        assert cli.main(["verify", str(broken)]) == cli.EXIT_CONFIG
        assert "cannot load run directory" in capsys.readouterr().err


class TestFit:
    def test_fit_prints_json(self, run_dir, capsys):
        assert cli.main(["fit", str(run_dir), "--kind", "exp-flat"]) \
            == cli.EXIT_OK
        fit = json.loads(capsys.readouterr().out)
        assert fit["kind"] == "exp-flat"
        assert fit["slope"] < 0.0

    def test_fit_without_enough_samples_exits_4(self, work, capsys):
        state = presets.build_initial("flat-elliptic", n=32)
        trajectory = engine.run(state, StepController(t_end=0.02, cfl=0.3),
                                mode="modified", snapshot_dt=0.01)
        micro = work / "out-micro"
        io.save_run(micro, trajectory)
        assert cli.main(["fit", str(micro), "--kind", "growth-exponent"]) \
            == cli.EXIT_NUMERICAL
        assert "fit failed" in capsys.readouterr().err


class TestRescale:
    def test_rescale_scales_curvature(self, run_dir, work, capsys):
        out = work / "out-rescaled"
        assert cli.main(["rescale", str(run_dir), "--scale", "4",
                         "--output", str(out)]) == cli.EXIT_OK
        assert "kind bundle" in capsys.readouterr().out
        original, _, _ = io.load_run(run_dir)
        rescaled, _, _ = io.load_run(out)
        riem_orig = [r.max_riem for r in original.records]
        riem_new = [r.max_riem for r in rescaled.records]
        assert len(riem_new) == len(riem_orig)
        for a, b in zip(riem_orig, riem_new):
            assert b == pytest.approx(4.0 * a, rel=1e-12)
        times_orig = [s.time for s in original.samples]
        times_new = [s.time for s in rescaled.samples]
        for a, b in zip(times_orig, times_new):
            assert b == pytest.approx(a / 4.0, rel=1e-15, abs=1e-300)

    def test_rescale_missing_dir_exits_3(self, work):
        assert cli.main(["rescale", str(work / "gone"), "--scale", "2",
                         "--output", str(work / "never")]) == cli.EXIT_CONFIG


class TestEntryPoint:
    def test_installed_script_runs_verify(self, run_dir):
        exe = shutil.which("ricciflow")
        assert exe is not None
        proc = subprocess.run([exe, "verify", str(run_dir)],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "overall: pass" in proc.stdout
