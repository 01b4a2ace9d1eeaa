"""Session fixtures and the acceptance-criteria summary.

The acceptance tests share full-resolution scenario runs; each is
integrated once per session.  Tests register their measured outcomes
with record_criterion, and the terminal summary prints one status line
per criterion with the measurements indented underneath.
"""

import pytest

from ricciflow import engine, presets

_CRITERIA = {}


def record_criterion(number, title, status, detail, part=None):
    """Register one measured outcome for a numbered acceptance criterion."""
    entry = _CRITERIA.setdefault(number, {"title": title, "parts": {}})
    entry["parts"][part or "result"] = (status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    order = {"FAIL": 0, "XFAIL": 1, "PASS": 2}
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        parts = entry["parts"]
        overall = min((s for s, _ in parts.values()), key=order.get)
        terminalreporter.write_line(
            f"criterion {number:2d} {entry['title']}: {overall}")
        for name, (status, detail) in parts.items():
            terminalreporter.write_line(f"    {name}: {status} - {detail}")


def _run_preset(name, n=None, initial=None, t_end=None, snapshot_dt=None,
                cfl=None):
    preset = presets.get(name)
    t_end = preset.t_end if t_end is None else t_end
    snapshot_dt = preset.snapshot_dt if snapshot_dt is None else snapshot_dt
    controller_kwargs = {"t_end": t_end}
    if cfl is not None:
        controller_kwargs["cfl"] = cfl
    state = presets.build_initial(preset, n=n, initial=initial)
    return engine.run(
        state,
        presets.controller(preset, **controller_kwargs),
        mode="modified",
        snapshot_dt=snapshot_dt,
        snapshot_times=presets.snapshot_times(preset, t_end),
        record_steps=True,
    )


@pytest.fixture(scope="session")
def fx_sphere_blowup():
    """Positive-curvature collapse at preset scale; stops at blowup."""
    return _run_preset("sphere-collapse")


@pytest.fixture(scope="session")
def fx_sphere_warped():
    """Sphere base with a nonconstant warp; stopped well before blowup."""
    return _run_preset("sphere-collapse", n=256, initial={"u_amp": 0.05},
                       t_end=0.4, snapshot_dt=0.01)


@pytest.fixture(scope="session")
def fx_torus():
    return _run_preset("flat-torus-warped")


@pytest.fixture(scope="session")
def fx_solexact():
    return _run_preset("sol-exact")


@pytest.fixture(scope="session")
def fx_solpert():
    return _run_preset("sol-perturbed")


@pytest.fixture(scope="session")
def fx_elliptic():
    return _run_preset("flat-elliptic")


@pytest.fixture(scope="session")
def fx_nil():
    return _run_preset("nil-parabolic")
