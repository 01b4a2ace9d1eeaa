"""Serialization of states, trajectories, and run directories.

Snapshots use a JSON schema with flat row-major arrays:

  warped torus   kind, topology, n, time, u, metric: {g11, g12, g22}
  warped sphere  kind, topology, n, time, u, metric: {a, f}
  bundle         kind, n, time, gyy, g11, g12, g22, holonomy (row-major 2x2)

A trajectory file stores the mode, the stop reason, every snapshot with
the step size that produced it, and the per-step curvature history.  The
per-sample diagnostics records are recomputed on load from the stored
states, which reproduces them bit for bit.

A run directory contains trajectory.json, diagnostics.csv (one row per
accepted step when the run recorded them, else one row per snapshot),
the resolved config.ini, and profile.json for blowup runs.
"""

import json
import os

import numpy as np

from . import engine, functionals, warped as warped_mod
from .bundle import BundleState, Holonomy
from .warped import SurfaceMetric, WarpedState

TRAJECTORY_FORMAT = "ricciflow-trajectory-1"

TRAJECTORY_FILE = "trajectory.json"
DIAGNOSTICS_FILE = "diagnostics.csv"
CONFIG_FILE = "config.ini"
PROFILE_FILE = "profile.json"
REPORT_FILE = "report.json"


def state_to_dict(state):
    """JSON-ready dict for a warped or bundle state."""
    if isinstance(state, WarpedState):
        metric = state.metric
        if metric.topology == warped_mod.TORUS:
            comps = {
                "g11": metric.g11.ravel().tolist(),
                "g12": metric.g12.ravel().tolist(),
                "g22": metric.g22.ravel().tolist(),
            }
        else:
            comps = {"a": metric.a.tolist(), "f": metric.f.tolist()}
        return {
            "kind": "warped",
            "topology": metric.topology,
            "n": metric.n,
            "time": float(state.time),
            "u": state.u.ravel().tolist(),
            "metric": comps,
        }
    if isinstance(state, BundleState):
        G = state.G
        return {
            "kind": "bundle",
            "n": state.n,
            "time": float(state.time),
            "gyy": state.gyy.tolist(),
            "g11": G[:, 0, 0].tolist(),
            "g12": G[:, 0, 1].tolist(),
            "g22": G[:, 1, 1].tolist(),
            "holonomy": state.holonomy.matrix.ravel().tolist(),
        }
    raise TypeError(f"expected a WarpedState or BundleState, got {type(state)!r}")


def state_from_dict(data):
    """Inverse of state_to_dict; constructor validation applies."""
    kind = data.get("kind")
    n = int(data["n"])
    time = float(data["time"])
    if kind == "warped":
        topology = data["topology"]
        comps = data["metric"]
        if topology == warped_mod.TORUS:
            components = np.stack([
                np.array(comps["g11"], dtype=float).reshape(n, n),
                np.array(comps["g12"], dtype=float).reshape(n, n),
                np.array(comps["g22"], dtype=float).reshape(n, n),
            ])
        else:
            components = np.stack([
                np.array(comps["a"], dtype=float),
                np.array(comps["f"], dtype=float),
            ])
        u = np.array(data["u"], dtype=float)
        u = u.reshape((n, n) if topology == warped_mod.TORUS else (n,))
        return WarpedState(SurfaceMetric(topology, components), u, time)
    if kind == "bundle":
        gyy = np.array(data["gyy"], dtype=float)
        G = np.empty((n, 2, 2))
        G[:, 0, 0] = data["g11"]
        G[:, 0, 1] = G[:, 1, 0] = data["g12"]
        G[:, 1, 1] = data["g22"]
        holonomy = Holonomy(np.array(data["holonomy"], dtype=float).reshape(2, 2))
        return BundleState(gyy, G, holonomy, time)
    raise ValueError(f"unknown state kind {kind!r}")


def trajectory_to_dict(trajectory):
    return {
        "format": TRAJECTORY_FORMAT,
        "mode": trajectory.mode,
        "stop_reason": trajectory.stop_reason,
        "samples": [
            {
                "time": float(s.time),
                "dt": float(s.record.dt),
                "state": state_to_dict(s.state),
            }
            for s in trajectory.samples
        ],
        "step_series": {
            "t": np.asarray(trajectory.step_times, dtype=float).tolist(),
            "max_riem": np.asarray(
                trajectory.step_max_riem, dtype=float
            ).tolist(),
            "max_scalar": np.asarray(
                trajectory.step_max_scalar, dtype=float
            ).tolist(),
        },
    }


def trajectory_from_dict(data):
    if data.get("format") != TRAJECTORY_FORMAT:
        raise ValueError(f"unknown trajectory format {data.get('format')!r}")
    samples = []
    for item in data["samples"]:
        state = state_from_dict(item["state"])
        record = functionals.basic_functionals(state, dt=float(item["dt"]))
        samples.append(engine.TrajectorySample(state.time, state, record))
    series = data["step_series"]
    return engine.Trajectory(
        samples=samples,
        stop_reason=data["stop_reason"],
        mode=data["mode"],
        step_times=np.array(series["t"], dtype=float),
        step_max_riem=np.array(series["max_riem"], dtype=float),
        step_max_scalar=np.array(series["max_scalar"], dtype=float),
    )


def save_trajectory(trajectory, path):
    with open(path, "w", encoding="ascii") as handle:
        json.dump(trajectory_to_dict(trajectory), handle)


def load_trajectory(path):
    with open(path, "r", encoding="ascii") as handle:
        return trajectory_from_dict(json.load(handle))


def save_run(run_dir, trajectory, config_text=None, profile=None):
    """Write trajectory.json, diagnostics.csv, and optional extras.

    The CSV is the per-step table when the run recorded one, otherwise
    the per-snapshot records.  Returns the run directory path.
    """
    os.makedirs(run_dir, exist_ok=True)
    save_trajectory(trajectory, os.path.join(run_dir, TRAJECTORY_FILE))
    table = trajectory.step_table
    if table is None:
        table = functionals.DiagnosticsTable.from_records(trajectory.records)
    table.to_csv(os.path.join(run_dir, DIAGNOSTICS_FILE))
    if config_text is not None:
        with open(os.path.join(run_dir, CONFIG_FILE), "w",
                  encoding="ascii") as handle:
            handle.write(config_text)
    if profile is not None:
        with open(os.path.join(run_dir, PROFILE_FILE), "w",
                  encoding="ascii") as handle:
            json.dump(profile, handle, indent=2)
    return run_dir


def load_run(run_dir):
    """Load a run directory back into (trajectory, config_text, profile).

    The diagnostics CSV is attached to the trajectory as its step table,
    so verification sees exactly what was stored on disk.
    """
    trajectory = load_trajectory(os.path.join(run_dir, TRAJECTORY_FILE))
    csv_path = os.path.join(run_dir, DIAGNOSTICS_FILE)
    if os.path.exists(csv_path):
        trajectory.step_table = functionals.DiagnosticsTable.from_csv(csv_path)
    config_text = None
    config_path = os.path.join(run_dir, CONFIG_FILE)
    if os.path.exists(config_path):
        with open(config_path, "r", encoding="ascii") as handle:
            config_text = handle.read()
    profile = None
    profile_path = os.path.join(run_dir, PROFILE_FILE)
    if os.path.exists(profile_path):
        with open(profile_path, "r", encoding="ascii") as handle:
            profile = json.load(handle)
    return trajectory, config_text, profile


def save_report(report, path):
    with open(path, "w", encoding="ascii") as handle:
        json.dump(report.to_dict(), handle, indent=2)
