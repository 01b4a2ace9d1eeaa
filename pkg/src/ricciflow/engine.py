"""Adaptive explicit time stepping, trajectories, and rescaling views.

One classical Runge-Kutta step advances either reduced system with

    dt = cfl * s^2 / (1 + max|Rm| * s^2)

where s^2 = h^2 * (smallest metric eigenvalue over the grid) is the
squared physical grid spacing.  The normalizer on the curvature term is
s^2 itself, which makes the two denominators trade off at the parabolic
scale: diffusion limits dt on smooth states, curvature limits it near a
singularity, and the product max|Rm| * s^2 is scale invariant.

Steps that leave the positive cone (or break pole regularity) are
rejected and retried at half the step size; no projection is applied.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import bundle as bundle_mod
from . import functionals
from . import warped as warped_mod
from .bundle import BundleState
from .warped import SurfaceMetric, WarpedState

REACHED_T_END = "reached_t_end"
CURVATURE_BLOWUP = "curvature_blowup"
STEP_UNDERFLOW = "step_underflow"
STOP_REASONS = (REACHED_T_END, CURVATURE_BLOWUP, STEP_UNDERFLOW)

WARPED_2D = "warped-2d"
WARPED_3D = "warped-3d"
BUNDLE = "bundle"
RESCALE_KINDS = (WARPED_2D, WARPED_3D, BUNDLE)


class StepUnderflowError(RuntimeError):
    """The accepted step size would fall below dt_min."""


class CurvatureBlowupError(RuntimeError):
    """max|Rm| is at or beyond the configured stopping threshold."""


@dataclass
class StepController:
    """Step-size and stopping policy for a run."""

    t_end: float
    cfl: float = 0.2
    dt_min: float = 1e-12
    dt_max: float = math.inf
    curvature_stop: float = 1e6

    def __post_init__(self):
        if not (math.isfinite(self.t_end) and self.t_end > 0.0):
            raise ValueError(f"t_end must be positive and finite, got {self.t_end}")
        if not 0.0 < self.cfl < 1.0:
            raise ValueError(f"cfl must lie in (0, 1), got {self.cfl}")
        if not (self.dt_min > 0.0 and self.dt_min <= self.dt_max):
            raise ValueError(
                f"need 0 < dt_min <= dt_max, got {self.dt_min}, {self.dt_max}"
            )
        if not self.curvature_stop > 0.0:
            raise ValueError(
                f"curvature_stop must be positive, got {self.curvature_stop}"
            )


@dataclass
class TrajectorySample:
    time: float
    state: object
    record: functionals.DiagnosticsRecord


@dataclass
class Trajectory:
    """Stored snapshots plus the per-step curvature history of one run.

    step_table, when present, holds one full DiagnosticsRecord row per
    visited state (initial state included), aligned with step_times.
    """

    samples: list
    stop_reason: str
    mode: str
    step_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    step_max_riem: np.ndarray = field(default_factory=lambda: np.empty(0))
    step_max_scalar: np.ndarray = field(default_factory=lambda: np.empty(0))
    step_table: functionals.DiagnosticsTable = None

    def __post_init__(self):
        if self.stop_reason not in STOP_REASONS:
            raise ValueError(f"unknown stop_reason {self.stop_reason!r}")
        times = [s.time for s in self.samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("sample times must be strictly increasing")

    @property
    def times(self):
        return np.array([s.time for s in self.samples])

    @property
    def states(self):
        return [s.state for s in self.samples]

    @property
    def records(self):
        return [s.record for s in self.samples]

    @property
    def final_state(self):
        return self.samples[-1].state


def _pack(state):
    if isinstance(state, WarpedState):
        return np.concatenate(
            [state.metric.components.ravel(), state.u.ravel()]
        )
    if isinstance(state, BundleState):
        return np.concatenate([state.gyy, state.G.reshape(-1)])
    raise TypeError(f"expected a WarpedState or BundleState, got {type(state)!r}")


def _unpack(template, vec, time):
    """Rebuild a state like the template; raises if it left the valid cone."""
    if isinstance(template, WarpedState):
        shape = template.metric.components.shape
        ncomp = template.metric.components.size
        comps = vec[:ncomp].reshape(shape)
        u = vec[ncomp:].reshape(template.u.shape)
        return WarpedState(SurfaceMetric(template.topology, comps), u, time)
    n = template.n
    return BundleState(
        vec[:n], vec[n:].reshape(n, 2, 2), template.holonomy, time
    )


def _copy_state(state):
    return _unpack(state, _pack(state), state.time)


def _rhs_vec(template, vec, time, mode):
    state = _unpack(template, vec, time)
    if isinstance(state, WarpedState):
        r = warped_mod.rhs_warped(state, mode)
        return np.concatenate([r["dg"].ravel(), r["du"].ravel()])
    r = bundle_mod.rhs_bundle(state, mode)
    return np.concatenate([r["dgyy"], r["dG"].reshape(-1)])


def _min_spacing_sq(state):
    """h^2 times the smallest metric eigenvalue anywhere on the grid."""
    if isinstance(state, BundleState):
        return state.spacing ** 2 * float(np.min(state.gyy))
    m = state.metric
    if m.topology == warped_mod.TORUS:
        half_tr = 0.5 * (m.g11 + m.g22)
        gap = np.sqrt((0.5 * (m.g11 - m.g22)) ** 2 + m.g12 ** 2)
        lam_min = float(np.min(half_tr - gap))
    else:
        lam_min = float(np.min(m.a)) ** 2
    return m.spacing ** 2 * lam_min


def _curvature_maxima(state):
    """(max |Rm|, max scalar curvature of the three-dimensional metric)."""
    if isinstance(state, WarpedState):
        curv = warped_mod.curvature_warped(state)
        scalar = curv["R_N"]
    else:
        curv = bundle_mod.curvature_bundle(state)
        scalar = curv["R"]
    max_riem = float(np.sqrt(max(np.max(curv["riem_norm_sq"]), 0.0)))
    return max_riem, float(np.max(scalar))


def _cfl_dt(state, controller, max_riem):
    s_sq = _min_spacing_sq(state)
    return min(controller.cfl / (1.0 / s_sq + max_riem), controller.dt_max)


def _try_rk4(template, vec, time, dt, mode):
    """One RK4 step; None if any stage or the result is invalid."""
    try:
        k1 = _rhs_vec(template, vec, time, mode)
        k2 = _rhs_vec(template, vec + 0.5 * dt * k1, time + 0.5 * dt, mode)
        k3 = _rhs_vec(template, vec + 0.5 * dt * k2, time + 0.5 * dt, mode)
        k4 = _rhs_vec(template, vec + dt * k3, time + dt, mode)
        out = vec + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return _unpack(template, out, time + dt)
    except ValueError:
        return None


def _advance(state, controller, mode, dt):
    """Advance by at most dt, halving on rejection.

    Returns the new state or raises StepUnderflowError.
    """
    if dt < controller.dt_min:
        raise StepUnderflowError(
            f"step size {dt:.3e} fell below dt_min {controller.dt_min:.3e}"
        )
    vec = _pack(state)
    while True:
        new = _try_rk4(state, vec, state.time, dt, mode)
        if new is not None:
            return new
        dt *= 0.5
        if dt < controller.dt_min:
            raise StepUnderflowError(
                f"step size {dt:.3e} fell below dt_min {controller.dt_min:.3e}"
            )


def step(state, controller, mode):
    """One accepted adaptive step; see the module docstring for the policy."""
    max_riem, _ = _curvature_maxima(state)
    if max_riem >= controller.curvature_stop:
        raise CurvatureBlowupError(
            f"max|Rm| = {max_riem:.3e} is at the stopping threshold"
        )
    return _advance(state, controller, mode, _cfl_dt(state, controller, max_riem))


def _snapshot_marks(t0, t_end, snapshot_dt, snapshot_times):
    span = t_end - t0
    if snapshot_dt is None:
        snapshot_dt = span / 64.0
    if not snapshot_dt > 0.0:
        raise ValueError(f"snapshot_dt must be positive, got {snapshot_dt}")
    marks = list(np.arange(t0 + snapshot_dt, t_end, snapshot_dt))
    marks.extend(t for t in snapshot_times if t0 < t < t_end)
    marks.append(t_end)
    marks.sort()
    tol = 1e-9 * max(1.0, abs(t_end))
    merged = []
    for t in marks:
        if not merged or t - merged[-1] > tol:
            merged.append(t)
    return merged, tol


def run(initial, controller, mode, snapshot_dt=None, snapshot_times=(),
        max_steps=2_000_000, record_steps=False):
    """Iterate adaptive steps until t_end, curvature blowup, or underflow.

    Snapshots are stored at the regular cadence snapshot_dt (default: the
    run span over 64) plus any explicit snapshot_times; the step size is
    clipped so every mark is hit exactly.  The initial and final states
    are always stored, and every accepted step appends to the per-step
    curvature history.  With record_steps a full diagnostics row is kept
    for every visited state as Trajectory.step_table.
    """
    t0 = initial.time
    if controller.t_end <= t0:
        raise ValueError(
            f"t_end {controller.t_end} must exceed the initial time {t0}"
        )
    marks, tol = _snapshot_marks(
        t0, controller.t_end, snapshot_dt, snapshot_times
    )

    state = _copy_state(initial)
    samples = [
        TrajectorySample(t0, state, functionals.basic_functionals(state))
    ]
    table = functionals.DiagnosticsTable() if record_steps else None
    hist_t, hist_riem, hist_scal = [], [], []
    next_mark = 0
    stop = None
    last_dt = 0.0

    for _ in range(max_steps):
        max_riem, max_scal = _curvature_maxima(state)
        hist_t.append(state.time)
        hist_riem.append(max_riem)
        hist_scal.append(max_scal)
        if table is not None:
            table.append(functionals.basic_functionals(state, dt=last_dt))

        if max_riem >= controller.curvature_stop:
            stop = CURVATURE_BLOWUP
            break
        if state.time >= controller.t_end - tol:
            stop = REACHED_T_END
            break

        dt = _cfl_dt(state, controller, max_riem)
        dt = min(dt, controller.t_end - state.time)
        if next_mark < len(marks):
            dt = min(dt, marks[next_mark] - state.time)
        try:
            state = _advance(state, controller, mode, dt)
        except StepUnderflowError:
            stop = STEP_UNDERFLOW
            break
        last_dt = state.time - hist_t[-1]

        while next_mark < len(marks) and state.time >= marks[next_mark] - tol:
            next_mark += 1
            samples.append(
                TrajectorySample(
                    state.time,
                    state,
                    functionals.basic_functionals(state, dt=last_dt),
                )
            )
    else:
        raise RuntimeError(f"run exceeded max_steps = {max_steps}")

    if samples[-1].state is not state:
        samples.append(
            TrajectorySample(
                state.time,
                state,
                functionals.basic_functionals(state, dt=last_dt),
            )
        )
    return Trajectory(
        samples=samples,
        stop_reason=stop,
        mode=mode,
        step_times=np.array(hist_t),
        step_max_riem=np.array(hist_riem),
        step_max_scalar=np.array(hist_scal),
        step_table=table,
    )


def _rescale_state(state, s, kind):
    if kind not in RESCALE_KINDS:
        raise ValueError(f"kind must be one of {RESCALE_KINDS}, got {kind!r}")
    if kind == BUNDLE:
        if not isinstance(state, BundleState):
            raise ValueError("bundle rescaling needs a BundleState")
        return BundleState(
            state.gyy / s, state.G.copy(), state.holonomy, state.time / s
        )
    if not isinstance(state, WarpedState):
        raise ValueError("warped rescaling needs a WarpedState")
    # torus components are metric entries; sphere components are the
    # profiles a, f whose squares enter the metric
    div = s if state.topology == warped_mod.TORUS else math.sqrt(s)
    metric = SurfaceMetric(state.topology, state.metric.components / div)
    u = state.u if kind == WARPED_2D else state.u - 0.5 * math.log(s)
    return WarpedState(metric, u.copy(), state.time / s)


def parabolic_rescale(obj, s, kind):
    """Parabolic rescaling view: metric / s, time / s.

    kind selects what happens to the extra field: 'warped-2d' keeps u,
    'warped-3d' shifts it by -ln(s)/2 (the same three-dimensional metric
    up to gauge), 'bundle' keeps the fiber matrix.  |Rm|^2 of the
    rescaled state is exactly s^2 times the original.  Accepts a single
    state or a whole Trajectory; a trajectory's per-sample records and
    step series are rescaled, but a per-step diagnostics table is not
    carried through (it would need the discarded intermediate states).
    """
    if not (math.isfinite(s) and s > 0.0):
        raise ValueError(f"scale must be positive, got {s}")
    if isinstance(obj, Trajectory):
        samples = []
        for sample in obj.samples:
            new_state = _rescale_state(sample.state, s, kind)
            samples.append(
                TrajectorySample(
                    new_state.time,
                    new_state,
                    functionals.basic_functionals(
                        new_state, dt=sample.record.dt / s
                    ),
                )
            )
        return Trajectory(
            samples=samples,
            stop_reason=obj.stop_reason,
            mode=obj.mode,
            step_times=obj.step_times / s,
            step_max_riem=obj.step_max_riem * s,
            step_max_scalar=obj.step_max_scalar * s,
        )
    return _rescale_state(obj, s, kind)


def singularity_profile(trajectory):
    """Blowup-time fit and shape diagnostics of a curvature_blowup run.

    The blowup time T is estimated from max R ~ 1/(T - t): each step
    gives T_i = t_i + 1/maxR_i, and a linear fit of T_i against 1/maxR_i
    over the last decade of curvature growth is extrapolated to
    1/maxR = 0.  Returns

        T_est              extrapolated blowup time
        normalized_max_R   (T_est - t_final) * max scalar curvature
        roundness          sup/inf of the base Gauss curvature at the end
        warp_oscillation   max u - min u at the end
    """
    if trajectory.stop_reason != CURVATURE_BLOWUP:
        raise ValueError(
            "singularity profile requires a curvature_blowup trajectory, "
            f"got {trajectory.stop_reason!r}"
        )
    final = trajectory.final_state
    if not isinstance(final, WarpedState):
        raise ValueError("singularity profile applies to warped runs")

    if len(trajectory.step_times) >= 3:
        times = np.asarray(trajectory.step_times, dtype=float)
        peaks = np.asarray(trajectory.step_max_scalar, dtype=float)
    else:
        times = trajectory.times
        peaks = np.array([r.max_riem for r in trajectory.records])
    keep = peaks > 0.0
    times, peaks = times[keep], peaks[keep]
    if len(peaks) == 0:
        raise ValueError("no positive curvature history to fit")
    below = np.flatnonzero(peaks < 0.1 * peaks[-1])
    start = below[-1] + 1 if below.size else 0
    times, peaks = times[start:], peaks[start:]

    t_hits = times + 1.0 / peaks
    if len(t_hits) >= 3:
        slope_coeffs = np.polyfit(1.0 / peaks, t_hits, 1)
        t_est = float(slope_coeffs[1])
    else:
        t_est = float(t_hits[-1])

    curv = warped_mod.curvature_warped(final)
    normalized = (t_est - final.time) * float(np.max(curv["R_N"]))
    gauss = 0.5 * curv["R_M"]
    k_min, k_max = float(np.min(gauss)), float(np.max(gauss))
    roundness = k_max / k_min if k_min > 0.0 else math.inf
    return {
        "T_est": t_est,
        "normalized_max_R": normalized,
        "roundness": roundness,
        "warp_oscillation": float(np.ptp(final.u)),
    }
