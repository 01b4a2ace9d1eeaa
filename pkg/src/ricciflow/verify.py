"""Bound, identity, and monotonicity checks on stored trajectories.

Every check returns one CheckResult.  The margin is a dimensionless
signed distance to the asserted property (normalized by the tolerance
or by the quantity's natural scale): nonnegative passes, negative fails,
and worst_time locates the sample where the margin is attained.  Checks
whose prerequisites are absent (wrong system kind, empty time window,
identically zero data) report not-applicable instead of pass.

Identity checks compare a finite-difference time derivative of a stored
column against an exact spatial quadrature, so their residual tolerance
is meaningful only at the stored sampling density; both per-step tables
and uniformly spaced snapshot grids work.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import bundle as bundle_mod
from . import functionals, spd
from .bundle import BundleState
from .warped import SPHERE, TORUS, WarpedState

CHECK_NAMES = (
    "stop-reason",
    "u-extrema-monotone",
    "gradient-bound",
    "s-lower-bound",
    "scalar-lower-bound",
    "volume-identity",
    "volume-lower-bound",
    "volume-upper-bound",
    "volume-ratio-monotone",
    "energy-dissipation",
    "loop-length-nondecreasing",
    "detg-extrema-monotone",
    "energy-density-bound",
    "length-rate-identity",
    "normalized-length-monotone",
    "length-lower-bound",
    "curvature-trend",
    "w-plus-monotone",
    "mass-conservation",
)

# The conjugate-heat pair integrates a backward PDE over the whole run
# and is opt-in; request it by name or with checks="all".
EXPENSIVE_CHECKS = ("w-plus-monotone", "mass-conservation")
DEFAULT_CHECKS = tuple(n for n in CHECK_NAMES if n not in EXPENSIVE_CHECKS)

DEFAULT_TOLERANCES = {
    "u-extrema-monotone": 1e-10,      # slack, relative to the u scale
    "gradient-bound": 1e-3,           # relative margin on the decay bound
    "s-lower-bound": 1e-3,            # relative margin on -1/t
    "scalar-lower-bound": 1e-3,
    "volume-identity": 1e-4,          # residual / (|4 pi chi| + E)
    "volume-lower-bound": 1e-9,       # slack, relative to V(0)
    "volume-upper-bound": 1e-3,
    "volume-ratio-monotone": 1e-9,    # slack, relative to V/t at entry
    "energy-dissipation": 1e-3,       # residual / dissipation
    "loop-length-nondecreasing": 1e-6,
    "detg-extrema-monotone": 1e-8,
    "energy-density-bound": 1e-3,     # relative margin on 2/t
    "length-rate-identity": 1e-4,     # residual / |dL/dt|
    "normalized-length-monotone": 1e-8,
    "length-lower-bound": 0.9,        # required fraction of the fitted c
    "curvature-trend": 0.1,           # allowed log-log slope band
    "w-plus-monotone": 1e-6,          # largest allowed per-step dip
    "mass-conservation": 1e-6,        # largest allowed mass drift
}

# Time windows where the t-dependent bounds are asserted.
WINDOW_SCALAR = 0.1
WINDOW_RATIO = 1.0
WINDOW_LENGTH = 10.0

_EPS = np.finfo(float).eps


@dataclass
class CheckResult:
    name: str
    status: str                      # "pass" | "fail" | "not-applicable"
    margin: Optional[float]
    worst_time: Optional[float]
    detail: str

    def to_dict(self):
        return {
            "name": self.name,
            "status": self.status,
            "margin": self.margin,
            "worst_time": self.worst_time,
            "detail": self.detail,
        }


@dataclass
class VerificationReport:
    results: list
    stop_reason: str
    expected_stop: Optional[str] = None

    @property
    def passed(self):
        return all(r.status != "fail" for r in self.results)

    def result(self, name):
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(f"no check named {name!r} in this report")

    def to_dict(self):
        return {
            "stop_reason": self.stop_reason,
            "expected_stop": self.expected_stop,
            "passed": self.passed,
            "checks": [r.to_dict() for r in self.results],
        }

    def format_text(self):
        lines = [f"stop reason: {self.stop_reason}"
                 + (f" (expected {self.expected_stop})"
                    if self.expected_stop else "")]
        if not self.results:
            return lines[0] + "\nno checks were run"
        width = max(len(r.name) for r in self.results)
        for r in self.results:
            margin = "-" if r.margin is None else f"{r.margin:+.3e}"
            at = "-" if r.worst_time is None else f"{r.worst_time:.6g}"
            lines.append(
                f"{r.name:<{width}}  {r.status:<14}  margin {margin:>10}"
                f"  at t={at:<10}  {r.detail}"
            )
        lines.append("overall: " + ("pass" if self.passed else "FAIL"))
        return "\n".join(lines)


def _passfail(name, margin, worst_time, detail):
    status = "pass" if margin >= 0.0 else "fail"
    return CheckResult(name, status, float(margin), worst_time, detail)


def _na(name, reason):
    return CheckResult(name, "not-applicable", None, None, reason)


class _Series:
    """Column access over the densest stored diagnostics, plus the states."""

    def __init__(self, trajectory):
        self.trajectory = trajectory
        self.states = trajectory.states
        self.sample_times = np.asarray(trajectory.times, dtype=float)
        first = self.states[0]
        if isinstance(first, WarpedState):
            self.kind = "warped"
            self.topology = first.topology
            self.chi = 2.0 if self.topology == SPHERE else 0.0
            self.holonomy = None
        elif isinstance(first, BundleState):
            self.kind = "bundle"
            self.topology = None
            self.chi = None
            self.holonomy = first.holonomy
        else:
            raise TypeError(f"unknown state type {type(first)!r}")
        table = trajectory.step_table
        if table is not None and len(table) >= 2:
            self._table = table
        else:
            self._table = functionals.DiagnosticsTable.from_records(
                trajectory.records
            )

    def col(self, name):
        return self._table.column(name)

    def sample_col(self, name):
        vals = [getattr(r, name) for r in self.trajectory.records]
        return np.array(
            [math.nan if v is None else v for v in vals], dtype=float
        )


def _monotone(name, times, values, direction, slack, scale, detail_prefix):
    """Margin of a monotonicity assertion with absolute slack."""
    diffs = np.diff(values)
    viol = diffs if direction == "nonincreasing" else -diffs
    worst = int(np.argmax(viol))
    margin = float((slack - viol[worst]) / max(scale, 1e-300))
    return _passfail(
        name, margin, float(times[worst + 1]),
        f"{detail_prefix}; worst interval change {diffs[worst]:+.3e} "
        f"against slack {slack:.1e}",
    )


def _check_stop_reason(series, tol, expectations):
    expected = (expectations or {}).get("stop_reason")
    if expected is None:
        return _na("stop-reason", "no expected stop reason provided")
    actual = series.trajectory.stop_reason
    status = "pass" if actual == expected else "fail"
    return CheckResult(
        "stop-reason", status, None, None,
        f"stopped with {actual} (expected {expected})",
    )


def _check_u_extrema(series, tol, expectations):
    if series.kind != "warped":
        return _na("u-extrema-monotone", "warp extrema exist on surface runs")
    t = series.col("t")
    u_max = series.col("u_max")
    u_min = series.col("u_min")
    scale = max(1.0, float(np.max(np.abs(u_max))), float(np.max(np.abs(u_min))))
    slack = tol * scale
    upper = _monotone("u-extrema-monotone", t, u_max, "nonincreasing",
                      slack, scale, "max u must not increase")
    lower = _monotone("u-extrema-monotone", t, u_min, "nondecreasing",
                      slack, scale, "min u must not decrease")
    return upper if upper.margin <= lower.margin else lower


def _check_gradient_bound(series, tol, expectations):
    if series.kind != "warped":
        return _na("gradient-bound", "|grad u|^2 exists on surface runs")
    t = series.col("t")
    vals = series.col("max_gradu_sq")
    c = float(vals[0])
    if c <= 1e-30:
        return _na("gradient-bound", "initial |grad u|^2 is zero")
    bound = c / (2.0 * c * (t - t[0]) + 1.0)
    margins = (1.0 + tol) - vals / bound
    worst = int(np.argmin(margins))
    return _passfail(
        "gradient-bound", float(margins[worst]), float(t[worst]),
        f"max |grad u|^2 <= c/(2c t + 1) with c = {c:.3e}",
    )


def _scalar_floor(name, series, tol, detail):
    t = series.col("t")
    vals = series.col("min_S")
    mask = t >= WINDOW_SCALAR
    if not np.any(mask):
        return _na(name, f"no samples at t >= {WINDOW_SCALAR}")
    t, vals = t[mask], vals[mask]
    # margin of  min_S >= -(1+tol)/t,  normalized by the 1/t scale
    margins = vals * t + (1.0 + tol)
    worst = int(np.argmin(margins))
    return _passfail(name, float(margins[worst]), float(t[worst]), detail)


def _check_s_lower(series, tol, expectations):
    if series.kind != "warped":
        return _na("s-lower-bound", "S is defined on surface runs")
    return _scalar_floor(
        "s-lower-bound", series, tol,
        "min S >= -1/t after the initial layer",
    )


def _check_scalar_lower(series, tol, expectations):
    if series.kind != "warped":
        return _na("scalar-lower-bound", "R is defined on surface runs")
    return _scalar_floor(
        "scalar-lower-bound", series, tol,
        "min R >= -1/t, checked through min S <= min R",
    )


def _check_volume_identity(series, tol, expectations):
    if series.kind != "warped":
        return _na("volume-identity", "surface volume identity")
    t = series.col("t")
    V = series.col("V")
    E = series.col("E")
    dt = np.diff(t)
    rate = np.diff(V) / dt
    expected = -4.0 * math.pi * series.chi + 0.5 * (E[1:] + E[:-1])
    resid = np.abs(rate - expected)
    allowed = (tol * (abs(4.0 * math.pi * series.chi)
                      + 0.5 * (E[1:] + E[:-1]))
               + 8.0 * _EPS * V[1:] / dt)
    margins = (allowed - resid) / allowed
    worst = int(np.argmin(margins))
    return _passfail(
        "volume-identity", float(margins[worst]), float(t[worst + 1]),
        f"dV/dt = -4 pi chi + E per interval (chi = {series.chi:g}); "
        f"worst residual {resid[worst]:.3e}",
    )


def _check_volume_lower(series, tol, expectations):
    if series.kind != "warped":
        return _na("volume-lower-bound", "surface volume bound")
    t = series.col("t")
    V = series.col("V")
    lower = V[0] - 4.0 * math.pi * series.chi * (t - t[0])
    margins = (V - lower) / V[0] + tol
    worst = int(np.argmin(margins))
    return _passfail(
        "volume-lower-bound", float(margins[worst]), float(t[worst]),
        f"V(t) >= V(0) - 4 pi chi t (chi = {series.chi:g})",
    )


def _check_volume_upper(series, tol, expectations):
    if series.kind != "warped":
        return _na("volume-upper-bound", "surface volume bound")
    t = series.col("t")
    V = series.col("V")
    c = float(series.col("max_gradu_sq")[0])
    four_pi_chi = 4.0 * math.pi * series.chi
    shifted = t - t[0]
    if c <= 1e-30:
        upper = V[0] - four_pi_chi * shifted
        detail = "V(t) <= V(0) - 4 pi chi t (constant-u limit)"
    else:
        s = 2.0 * c * shifted + 1.0
        upper = -(four_pi_chi / c) * s + np.sqrt(s) * (four_pi_chi / c + V[0])
        detail = f"sublinear volume growth bound with c = {c:.3e}"
    # absolute slack at the initial-volume scale: on a shrinking sphere
    # both sides approach zero, so a relative margin is meaningless there
    margins = (upper + tol * V[0] - V) / V[0]
    worst = int(np.argmin(margins))
    return _passfail(
        "volume-upper-bound", float(margins[worst]), float(t[worst]), detail
    )


def _check_volume_ratio(series, tol, expectations):
    if series.kind != "warped":
        return _na("volume-ratio-monotone", "surface volume ratio")
    t = series.col("t")
    V = series.col("V")
    mask = t >= WINDOW_RATIO
    if np.count_nonzero(mask) < 2:
        return _na("volume-ratio-monotone", f"fewer than two samples at t >= {WINDOW_RATIO}")
    t, ratio = t[mask], V[mask] / t[mask]
    scale = float(ratio[0])
    return _monotone(
        "volume-ratio-monotone", t, ratio, "nonincreasing",
        tol * scale, scale, "V/t must not increase at late times",
    )


def _uniform_segments(times, min_len):
    """Index ranges [a, b) of uniformly spaced runs of the sample grid."""
    diffs = np.diff(times)
    segments = []
    a = 0
    for i in range(1, len(diffs)):
        if abs(diffs[i] - diffs[a]) > 1e-6 * diffs[a]:
            if i - a + 1 >= min_len:
                segments.append((a, i + 1))
            a = i
    if len(diffs) - a + 1 >= min_len:
        segments.append((a, len(times)))
    return segments


def _fd4(values, i, h):
    """Fourth-order centered first derivative on a uniform grid."""
    return (-values[i + 2] + 8.0 * values[i + 1]
            - 8.0 * values[i - 1] + values[i - 2]) / (12.0 * h)


def _rate_identity(name, series, tol, rate_values, source_name, detail):
    """Compare a 4th-order FD of a sampled column against a quadrature.

    rate_values[i] is the exact spatial rate at sample i; source_name is
    the diagnostics column being differentiated in time.
    """
    times = series.sample_times
    values = series.sample_col(source_name)
    segments = _uniform_segments(times, 5)
    if not segments:
        return _na(name, "needs at least five uniformly spaced snapshots")
    worst_margin, worst_time, worst_resid = math.inf, None, 0.0
    for a, b in segments:
        h = times[a + 1] - times[a]
        for i in range(a + 2, b - 2):
            fd = _fd4(values, i, h)
            resid = abs(fd - rate_values[i])
            allowed = (tol * (abs(rate_values[i]) + 1e-12)
                       + 8.0 * _EPS * abs(values[i]) / h)
            margin = (allowed - resid) / allowed
            if margin < worst_margin:
                worst_margin, worst_time, worst_resid = (
                    margin, float(times[i]), resid
                )
    return _passfail(
        name, float(worst_margin), worst_time,
        f"{detail}; worst residual {worst_resid:.3e}",
    )


def _check_energy_dissipation(series, tol, expectations):
    if series.kind != "warped":
        return _na("energy-dissipation", "surface energy decay")
    rates = -np.array(
        [functionals.dissipation(s) for s in series.states], dtype=float
    )
    if np.max(np.abs(rates)) <= 1e-30:
        return _na("energy-dissipation", "dissipation vanishes (constant u)")
    return _rate_identity(
        "energy-dissipation", series, tol, rates, "E",
        "dE/dt = -int(|grad u|^4 + 2 (lap u)^2)",
    )


def _check_loop_length(series, tol, expectations):
    if series.kind != "warped" or series.topology != TORUS:
        return _na("loop-length-nondecreasing",
                   "coordinate loops exist on torus runs")
    t = series.col("t")
    L = series.col("L")
    scale = float(L[0])
    return _monotone(
        "loop-length-nondecreasing", t, L, "nondecreasing",
        tol * scale, scale,
        "shortest coordinate loop must not shrink",
    )


def _check_detg_extrema(series, tol, expectations):
    if series.kind != "bundle":
        return _na("detg-extrema-monotone", "fiber determinant on bundle runs")
    t = series.col("t")
    dmin = series.col("detG_min")
    dmax = series.col("detG_max")
    scale = max(float(np.max(dmax)), 1e-30)
    slack = tol * scale
    upper = _monotone("detg-extrema-monotone", t, dmax, "nonincreasing",
                      slack, scale, "max det G must not increase")
    lower = _monotone("detg-extrema-monotone", t, dmin, "nondecreasing",
                      slack, scale, "min det G must not decrease")
    return upper if upper.margin <= lower.margin else lower


def _check_energy_density(series, tol, expectations):
    if series.kind != "bundle":
        return _na("energy-density-bound", "fiber energy density on bundle runs")
    t = series.col("t")
    vals = series.col("max_energy_density")
    mask = t >= WINDOW_SCALAR
    if not np.any(mask):
        return _na("energy-density-bound", f"no samples at t >= {WINDOW_SCALAR}")
    t, vals = t[mask], vals[mask]
    # margin of  max E(y) <= (2/t)(1 + tol),  normalized by 2/t
    margins = (1.0 + tol) - 0.5 * vals * t
    worst = int(np.argmin(margins))
    return _passfail(
        "energy-density-bound", float(margins[worst]), float(t[worst]),
        "fiber energy density stays below 2/t",
    )


def _check_length_rate(series, tol, expectations):
    if series.kind != "bundle":
        return _na("length-rate-identity", "base length rate on bundle runs")
    if expectations and expectations.get("mode") == "unmodified":
        return _na("length-rate-identity",
                   "length rate identity holds for the modified flow")
    rates = []
    for state in series.states:
        dens = np.sqrt(state.gyy) * bundle_mod.energy_density(state)
        rates.append(0.25 * float(np.sum(dens)) * state.spacing)
    return _rate_identity(
        "length-rate-identity", series, tol, np.array(rates), "L",
        "dL/dt = (1/4) int E sqrt(gyy) dy",
    )


def _check_normalized_length(series, tol, expectations):
    if series.kind != "bundle":
        return _na("normalized-length-monotone", "base length on bundle runs")
    t = series.col("t")
    L = series.col("L")
    mask = t >= WINDOW_RATIO
    if np.count_nonzero(mask) < 2:
        return _na("normalized-length-monotone",
                   f"fewer than two samples at t >= {WINDOW_RATIO}")
    t, ratio = t[mask], L[mask] / np.sqrt(t[mask])
    scale = float(ratio[0])
    return _monotone(
        "normalized-length-monotone", t, ratio, "nonincreasing",
        tol * scale, scale, "L/sqrt(t) must not increase at late times",
    )


def _check_length_lower(series, tol, expectations):
    if series.kind != "bundle":
        return _na("length-lower-bound", "base length on bundle runs")
    if series.holonomy.holonomy_class != "hyperbolic":
        return _na("length-lower-bound",
                   "sqrt(t) length growth holds for hyperbolic twists")
    t = series.col("t")
    L = series.col("L")
    mask = t >= WINDOW_LENGTH
    if np.count_nonzero(mask) < 2:
        return _na("length-lower-bound",
                   f"fewer than two samples at t >= {WINDOW_LENGTH}")
    t, L = t[mask], L[mask]
    c_fit = float(L[-1] / math.sqrt(t[-1]))
    margins = L / (c_fit * np.sqrt(t)) - tol
    worst = int(np.argmin(margins))
    return _passfail(
        "length-lower-bound", float(margins[worst]), float(t[worst]),
        f"L(t) >= {tol:g} * c * sqrt(t) with fitted c = {c_fit:.6f}",
    )


def _check_curvature_trend(series, tol, expectations):
    family = (expectations or {}).get("family")
    if family is None:
        return _na("curvature-trend", "no scenario family provided")
    if family == "collapse":
        return _na("curvature-trend", "finite-time singularity expected")
    times = np.asarray(series.trajectory.step_times, dtype=float)
    riem = np.asarray(series.trajectory.step_max_riem, dtype=float)
    if len(times) < 8:
        times = series.sample_times
        riem = series.sample_col("max_riem")
    mask = (times >= 1.0) & (riem > 0.0)
    if np.count_nonzero(mask) < 8:
        return _na("curvature-trend", "too little history at t >= 1")
    times, riem = times[mask], riem[mask]
    sup = float(np.max(times * riem))
    x = np.log(times)
    y = np.log(times * riem)
    half = x >= 0.5 * (x[0] + x[-1])
    slope = float(np.polyfit(x[half], y[half], 1)[0])
    detail = (f"sup t max|Rm| = {sup:.6g}, "
              f"log-log slope {slope:+.4f} over the final half")
    if family == "parabolic":
        return CheckResult("curvature-trend", "pass", None, None,
                           detail + " (report only)")
    if family == "sol":
        margin = tol - abs(slope)
    else:
        margin = tol - slope
    return _passfail("curvature-trend", float(margin),
                     float(times[-1]), detail)


def _check_w_plus(series, tol, expectations, conjugate):
    if series.kind != "bundle":
        return _na("w-plus-monotone", "entropy defined on bundle runs")
    if float(series.sample_times[0]) <= 0.0:
        return _na("w-plus-monotone",
                   "entropy needs a run at strictly positive times")
    try:
        fields = conjugate()
    except ValueError as exc:
        return CheckResult("w-plus-monotone", "fail", None, None,
                           f"conjugate solve failed: {exc}")
    times, values = functionals.w_plus_series(series.trajectory, fields)
    if len(values) < 2:
        return _na("w-plus-monotone", "fewer than two snapshots")
    diffs = np.diff(values)
    worst = int(np.argmin(diffs))
    margin = float(diffs[worst] + tol)
    return _passfail(
        "w-plus-monotone", margin, float(times[worst + 1]),
        f"entropy rose from {values[0]:.6f} to {values[-1]:.6f}; "
        f"worst step {diffs[worst]:+.3e}",
    )


def _check_mass(series, tol, expectations, conjugate):
    if series.kind != "bundle":
        return _na("mass-conservation", "conjugate mass on bundle runs")
    if float(series.sample_times[0]) <= 0.0:
        return _na("mass-conservation",
                   "conjugate mass needs a run at strictly positive times")
    try:
        fields = conjugate()
    except ValueError as exc:
        return CheckResult("mass-conservation", "fail", None, None,
                           f"conjugate solve failed: {exc}")
    drifts = []
    for state, f in zip(series.states, fields):
        mass = float(np.sum(f.u * np.sqrt(state.gyy)) * state.spacing)
        drifts.append(abs(mass - 1.0))
    drifts = np.array(drifts)
    worst = int(np.argmax(drifts))
    return _passfail(
        "mass-conservation", float((tol - drifts[worst]) / tol),
        float(series.sample_times[worst]),
        f"largest mass drift {drifts[worst]:.3e}",
    )


_CHECKS = {
    "stop-reason": _check_stop_reason,
    "u-extrema-monotone": _check_u_extrema,
    "gradient-bound": _check_gradient_bound,
    "s-lower-bound": _check_s_lower,
    "scalar-lower-bound": _check_scalar_lower,
    "volume-identity": _check_volume_identity,
    "volume-lower-bound": _check_volume_lower,
    "volume-upper-bound": _check_volume_upper,
    "volume-ratio-monotone": _check_volume_ratio,
    "energy-dissipation": _check_energy_dissipation,
    "loop-length-nondecreasing": _check_loop_length,
    "detg-extrema-monotone": _check_detg_extrema,
    "energy-density-bound": _check_energy_density,
    "length-rate-identity": _check_length_rate,
    "normalized-length-monotone": _check_normalized_length,
    "length-lower-bound": _check_length_lower,
    "curvature-trend": _check_curvature_trend,
}


def verify_bounds(trajectory, checks=None, tolerances=None, expectations=None):
    """Run the requested checks and return a VerificationReport.

    checks: None for the default set (everything except the backward
    conjugate-heat pair), "all", or an iterable of check names.
    tolerances: per-check overrides of DEFAULT_TOLERANCES.
    expectations: optional dict with "stop_reason" and "family" from the
    scenario that produced the run.
    """
    if checks is None:
        requested = DEFAULT_CHECKS
    elif checks == "all":
        requested = CHECK_NAMES
    else:
        requested = tuple(checks)
        for name in requested:
            if name not in CHECK_NAMES:
                raise ValueError(
                    f"unknown check {name!r}; known: {', '.join(CHECK_NAMES)}"
                )
    tols = dict(DEFAULT_TOLERANCES)
    for name, value in (tolerances or {}).items():
        if name not in CHECK_NAMES:
            raise ValueError(f"tolerance override for unknown check {name!r}")
        tols[name] = float(value)

    series = _Series(trajectory)

    cache = {}

    def conjugate():
        if "fields" not in cache:
            cache["fields"] = functionals.conjugate_heat_backward(trajectory)
        return cache["fields"]

    results = []
    for name in CHECK_NAMES:
        if name not in requested:
            continue
        if name == "w-plus-monotone":
            results.append(_check_w_plus(series, tols[name], expectations,
                                         conjugate))
        elif name == "mass-conservation":
            results.append(_check_mass(series, tols[name], expectations,
                                       conjugate))
        else:
            results.append(
                _CHECKS[name](series, tols.get(name, 0.0), expectations)
            )
    return VerificationReport(
        results=results,
        stop_reason=trajectory.stop_reason,
        expected_stop=(expectations or {}).get("stop_reason"),
    )


def _fit_line(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r_sq = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return float(slope), float(intercept), r_sq


FIT_KINDS = ("exp-flat", "sol-power", "growth-exponent")


def fit_asymptotics(trajectory, kind, window=None):
    """Late-time fits of a trajectory.

    exp-flat         ln max|Rm| against t (exponential curvature decay);
                     default window is the final half of the run.
    sol-power        ln of the worst relative deviation of gyy/t from its
                     predicted limit, against ln t; default window is the
                     final decade.
    growth-exponent  ln L against ln t; for a parabolic twist the result
                     carries the reference exponent 1/6 for comparison.
    """
    if kind not in FIT_KINDS:
        raise ValueError(f"kind must be one of {FIT_KINDS}, got {kind!r}")
    series = _Series(trajectory)
    t_lo = float(series.sample_times[0])
    t_hi = float(series.sample_times[-1])

    if kind == "exp-flat":
        times = np.asarray(trajectory.step_times, dtype=float)
        riem = np.asarray(trajectory.step_max_riem, dtype=float)
        if len(times) < 8:
            times = series.sample_times
            riem = series.sample_col("max_riem")
        if window is None:
            window = (0.5 * (t_lo + t_hi), t_hi)
        mask = (times >= window[0]) & (times <= window[1]) & (riem > 0.0)
        if np.count_nonzero(mask) < 8:
            raise ValueError("too few positive curvature points in the window")
        slope, intercept, r_sq = _fit_line(times[mask], np.log(riem[mask]))
        return {"kind": kind, "slope": slope, "intercept": intercept,
                "r_squared": r_sq, "window": tuple(window),
                "n_points": int(np.count_nonzero(mask))}

    if kind == "sol-power":
        if series.kind != "bundle":
            raise ValueError("sol-power applies to bundle trajectories")
        target = spd.sol_limit_data(series.holonomy.matrix)["slope"]
        times, resid = [], []
        for state in series.states:
            if state.time <= 0.0:
                continue
            dev = np.max(np.abs(state.gyy / (target * state.time) - 1.0))
            times.append(state.time)
            resid.append(float(dev))
        times = np.array(times)
        resid = np.array(resid)
        if window is None:
            window = (max(t_hi / 10.0, times[0]), t_hi)
        mask = (times >= window[0]) & (times <= window[1]) & (resid > 0.0)
        if np.count_nonzero(mask) < 4:
            raise ValueError("too few samples in the window")
        slope, intercept, r_sq = _fit_line(
            np.log(times[mask]), np.log(resid[mask])
        )
        return {"kind": kind, "slope": slope, "intercept": intercept,
                "r_squared": r_sq, "window": tuple(window),
                "n_points": int(np.count_nonzero(mask)), "target": target}

    L = series.sample_col("L")
    times = series.sample_times
    if window is None:
        window = (max(t_hi / 10.0, times[0]), t_hi)
    mask = (times >= window[0]) & (times <= window[1])
    mask &= (times > 0.0) & ~np.isnan(L)
    if np.count_nonzero(mask) < 4:
        raise ValueError("too few samples in the window")
    slope, intercept, r_sq = _fit_line(np.log(times[mask]), np.log(L[mask]))
    out = {"kind": kind, "exponent": slope, "intercept": intercept,
           "r_squared": r_sq, "window": tuple(window),
           "n_points": int(np.count_nonzero(mask))}
    if series.kind == "bundle" and series.holonomy.holonomy_class == "parabolic":
        out["reference"] = 1.0 / 6.0
    return out
