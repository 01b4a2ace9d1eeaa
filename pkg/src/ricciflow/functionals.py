"""Integral diagnostics and entropy functionals for the reduced flows.

The DiagnosticsRecord collects every scalar the verification harness tracks
per accepted step.  Fields that do not apply to a given system (fiber data
on a surface run, warp data on a bundle run) are None and serialize to an
empty CSV cell.

The backward conjugate-heat solver and the two entropy functionals (the
surface W and the circle W_plus) live here as well; they only consume
states and snapshot lists, never the stepping machinery.
"""

import math
from dataclasses import dataclass, fields as _dc_fields
from typing import Optional

import numpy as np

from . import bundle as bundle_mod
from . import spd
from . import warped as warped_mod
from .bundle import BundleState
from .warped import TORUS, WarpedState

# Column order of the diagnostics CSV, fixed.
DIAGNOSTIC_COLUMNS = (
    "t",
    "dt",
    "V",
    "E",
    "min_S",
    "max_gradu_sq",
    "max_riem",
    "gauss_bonnet",
    "L",
    "detG_min",
    "detG_max",
    "max_energy_density",
    "W_plus",
    "u_min",
    "u_max",
)


@dataclass
class DiagnosticsRecord:
    """Scalar diagnostics of one state.

    t, dt     time of the state and the step size that produced it
    V         volume: surface area, or circle integral of the 3-volume
              density sqrt(det G) sqrt(g_yy)
    E         integral of |grad u|^2 (surface runs)
    min_S     min of S = R_base - |grad u|^2 (surface runs)
    max_riem  max over the grid of |Rm| of the three-dimensional metric
    L         base circle length (bundle), shortest coordinate loop (torus)
    """

    t: float
    dt: float
    V: float
    E: Optional[float] = None
    min_S: Optional[float] = None
    max_gradu_sq: Optional[float] = None
    max_riem: Optional[float] = None
    gauss_bonnet: Optional[float] = None
    L: Optional[float] = None
    detG_min: Optional[float] = None
    detG_max: Optional[float] = None
    max_energy_density: Optional[float] = None
    W_plus: Optional[float] = None
    u_min: Optional[float] = None
    u_max: Optional[float] = None

    def __post_init__(self):
        for name in DIAGNOSTIC_COLUMNS:
            value = getattr(self, name)
            if value is None:
                continue
            value = float(value)
            if not math.isfinite(value):
                raise ValueError(f"diagnostic {name} is not finite: {value!r}")
            setattr(self, name, value)
        if self.V <= 0.0:
            raise ValueError(f"V must be positive, got {self.V}")
        if self.L is not None and self.L <= 0.0:
            raise ValueError(f"L must be positive, got {self.L}")

    def as_dict(self):
        return {name: getattr(self, name) for name in DIAGNOSTIC_COLUMNS}

    def csv_row(self):
        cells = []
        for name in DIAGNOSTIC_COLUMNS:
            value = getattr(self, name)
            cells.append("" if value is None else repr(value))
        return ",".join(cells)


def csv_header():
    return ",".join(DIAGNOSTIC_COLUMNS)


def parse_csv_row(line):
    """Inverse of DiagnosticsRecord.csv_row."""
    cells = line.strip().split(",")
    if len(cells) != len(DIAGNOSTIC_COLUMNS):
        raise ValueError(
            f"expected {len(DIAGNOSTIC_COLUMNS)} cells, got {len(cells)}"
        )
    values = {
        name: (None if cell == "" else float(cell))
        for name, cell in zip(DIAGNOSTIC_COLUMNS, cells)
    }
    return DiagnosticsRecord(**values)


class DiagnosticsTable:
    """Diagnostics as columns, one row per accepted step.

    Missing values are stored as NaN and serialize to empty CSV cells.
    Loading does not re-validate the physics of each row; a corrupted
    file is meant to be caught by the verification checks, not by the
    parser.
    """

    def __init__(self):
        self._data = {name: [] for name in DIAGNOSTIC_COLUMNS}
        self._arrays = {}

    def __len__(self):
        return len(self._data["t"])

    def append(self, record):
        row = record.as_dict()
        for name in DIAGNOSTIC_COLUMNS:
            value = row[name]
            self._data[name].append(
                math.nan if value is None else float(value)
            )
        self._arrays.clear()

    def column(self, name):
        """Column as a float array with NaN for missing entries."""
        if name not in self._data:
            raise KeyError(f"unknown diagnostics column {name!r}")
        if name not in self._arrays:
            self._arrays[name] = np.array(self._data[name], dtype=float)
        return self._arrays[name]

    def record(self, i):
        values = {
            name: (None if math.isnan(self._data[name][i])
                   else self._data[name][i])
            for name in DIAGNOSTIC_COLUMNS
        }
        return DiagnosticsRecord(**values)

    @classmethod
    def from_records(cls, records):
        table = cls()
        for record in records:
            table.append(record)
        return table

    def to_csv(self, path):
        with open(path, "w", encoding="ascii") as handle:
            handle.write(csv_header() + "\n")
            for i in range(len(self)):
                cells = []
                for name in DIAGNOSTIC_COLUMNS:
                    value = self._data[name][i]
                    cells.append("" if math.isnan(value) else repr(value))
                handle.write(",".join(cells) + "\n")

    @classmethod
    def from_csv(cls, path):
        table = cls()
        with open(path, "r", encoding="ascii") as handle:
            header = handle.readline().strip()
            if header != csv_header():
                raise ValueError(
                    f"diagnostics header mismatch: expected {csv_header()!r}, "
                    f"got {header!r}"
                )
            for lineno, line in enumerate(handle, start=2):
                if not line.strip():
                    continue
                cells = line.strip().split(",")
                if len(cells) != len(DIAGNOSTIC_COLUMNS):
                    raise ValueError(
                        f"line {lineno}: expected {len(DIAGNOSTIC_COLUMNS)} "
                        f"cells, got {len(cells)}"
                    )
                for name, cell in zip(DIAGNOSTIC_COLUMNS, cells):
                    try:
                        value = math.nan if cell == "" else float(cell)
                    except ValueError:
                        raise ValueError(
                            f"line {lineno}: column {name} is not a number: "
                            f"{cell!r}"
                        ) from None
                    table._data[name].append(value)
        return table


def basic_functionals(state, dt=0.0, w_plus=None):
    """Quadrature diagnostics of a single state as a DiagnosticsRecord."""
    if isinstance(state, WarpedState):
        curv = warped_mod.curvature_warped(state)
        weights = warped_mod.volume_element(state.metric)
        grad_u_sq = curv["grad_u_sq"]
        S = curv["R_M"] - grad_u_sq
        if state.topology == TORUS:
            row, col = warped_mod.coordinate_loop_lengths(state.metric)
            loop = float(min(row.min(), col.min()))
        else:
            loop = None
        return DiagnosticsRecord(
            t=state.time,
            dt=dt,
            V=float(np.sum(weights)),
            E=float(np.sum(grad_u_sq * weights)),
            min_S=float(np.min(S)),
            max_gradu_sq=float(np.max(grad_u_sq)),
            max_riem=float(np.sqrt(max(np.max(curv["riem_norm_sq"]), 0.0))),
            gauss_bonnet=float(np.sum(curv["R_M"] * weights)),
            L=loop,
            W_plus=w_plus,
            u_min=float(np.min(state.u)),
            u_max=float(np.max(state.u)),
        )
    if isinstance(state, BundleState):
        curv = bundle_mod.curvature_bundle(state)
        h = state.spacing
        sq_gyy = np.sqrt(state.gyy)
        det_G = spd.det2(state.G)
        return DiagnosticsRecord(
            t=state.time,
            dt=dt,
            V=float(np.sum(np.sqrt(det_G) * sq_gyy) * h),
            max_riem=float(np.sqrt(max(np.max(curv["riem_norm_sq"]), 0.0))),
            L=bundle_mod.base_length(state),
            detG_min=float(np.min(det_G)),
            detG_max=float(np.max(det_G)),
            max_energy_density=float(np.max(bundle_mod.energy_density(state))),
            W_plus=w_plus,
        )
    raise TypeError(f"expected a WarpedState or BundleState, got {type(state)!r}")


def dissipation(state):
    """Energy decay rate integral of |grad u|^4 + 2 (lap u)^2.

    Along the modified surface flow this equals -dE/dt, and it dominates
    E^2/V by the Cauchy-Schwarz inequality (exactly, in quadrature).
    """
    if not isinstance(state, WarpedState):
        raise TypeError("dissipation applies to warped surface states")
    curv = warped_mod.curvature_warped(state)
    weights = warped_mod.volume_element(state.metric)
    dens = curv["grad_u_sq"] ** 2 + 2.0 * curv["lap_u"] ** 2
    return float(np.sum(dens * weights))


def w_functional(state, f, tau):
    """Entropy of a surface state at scale tau.

        W = int [ tau (|grad f|^2 + R_base - |grad u|^2) + f - 2 ]
                (4 pi tau)^-1 e^-f dV

    f is shifted by a constant so that (4 pi tau)^-1 e^-f dV has unit mass;
    the value is invariant under (g, tau) -> (s g, s tau).
    """
    if not isinstance(state, WarpedState):
        raise TypeError("w_functional applies to warped surface states")
    if not (math.isfinite(tau) and tau > 0.0):
        raise ValueError(f"tau must be positive, got {tau}")
    metric = state.metric
    f = np.asarray(f, dtype=float)
    if f.shape != state.u.shape:
        raise ValueError(f"f must have shape {state.u.shape}, got {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError("f has non-finite entries")

    weights = warped_mod.volume_element(metric)
    dens = np.exp(-f) / (4.0 * np.pi * tau)
    mass = float(np.sum(dens * weights))
    f = f + np.log(mass)
    dens = dens / mass

    curv = warped_mod.curvature_warped(state)
    grad_f_sq = warped_mod.scalar_gradient_sq(metric, f)
    integrand = (
        tau * (grad_f_sq + curv["R_M"] - curv["grad_u_sq"]) + f - 2.0
    ) * dens * weights
    return float(np.sum(integrand))


@dataclass
class ConjugateHeatField:
    """Positive solution sample of the backward conjugate heat equation."""

    u: np.ndarray
    time: float

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.u.ndim != 1:
            raise ValueError(f"field must be a node vector, got shape {self.u.shape}")
        if not np.all(np.isfinite(self.u)) or np.any(self.u <= 0.0):
            raise ValueError("conjugate heat field must be positive and finite")
        if not (math.isfinite(self.time) and self.time > 0.0):
            raise ValueError(f"time must be positive, got {self.time}")

    @property
    def f_tilde(self):
        """Potential with u = (4 pi t)^(-1/2) e^(-f_tilde)."""
        return -(np.log(self.u) + 0.5 * np.log(4.0 * np.pi * self.time))


def _bundle_snapshots(trajectory):
    """Normalize a trajectory-like object to ascending (time, state) pairs."""
    items = getattr(trajectory, "samples", trajectory)
    pairs = []
    for item in items:
        if hasattr(item, "state"):
            time, state = item.time, item.state
        else:
            time, state = item[0], item[1]
        if not isinstance(state, BundleState):
            raise TypeError("conjugate heat solve needs bundle snapshots")
        pairs.append((float(time), state))
    if len(pairs) < 2:
        raise ValueError("need at least two snapshots to solve backward")
    times = [t for t, _ in pairs]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("snapshot times must be strictly increasing")
    if times[0] <= 0.0:
        raise ValueError("conjugate heat solve needs positive times")
    return pairs


def _interp_state(pairs, j, t):
    """Linear-in-time interpolation between snapshots j and j+1."""
    t0, s0 = pairs[j]
    t1, s1 = pairs[j + 1]
    w = (t - t0) / (t1 - t0)
    gyy = (1.0 - w) * s0.gyy + w * s1.gyy
    G = (1.0 - w) * s0.G + w * s1.G
    return BundleState(gyy, G, s0.holonomy, time=t)


def _conjugate_rate(field, state):
    """- lap(field) - (1/4) (energy density) field, flux-form Laplacian."""
    h = state.spacing
    sq = np.sqrt(state.gyy)
    sq_half = np.sqrt(0.5 * (state.gyy + np.roll(state.gyy, -1)))
    flux = (np.roll(field, -1) - field) / (h * sq_half)
    lap = (flux - np.roll(flux, 1)) / (h * sq)
    return -lap - 0.25 * bundle_mod.energy_density(state) * field


def conjugate_heat_backward(trajectory, terminal=None):
    """Solve the conjugate heat equation backward over stored snapshots.

        du/dt = - lap(u) - (1/4) g^yy Tr((G^-1 G_,y)^2) u

    Metric data between snapshots is interpolated linearly in time and the
    field is advanced with classical Runge-Kutta substeps.  The terminal
    field defaults to the uniform density 1/L at the last snapshot; any
    supplied field is normalized to unit mass int u sqrt(g_yy) dy = 1.

    Returns one ConjugateHeatField per snapshot, in ascending time order.
    Raises if the field stops being positive (scheme failure), reporting
    the snapshot interval.
    """
    pairs = _bundle_snapshots(trajectory)
    t_end, last = pairs[-1]
    h = last.spacing

    if terminal is None:
        field = np.full(last.n, 1.0 / bundle_mod.base_length(last))
    else:
        field = np.asarray(getattr(terminal, "u", terminal), dtype=float)
        if field.shape != (last.n,):
            raise ValueError(
                f"terminal field must have shape {(last.n,)}, got {field.shape}"
            )
        if not np.all(np.isfinite(field)) or np.any(field <= 0.0):
            raise ValueError("terminal field must be positive and finite")
    field = field / (np.sum(field * np.sqrt(last.gyy)) * h)

    out = [ConjugateHeatField(field.copy(), t_end)]
    for j in range(len(pairs) - 2, -1, -1):
        t_hi, s_hi = pairs[j + 1]
        t_lo, s_lo = pairs[j]
        # substep count from the diffusion stability limit of the stiffer end
        s_sq = h * h * min(np.min(s_lo.gyy), np.min(s_hi.gyy))
        rate = max(np.max(bundle_mod.energy_density(s_lo)),
                   np.max(bundle_mod.energy_density(s_hi)))
        dt_stab = 0.25 / (1.0 / s_sq + 0.25 * rate)
        nsub = max(1, int(np.ceil((t_hi - t_lo) / dt_stab)))
        dt = -(t_hi - t_lo) / nsub
        t = t_hi
        for _ in range(nsub):
            k1 = _conjugate_rate(field, _interp_state(pairs, j, t))
            mid = _interp_state(pairs, j, t + 0.5 * dt)
            k2 = _conjugate_rate(field + 0.5 * dt * k1, mid)
            k3 = _conjugate_rate(field + 0.5 * dt * k2, mid)
            k4 = _conjugate_rate(field + dt * k3, _interp_state(pairs, j, t + dt))
            field = field + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += dt
            if not np.all(np.isfinite(field)) or np.any(field <= 0.0):
                raise ValueError(
                    "conjugate heat field lost positivity between snapshots "
                    f"{j} and {j + 1} (t near {t:.6g})"
                )
        out.append(ConjugateHeatField(field.copy(), t_lo))
    out.reverse()
    return out


def w_plus(state, f, t):
    """Circle entropy of a bundle state at time t.

        W_plus = int [ t (|grad f|^2 - (1/4) g^yy Tr((G^-1 G_,y)^2)) - f + 1 ]
                     (4 pi t)^(-1/2) e^(-f) sqrt(g_yy) dy

    f is shifted by a constant to unit mass, as in w_functional.
    """
    if not isinstance(state, BundleState):
        raise TypeError("w_plus applies to bundle states")
    if not (math.isfinite(t) and t > 0.0):
        raise ValueError(f"t must be positive, got {t}")
    f = np.asarray(f, dtype=float)
    if f.shape != (state.n,):
        raise ValueError(f"f must have shape {(state.n,)}, got {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError("f has non-finite entries")
    h = state.spacing
    sq = np.sqrt(state.gyy)

    dens = np.exp(-f) / np.sqrt(4.0 * np.pi * t)
    mass = float(np.sum(dens * sq) * h)
    f = f + np.log(mass)
    dens = dens / mass

    f_y = (np.roll(f, -1) - np.roll(f, 1)) / (2.0 * h)
    grad_f_sq = f_y * f_y / state.gyy
    eden = bundle_mod.energy_density(state)
    integrand = (t * (grad_f_sq - 0.25 * eden) - f + 1.0) * dens * sq
    return float(np.sum(integrand) * h)


def w_plus_series(trajectory, fields=None):
    """W_plus along stored snapshots with their backward conjugate heat field.

    Returns (times, values) arrays; nondecreasing values certify the
    entropy monotonicity of the pair (flow, conjugate heat solution).
    """
    pairs = _bundle_snapshots(trajectory)
    if fields is None:
        fields = conjugate_heat_backward(trajectory)
    if len(fields) != len(pairs):
        raise ValueError("need one conjugate heat field per snapshot")
    times = np.array([t for t, _ in pairs])
    values = np.array(
        [
            w_plus(state, fld.f_tilde, t)
            for (t, state), fld in zip(pairs, fields)
        ]
    )
    return times, values
