"""Built-in scenarios: initial data, controller defaults, expected outcomes.

Each preset fixes a topology or twist class, default grid size and step
control, a snapshot cadence, and the stop reason the run is expected to
end with.  Initial amplitudes can be overridden per run, but only the
keys a preset declares; everything else is rejected so a config typo
cannot silently fall back to a default.

Bundle initial data is built as G(y) = S(y)^T Q(y) S(y) with S(y) the
one-parameter family through the twist (S(y+1) = S(y) H exactly) and
Q(y) a periodic positive perturbation, so the gluing condition
G(y+1) = H^T G(y) H holds to machine precision for any amplitudes.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import engine, spd
from .bundle import BundleState, Holonomy
from .warped import SPHERE, TORUS, SurfaceMetric, WarpedState

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Preset:
    """Defaults and expectations of one named scenario."""

    name: str
    kind: str            # "warped" | "bundle"
    family: str          # "collapse" | "flat-warped" | "sol" | "flat-bundle" | "parabolic"
    description: str
    mode: str
    n: int
    t_end: float
    cfl: float
    curvature_stop: float
    snapshot_dt: float
    expected_stop: str
    initial_defaults: dict
    holonomy: tuple = None          # four integers, or None
    holonomy_overridable: bool = False
    dt_min: float = 1e-12
    dt_max: float = math.inf
    # extra snapshot marks as absolute (start, stop, spacing) windows
    dense_windows: tuple = ()


def holonomy_log(holonomy):
    """Real 2x2 A with expm(A) = H.

    Exists exactly when H has positive eigenvalues (hyperbolic with
    positive trace, parabolic with trace 2) or is a proper rotation
    conjugate (elliptic); twists with negative eigenvalues are rejected.
    """
    log = scipy.linalg.logm(holonomy.matrix)
    if np.max(np.abs(np.imag(log))) > 1e-9:
        raise ValueError(
            "twist matrix has no real logarithm (negative eigenvalues); "
            "use a conjugate with positive trace"
        )
    return np.real(log)


def twist_family(holonomy, y):
    """S(y) = exp(y log H) at each node; S(0) = I and S(y+1) = S(y) H."""
    log = holonomy_log(holonomy)
    y = np.asarray(y, dtype=float)
    return np.stack([scipy.linalg.expm(t * log) for t in y])


def _periodic_perturbation(y, amp_diag, amp_off, amp_off2, amp_trace):
    """Positive-definite periodic Q(y) = exp(W(y)), W symmetric."""
    w1 = amp_diag * np.cos(TWO_PI * y)
    w2 = amp_off * np.sin(TWO_PI * y) + amp_off2 * np.cos(2.0 * TWO_PI * y)
    w3 = amp_trace * np.cos(TWO_PI * y + 0.5)
    W = np.empty((len(y), 2, 2))
    W[:, 0, 0] = w3 + w1
    W[:, 0, 1] = W[:, 1, 0] = w2
    W[:, 1, 1] = w3 - w1
    return spd.sym_exp(W)


def bundle_profile(holonomy, y, gyy_base, gyy_amp, amp_diag, amp_off,
                   amp_off2, amp_trace):
    """(gyy, G) arrays at arbitrary coordinates y; used by every bundle preset."""
    y = np.asarray(y, dtype=float)
    S = twist_family(holonomy, y)
    Q = _periodic_perturbation(y, amp_diag, amp_off, amp_off2, amp_trace)
    G = np.transpose(S, (0, 2, 1)) @ Q @ S
    # the matmul is symmetric only up to rounding; keep it exact so the
    # off-diagonal survives serialization bit for bit
    G = 0.5 * (G + np.transpose(G, (0, 2, 1)))
    gyy = gyy_base * (1.0 + gyy_amp * np.cos(TWO_PI * y))
    return gyy, G


def _build_sphere(n, initial):
    r0 = initial["r0"]
    u_amp = initial["u_amp"]
    if not r0 > 0.0:
        raise ValueError(f"r0 must be positive, got {r0}")
    x = (np.arange(n) + 0.5) * math.pi / n
    components = np.stack([np.full(n, r0), r0 * np.sin(x)])
    u = u_amp * np.cos(x)
    return WarpedState(SurfaceMetric(SPHERE, components), u, 0.0)


def _build_torus(n, initial):
    scale_sq = initial["scale_sq"]
    if not scale_sq > 0.0:
        raise ValueError(f"scale_sq must be positive, got {scale_sq}")
    coords = np.arange(n) / n
    x, y = np.meshgrid(coords, coords, indexing="ij")
    conformal = scale_sq * np.exp(
        2.0 * initial["bump"] * np.cos(TWO_PI * x) * np.sin(TWO_PI * y)
    )
    components = np.stack([conformal, np.zeros((n, n)), conformal.copy()])
    u = (initial["u_amp_x"] * np.cos(TWO_PI * x)
         + initial["u_amp_y"] * np.cos(TWO_PI * y + initial["u_phase_y"]))
    return WarpedState(SurfaceMetric(TORUS, components), u, 0.0)


def _build_sol_exact(n, initial):
    c = initial["c"]
    a = initial["a"]
    t0 = initial["t0"]
    if not c > 0.0:
        raise ValueError(f"c must be positive, got {c}")
    if not t0 + a > 0.0:
        raise ValueError(
            f"t0 + a must be positive for a nondegenerate slice, "
            f"got {t0} + {a}"
        )
    y = np.arange(n) / n
    gyy = np.full(n, 4.0 * c * c * (t0 + a))
    G = np.zeros((n, 2, 2))
    G[:, 0, 0] = np.exp(2.0 * c * y)
    G[:, 1, 1] = np.exp(-2.0 * c * y)
    holonomy = Holonomy(np.diag([math.exp(c), math.exp(-c)]))
    return BundleState(gyy, G, holonomy, t0)


def _build_bundle_perturbed(n, initial, holonomy, gyy_base=None):
    t0 = initial["t0"]
    if gyy_base is None:
        gyy_base = initial["gyy0"]
    y = np.arange(n) / n
    gyy, G = bundle_profile(
        holonomy, y, gyy_base, initial["gyy_amp"], initial["q_amp_diag"],
        initial["q_amp_off"], initial["q_amp_off2"], initial["q_amp_trace"],
    )
    return BundleState(gyy, G, holonomy, t0)


def _build_sol_perturbed(n, initial, holonomy):
    data = spd.sol_limit_data(holonomy.matrix)
    gyy_base = data["slope"] * initial["t0"] * initial["gyy_scale"]
    return _build_bundle_perturbed(n, initial, holonomy, gyy_base=gyy_base)


PRESETS = {}


def _register(preset):
    PRESETS[preset.name] = preset
    return preset


_register(Preset(
    name="sphere-collapse",
    kind="warped",
    family="collapse",
    description="rotationally symmetric sphere shrinking to a round point",
    mode="modified",
    n=128,
    t_end=1.0,
    cfl=0.2,
    curvature_stop=1e6,
    snapshot_dt=0.02,
    expected_stop=engine.CURVATURE_BLOWUP,
    initial_defaults={"r0": 1.0, "u_amp": 0.0},
))

_register(Preset(
    name="flat-torus-warped",
    kind="warped",
    family="flat-warped",
    description="flat torus with a conformal bump and a nontrivial warp",
    mode="modified",
    n=128,
    t_end=12.0,
    cfl=0.2,
    curvature_stop=1e6,
    snapshot_dt=0.25,
    expected_stop=engine.REACHED_T_END,
    initial_defaults={
        "scale_sq": 8.0 * math.pi ** 2,
        "bump": 0.05,
        "u_amp_x": 0.3,
        "u_amp_y": 0.18,
        "u_phase_y": 0.7,
    },
    # rate identities need a fine cadence while the transient decays
    dense_windows=((0.0, 3.0, 0.05),),
))

_register(Preset(
    name="sol-exact",
    kind="bundle",
    family="sol",
    description="exact self-similar twisted-bundle solution, a fixed point "
                "of the rescaled flow",
    mode="modified",
    n=256,
    t_end=2.0,
    cfl=0.4,
    curvature_stop=1e6,
    snapshot_dt=0.025,
    expected_stop=engine.REACHED_T_END,
    initial_defaults={"c": 1.0, "a": 0.0, "t0": 1.0},
))

_register(Preset(
    name="sol-perturbed",
    kind="bundle",
    family="sol",
    description="hyperbolic twist with perturbed fiber and base data, "
                "relaxing onto the self-similar solution",
    mode="modified",
    n=256,
    t_end=110.0,
    cfl=0.4,
    curvature_stop=1e6,
    snapshot_dt=0.25,
    expected_stop=engine.REACHED_T_END,
    initial_defaults={
        "t0": 1.0,
        # the base metric starts above its self-similar value so the
        # fiber energy density begins strictly below its 2/t ceiling
        "gyy_scale": 2.0,
        "gyy_amp": 0.05,
        "q_amp_diag": 0.06,
        "q_amp_off": 0.05,
        "q_amp_off2": 0.02,
        "q_amp_trace": 0.03,
    },
    holonomy=(2, 1, 1, 1),
    holonomy_overridable=True,
    dense_windows=((1.0, 3.0, 0.01), (3.0, 10.0, 0.05)),
))

_register(Preset(
    name="flat-elliptic",
    kind="bundle",
    family="flat-bundle",
    description="finite-order twist flowing to a flat bundle",
    mode="modified",
    n=96,
    t_end=2.0,
    cfl=0.3,
    curvature_stop=1e6,
    # the slowest mode decays at rate ~ (2 pi)^2 / gyy0, so rate checks
    # need a cadence well under that timescale
    snapshot_dt=0.01,
    expected_stop=engine.REACHED_T_END,
    initial_defaults={
        "t0": 0.0,
        "gyy0": 4.0,
        "gyy_amp": 0.1,
        "q_amp_diag": 0.2,
        "q_amp_off": 0.15,
        "q_amp_off2": 0.0,
        "q_amp_trace": 0.1,
    },
    holonomy=(0, -1, 1, 0),
    holonomy_overridable=True,
))

_register(Preset(
    name="nil-parabolic",
    kind="bundle",
    family="parabolic",
    description="parabolic twist with slow base growth",
    mode="modified",
    n=96,
    t_end=12.0,
    cfl=0.3,
    curvature_stop=1e6,
    snapshot_dt=0.2,
    expected_stop=engine.REACHED_T_END,
    initial_defaults={
        "t0": 0.0,
        "gyy0": 4.0,
        "gyy_amp": 0.05,
        "q_amp_diag": 0.1,
        "q_amp_off": 0.08,
        "q_amp_off2": 0.0,
        "q_amp_trace": 0.05,
    },
    holonomy=(1, 1, 0, 1),
    holonomy_overridable=True,
    # the early transient relaxes on a fast diffusive timescale
    dense_windows=((0.0, 2.0, 0.01),),
))


def get(name):
    if name not in PRESETS:
        raise ValueError(
            f"unknown scenario {name!r}; available: {', '.join(sorted(PRESETS))}"
        )
    return PRESETS[name]


def build_initial(preset, n=None, holonomy=None, initial=None):
    """Initial state of a preset with optional overrides.

    initial may only override keys the preset declares; holonomy may be
    replaced only where the preset allows it (four integers, det 1).
    """
    if isinstance(preset, str):
        preset = get(preset)
    n = preset.n if n is None else int(n)
    if n < 4:
        raise ValueError(f"grid size must be at least 4, got {n}")
    values = dict(preset.initial_defaults)
    for key, value in (initial or {}).items():
        if key not in values:
            raise ValueError(
                f"scenario {preset.name!r} does not take initial key {key!r}; "
                f"allowed: {', '.join(sorted(values))}"
            )
        values[key] = float(value)

    if holonomy is not None and not preset.holonomy_overridable:
        raise ValueError(
            f"scenario {preset.name!r} fixes its own twist matrix"
        )
    twist = None
    if preset.holonomy is not None:
        entries = holonomy if holonomy is not None else preset.holonomy
        twist = Holonomy.from_entries(*entries)

    if preset.name == "sphere-collapse":
        return _build_sphere(n, values)
    if preset.name == "flat-torus-warped":
        return _build_torus(n, values)
    if preset.name == "sol-exact":
        return _build_sol_exact(n, values)
    if preset.name == "sol-perturbed":
        return _build_sol_perturbed(n, values, twist)
    return _build_bundle_perturbed(n, values, twist)


def controller(preset, t_end=None, cfl=None, dt_min=None, dt_max=None,
               curvature_stop=None):
    """StepController with preset defaults, any field overridable."""
    if isinstance(preset, str):
        preset = get(preset)
    return engine.StepController(
        t_end=preset.t_end if t_end is None else t_end,
        cfl=preset.cfl if cfl is None else cfl,
        dt_min=preset.dt_min if dt_min is None else dt_min,
        dt_max=preset.dt_max if dt_max is None else dt_max,
        curvature_stop=(preset.curvature_stop if curvature_stop is None
                        else curvature_stop),
    )


def snapshot_times(preset, t_end):
    """Extra snapshot marks from the preset's dense windows, clipped."""
    if isinstance(preset, str):
        preset = get(preset)
    marks = []
    for start, stop, spacing in preset.dense_windows:
        stop = min(stop, t_end)
        if stop > start:
            count = int(round((stop - start) / spacing))
            marks.extend(start + spacing * np.arange(count + 1))
    return tuple(marks)
