"""Symmetry-reduced geometric flow simulator and verification harness.

Two reductions of a three-dimensional curvature flow are implemented:

* a warped product over a closed surface (flat torus or rotationally
  symmetric sphere), carrying a scalar warp potential, and
* a twisted torus bundle over a circle, carrying a positive-definite
  fiber matrix with an integer holonomy twist.

Submodules
----------
spd         geometry of the space of positive-definite 2x2 matrices
warped      warped-product states, curvature, and flow right-hand sides
bundle      bundle states, curvature, and flow right-hand sides
engine      adaptive explicit time stepping and trajectory containers
functionals diagnostics, entropy functionals, conjugate heat transport
presets     ready-made initial data used by the verification suite
verify      bound checking and asymptotic fitting over trajectories
config      INI run configuration parsing
io          snapshot and diagnostics serialization
cli         command line entry point
"""

from . import spd
from . import warped
from . import bundle
from . import functionals
from . import engine
from . import presets
from . import verify
from . import config
from . import io
from . import cli

__version__ = "0.1.0"

__all__ = [
    "spd",
    "warped",
    "bundle",
    "functionals",
    "engine",
    "presets",
    "verify",
    "config",
    "io",
    "cli",
]
