"""Dynamic fragmentation of a 1D brittle bar.

Simulation engine and experiment harness for softening-damage fragmentation
with two models: a Lipschitz-regularized damage field (constraint slope 1/ell
on the element-centroid damage) and a local crack-band model equivalent to a
linear cohesive zone law.  Explicit and implicit Newmark time integration,
stochastic Young's-modulus fields, energy/fragment observables and a campaign
CLI (``lipfrag run|ensemble|sweep|validate-config|version``).
"""

__version__ = "0.1.0"

from ._backend import backend_name

__all__ = ["__version__", "backend_name"]
