"""Numerical laboratory for Gaussian correlation inequalities.

Library layout:

- ``sets``        origin-symmetric convex set descriptors and oracles
- ``measure``     Gaussian measure, the correlated pair density, estimators
- ``logconcave``  evaluable even log-concave functions
- ``functional``  the correlation integral and its mixing derivatives
- ``semigroup``   Ornstein-Uhlenbeck smoothing and log-potential derivatives
- ``surrogate``   distance-penalized indicator stand-ins and their checks
- ``stochastic``  Brownian exits, spectral gaps, subordinate motion, FKG
- ``verify``      the declarative claim registry and runner
- ``cli``         command-line front end
"""

from . import errors, functional, logconcave, measure, semigroup, sets, stochastic, surrogate

__all__ = [
    "errors",
    "functional",
    "logconcave",
    "measure",
    "semigroup",
    "sets",
    "stochastic",
    "surrogate",
]

__version__ = "0.1.0"
