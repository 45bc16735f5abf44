"""Numerical value distribution of meromorphic maps on open Riemann surfaces.

The package evaluates Nevanlinna characteristic, proximity and counting
functions of maps into the Riemann sphere over exhaustion discs of a
parabolic or hyperbolic surface, and checks the main theorems of the
theory on radius grids.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, ContourZeroError, CurvatureBoundError, DomainError,  # noqa: E402
                     InsufficientGrowthError, NevlabError, NumericError, PoleError,
                     QuadratureError)
from .sphere import MeromorphicMap, SpherePoint, chern_bracket, spherical_distance  # noqa: E402

__all__ = ["__version__", "ConfigError", "ContourZeroError", "CurvatureBoundError",
           "DomainError", "InsufficientGrowthError", "MeromorphicMap", "NevlabError",
           "NumericError", "PoleError", "QuadratureError", "SpherePoint", "chern_bracket",
           "spherical_distance"]
