"""Exact multimode description of a 1-D cavity with a movable dielectric membrane.

Submodules
----------
spectral
    Instantaneous eigenmodes and their position derivatives.
couplings
    Intermode coupling tensors and the orthogonal mode rotation.
effective
    Reduced-model coefficients in SI units.
classical_sim
    Finite-difference co-simulation of field and membrane.
fock_sim
    Truncated Fock-space quantum evolution.
cli
    Command-line front end.
"""

__version__ = "0.1.0"

from . import _kernels
from .errors import (
    BranchTrackingError,
    ConfigError,
    DegeneracyError,
    DomainError,
    NumericalError,
    QuadratureError,
)
from .spectral import CavityConfig, Spectrum, dispersion_roots, frequency_derivative, frequency_slope
from .units import SI, UnitSystem

BACKEND = _kernels.BACKEND

__all__ = [
    "BACKEND",
    "BranchTrackingError",
    "CavityConfig",
    "ConfigError",
    "DegeneracyError",
    "DomainError",
    "NumericalError",
    "QuadratureError",
    "SI",
    "Spectrum",
    "UnitSystem",
    "__version__",
    "dispersion_roots",
    "frequency_derivative",
    "frequency_slope",
]
