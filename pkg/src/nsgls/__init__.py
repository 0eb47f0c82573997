"""Numerical lab for generalized Lebesgue spaces and small-data Navier-Stokes bounds."""

from . import constants, field, psi, solver, specfun, spectral, verify

__version__ = "0.1.0"

__all__ = ["constants", "field", "psi", "solver", "specfun", "spectral", "verify", "__version__"]
