"""Continuous Galerkin finite element solver for ideal MHD with
residual-based artificial viscosity and divergence cleaning."""

__version__ = "0.1.0"

from . import (assembly, bench, divclean, fe_space, integrator, linalg,
               mesh, physics, stabilization)

__all__ = ["assembly", "bench", "divclean", "fe_space", "integrator",
           "linalg", "mesh", "physics", "stabilization", "__version__"]
