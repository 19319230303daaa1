"""Geometrically nonlinear Cosserat shell energies, strain measures and a
small finite-difference minimizer."""

from .errors import ShellkitError, ValidationError
from .material import ShellMaterial

__version__ = "0.1.0"

__all__ = ["ShellMaterial", "ShellkitError", "ValidationError", "__version__"]
