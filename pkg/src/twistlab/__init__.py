"""Numerical laboratory for thin twisted waveguides.

Compares the resolvent of the singularly scaled twisted-tube operator with the
one-dimensional harmonic oscillator carrying a Dirichlet point at the origin,
through an intermediate block-diagonal operator and a Birman-Schwinger
analysis of the concentrated twist potential.
"""

from .exceptions import ConfigError, GeometryError, ResolutionError, SolverError, TwistLabError
from .operators import OperatorMatrix, lowest_eigenpairs, resolvent_difference_norm
from .oscillator import (Line1DGrid, assemble_h0, assemble_h0_dirichlet, assemble_h_eps,
                         dirichlet_green_kernel, green_kernel, resolvent_gap_1d)
from .transverse import (CrossSectionSpec, build_cross_section, coupling_matrices,
                         solve_dirichlet_modes)
from .twist import make_profile, scaled_twist
from .full_operator import MixedBasis, assemble_full, assemble_intermediate, form_difference_m
from .krein import birman_schwinger, expansion_residuals, local_green_expansion, trace_limits
from .rates import fit_rate
from .convergence import SweepConfig, bound_checks, run_sweep

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "GeometryError", "ResolutionError", "SolverError", "TwistLabError",
    "OperatorMatrix", "lowest_eigenpairs", "resolvent_difference_norm",
    "Line1DGrid", "assemble_h0", "assemble_h0_dirichlet", "assemble_h_eps",
    "dirichlet_green_kernel", "green_kernel", "resolvent_gap_1d",
    "CrossSectionSpec", "build_cross_section", "coupling_matrices", "solve_dirichlet_modes",
    "make_profile", "scaled_twist",
    "MixedBasis", "assemble_full", "assemble_intermediate", "form_difference_m",
    "birman_schwinger", "expansion_residuals", "local_green_expansion", "trace_limits",
    "fit_rate", "SweepConfig", "bound_checks", "run_sweep",
]
