"""Solver library for the Green-Naghdi shallow-water hierarchy with vorticity.

Dimensionless 1D/2D averaged systems with their vorticity closure cascades,
level-line velocity reconstruction, and exact conservation monitoring.
"""

__version__ = "0.1.0"

from .core import (Bathymetry, EnergyReport, Grid, ModelState, ScaleParams,
                   Tier, derive_depth)
from .diagnostics import ConservationTrace, conservation_monitor, energy_report
from .errors import (DegenerateStudy, GnvortError, GridMismatch, MeanNotZero,
                     NonConvergence, NonMonotoneTime, ParseError,
                     PositivityError, ValidationError)
from .models import (Tendency, constant_vorticity_cascade,
                     init_cascade_from_shear, rhs_gn1d_const, rhs_gn1d_general,
                     rhs_gn1d_medium, rhs_gn2d, rhs_gn_irrot, rhs_sv, tendency)
from .operators import (DispersiveSolveSettings, apply_C, apply_Cb, apply_D,
                        apply_Q1, apply_T, apply_dispersive, invert_dispersive,
                        level_dispersive_correction)
from .reconstruct import (ReconstructedVelocity, ShearLevels, evolve_levels,
                          reconstruct_velocity, rhs_omega_bar0,
                          rhs_shear_levels, uniform_levels,
                          vertical_vorticity_split)
from .timestep import StepSettings, rk4_step, stable_dt

__all__ = [
    "Bathymetry", "ConservationTrace", "DegenerateStudy",
    "DispersiveSolveSettings", "EnergyReport", "GnvortError", "Grid",
    "GridMismatch", "MeanNotZero", "ModelState", "NonConvergence",
    "NonMonotoneTime", "ParseError", "PositivityError", "ReconstructedVelocity",
    "ScaleParams", "ShearLevels", "StepSettings", "Tendency", "Tier",
    "ValidationError", "apply_C", "apply_Cb", "apply_D", "apply_Q1", "apply_T",
    "apply_dispersive", "conservation_monitor", "constant_vorticity_cascade",
    "derive_depth", "energy_report", "evolve_levels", "init_cascade_from_shear",
    "invert_dispersive", "level_dispersive_correction", "reconstruct_velocity",
    "rhs_gn1d_const", "rhs_gn1d_general", "rhs_gn1d_medium", "rhs_gn2d",
    "rhs_gn_irrot", "rhs_omega_bar0", "rhs_shear_levels", "rhs_sv", "rk4_step",
    "stable_dt", "tendency", "uniform_levels", "vertical_vorticity_split",
]
