"""Implicit finite-difference solver for the 2-D Fokker-Planck equation of tempered fBm.

The diffusion coefficient of tempered fractional Brownian motion is singular
(H < 1/2) or peaked (H > 1/2) in time. The solver marches on graded or
spliced time grids that absorb this behaviour, and reports mean squared
displacement and particle-cloud diagnostics.
"""

__version__ = "0.1.0"

from .analysis import MsdSeries, detect_plateau, moments, msd, normalize, sample_particles
from .errors import AccuracyError, ConfigError, DomainError, MassError, SolverDivergenceError, TfbmError
from .grids import GridLaw, TimeGrid, graded_case1, select_grid, spliced_case2, uniform
from .mesh import Field, SpatialMesh, flatten, gaussian_initial_data, initial_condition, unflatten
from .oracle import closed_form_total, exact_field, exact_msd, variance_growth
from .scheme import StepOperator, run, step
from .special import (
    ModelParams,
    bessel_k,
    diffusion_coefficient,
    gamma_upper_incomplete,
    scaled_k_bounds,
    t_max_formula,
)

__all__ = [
    "AccuracyError",
    "ConfigError",
    "DomainError",
    "Field",
    "GridLaw",
    "MassError",
    "ModelParams",
    "MsdSeries",
    "SolverDivergenceError",
    "SpatialMesh",
    "StepOperator",
    "TfbmError",
    "TimeGrid",
    "bessel_k",
    "closed_form_total",
    "detect_plateau",
    "diffusion_coefficient",
    "exact_field",
    "exact_msd",
    "flatten",
    "gamma_upper_incomplete",
    "gaussian_initial_data",
    "graded_case1",
    "initial_condition",
    "moments",
    "msd",
    "normalize",
    "run",
    "sample_particles",
    "scaled_k_bounds",
    "select_grid",
    "spliced_case2",
    "step",
    "t_max_formula",
    "unflatten",
    "uniform",
    "variance_growth",
]
