"""Small-noise expansions for stochastic heat equations with correlated noise."""
from .coefficients import (
    DiffusionCoefficient,
    coefficient_from_spec,
    irregular_preset,
    smooth_extension,
    smooth_preset,
    taylor_remainder_check,
)
from .expansion import (
    ExpansionStack,
    Remainder,
    assemble_remainder,
    sigma_diagnostic,
    solve_coefficients,
    solve_heat_coefficient,
)
from .grid import Field, TorusGrid, build_grid, divergence, gradient, heat_propagate, transform
from .noise import (
    NoisePath,
    SpectralMultiplier,
    build_multiplier,
    convolution_variance,
    covariance_kernel,
    k_reference,
    sample_increment,
    weighted_inner,
)
from .partitions import drift_coefficient, evaluate_j, lambda_set, lambda_set_m, weight
from .solver import (
    BlowUpError,
    SolverConfig,
    Trajectory,
    simulate,
    step_conservative,
    step_nonconservative,
    stopping_monitor,
)

__version__ = "0.1.0"
