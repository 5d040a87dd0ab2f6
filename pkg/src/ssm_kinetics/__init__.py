"""Joint polynomial-collocation estimation of chemical kinetics rate constants.

Piecewise power-series trial solutions are constrained both to interpolate
observed concentrations and to satisfy the kinetics ODE at collocation times;
the resulting algebraic system is solved simultaneously for the polynomial
coefficients and the rate constants.
"""

from .basis import Polynomial, TrialPolynomialSet, derivative_row, power_row
from .collocation import (
    CollocationSystem,
    Constraint,
    Segment,
    UnderdeterminedSystem,
    assemble,
    assemble_all,
    interpolation_constraints,
    residual_constraints,
)
from .experiments import (
    ErrorGrid,
    FitExperiment,
    NoiseSpec,
    SegmentSpec,
    StabilityRow,
    TRUE_RATE_CONSTANTS,
    apply_noise,
    error_grid,
    render_reports,
    reproduce,
    run_fit_experiment,
    run_stability_sweep,
)
from .mechanism import (
    ConcentrationState,
    EqualRateConstants,
    Mechanism,
    NonFiniteState,
    RateConstants,
    abc_mechanism,
    analytic_curve,
    analytic_solution,
    generate_dataset,
    integrate_rk4,
    read_dataset_csv,
    rhs_abc,
    write_dataset_csv,
)
from .solver import (
    FitResult,
    RankDeficientInnerSystem,
    SingularNormalEquations,
    SolverConfig,
    initial_guess,
    solve,
    solve_varpro,
    varpro_projection,
)

__version__ = "0.1.0"

__all__ = [
    "CollocationSystem",
    "ConcentrationState",
    "Constraint",
    "EqualRateConstants",
    "ErrorGrid",
    "FitExperiment",
    "FitResult",
    "Mechanism",
    "NoiseSpec",
    "NonFiniteState",
    "Polynomial",
    "RankDeficientInnerSystem",
    "RateConstants",
    "Segment",
    "SegmentSpec",
    "SingularNormalEquations",
    "SolverConfig",
    "StabilityRow",
    "TrialPolynomialSet",
    "TRUE_RATE_CONSTANTS",
    "UnderdeterminedSystem",
    "abc_mechanism",
    "analytic_curve",
    "analytic_solution",
    "apply_noise",
    "assemble",
    "assemble_all",
    "derivative_row",
    "error_grid",
    "generate_dataset",
    "initial_guess",
    "integrate_rk4",
    "interpolation_constraints",
    "power_row",
    "read_dataset_csv",
    "render_reports",
    "reproduce",
    "residual_constraints",
    "rhs_abc",
    "run_fit_experiment",
    "run_stability_sweep",
    "solve",
    "solve_varpro",
    "varpro_projection",
    "write_dataset_csv",
]
