"""Thin wrapper for the split pgap modules."""

from pgap_constants import (
    SCHEMA_VERSION,
    EXIT_OK,
    EXIT_VALIDATION,
    EXIT_SOLVER,
    DENSITY_COLUMNS,
    EIGENFUNCTION_COLUMNS,
    SWEEP_COLUMNS,
    SWEEP_TABLE_FIELDS,
)
from pgap_utils import (
    DomainError,
    DensityFormatError,
    DensityValidationError,
    SolverError,
    get_parameters,
    setup_logging,
)
from pgap_ptrig import PExponent, PTrigTable, pi_p, sin_p, cos_p, sin_cos_p, signed_pow, identity_violation
from pgap_geometry import (
    Params,
    Tolerances,
    s_kappa,
    sigma_coeff,
    diameter_bound,
    cot_knd,
    model_h1,
    model_h2,
    model_h,
    model_T,
)
from pgap_density import (
    MCPDensity,
    ValidationReport,
    mcp_validate,
    random_density,
    model_density,
    smooth_density,
    rescale_density,
    uniform_distance,
)
from pgap_io import read_density_csv, write_density_csv, write_eigenfunction_csv
from pgap_pruefer import PrueferTrajectory, phase_rhs, integrate_phase, reconstruct_eigenfunction
from pgap_gap import (
    GapResult,
    lambda_hat,
    lambda_of_density,
    lambda_sharp,
    monotonicity_audit,
    scaling_audit,
    inequality_audit,
)
from pgap_oracle import DiscreteProblem, OracleResult, rayleigh_value, minimize_gap
from pgap_sweep_table import generate_sweep_table, load_sweep_table
from pgap_cli import args_parser, run, main

__all__ = [
    'SCHEMA_VERSION',
    'EXIT_OK',
    'EXIT_VALIDATION',
    'EXIT_SOLVER',
    'DENSITY_COLUMNS',
    'EIGENFUNCTION_COLUMNS',
    'SWEEP_COLUMNS',
    'SWEEP_TABLE_FIELDS',
    'DomainError',
    'DensityFormatError',
    'DensityValidationError',
    'SolverError',
    'get_parameters',
    'setup_logging',
    'PExponent',
    'PTrigTable',
    'pi_p',
    'sin_p',
    'cos_p',
    'sin_cos_p',
    'signed_pow',
    'identity_violation',
    'Params',
    'Tolerances',
    's_kappa',
    'sigma_coeff',
    'diameter_bound',
    'cot_knd',
    'model_h1',
    'model_h2',
    'model_h',
    'model_T',
    'MCPDensity',
    'ValidationReport',
    'mcp_validate',
    'random_density',
    'model_density',
    'smooth_density',
    'rescale_density',
    'uniform_distance',
    'read_density_csv',
    'write_density_csv',
    'write_eigenfunction_csv',
    'PrueferTrajectory',
    'phase_rhs',
    'integrate_phase',
    'reconstruct_eigenfunction',
    'GapResult',
    'lambda_hat',
    'lambda_of_density',
    'lambda_sharp',
    'monotonicity_audit',
    'scaling_audit',
    'inequality_audit',
    'DiscreteProblem',
    'OracleResult',
    'rayleigh_value',
    'minimize_gap',
    'generate_sweep_table',
    'load_sweep_table',
    'args_parser',
    'run',
    'main',
]

if __name__ == '__main__':
    main()
