SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3

THREADS_ENV = 'PGAP_THREADS'
FLOAT_FORMAT = '%.17g'

DENSITY_COLUMNS = ['x', 'log_h', 'log_deriv']
EIGENFUNCTION_COLUMNS = ['x', 'phi', 'u', 'uprime']
SWEEP_COLUMNS = ['p', 'K', 'N', 'D', 'lambda', 'method', 'minimizing_Dprime', 'iterations', 'oracle_lambda']
SWEEP_SORT_KEYS = ['p', 'K', 'N', 'D']

MODEL_KINDS = ['h', 'h1', 'h2']
GAP_METHODS = ['shooting', 'infimum-scan']

# Exponents covered by the trig self test
TRIG_SELFTEST_EXPONENTS = [1.2, 1.5, 2.0, 3.0, 4.5]
TRIG_SELFTEST_POINTS = 10_000

# Default diameters walked by the monotonicity audit
AUDIT_D_GRID = [0.5, 1.0, 2.0, 4.0]
AUDIT_SCALE_FACTORS = [0.5, 2.0]

# Sweep table field descriptions for user guidance
SWEEP_TABLE_FIELDS = {
    'p': 'Exponent of the p-Laplacian (p > 1)',
    'K': 'Curvature lower bound',
    'N': 'Dimension upper bound (N > 1)',
    'D': 'Diameter of the support interval [0, D]',
    'lambda': 'Sharp p-spectral gap for (p, K, N, D)',
    'method': 'shooting=direct model solve, infimum-scan=minimum over sub-diameters (K > 0)',
    'minimizing_Dprime': 'Sub-diameter attaining the infimum (K > 0 only, empty otherwise)',
    'iterations': 'Number of shooting solves spent on the row',
    'oracle_lambda': 'Rayleigh-quotient cross-check value (only with --oracle)',
}
