"""
Eigenvalue solvers on top of the Prufer phase.

lambda_hat        sharp gap of the model density h_{K,N,D} (seed at the centre)
lambda_of_density gap of an arbitrary MCP(K,N) density (seed at the left end)
lambda_sharp      K <= 0: lambda_hat; K > 0: infimum of lambda_hat over D' in (0, D]

All three bracket the minimal lambda for which the phase reaches pi_p/2 inside
the interval and bisect on that hit predicate, which is monotone in lambda.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar
from tqdm import tqdm

from pgap_constants import AUDIT_SCALE_FACTORS
from pgap_density import MCPDensity, log_deriv_distance, mcp_validate, random_density
from pgap_geometry import Params, model_T, model_T_kernel
from pgap_pruefer import PrueferTrajectory, integrate_phase, shoot_from_center, shoot_from_left
from pgap_ptrig import pi_p
from pgap_utils import DensityValidationError, SolverError, spawn_rng, worker_count

logger = logging.getLogger('pgap.gap')

# Relative slack of the main inequality lambda_h >= lambda_hat
INEQUALITY_SLACK = 1e-6
# Log-derivative distance (relative to the model) above which a density is a rigidity probe
RIGIDITY_DISTANCE = 0.05
SCALING_THRESHOLD = 1e-5


@dataclass(eq=False)
class GapResult:
    lam: float
    bracket: tuple
    iterations: int
    trajectory: PrueferTrajectory = field(repr=False)
    method: str = 'shooting'
    diagnostics: dict = field(default_factory=dict, repr=False)
    params: Params = None
    minimizing_Dprime: float = None

    def to_dict(self) -> dict:
        out = {
            'lambda': self.lam,
            'bracket': list(self.bracket),
            'iterations': self.iterations,
            'method': self.method,
            'minimizing_Dprime': self.minimizing_Dprime,
        }
        if self.params is not None:
            out.update({'p': self.params.exponent, 'K': self.params.K, 'N': self.params.N, 'D': self.params.D})
        out['diagnostics'] = self.diagnostics
        return out


def _minimal_lambda(hits: Callable[[float], bool], params: Params) -> tuple:
    """
    Smallest lambda with hits(lambda) True, as a bracket (lo, hi, evaluations).
    hits(0) is False (constant phase); the upper end doubles from the T = 0 value.
    """
    tol = params.tol
    lo, hi = 0.0, (params.exponent - 1.0) * (pi_p(params.p) / params.D) ** params.exponent
    evaluations = 1
    doublings = 0
    while not hits(hi):
        if doublings >= tol.max_doublings:
            raise SolverError(f"No interior hit for lambda up to lambda_max={hi:.6g} "
                              f"(p={params.exponent}, K={params.K}, N={params.N}, D={params.D})")
        lo, hi = hi, 2.0 * hi
        doublings += 1
        evaluations += 1
    logger.debug(f"Bracket [{lo:.6g}, {hi:.6g}] after {doublings} doublings")

    while hi - lo > tol.lambda_tol * hi:
        mid = 0.5 * (lo + hi)
        evaluations += 1
        if hits(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi, evaluations


def lambda_for_log_derivative(T_at: Callable, params: Params, breaks=(), seed: str = 'left',
                              seed_x: float = None) -> GapResult:
    """
    Minimal lambda for a log-derivative T_at on [0, D].

    seed='left' shoots from (seed_x, -pi_p/2) and needs phi = pi_p/2 before D.
    seed='center' shoots forward from (D/2, 0); only valid when the problem is
    symmetric about D/2, as it is for the model density and for T = 0.
    """
    if seed == 'center':
        def hits(lam):
            return integrate_phase(T_at, params, lam, 0.5 * params.D, 0.0, +1, breaks=breaks,
                                   sample=False).b_hit is not None
    elif seed == 'left':
        def hits(lam):
            return shoot_from_left(T_at, params, lam, breaks=breaks, seed=seed_x, sample=False).b_hit is not None
    else:
        raise ValueError(f"Unknown seed {seed!r}; use 'left' or 'center'")

    lo, hi, evaluations = _minimal_lambda(hits, params)
    if seed == 'center':
        trajectory = shoot_from_center(T_at, params, hi, breaks=breaks)
    else:
        trajectory = shoot_from_left(T_at, params, hi, breaks=breaks, seed=seed_x)
    diagnostics = trajectory.diagnostics()
    diagnostics['seed'] = seed
    return GapResult(hi, (lo, hi), evaluations, trajectory, 'shooting', diagnostics, params)


def lambda_hat(params: Params) -> GapResult:
    """Sharp gap of h_{K,N,D}; the model is symmetric about D/2, so the forward hit decides."""
    return lambda_for_log_derivative(model_T_kernel(params), params, breaks=(0.5 * params.D,), seed='center')


def _left_seed(h: MCPDensity, params: Params) -> float:
    seed = params.tol.seed_offset * params.D
    if math.isfinite(float(h.log_deriv_at(seed))):
        return seed
    finite = np.flatnonzero(np.isfinite(h.log_deriv[1:-1]))
    moved = float(h.grid[1 + finite[0]])
    logger.warning(f"log-derivative not finite at the seed {seed:.3g}; seeding at x={moved:.6g} instead")
    return moved


def lambda_of_density(h: MCPDensity, p, tol=None) -> GapResult:
    """Gap of an MCP(K,N) density; rejects densities failing mcp_validate."""
    params = h.params(p, tol)
    report = mcp_validate(h, params)
    if not report.passed:
        raise DensityValidationError(
            f"density '{h.label}' is not MCP({h.K:g},{h.N:g}): violation {report.violation:.3e}", report=report)
    result = lambda_for_log_derivative(h.log_deriv_at, params, breaks=h.breaks, seed='left',
                                       seed_x=_left_seed(h, params))
    result.diagnostics['validation'] = report.to_dict()
    return result


def _local_minima(values: list) -> list:
    n = len(values)
    out = []
    for i, v in enumerate(values):
        if (i == 0 or v <= values[i - 1]) and (i == n - 1 or v <= values[i + 1]):
            out.append(i)
    return out


def lambda_sharp(params: Params) -> GapResult:
    """
    lambda^p_{K,N,D}. For K > 0 lambda_hat is scanned over a logarithmic grid of
    D' in [D/64, D]; the best local minima are refined by golden section and
    ties go to the smallest D'.
    """
    if params.K <= 0:
        return lambda_hat(params)

    tol = params.tol
    cache = {}

    def solve(Dp: float) -> float:
        Dp = float(min(Dp, params.D))
        if Dp not in cache:
            cache[Dp] = lambda_hat(params.with_D(Dp))
        return cache[Dp].lam

    grid = np.geomspace(params.D / 64.0, params.D, max(int(tol.scan_points), 3))
    grid[-1] = params.D
    values = [solve(d) for d in grid]

    minima = sorted(_local_minima(values), key=lambda i: (values[i], grid[i]))[:max(int(tol.keep_minima), 1)]
    candidates = [(values[i], float(grid[i])) for i in minima]
    for i in minima:
        if not (0 < i < len(grid) - 1 and values[i] < values[i - 1] and values[i] < values[i + 1]):
            continue
        try:
            res = minimize_scalar(solve, bracket=(grid[i - 1], grid[i], grid[i + 1]), method='golden',
                                  tol=tol.golden_tol)
            Dp = float(min(res.x, params.D))
            candidates.append((solve(Dp), Dp))
        except ValueError as e:
            logger.debug(f"Golden refinement around D'={grid[i]:.6g} skipped: {e}")

    lam, Dp = min(candidates)
    best = cache[Dp]
    diagnostics = dict(best.diagnostics)
    diagnostics.update({
        'scan_Dprime': [float(d) for d in grid],
        'scan_lambda': values,
        'lambda_at_D': values[-1],
        'evaluations': len(cache),
    })
    logger.debug(f"Infimum {lam:.10g} at D'={Dp:.10g} (lambda_hat(D)={values[-1]:.10g})")
    return GapResult(lam, best.bracket, sum(r.iterations for r in cache.values()), best.trajectory,
                     'infimum-scan', diagnostics, params, Dp)


@dataclass(eq=False)
class AuditReport:
    name: str
    passed: bool
    worst_margin: float
    table: pd.DataFrame = field(repr=False)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {'name': self.name, 'passed': self.passed, 'worst_margin': self.worst_margin}
        out.update(self.details)
        out['rows'] = self.table.to_dict(orient='records')
        return out


def monotonicity_audit(params: Params, D_grid) -> AuditReport:
    """
    lambda_sharp along a nondecreasing D grid. Always checks D -> lambda nonincreasing;
    for K <= 0 also a strict decrease by more than 10x the bracket tolerance between distinct D.
    """
    D_grid = [float(d) for d in D_grid]
    if any(b < a for a, b in zip(D_grid, D_grid[1:])):
        raise ValueError(f"D grid must be nondecreasing (got {D_grid})")
    tol = params.tol
    results = [lambda_sharp(params.with_D(D)) for D in D_grid]
    table = pd.DataFrame({
        'D': D_grid,
        'lambda': [r.lam for r in results],
        'method': [r.method for r in results],
        'minimizing_Dprime': [r.minimizing_Dprime for r in results],
    })

    slack = 10.0 * tol.lambda_tol if params.K <= 0 else max(10.0 * tol.lambda_tol, tol.golden_tol)
    strict_margin = 10.0 * tol.lambda_tol
    nonincreasing, strict = True, params.K <= 0
    worst = math.inf
    for (Da, a), (Db, b) in zip(zip(D_grid, table['lambda']), zip(D_grid[1:], table['lambda'][1:])):
        drop = (a - b) / a
        if drop < -slack:
            nonincreasing = False
        if Db > Da:
            worst = min(worst, drop)
            if params.K <= 0 and drop <= strict_margin:
                strict = False
    passed = nonincreasing and (strict or params.K > 0)
    return AuditReport('monotonicity', passed, worst if math.isfinite(worst) else 0.0, table,
                       {'nonincreasing': nonincreasing, 'strict': strict if params.K <= 0 else None,
                        'p': params.exponent, 'K': params.K, 'N': params.N})


def scaling_audit(params: Params, factors=AUDIT_SCALE_FACTORS, threshold: float = SCALING_THRESHOLD) -> AuditReport:
    """lambda_hat(c^2 K, N, D) against c^p lambda_hat(K, N, cD)."""
    rows = []
    for c in factors:
        try:
            right = params.with_D(c * params.D)
            left = right.scaled(1.0 / c)
        except ValueError as e:
            logger.warning(f"Scaling factor c={c} skipped: {e}")
            continue
        lhs = lambda_hat(left).lam
        rhs = c ** params.exponent * lambda_hat(right).lam
        rows.append({'c': float(c), 'lhs': lhs, 'rhs': rhs, 'rel_error': abs(lhs - rhs) / abs(rhs)})
    table = pd.DataFrame(rows, columns=['c', 'lhs', 'rhs', 'rel_error'])
    worst = float(table['rel_error'].max()) if len(table) else 0.0
    return AuditReport('scaling', worst <= threshold, worst, table, {'threshold': threshold})


def _model_norm(params: Params, grid: np.ndarray) -> float:
    x = grid[1:-1]
    return float(np.trapezoid(np.abs(model_T(x, params)), x))


def inequality_audit(configs, seeds: int, seed: int = 0, degree: int = 8, grid: int = 4096,
                     workers: int = None, progress: bool = False) -> AuditReport:
    """
    Random densities (Bernstein theta) for each configuration against lambda_hat.

    Every row must satisfy lambda_h >= lambda_hat (1 - 1e-6). For K <= 0 a density whose
    log-derivative sits at relative L1 distance >= 0.05 from the model must also beat
    lambda_hat by more than 10x the bracket tolerance.
    """
    configs = list(configs)
    references = {}
    jobs = []
    for k, params in enumerate(configs):
        references[k] = lambda_hat(params).lam
        for s in range(int(seeds)):
            jobs.append((k, s, k * int(seeds) + s))

    def run_job(job):
        k, s, index = job
        params = configs[k]
        lam_hat = references[k]
        h = random_density(params, spawn_rng(seed, index), degree=degree, grid=grid)
        row = {'p': params.exponent, 'K': params.K, 'N': params.N, 'D': params.D, 'sample': s,
               'lambda_h': None, 'lambda_hat': lam_hat, 'margin': None, 'relative_margin': None,
               'relative_distance': None, 'rigidity_probe': False, 'passed': False, 'error': ''}
        try:
            lam_h = lambda_of_density(h, params.p, params.tol).lam
        except (SolverError, DensityValidationError) as e:
            row['error'] = str(e)
            return row
        distance = log_deriv_distance(h, lambda x: model_T(x, params)) / _model_norm(params, h.grid)
        margin = lam_h - lam_hat
        probe = params.K <= 0 and distance >= RIGIDITY_DISTANCE
        slack = max(INEQUALITY_SLACK, 10.0 * params.tol.lambda_tol)
        passed = margin >= -slack * lam_hat
        if probe:
            passed = passed and margin > 10.0 * params.tol.lambda_tol * lam_hat
        row.update({'lambda_h': lam_h, 'margin': margin, 'relative_margin': margin / lam_hat,
                    'relative_distance': distance, 'rigidity_probe': probe, 'passed': passed})
        return row

    rows = []
    pbar = tqdm(total=len(jobs), desc="Random densities", unit=" density", disable=not progress, ncols=80)
    with ThreadPoolExecutor(max_workers=workers or worker_count()) as executor:
        futures = {executor.submit(run_job, job): job for job in jobs}
        for future in as_completed(futures):
            rows.append(future.result())
            pbar.update(1)
    pbar.close()
    rows.sort(key=lambda r: (r['p'], r['K'], r['N'], r['D'], r['sample']))

    table = pd.DataFrame(rows)
    failures = int((~table['passed']).sum()) if len(table) else 0
    margins = table['relative_margin'].dropna()
    worst = float(margins.min()) if len(margins) else 0.0
    probes = table[table['rigidity_probe']] if len(table) else table
    details = {
        'samples': len(table),
        'failures': failures,
        'rigidity_probes': int(len(probes)),
        'worst_rigidity_margin': float(probes['relative_margin'].min()) if len(probes) else None,
        'seed': seed,
    }
    if failures:
        logger.warning(f"{failures} of {len(table)} random densities failed the inequality audit")
    return AuditReport('inequality', failures == 0, worst, table, details)
