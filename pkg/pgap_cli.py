import argparse
import logging
import math
import sys

import numpy as np
import pandas as pd

from pgap_constants import (
    AUDIT_D_GRID,
    AUDIT_SCALE_FACTORS,
    EXIT_OK,
    EXIT_SOLVER,
    EXIT_VALIDATION,
    FLOAT_FORMAT,
    MODEL_KINDS,
    SWEEP_COLUMNS,
    TRIG_SELFTEST_EXPONENTS,
    TRIG_SELFTEST_POINTS,
)
from pgap_density import mcp_validate, model_density, random_density, smooth_density
from pgap_gap import (
    inequality_audit,
    lambda_hat,
    lambda_of_density,
    lambda_sharp,
    monotonicity_audit,
    scaling_audit,
)
from pgap_geometry import Params, Tolerances, model_T_kernel
from pgap_io import emit_csv, emit_json, read_density_csv, write_density_csv, write_eigenfunction_csv
from pgap_oracle import DiscreteProblem, mesh_study, minimize_gap
from pgap_pruefer import constraint_residual, equation_residual, reconstruct_eigenfunction
from pgap_ptrig import identity_violation, pi_p, sin_cos_p, trig_table
from pgap_sweep_table import _normalize_table, generate_sweep_table, nonincreasing_in_D
from pgap_utils import (
    DensityFormatError,
    SolverError,
    get_parameters,
    parse_float_list,
    setup_logging,
    spawn_rng,
)

logger = logging.getLogger('pgap.cli')


def _tolerances(args, config: dict) -> Tolerances:
    overrides = {}
    if getattr(args, 'tol', None) is not None:
        overrides['lambda_tol'] = args.tol
    return Tolerances.from_config(config, **overrides)


def _grid(args, config: dict) -> int:
    if getattr(args, 'grid', None) is not None:
        return args.grid
    return int(config.get('Density', {}).get('grid', 4096))


def _oracle_settings(args, config: dict) -> dict:
    oracle = config.get('Oracle', {}) or {}
    return {
        'M': args.M if getattr(args, 'M', None) is not None else int(oracle.get('M', 8192)),
        'restarts': args.restarts if getattr(args, 'restarts', None) is not None else int(oracle.get('restarts', 3)),
        'max_iter': int(oracle.get('max_iter', 500)),
        'gtol': float(oracle.get('gtol', 1e-6)),
    }


def _params(args, config: dict) -> Params:
    return Params(args.p, args.K, args.N, args.D, _tolerances(args, config))


def _load_density(args, config: dict):
    h = read_density_csv(args.density, args.K, args.N, args.D)
    if getattr(args, 'smooth', None):
        h = smooth_density(h, args.smooth)
    return h


def cmd_gap(args, config: dict) -> int:
    if args.density:
        h = _load_density(args, config)
        result = lambda_of_density(h, args.p, _tolerances(args, config))
    else:
        result = lambda_sharp(_params(args, config))

    if args.csv:
        row = result.to_dict()
        emit_csv(_normalize_table(pd.DataFrame([{c: row.get(c) for c in SWEEP_COLUMNS}])), args.out)
    else:
        emit_json(result.to_dict(), args.out)
    return EXIT_OK


def cmd_sweep(args, config: dict) -> int:
    settings = _oracle_settings(args, config)
    table = generate_sweep_table(args.p_list, args.K_list, args.N_list, args.D_list,
                                 tol=_tolerances(args, config), oracle=args.oracle,
                                 oracle_M=settings['M'], restarts=settings['restarts'])
    emit_csv(table, args.out)
    if args.out:
        total = len(args.p_list) * len(args.K_list) * len(args.N_list) * len(args.D_list)
        print(
            "Run summary: total={total} rows={rows} skipped={skipped} nonincreasing_in_D={mono}".format(
                total=total,
                rows=len(table),
                skipped=total - len(table),
                mono=nonincreasing_in_D(table)
            )
        )
    return EXIT_OK


def _emit_value(value: float, path: str = None) -> None:
    text = FLOAT_FORMAT % value + '\n'
    if path:
        with open(path, 'w') as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def cmd_trig(args, config: dict) -> int:
    if args.eval is not None:
        if args.p is None:
            raise ValueError("trig --eval needs --p")
        if args.eval == 'pi':
            _emit_value(pi_p(args.p), args.out)
            return EXIT_OK
        if args.t is None:
            raise ValueError(f"trig --eval {args.eval} needs --t")
        s, c = sin_cos_p(args.t, args.p)
        _emit_value(s if args.eval == 'sin' else c, args.out)
        return EXIT_OK

    trig = config.get('Trig', {}) or {}
    tol = float(trig.get('table_tol', 1e-10))
    exponents = [args.p] if args.p is not None else args.p_list
    report = {'tol': tol, 'points': args.points, 'exponents': []}
    passed = True
    for p in exponents:
        table = trig_table(p, int(trig.get('table_nodes', 1025)), tol)
        violation = identity_violation(p, args.points)
        entry = {'p': p, 'pi_p': pi_p(p), 'identity_violation': violation, 'table_error': table.error_bound}
        if p == 2.0:
            t = np.linspace(-2.0 * math.pi, 2.0 * math.pi, args.points)
            entry['sin_error'] = float(np.max(np.abs(sin_cos_p(t, 2.0)[0] - np.sin(t))))
        if args.t is not None:
            entry['sin_p'], entry['cos_p'] = sin_cos_p(args.t, p)
        entry['passed'] = violation <= tol
        passed = passed and entry['passed']
        report['exponents'].append(entry)
    worst = max(e['identity_violation'] for e in report['exponents'])
    report['max_identity_violation'] = worst
    report['passed'] = passed
    if args.selftest:
        _emit_value(worst, args.out)
    else:
        emit_json(report, args.out)
    if args.out:
        print(f"Run summary: exponents={len(exponents)} max_identity_violation={worst:.3e} passed={passed}")
    return EXIT_OK if passed else EXIT_SOLVER


def cmd_density(args, config: dict) -> int:
    if args.action == 'validate':
        h = read_density_csv(args.file, args.K, args.N, args.D)
        tolerances = Tolerances.from_config(config)
        tol = tolerances.validation_tol if args.validation_tol is None else args.validation_tol
        report = mcp_validate(h, tol=tol, pairs=tolerances.validation_pairs)
        payload = report.to_dict()
        payload.update({'file': args.file, 'K': h.K, 'N': h.N, 'D': h.D, 'nodes': int(h.grid.size)})
        emit_json(payload, args.out)
        return EXIT_OK if report.passed else EXIT_VALIDATION

    params = Params(2.0, args.K, args.N, args.D, _tolerances(args, config))
    grid = _grid(args, config)
    if args.action == 'random':
        h = random_density(params, spawn_rng(args.seed, 0), degree=args.degree, grid=grid)
    else:
        h = model_density(params, kind=args.kind, grid=grid)
    text = write_density_csv(h, args.out)
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_eigenfunction(args, config: dict) -> int:
    if args.density:
        h = _load_density(args, config)
        result = lambda_of_density(h, args.p, _tolerances(args, config))
        T_at, log_h_at = h.log_deriv_at, h.log_h_at
    else:
        params = _params(args, config)
        result = lambda_hat(params)
        T_at = model_T_kernel(params)
        log_h_at = model_density(params, 'h', grid=4).log_h_at
    params = result.params
    eig = reconstruct_eigenfunction(result.trajectory, T_at, params)
    residual = equation_residual(eig, T_at, params)
    constraint = constraint_residual(eig, log_h_at, params)
    logger.info(f"Eigenfunction at lambda={result.lam:.12g}: equation residual {residual:.3e}, "
                f"constraint residual {constraint:.3e}")

    if args.json:
        payload = result.to_dict()
        payload.update({'equation_residual': residual, 'constraint_residual': constraint,
                        'x': eig.xs, 'phi': eig.phis, 'u': eig.u, 'uprime': eig.uprime})
        emit_json(payload, args.out)
    else:
        text = write_eigenfunction_csv(eig, args.out)
        if not args.out:
            sys.stdout.write(text)
    return EXIT_OK


def cmd_oracle(args, config: dict) -> int:
    settings = _oracle_settings(args, config)
    if args.density:
        h = _load_density(args, config)
    else:
        h = model_density(_params(args, config), 'h', grid=4)

    def build(M):
        return DiscreteProblem.from_density(h, args.p, M)

    result = minimize_gap(build(settings['M']), restarts=settings['restarts'], max_iter=settings['max_iter'],
                          gtol=settings['gtol'], seed=args.seed)
    payload = result.to_dict()
    payload.update({'p': args.p, 'K': h.K, 'N': h.N, 'D': h.D})
    if args.mesh:
        trend = mesh_study(build, [int(m) for m in args.mesh], restarts=settings['restarts'],
                           max_iter=settings['max_iter'], gtol=settings['gtol'], seed=args.seed)
        payload['mesh'] = trend.to_dict(orient='records')
    emit_json(payload, args.out)
    return EXIT_OK


def cmd_audit(args, config: dict) -> int:
    params = _params(args, config)
    trig = config.get('Trig', {}) or {}
    trig_tol = float(trig.get('table_tol', 1e-10))
    violation = identity_violation(params.p, TRIG_SELFTEST_POINTS)
    audits = [{'name': 'trig-identity', 'passed': violation <= trig_tol, 'worst_margin': violation}]

    audits.append(monotonicity_audit(params, args.D_grid).to_dict())
    audits.append(scaling_audit(params, args.factors).to_dict())
    if args.seeds > 0:
        audits.append(inequality_audit([params], args.seeds, seed=args.seed, degree=args.degree,
                                       grid=_grid(args, config), progress=sys.stdout.isatty() and bool(args.out)).to_dict())

    passed = all(a['passed'] for a in audits)
    emit_json({'passed': passed, 'p': params.exponent, 'K': params.K, 'N': params.N, 'D': params.D,
               'audits': audits}, args.out)
    if args.out:
        print("Run summary: audits={n} passed={ok} failed={bad}".format(
            n=len(audits), ok=sum(a['passed'] for a in audits), bad=sum(not a['passed'] for a in audits)))
    return EXIT_OK if passed else EXIT_VALIDATION


def _float_list(text: str) -> list:
    try:
        return parse_float_list(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def args_parser() -> argparse.ArgumentParser:
    """
    Parse command-line arguments for the pgap tool.
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None, help='Path to config file (YAML or JSON)')
    common.add_argument('--verbose', action='store_true', help='Enable debug logging on stderr')
    common.add_argument('--out', type=str, default=None, help='Output file (default: standard output)')

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument('--p', type=float, required=True, help='Exponent p > 1')
    model.add_argument('--K', type=float, required=True, help='Curvature lower bound')
    model.add_argument('--N', type=float, required=True, help='Dimension upper bound N > 1')
    model.add_argument('--D', type=float, required=True, help='Diameter')
    model.add_argument('--tol', type=float, default=None, help='Relative eigenvalue bracket (default 1e-8)')

    parser = argparse.ArgumentParser(
        prog='pgap',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        description=(
            "\n"
            "Sharp p-spectral gaps of one-dimensional MCP(K,N) densities\n\n"
            "Subcommands:\n"
            "    gap            Sharp gap for (p, K, N, D), or the gap of a density file\n"
            "    sweep          Sharp gaps over a parameter grid (CSV table)\n"
            "    trig           Evaluate sin_p, cos_p, pi_p or self test the identity\n"
            "    density        Validate a density file, or export random / model densities\n"
            "    eigenfunction  Eigenfunction samples x,phi,u,uprime at the computed gap\n"
            "    oracle         Rayleigh-quotient minimizer cross-check\n"
            "    audit          Monotonicity, scaling and random-density inequality audits\n\n"
            "Exit codes:\n"
            "    0  success\n"
            "    2  invalid input, malformed density file or failed validation/audit\n"
            "    3  solver failure\n"
        ),
    )
    sub = parser.add_subparsers(dest='command', required=True)

    p_gap = sub.add_parser('gap', parents=[common, model], help='Sharp p-spectral gap')
    p_gap.add_argument('--density', type=str, default=None, help='Density CSV (x,log_h,log_deriv)')
    p_gap.add_argument('--smooth', type=float, default=None, help='Mollify the density with this width first')
    fmt = p_gap.add_mutually_exclusive_group()
    fmt.add_argument('--json', action='store_true', help='JSON report (default)')
    fmt.add_argument('--csv', action='store_true', help='Single CSV row')
    p_gap.set_defaults(handler=cmd_gap)

    p_sweep = sub.add_parser('sweep', parents=[common], help='Parameter sweep table')
    p_sweep.add_argument('--p-list', type=_float_list, required=True, help='Comma-separated exponents')
    p_sweep.add_argument('--K-list', type=_float_list, required=True, help='Comma-separated curvature bounds')
    p_sweep.add_argument('--N-list', type=_float_list, required=True, help='Comma-separated dimension bounds')
    p_sweep.add_argument('--D-list', type=_float_list, required=True, help='Comma-separated diameters')
    p_sweep.add_argument('--tol', type=float, default=None, help='Relative eigenvalue bracket')
    p_sweep.add_argument('--oracle', action='store_true', help='Add the oracle_lambda column')
    p_sweep.add_argument('--M', type=int, default=None, help='Oracle mesh cells')
    p_sweep.add_argument('--restarts', type=int, default=None, help='Oracle restarts')
    p_sweep.set_defaults(handler=cmd_sweep)

    p_trig = sub.add_parser('trig', parents=[common], allow_abbrev=False,
                            help='Generalized trigonometric functions and their self test')
    p_trig.add_argument('--p', type=float, default=None, help='Exponent p > 1')
    p_trig.add_argument('--eval', choices=['sin', 'cos', 'pi'], default=None,
                        help='Print sin_p(t), cos_p(t) or pi_p at full precision')
    p_trig.add_argument('--t', type=float, default=None, help='Argument of sin_p / cos_p')
    p_trig.add_argument('--selftest', action='store_true', help='Print the largest identity violation only')
    p_trig.add_argument('--p-list', type=_float_list, default=list(TRIG_SELFTEST_EXPONENTS),
                        help='Exponents to self test when --p is not given')
    p_trig.add_argument('--points', type=int, default=TRIG_SELFTEST_POINTS, help='Self test points per exponent')
    p_trig.set_defaults(handler=cmd_trig)

    p_density = sub.add_parser('density', help='Density files')
    actions = p_density.add_subparsers(dest='action', required=True)
    d_validate = actions.add_parser('validate', parents=[common], help='Check a density file for MCP(K,N)')
    d_validate.add_argument('--file', type=str, required=True, help='Density CSV')
    d_validate.add_argument('--K', type=float, required=True)
    d_validate.add_argument('--N', type=float, required=True)
    d_validate.add_argument('--D', type=float, default=None, help='Expected diameter (last node)')
    d_validate.add_argument('--validation-tol', type=float, default=None, help='Violation tolerance')
    for name, helptext in (('random', 'Random MCP density (Bernstein theta)'), ('model', 'Model density export')):
        action = actions.add_parser(name, parents=[common], help=helptext)
        action.add_argument('--K', type=float, required=True)
        action.add_argument('--N', type=float, required=True)
        action.add_argument('--D', type=float, required=True)
        action.add_argument('--grid', type=int, default=None, help='Grid cells (default 4096)')
        if name == 'random':
            action.add_argument('--seed', type=int, default=0, help='64-bit seed')
            action.add_argument('--degree', type=int, default=8, help='Bernstein degree')
        else:
            action.add_argument('--kind', choices=MODEL_KINDS, default='h', help='h, h1 or h2')
    p_density.set_defaults(handler=cmd_density)

    p_eig = sub.add_parser('eigenfunction', parents=[common, model], help='Eigenfunction at the gap')
    p_eig.add_argument('--density', type=str, default=None, help='Density CSV instead of the model')
    p_eig.add_argument('--smooth', type=float, default=None, help='Mollify the density with this width first')
    p_eig.add_argument('--json', action='store_true', help='JSON with residuals instead of CSV samples')
    p_eig.set_defaults(handler=cmd_eigenfunction)

    p_oracle = sub.add_parser('oracle', parents=[common, model], help='Rayleigh-quotient minimizer')
    p_oracle.add_argument('--density', type=str, default=None, help='Density CSV instead of the model')
    p_oracle.add_argument('--smooth', type=float, default=None, help='Mollify the density with this width first')
    p_oracle.add_argument('--M', type=int, default=None, help='Mesh cells (default 8192)')
    p_oracle.add_argument('--restarts', type=int, default=None, help='Number of starts (default 3)')
    p_oracle.add_argument('--seed', type=int, default=0, help='Seed of the random restarts')
    p_oracle.add_argument('--mesh', type=_float_list, default=None, help='Also report values on these meshes')
    p_oracle.add_argument('--json', action='store_true', help='JSON report (the only format)')
    p_oracle.set_defaults(handler=cmd_oracle)

    p_audit = sub.add_parser('audit', parents=[common, model], help='Property audits')
    p_audit.add_argument('--D-grid', type=_float_list, default=list(AUDIT_D_GRID), help='Diameters for monotonicity')
    p_audit.add_argument('--factors', type=_float_list, default=list(AUDIT_SCALE_FACTORS), help='Scaling factors c')
    p_audit.add_argument('--seeds', type=int, default=50, help='Random densities in the inequality audit')
    p_audit.add_argument('--seed', type=int, default=0, help='64-bit seed')
    p_audit.add_argument('--degree', type=int, default=8, help='Bernstein degree of random densities')
    p_audit.add_argument('--grid', type=int, default=None, help='Grid cells of random densities')
    p_audit.set_defaults(handler=cmd_audit)
    return parser


def run(argv=None) -> int:
    """Parse argv, dispatch, and map errors to exit codes."""
    parser = args_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_VALIDATION

    try:
        config = get_parameters(args.config)
        setup_logging(config, args.verbose)
        return args.handler(args, config)
    except DensityFormatError as e:
        logger.error(f"{getattr(args, 'density', None) or getattr(args, 'file', '')}: {e}")
        return EXIT_VALIDATION
    except ValueError as e:
        logger.error(str(e))
        return EXIT_VALIDATION
    except SolverError as e:
        logger.error(f"Solver failure: {e}")
        return EXIT_SOLVER


def main(argv=None):
    sys.exit(run(argv))


if __name__ == '__main__':
    main()
