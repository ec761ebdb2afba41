"""Desk-scale runs of the full pipeline; deselect with -m "not slow"."""
import itertools

import pytest

from pgap_density import model_density, random_density
from pgap_gap import inequality_audit, lambda_hat, lambda_of_density, lambda_sharp, monotonicity_audit
from pgap_geometry import Params, Tolerances
from pgap_oracle import DiscreteProblem, mesh_study, minimize_gap
from pgap_utils import spawn_rng

pytestmark = pytest.mark.slow

COMBINATIONS = [
    (p, K, N, 1.0 if K <= 0 else 2.0)
    for p, K, N in itertools.product([1.5, 2.0, 3.0], [-1.0, 0.0, 1.0], [2.0, 5.0])
]


@pytest.mark.parametrize('p, K, N, D', COMBINATIONS)
def test_model_attainment(p, K, N, D):
    params = Params(p, K, N, D)
    h = model_density(params, 'h', grid=1024)
    assert lambda_of_density(h, p).lam == pytest.approx(lambda_hat(params).lam, rel=1e-6)


def test_main_inequality_on_random_densities():
    configs = [Params(p, K, N, D) for p, K, N, D in COMBINATIONS]
    report = inequality_audit(configs, 12, seed=2024, grid=1024)
    assert report.details['samples'] == 12 * len(COMBINATIONS)
    assert report.passed, report.table[~report.table['passed']]


def test_rigidity_margin_for_nonpositive_K():
    configs = [Params(2.0, -1.0, 3.0, 1.0), Params(3.0, 0.0, 2.0, 1.0)]
    report = inequality_audit(configs, 25, seed=7, grid=1024)
    assert report.passed
    assert report.details['rigidity_probes'] > 0


@pytest.mark.parametrize('p', [1.5, 2.0, 3.0])
def test_strict_monotonicity_and_default_grid(p):
    report = monotonicity_audit(Params(p, -1.0, 3.0, 1.0), [0.5, 1.0, 2.0, 4.0])
    assert report.passed and report.details['strict']


@pytest.mark.parametrize('K, N, D', [(1.0, 2.0, 1.0), (1.0, 2.0, 3.0), (1.0, 3.0, 2.0),
                                     (0.5, 5.0, 4.0), (2.0, 4.0, 1.5), (1.0, 5.0, 5.0)])
def test_sharp_gap_for_positive_curvature(K, N, D):
    params = Params(2.0, K, N, D)
    first = lambda_sharp(params)
    assert first.lam <= lambda_hat(params).lam * (1 + 1e-12)
    assert lambda_sharp(params).minimizing_Dprime == first.minimizing_Dprime


@pytest.mark.parametrize('case', range(10))
def test_oracle_agrees_with_shooting(case):
    K, N = [(-1.0, 3.0), (0.0, 2.0), (1.0, 5.0), (-0.5, 4.0), (0.0, 3.0)][case % 5]
    params = Params(2.0, K, N, 1.0, Tolerances())
    h = random_density(params, spawn_rng(99, case), grid=2048)
    shooting = lambda_of_density(h, 2.0).lam
    oracle = minimize_gap(DiscreteProblem.from_density(h, 2.0, M=8192), restarts=3)
    assert oracle.value == pytest.approx(shooting, rel=2e-2)


def test_oracle_mesh_trend():
    params = Params(2.0, -1.0, 3.0, 1.0)
    h = model_density(params, 'h', grid=4)
    table = mesh_study(lambda M: DiscreteProblem.from_density(h, 2.0, M), [2048, 4096, 8192], restarts=2)
    differences = table['difference'].to_numpy()[1:]
    assert differences[1] <= differences[0]


@pytest.mark.parametrize('configs', [
    [Params(2.0, 0.0, 2.0, 1.0), Params(2.0, 1.0, 2.0, 2.0)],
    [Params(2.0, -1.0, 3.0, 1.0), Params(2.0, 0.0, 2.0, 3.0), Params(1.5, 1.0, 2.0, 2.0), Params(3.0, 1.0, 2.0, 2.5)],
])
def test_no_solver_failures_on_densities_vanishing_at_the_ends(configs):
    report = inequality_audit(configs, 6, seed=2024, grid=1024)
    assert report.table['error'].eq('').all(), report.table['error'].tolist()
    assert report.passed
