import math

import numpy as np
import pytest
from scipy.special import jn_zeros

from pgap_gap import lambda_for_log_derivative, lambda_hat
from pgap_geometry import Params, Tolerances, model_T_kernel
from pgap_density import model_density
from pgap_pruefer import (
    constraint_residual,
    equation_residual,
    integrate_phase,
    phase_rhs,
    reconstruct_eigenfunction,
    shoot_from_center,
    shoot_from_left,
)
from pgap_ptrig import pi_p
from pgap_utils import SolverError


def zero(x):
    return 0.0


def test_rhs_is_alpha_where_sin_or_cos_vanish():
    params = Params(3.0, 0.0, 2.0, 1.0)
    lam = 5.0
    half = 0.5 * pi_p(3.0)
    for phi in (0.0, half, -half):
        assert phase_rhs(0.3, phi, lambda x: 1e6, params, lam) == pytest.approx(params.alpha(lam))


def test_rhs_rejects_non_finite_T():
    params = Params(2.0, 0.0, 2.0, 1.0)
    with pytest.raises(SolverError):
        phase_rhs(0.3, 0.4, lambda x: math.inf, params, 1.0)


def test_constant_phase_speed_when_T_vanishes():
    params = Params(2.0, 0.0, 2.0, math.pi)
    traj = integrate_phase(zero, params, 4.0, 0.5 * math.pi, 0.0, +1)
    # alpha = 2: phi reaches pi/2 after pi/4
    assert traj.b_hit == pytest.approx(0.75 * math.pi, rel=1e-8)
    assert traj.monotonicity_violations == 0
    assert traj.xs[0] == pytest.approx(0.5 * math.pi)


def test_no_hit_below_threshold():
    params = Params(2.0, 0.0, 2.0, math.pi)
    traj = integrate_phase(zero, params, 0.9, 0.5 * math.pi, 0.0, +1, sample=False)
    assert traj.b_hit is None
    assert not traj.has_hits


def test_backward_shot():
    params = Params(2.0, 0.0, 2.0, math.pi)
    traj = integrate_phase(zero, params, 4.0, 0.5 * math.pi, 0.0, -1)
    assert traj.a_hit == pytest.approx(0.25 * math.pi, rel=1e-8)
    assert np.all(np.diff(traj.xs) > 0)


def test_left_shot_with_p_3():
    params = Params(3.0, 0.0, 2.0, 1.0)
    alpha = 1.5 * pi_p(3.0)
    lam = params.lambda_of_alpha(alpha)
    traj = shoot_from_left(zero, params, lam)
    assert traj.a_hit == pytest.approx(1e-10)
    assert traj.b_hit == pytest.approx(1e-10 + 1.0 / 1.5, rel=1e-8)


def test_seed_and_lambda_checks():
    params = Params(2.0, 0.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        integrate_phase(zero, params, 1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        integrate_phase(zero, params, -1.0, 0.5, 0.0)


def test_center_shot_splits_at_the_break():
    params = Params(2.0, -1.0, 3.0, 1.0)
    traj = shoot_from_center(model_T_kernel(params), params, 40.0, breaks=(0.5,))
    assert traj.has_hits
    assert traj.a_hit == pytest.approx(1.0 - traj.b_hit, rel=1e-7)
    assert set(np.unique(traj.segment_ids)) == {0, 1}
    assert np.all(traj.xs[traj.segment_ids == 0] <= 0.5)
    assert np.all(traj.xs[traj.segment_ids == 1] >= 0.5)


@pytest.mark.parametrize('p', [1.5, 2.0, 3.0])
def test_eigenfunction_residuals_at_the_gap(p):
    params = Params(p, -1.0, 3.0, 1.0, Tolerances())
    result = lambda_hat(params)
    T_at = model_T_kernel(params)
    eig = reconstruct_eigenfunction(result.trajectory, T_at, params)
    h = model_density(params, 'h', grid=4)
    assert eig.e[np.argmin(np.abs(eig.xs - 0.5))] == pytest.approx(1.0, abs=1e-3)
    assert constraint_residual(eig, h.log_h_at, params) <= 1e-6
    assert equation_residual(eig, T_at, params) <= 1e-4
    # odd about the centre and monotone
    assert np.all(np.diff(eig.u) >= -1e-9)


def test_reconstruction_needs_both_hits():
    params = Params(2.0, 0.0, 2.0, math.pi)
    traj = integrate_phase(zero, params, 4.0, 0.5 * math.pi, 0.0, +1)
    with pytest.raises(SolverError):
        reconstruct_eigenfunction(traj, zero, params)


def vanishing_far_end(a):
    """T of h = (1 - x)^a on [0, 1]: unbounded below at x = 1."""
    def T_at(x):
        return -a / (1.0 - x)
    return T_at


@pytest.mark.parametrize('a, order', [(1.0, 1), (3.0, 2)])
def test_gap_of_a_density_vanishing_at_the_far_end(a, order):
    # with y = 1 - x the eigenfunctions are y^-nu J_nu(k y), nu = (a - 1)/2, and u'(0) = 0 needs J_{nu+1}(k) = 0
    params = Params(2.0, 0.0, 2.0, 1.0, Tolerances())
    result = lambda_for_log_derivative(vanishing_far_end(a), params, seed='left')
    assert result.lam == pytest.approx(jn_zeros(order, 1)[0] ** 2, rel=1e-6)


@pytest.mark.parametrize('p', [1.5, 2.0, 3.0])
def test_shots_into_a_vanishing_far_end_never_fail(p):
    params = Params(p, 0.0, 2.0, 1.0)
    T_at = vanishing_far_end(3.0)
    hits = [shoot_from_left(T_at, params, lam, sample=False).b_hit is not None
            for lam in np.geomspace(0.5, 500.0, 25)]
    assert not hits[0] and hits[-1]
    assert hits == sorted(hits)


def test_crossing_inside_the_stop_guard_is_extrapolated():
    params = Params(2.0, 0.0, 2.0, 1.0)
    guard = params.tol.stop_guard
    x0 = 0.5
    # T = 0: phi runs at speed alpha, so alpha = pi / (crossing - x0) puts the crossing past the stop
    crossing = 1.0 - 0.5 * guard
    traj = shoot_from_left(zero, params, (math.pi / (crossing - x0)) ** 2, seed=x0)
    assert traj.xs[-1] == pytest.approx(1.0 - guard, abs=1e-14)
    assert traj.b_hit == pytest.approx(crossing, abs=1e-12)
    beyond = (math.pi / (1.0 + 0.5 * guard - x0)) ** 2
    assert shoot_from_left(zero, params, beyond, seed=x0, sample=False).b_hit is None


@pytest.mark.parametrize('p', [1.5, 3.0])
def test_smaller_log_derivative_gives_the_smaller_phase(p):
    params = Params(p, -1.0, 3.0, 1.0)
    T_model = model_T_kernel(params)

    def T_lower(x):
        return T_model(x) - 2.0 - 3.0 * x
    lam = 2.0 * lambda_hat(params).lam
    upper = integrate_phase(T_model, params, lam, 0.5, 0.0, +1)
    lower = integrate_phase(T_lower, params, lam, 0.5, 0.0, +1)
    end = min(upper.xs[-1], lower.xs[-1])
    x = np.linspace(0.5, end, 301)
    phi_upper = np.interp(x, upper.xs, upper.phis)
    phi_lower = np.interp(x, lower.xs, lower.phis)
    half = 0.5 * pi_p(p)
    assert np.all((phi_upper >= -1e-12) & (phi_upper <= half + 1e-12))
    assert np.all(phi_lower <= phi_upper + 1e-6)
    assert lower.b_hit is None or lower.b_hit >= upper.b_hit


def test_hitting_points_move_inward_as_lambda_grows(hyperbolic):
    T_at = model_T_kernel(hyperbolic)
    lams = np.linspace(12.0, 60.0, 9)
    right = [integrate_phase(T_at, hyperbolic, lam, 0.5, 0.0, +1, sample=False).b_hit for lam in lams]
    left = [integrate_phase(T_at, hyperbolic, lam, 0.5, 0.0, -1, sample=False).a_hit for lam in lams]
    assert None not in right and None not in left
    assert np.all(np.diff(right) <= 0)
    assert np.all(np.diff(left) >= 0)
    nudged = integrate_phase(T_at, hyperbolic, lams[0] * (1.0 + 1e-8), 0.5, 0.0, +1, sample=False).b_hit
    assert abs(nudged - right[0]) <= 1e-3
