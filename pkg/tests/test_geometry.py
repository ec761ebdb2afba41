import math

import numpy as np
import pytest

from pgap_geometry import (
    Params,
    Tolerances,
    cot_knd,
    diameter_bound,
    log_model_h,
    log_s_kappa,
    model_h,
    model_T,
    model_T_jump,
    model_T_kernel,
    s_kappa,
    sigma_coeff,
)
from pgap_utils import DomainError, get_parameters


def test_s_kappa_profiles():
    assert s_kappa(0.7, 0.0) == 0.7
    assert s_kappa(1.0, 1.0) == pytest.approx(math.sin(1.0))
    assert s_kappa(1.0, -1.0) == pytest.approx(math.sinh(1.0))
    assert s_kappa(0.5, 4.0) == pytest.approx(math.sin(1.0) / 2.0)


def test_s_kappa_domain():
    with pytest.raises(DomainError):
        s_kappa(-0.1, 0.0)
    with pytest.raises(DomainError):
        s_kappa(math.pi, 1.0)


def test_log_s_kappa_is_stable_for_large_arguments():
    assert log_s_kappa(1000.0, -1.0) == pytest.approx(1000.0 - math.log(2.0), rel=1e-14)
    assert log_s_kappa(0.0, -1.0) == -math.inf


def test_sigma_coeff():
    assert sigma_coeff(0.5, 1.0, -1.0, 2.0) == pytest.approx(0.443409, abs=1e-6)
    assert sigma_coeff(0.3, 2.0, 0.0, 3.0) == pytest.approx(0.3)
    assert sigma_coeff(1.0, 1.0, 1.0, 3.0) == pytest.approx(1.0)
    assert sigma_coeff(0.5, 10.0, 1.0, 2.0) == math.inf
    with pytest.raises(ValueError):
        sigma_coeff(1.5, 1.0, 0.0, 2.0)


def test_diameter_bound():
    assert diameter_bound(1.0, 3.0) == pytest.approx(math.pi * math.sqrt(2.0))
    assert diameter_bound(0.0, 3.0) == math.inf
    assert diameter_bound(-2.0, 3.0) == math.inf
    with pytest.raises(ValueError):
        diameter_bound(1.0, 1.0)


def test_cot_knd():
    assert cot_knd(1.0, -1.0, 2.0) == pytest.approx(1.0 / math.tanh(1.0), rel=1e-12)
    assert cot_knd(1.0, -1.0, 2.0) == pytest.approx(1.3130353, rel=1e-7)
    assert cot_knd(2.0, 0.0, 5.0) == pytest.approx(2.0)
    assert cot_knd(0.0, 0.0, 3.0) == math.inf
    assert cot_knd(math.pi, 1.0, 2.0) == -math.inf
    with pytest.raises(DomainError):
        cot_knd(0.0, 0.0, 3.0, singular='raise')
    with pytest.raises(DomainError):
        cot_knd(4.0, 1.0, 2.0)


def test_params_validation():
    with pytest.raises(ValueError):
        Params(1.0, 0.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        Params(2.0, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        Params(2.0, 0.0, 2.0, 0.0)
    with pytest.raises(ValueError):
        Params(2.0, 1.0, 2.0, 3.2)


def test_params_clamps_to_diameter_bound():
    bound = diameter_bound(1.0, 2.0)
    params = Params(2.0, 1.0, 2.0, bound * (1 + 1e-14))
    assert params.D == bound


def test_params_scaling():
    params = Params(3.0, -1.0, 3.0, 1.0)
    scaled = params.scaled(2.0)
    assert (scaled.K, scaled.N, scaled.D) == (-0.25, 3.0, 2.0)
    assert params.alpha(params.lambda_of_alpha(1.7)) == pytest.approx(1.7)
    assert params.with_D(0.5).D == 0.5


def test_model_is_symmetric():
    params = Params(2.0, -1.0, 3.0, 1.0)
    x = np.linspace(0.0, 1.0, 101)
    x = x[np.abs(x - 0.5) > 1e-12]
    np.testing.assert_allclose(model_h(x, params), model_h(1.0 - x, params), rtol=1e-12)
    np.testing.assert_allclose(model_T(x, params), -model_T(1.0 - x, params), rtol=1e-12)


def test_model_T_branches_and_jump():
    params = Params(2.0, 0.0, 3.0, 2.0)
    assert model_T(1.0, params) == pytest.approx(2.0)
    assert model_T(1.0, params, side=-1) == pytest.approx(-2.0)
    assert model_T_jump(params) == pytest.approx(4.0)
    assert log_model_h(1.0, params) == pytest.approx(0.0)


def test_model_T_kernel_matches_array_version():
    for params in (Params(2.0, -1.0, 3.0, 1.0), Params(1.5, 0.0, 2.0, 2.0), Params(3.0, 1.0, 5.0, 2.0)):
        T_at = model_T_kernel(params)
        for x in np.linspace(0.01, params.D - 0.01, 37):
            assert T_at(float(x)) == pytest.approx(model_T(float(x), params), rel=1e-12)


def test_model_T_outside_interval():
    with pytest.raises(ValueError):
        model_T(1.5, Params(2.0, 0.0, 2.0, 1.0))


def test_tolerances_from_config():
    config = get_parameters({'Solver': {'rtol': 1e-6, 'max_doublings': 10.0}, 'Sharp': {'scan_points': 8}})
    tol = Tolerances.from_config(config, lambda_tol=1e-5)
    assert tol.rtol == 1e-6
    assert tol.max_doublings == 10 and isinstance(tol.max_doublings, int)
    assert tol.scan_points == 8
    assert tol.lambda_tol == 1e-5
    assert tol.atol == 1e-12
    assert tol.stop_guard == 1e-8 and tol.underflow_band == 1e-6


@pytest.mark.parametrize('K, N, D', [(-1.0, 3.0, 2.0), (0.0, 2.0, 1.0), (1.0, 5.0, 5.0), (1.0, 2.0, math.pi)])
def test_distance_ratio_is_strictly_decreasing(K, N, D):
    kappa = K / (N - 1.0)
    x = np.linspace(0.0, D, 401)[1:-1]
    ratio = s_kappa(D - x, kappa) / s_kappa(x, kappa)
    assert np.all(np.diff(ratio) < 0)


@pytest.mark.parametrize('K, N', [(-1.0, 3.0), (0.0, 2.0), (1.0, 5.0), (2.0, 4.0)])
def test_cot_knd_is_the_log_derivative_of_the_profile(K, N):
    kappa = K / (N - 1.0)
    x = np.linspace(0.2, 1.3, 23)
    step = 1e-6
    numeric = (N - 1.0) * (log_s_kappa(x + step, kappa) - log_s_kappa(x - step, kappa)) / (2.0 * step)
    np.testing.assert_allclose(cot_knd(x, K, N), numeric, rtol=1e-6, atol=1e-6)
