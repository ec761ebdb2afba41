import numpy as np
import pytest
from scipy.integrate import quad

from pgap_density import (
    MCPDensity,
    density_from_theta,
    log_deriv_distance,
    mcp_validate,
    model_density,
    random_density,
    rescale_density,
    smooth_density,
    theta_of,
    uniform_distance,
)
from pgap_geometry import Params, diameter_bound, model_T, model_T_jump
from pgap_utils import spawn_rng

MODEL_CASES = [(-1.0, 3.0, 1.0), (0.0, 2.0, 2.0), (1.0, 5.0, 1.5)]


@pytest.mark.parametrize('K, N, D', MODEL_CASES)
@pytest.mark.parametrize('kind', ['h', 'h1', 'h2'])
def test_model_densities_are_mcp(K, N, D, kind):
    h = model_density(Params(2.0, K, N, D), kind=kind, grid=1024)
    report = mcp_validate(h)
    assert report.passed, report.to_dict()


def test_model_density_breaks_and_ends():
    params = Params(2.0, 0.0, 3.0, 2.0)
    h = model_density(params, 'h', grid=512)
    assert h.breaks == (1.0,)
    assert np.all(np.isfinite(h.log_h))
    h1 = model_density(params, 'h1', grid=512)
    assert h1.log_h[0] == -np.inf and np.isfinite(h1.log_h[-1])


def test_unknown_model_kind():
    with pytest.raises(ValueError):
        model_density(Params(2.0, 0.0, 2.0, 1.0), kind='h3')


@pytest.mark.parametrize('seed', [0, 1, 7, 123456789])
@pytest.mark.parametrize('K, N, D', MODEL_CASES)
def test_random_densities_are_mcp(seed, K, N, D):
    h = random_density(Params(2.0, K, N, D), spawn_rng(seed, 3), grid=1024)
    assert mcp_validate(h).passed


def test_random_density_is_reproducible():
    params = Params(2.0, -1.0, 3.0, 1.0)
    a = random_density(params, 42, grid=256)
    b = random_density(params, 42, grid=256)
    c = random_density(params, 43, grid=256)
    np.testing.assert_array_equal(a.log_h, b.log_h)
    assert not np.array_equal(a.log_h[1:-1], c.log_h[1:-1])


def test_theta_endpoints_decide_vanishing():
    # theta = 1 everywhere is h^1: vanishes at 0, finite at D
    h = density_from_theta(lambda x: np.ones_like(x), 0.0, 3.0, 1.0, grid=256)
    assert h.log_h[0] == -np.inf
    assert np.isfinite(h.log_h[-1])
    x = h.grid[1:-1]
    np.testing.assert_allclose(h.log_h[1:-1] - 2.0 * np.log(x), h.log_h[128] - 2.0 * np.log(h.grid[128]), atol=1e-8)


def test_validation_detects_violations():
    params = Params(2.0, -1.0, 3.0, 1.0)
    h = model_density(params, 'h', grid=512)
    x = h.grid
    bad = MCPDensity(h.K, h.N, h.D, x, h.log_h + 5.0 * x ** 2, h.log_deriv + 10.0 * x)
    report = mcp_validate(bad)
    assert not report.passed
    assert report.violation > 1e-3
    assert report.worst_pair is not None


def test_validation_checks_parameters():
    h = model_density(Params(2.0, -1.0, 3.0, 1.0), 'h', grid=64)
    with pytest.raises(ValueError):
        mcp_validate(h, Params(2.0, 0.0, 3.0, 1.0))


def test_density_rejects_holes():
    grid = np.linspace(0.0, 1.0, 9)
    log_h = np.zeros_like(grid)
    log_h[4] = -np.inf
    with pytest.raises(ValueError):
        MCPDensity(0.0, 2.0, 1.0, grid, log_h, np.zeros_like(grid))


def test_density_rejects_bad_grid():
    grid = np.linspace(0.0, 1.0, 9)
    with pytest.raises(ValueError):
        MCPDensity(0.0, 2.0, 2.0, grid, np.zeros_like(grid), np.zeros_like(grid))
    with pytest.raises(ValueError):
        MCPDensity(1.0, 2.0, 4.0, np.linspace(0.0, 4.0, 9), np.zeros(9), np.zeros(9))


def test_sampled_evaluators_match_nodes(hyperbolic):
    h = model_density(hyperbolic, 'h1', grid=256)
    sampled = MCPDensity(h.K, h.N, h.D, h.grid, h.log_h, h.log_deriv)
    x = h.grid[1:-1]
    np.testing.assert_allclose(sampled.log_h_at(x), h.log_h[1:-1], rtol=1e-14)
    np.testing.assert_allclose(sampled.log_deriv_at(x), h.log_deriv[1:-1], rtol=1e-14)
    # power-law continuation in the first cell
    assert sampled.log_deriv_at(0.5 * h.grid[1]) == pytest.approx(2.0 * h.log_deriv[1], rel=1e-12)


def test_mass_and_shift(flat_density):
    assert flat_density.mass() == pytest.approx(np.pi)
    assert flat_density.shifted(np.log(2.0)).mass() == pytest.approx(2.0 * np.pi)
    assert flat_density.h(normalize=True) == pytest.approx(np.full(1025, 1.0 / np.pi))


def test_smoothing_stays_mcp_and_close():
    params = Params(2.0, -1.0, 3.0, 1.0)
    h = random_density(params, 5, grid=512)
    smoothed = smooth_density(h, 0.005)
    assert mcp_validate(smoothed).passed
    assert uniform_distance(smoothed, h) < 1e-2
    centre = h.grid.size // 2
    assert smoothed.log_h[centre] == pytest.approx(h.log_h[centre])


def test_smoothing_width_limits(hyperbolic):
    h = model_density(hyperbolic, 'h', grid=64)
    with pytest.raises(ValueError):
        smooth_density(h, 0.0)
    with pytest.raises(ValueError):
        smooth_density(h, 0.25)


def test_smoothing_at_the_diameter_bound_is_identity():
    params = Params(2.0, 1.0, 2.0, diameter_bound(1.0, 2.0))
    h = model_density(params, 'h1', grid=64)
    assert smooth_density(h, 0.1) is h


def test_theta_of_model_is_a_step(hyperbolic):
    h = model_density(hyperbolic, 'h', grid=128)
    theta = theta_of(h)
    x = h.grid
    np.testing.assert_allclose(theta[(x > 0) & (x < 0.5)], 0.0, atol=1e-12)
    np.testing.assert_allclose(theta[(x >= 0.5) & (x < 1.0)], 1.0, atol=1e-12)


def test_rescale_density():
    params = Params(2.0, -1.0, 3.0, 1.0)
    h = random_density(params, 11, grid=256)
    wide = rescale_density(h, 2.0)
    assert wide.K == pytest.approx(-0.25)
    assert wide.D == 2.0
    assert mcp_validate(wide).passed
    assert wide.log_deriv_at(1.0) == pytest.approx(0.5 * h.log_deriv_at(0.5), rel=1e-12)
    with pytest.raises(ValueError):
        rescale_density(h, 0.0)


def test_log_deriv_distance_to_itself(hyperbolic):
    h = model_density(hyperbolic, 'h', grid=256)
    assert log_deriv_distance(h, lambda x: model_T(x, hyperbolic)) == pytest.approx(0.0, abs=1e-12)
    assert uniform_distance(h, h) == 0.0


def test_exponential_density_is_not_mcp():
    grid = np.linspace(0.0, 1.0, 257)
    h = MCPDensity(0.0, 2.0, 1.0, grid, 3.0 * grid, np.full_like(grid, 3.0))
    report = mcp_validate(h)
    assert not report.passed
    assert report.bound_violation > 0


def test_constant_density_is_mcp_for_flat_curvature(flat_density):
    assert mcp_validate(flat_density).passed


def test_log_h_integrates_the_log_derivative():
    h = random_density(Params(2.0, -1.0, 3.0, 1.0), 8, grid=256)
    for i in (3, 64, 128, 200, 252):
        increment = h.log_h[i + 1] - h.log_h[i]
        assert increment == pytest.approx(quad(h.log_deriv_fn, h.grid[i], h.grid[i + 1])[0], abs=1e-8)


def _non_mcp_densities():
    grid = np.linspace(0.0, 1.0, 257)
    exponential = MCPDensity(0.0, 2.0, 1.0, grid, 3.0 * grid, np.full_like(grid, 3.0))
    model = model_density(Params(2.0, -1.0, 3.0, 1.0), 'h', grid=256)
    x = model.grid
    bent = MCPDensity(model.K, model.N, model.D, x, model.log_h + 5.0 * x ** 2, model.log_deriv + 10.0 * x)
    return [exponential, bent]


def _mcp_densities():
    out = [model_density(Params(2.0, K, N, D), kind, grid=256) for K, N, D in MODEL_CASES for kind in ('h1', 'h2')]
    out += [random_density(Params(2.0, K, N, D), seed, grid=256) for K, N, D in MODEL_CASES for seed in (0, 1)]
    return out


@pytest.mark.parametrize('constant', [-40.0, 3.5])
def test_validation_ignores_constant_factors(constant):
    for h in _mcp_densities()[:4] + _non_mcp_densities():
        base, moved = mcp_validate(h), mcp_validate(h.shifted(constant))
        assert moved.passed == base.passed
        assert moved.ratio_violation == pytest.approx(base.ratio_violation, abs=1e-12)
        assert moved.bound_violation == base.bound_violation


def test_ratio_and_bound_checks_agree():
    for h in _mcp_densities() + _non_mcp_densities():
        report = mcp_validate(h)
        assert (report.ratio_violation <= report.tol) == (report.bound_violation <= report.tol), h.label


def test_rescale_there_and_back():
    h = random_density(Params(3.0, -1.0, 3.0, 1.0), 13, grid=256)
    back = rescale_density(rescale_density(h, 2.5), h.D)
    assert back.K == pytest.approx(h.K, rel=1e-12)
    np.testing.assert_allclose(back.grid, h.grid, rtol=0, atol=1e-12)
    np.testing.assert_allclose(back.log_h, h.log_h, rtol=0, atol=1e-8)
    np.testing.assert_allclose(back.log_deriv[1:-1], h.log_deriv[1:-1], rtol=1e-10)
    x = np.linspace(0.05, 0.95, 19)
    np.testing.assert_allclose(back.log_deriv_at(x), h.log_deriv_at(x), rtol=1e-10)


def test_smoothing_keeps_a_constant_density(flat_density):
    smoothed = smooth_density(flat_density, 0.1)
    np.testing.assert_allclose(smoothed.log_h, 0.0, atol=1e-8)
    np.testing.assert_allclose(smoothed.log_deriv, 0.0, atol=1e-8)


def test_smoothing_removes_the_kink_of_the_model(hyperbolic):
    h = model_density(hyperbolic, 'h', grid=512)
    jump = model_T_jump(hyperbolic)
    near = (h.grid > 0.4) & (h.grid < 0.6)
    assert np.max(np.abs(np.diff(h.log_deriv[near]))) >= 0.9 * jump
    smoothed = smooth_density(h, 0.05)
    assert np.max(np.abs(np.diff(smoothed.log_deriv[near]))) <= 0.1 * jump
