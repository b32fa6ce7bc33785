import numpy as np
import pytest

from volterra_lab.errors import DegeneratePathError, ParameterError
from volterra_lab.kernels import SingularPower
from volterra_lab.noise import TimeGrid, sample_increment_block
from volterra_lab.presets import sigma_preset
from volterra_lab.regularity import (geometric_lags, holder_estimate,
                                     loglog_slope, moment_increment_check,
                                     xi_admissible_range, xi_improvement)
from volterra_lab.sie_solver import (SieProblem, iter_euler_chunks,
                                     singular_lag_weights)


def _convolution_paths(alpha, grid, n_paths, seed):
    problem = SieProblem(kernel=SingularPower(alpha),
                         sigma=sigma_preset("one"), x0=0.0)
    rows = [block[finite] for _s, block, finite in
            iter_euler_chunks(problem, grid, n_paths, seed, chunk_size=128)]
    return np.vstack(rows)


def test_loglog_slope_recovers_power_law():
    x = np.geomspace(0.01, 1.0, 20)
    slope, r2 = loglog_slope(x, 3.0 * x ** 1.7)
    assert slope == pytest.approx(1.7, abs=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_geometric_lags_are_distinct_sorted():
    lags = geometric_lags(4, 512, 12)
    assert lags[0] == 4 and lags[-1] == 512
    assert np.all(np.diff(lags) > 0)
    with pytest.raises(ParameterError):
        geometric_lags(0, 10)


def test_brownian_path_exponent_half():
    # the alpha -> 0 surrogate: direct increments of Brownian motion
    grid = TimeGrid(1.0, 2 ** 12)
    inc = sample_increment_block(grid, 42, 0, 50)
    paths = np.concatenate([np.zeros((50, 1)), np.cumsum(inc, axis=1)],
                           axis=1)
    est = holder_estimate(paths, grid)
    assert abs(est.exponent - 0.5) < 0.05
    assert not est.boundary
    assert 0.0 <= est.r_squared <= 1.0


@pytest.mark.parametrize("alpha", [0.1, 0.25, 0.4])
def test_convolution_exponent_small_scale(alpha):
    grid = TimeGrid(1.0, 2 ** 12)
    paths = _convolution_paths(alpha, grid, 50, 42)
    est = holder_estimate(paths, grid)
    assert abs(est.exponent - (0.5 - alpha)) < 0.05


def test_variogram_matches_discrete_gaussian_oracle():
    # with sigma == 1 every node is Gaussian with known covariance; the
    # averaged variogram must match its exact expectation
    alpha = 0.25
    grid = TimeGrid(1.0, 512)
    paths = _convolution_paths(alpha, grid, 3000, 7)
    est = holder_estimate(paths, grid, lag_min=4, lag_max=64, n_lags=6)
    w = np.concatenate(([0.0], singular_lag_weights(alpha, grid)))
    n = grid.n_steps
    for lag, measured in zip(est.lags, est.variogram):
        # E(X_{k+l} - X_k)^2 = dt * (sum_{j<=l} w_j^2
        #                            + sum_{j=1}^{k} (w_{j+l} - w_j)^2)
        diffs = np.concatenate((w[lag:], np.zeros(lag))) - w
        tail = np.cumsum(diffs[1:] ** 2)
        ks = np.arange(0, n - lag + 1)
        expected = grid.dt * (np.sum(w[1:lag + 1] ** 2)
                              + np.where(ks > 0, tail[np.maximum(ks - 1, 0)],
                                         0.0))
        mean_expected = float(np.mean(expected))
        assert measured == pytest.approx(mean_expected, rel=0.1)


def test_linear_ramp_is_boundary():
    grid = TimeGrid(1.0, 256)
    est = holder_estimate(grid.nodes(), grid)
    assert est.exponent == pytest.approx(1.0, abs=1e-9)
    assert est.boundary


def test_constant_path_degenerate():
    grid = TimeGrid(1.0, 128)
    with pytest.raises(DegeneratePathError):
        holder_estimate(np.ones(129), grid)


def test_lag_cap_enforced():
    grid = TimeGrid(1.0, 128)
    vals = grid.nodes()
    with pytest.raises(ParameterError):
        holder_estimate(vals, grid, lag_max=33)
    with pytest.raises(ParameterError):
        holder_estimate(vals[:-1], grid)
    with pytest.raises(ParameterError):
        holder_estimate(np.r_[vals[:-1], np.inf], grid)


@pytest.mark.parametrize("p", [2, 4])
def test_moment_increment_constant_sigma(p):
    problem = SieProblem(kernel=SingularPower(0.25),
                         sigma=sigma_preset("one"), x0=0.0)
    rep = moment_increment_check(problem, p, 2000, 42)
    assert rep.passed
    assert not rep.degenerate
    assert rep.threshold == pytest.approx((0.5 - 0.25) * p - 0.1)
    assert rep.exponent >= rep.threshold


def test_moment_increment_zero_sigma_flagged():
    problem = SieProblem(kernel=SingularPower(0.25),
                         sigma=sigma_preset("zero"), x0=1.0)
    rep = moment_increment_check(problem, 2, 100, 1)
    assert rep.passed and rep.degenerate


def test_moment_increment_p_validation():
    problem = SieProblem(kernel=SingularPower(0.25),
                         sigma=sigma_preset("one"), x0=0.0)
    with pytest.raises(ParameterError):
        moment_increment_check(problem, 3, 100, 0)


def test_xi_range_printed_example():
    lo, hi = xi_admissible_range(0.25, 0.8)
    assert lo == pytest.approx(0.25 / 0.6, rel=1e-12)
    assert hi == 1.0


def test_xi_range_threshold_error_names_inequality():
    with pytest.raises(ParameterError) as err:
        xi_admissible_range(0.25, 2.0 / 3.0)
    msg = str(err.value)
    assert "1/(2*(1 - alpha))" in msg
    assert "0.666666" in msg


def test_xi_range_admissible_grid():
    for alpha in np.linspace(0.02, 0.48, 50):
        threshold = 1.0 / (2.0 * (1.0 - alpha))
        for gamma in np.linspace(threshold + 1e-6, 1.0, 50):
            lo, hi = xi_admissible_range(float(alpha), float(gamma))
            assert 0.0 < lo < hi <= 1.0


def test_xi_range_exact_threshold_behavior():
    # the error fires exactly on gamma <= 1/(2(1-alpha))
    alpha = 0.3
    threshold = 1.0 / (2.0 * (1.0 - alpha))
    with pytest.raises(ParameterError):
        xi_admissible_range(alpha, threshold)
    lo, hi = xi_admissible_range(alpha, threshold + 1e-9)
    assert lo < hi


def test_xi_improvement_converges_to_cap():
    alpha, gamma = 0.25, 0.8
    limit = min((0.5 - alpha) / (1.0 - gamma), 1.0)
    xi = (alpha / 2.0) * (0.5 - alpha)
    prev = xi
    for n in range(200):
        xi = xi_improvement(xi, alpha, gamma, n)
        if limit - prev > 1e-9:
            assert xi > prev
        prev = xi
    assert xi >= 0.99 * limit


def test_xi_improvement_lipschitz_edge():
    xi = 0.05
    for n in range(200):
        xi = xi_improvement(xi, 0.25, 1.0, n)
    assert xi == pytest.approx(1.0 - 1.0 / 202.0, rel=1e-12)


def test_xi_improvement_validation():
    with pytest.raises(ParameterError):
        xi_improvement(0.0, 0.25, 0.8, 0)
    with pytest.raises(ParameterError):
        xi_improvement(0.5, 0.25, 0.8, -1)
    with pytest.raises(ParameterError):
        xi_improvement(0.5, 0.6, 0.8, 0)
