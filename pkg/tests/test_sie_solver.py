import numpy as np
import pytest

from volterra_lab.errors import DivergenceError, ParameterError
from volterra_lab.kernels import SingularPower
from volterra_lab.noise import (TimeGrid, derive_path_seed,
                                sample_brownian_increments)
from volterra_lab.presets import g_preset, kappa_preset, sigma_preset
from volterra_lab.sie_solver import (DiffusionCoefficient, SieProblem,
                                     audit_diffusion, c_alpha,
                                     constant_sigma_variance, euler_chunk,
                                     euler_solve, forcing_profile,
                                     iter_euler_chunks, picard_solve,
                                     singular_lag_weights,
                                     transform_forward, transform_inverse)


def _problem(alpha=0.25, sigma="one", x0=0.0, g=None):
    return SieProblem(kernel=SingularPower(alpha), sigma=sigma_preset(sigma),
                      x0=x0, g_forcing=g)


@pytest.mark.parametrize("alpha", [0.1, 0.25, 0.4])
def test_lag_weights_reproduce_exact_variance(alpha):
    grid = TimeGrid(1.0, 256)
    w = singular_lag_weights(alpha, grid)
    assert w.shape == (256,)
    # cumulative squared-weight mass equals the closed-form variance at
    # every node (that is the defining property of the weights)
    cum = np.cumsum(w * w) * grid.dt
    for k in (1, 2, 17, 128, 256):
        t = k * grid.dt
        assert cum[k - 1] == pytest.approx(constant_sigma_variance(alpha, t),
                                           rel=1e-12)


def test_constant_sigma_fast_path_matches_loop():
    # same coefficient, once declared constant and once opaque; both
    # routes must produce the same paths
    grid = TimeGrid(1.0, 128)
    path = sample_brownian_increments(grid, 11)
    fast = SieProblem(kernel=SingularPower(0.25), sigma=sigma_preset("one"))
    slow_sigma = DiffusionCoefficient(lambda x: np.ones_like(x), gamma=1.0)
    slow = SieProblem(kernel=SingularPower(0.25), sigma=slow_sigma)
    xf = euler_solve(fast, path).values
    xs = euler_solve(slow, path).values
    assert np.max(np.abs(xf - xs)) < 1e-10


def test_euler_variance_small_ensemble():
    grid = TimeGrid(1.0, 256)
    problem = _problem(alpha=0.25)
    finals = []
    for _s, block, finite in iter_euler_chunks(problem, grid, 4000, 42):
        finals.append(block[finite, -1])
    last = np.concatenate(finals)
    var = last.var(ddof=1)
    target = constant_sigma_variance(0.25, 1.0)
    se = np.sqrt(2.0 / (last.size - 1)) * var  # SE of a Gaussian variance
    assert abs(var - target) < 4.0 * se


def test_forcing_profile_constant_g_exact():
    alpha = 0.25
    grid = TimeGrid(1.0, 64)
    problem = _problem(alpha=alpha, x0=2.0, g=g_preset("one"))
    h = forcing_profile(problem, grid)
    t = grid.nodes()
    exact = 2.0 + t ** (1.0 - alpha) / (1.0 - alpha)
    assert np.max(np.abs(h - exact)) < 1e-12


def test_h_override_conflicts_with_x0():
    with pytest.raises(ParameterError):
        SieProblem(kernel=SingularPower(0.25), sigma=sigma_preset("one"),
                   x0=1.0, h_override=lambda t: np.ones_like(t))


def test_solver_rejects_heat_kernel_and_bad_alpha():
    with pytest.raises(ParameterError):
        SingularPower(0.5)
    with pytest.raises(ParameterError):
        SingularPower(0.0)


def test_picard_matches_euler_for_lipschitz():
    # the left-point scheme is the unique fixed point of the discrete map,
    # so Picard iteration must land on the Euler solution
    grid = TimeGrid(1.0, 256)
    problem = _problem(sigma="linear", x0=1.0)
    path = sample_brownian_increments(grid, derive_path_seed(42, 0))
    res = picard_solve(problem, path, tol=1e-12, max_iter=100)
    assert res.converged
    direct = euler_solve(problem, path).values
    assert np.max(np.abs(res.final.values - direct)) < 1e-9


def test_picard_two_initializations_agree():
    grid = TimeGrid(1.0, 256)
    problem = _problem(sigma="linear", x0=1.0)
    tol = 1e-10
    for rep in range(8):
        path = sample_brownian_increments(grid, derive_path_seed(42, rep))
        h = forcing_profile(problem, grid)
        r1 = picard_solve(problem, path, tol=tol, initial=h)
        r2 = picard_solve(problem, path, tol=tol, initial=h + 1.0)
        gap = np.max(np.abs(r1.final.values - r2.final.values))
        assert gap < 10.0 * tol


def test_picard_gaps_contract():
    grid = TimeGrid(1.0, 256)
    problem = _problem(sigma="linear", x0=1.0)
    path = sample_brownian_increments(grid, derive_path_seed(42, 3))
    res = picard_solve(problem, path, tol=1e-10)
    gaps = res.sup_gaps
    # not monotone step by step, but the tail contracts decisively
    assert gaps[-1] < 1e-10
    assert gaps[-1] < gaps[0] * 1e-6


def test_picard_zero_sigma_immediate():
    grid = TimeGrid(1.0, 64)
    problem = _problem(sigma="zero", x0=1.0)
    path = sample_brownian_increments(grid, 5)
    res = picard_solve(problem, path, tol=1e-12)
    assert res.converged and res.n_iterations <= 2
    assert np.array_equal(res.final.values, np.ones(65))


def test_divergence_error_carries_context():
    grid = TimeGrid(1.0, 512)
    problem = SieProblem(kernel=SingularPower(0.25),
                         sigma=sigma_preset("linear"), x0=1.0,
                         lambda_scale=1e8)
    path = sample_brownian_increments(grid, 1)
    with pytest.raises(DivergenceError) as err:
        euler_solve(problem, path)
    assert err.value.path_seed == path.seed
    assert err.value.step is not None and err.value.step > 0


def test_iter_chunks_chunk_size_invariance():
    grid = TimeGrid(1.0, 64)
    problem = _problem(sigma="linear", x0=1.0)

    def collect(chunk_size):
        rows = [block for _s, block, _f in
                iter_euler_chunks(problem, grid, 30, 42,
                                  chunk_size=chunk_size)]
        return np.vstack(rows)

    assert np.array_equal(collect(7), collect(64))


def test_euler_chunk_matches_iterator():
    grid = TimeGrid(1.0, 64)
    problem = _problem(sigma="linear", x0=1.0)
    whole = np.vstack([b for _s, b, _f in
                       iter_euler_chunks(problem, grid, 30, 42)])
    mid, finite = euler_chunk(problem, grid, 42, start=10, count=5)
    assert finite.all()
    assert np.array_equal(mid, whole[10:15])
    with pytest.raises(ParameterError):
        euler_chunk(problem, grid, 42, start=0, count=0)


def test_smooth_kernel_euler_runs():
    grid = TimeGrid(0.5, 64)
    problem = SieProblem(kernel=kappa_preset("two_plus_sin"),
                         sigma=sigma_preset("sqrt"), x0=1.0)
    path = sample_brownian_increments(grid, 2)
    vals = euler_solve(problem, path).values
    assert vals.shape == (65,)
    assert vals[0] == 1.0
    assert np.all(np.isfinite(vals))


def test_transform_forward_constant_exact():
    alpha = 0.25
    grid = TimeGrid(1.0, 512)
    y = transform_forward(np.ones(513), alpha, grid)
    t = grid.nodes()
    assert np.max(np.abs(y - t ** alpha / alpha)) < 1e-12


def test_transform_roundtrip_smooth_path():
    alpha = 0.25
    grid = TimeGrid(1.0, 1024)
    t = grid.nodes()
    x = np.sin(t)
    y = transform_forward(x, alpha, grid)
    back = transform_inverse(y, alpha, grid)
    scale = np.max(np.abs(x))
    err = np.abs(back - x) / scale
    assert err[0] == 0.0
    assert np.max(err) < 0.05


def test_transform_alpha_range():
    grid = TimeGrid(1.0, 16)
    with pytest.raises(ParameterError):
        transform_forward(np.ones(17), 1.0, grid)
    with pytest.raises(ParameterError):
        transform_inverse(np.ones(17), 0.0, grid)


def test_c_alpha_range():
    with pytest.raises(ParameterError):
        c_alpha(1.0)
    assert c_alpha(0.5) == pytest.approx(np.pi)


def test_audit_diffusion_flags_dishonest_declaration():
    honest = audit_diffusion(sigma_preset("sqrt"))
    assert honest["holder_ratio"] <= 1.0 + 1e-9
    assert honest["growth_ratio"] <= 1.0 + 1e-9
    lying = DiffusionCoefficient(lambda x: 10.0 * x, gamma=1.0, holder_L=1.0,
                                 growth_c=1.0)
    report = audit_diffusion(lying)
    assert report["holder_ratio"] > 1.0
