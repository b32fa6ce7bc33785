import pytest

from volterra_lab.duality import duality_report, laplace_lhs_mc, laplace_rhs
from volterra_lab.errors import ParameterError
from volterra_lab.noise import TimeGrid
from volterra_lab.presets import g_preset, phi_preset


@pytest.fixture(scope="module")
def bump():
    return phi_preset("bump:-1:1")


def test_trivial_lhs_is_exactly_one(bump):
    grid = TimeGrid(0.5, 64)
    mean, stderr, clamps = laplace_lhs_mc(2.0, 0.0, None, bump, grid,
                                          n_paths=500, master_seed=1)
    assert mean == 1.0
    assert stderr == 0.0
    assert clamps == 0


def test_trivial_report_z_zero(bump):
    grid = TimeGrid(0.5, 64)
    rep = duality_report(2.0, 0.0, None, bump, grid, n_paths=200,
                         master_seed=1)
    assert rep.lhs_mean == 1.0
    assert rep.rhs == pytest.approx(1.0, abs=1e-12)
    assert rep.z_score == 0.0
    assert rep.within_band


def test_rhs_monotone_in_x0(bump):
    grid = TimeGrid(0.5, 256)
    vals = [laplace_rhs(2.0, x0, None, bump, grid) for x0 in (0.0, 0.5, 1.0, 2.0)]
    assert vals[0] == pytest.approx(1.0, abs=1e-12)
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 0.0


def test_rhs_decreases_with_forcing(bump):
    grid = TimeGrid(0.5, 256)
    free = laplace_rhs(2.0, 1.0, None, bump, grid)
    forced = laplace_rhs(2.0, 1.0, g_preset("one"), bump, grid)
    assert forced < free


def test_duality_band_small_ensemble(bump):
    # reduced-scale version of the full identity check: wider z window
    # but the same mechanism end to end
    grid = TimeGrid(0.5, 256)
    rep = duality_report(2.0, 1.0, None, bump, grid, n_paths=20000,
                         master_seed=42)
    assert abs(rep.z_score) < 4.0
    assert rep.clamp_count / (20000 * 256) < 0.01
    assert rep.n_paths == 20000


def test_duality_report_consistency(bump):
    grid = TimeGrid(0.5, 128)
    rep = duality_report(2.0, 1.0, None, bump, grid, n_paths=4000,
                         master_seed=7)
    assert rep.gap == pytest.approx(rep.lhs_mean - rep.rhs)
    assert rep.allowance == pytest.approx(3.0 * rep.lhs_stderr + 0.01 * rep.rhs)
    assert rep.within_band == (abs(rep.gap) <= rep.allowance)


def test_threaded_run_identical(bump):
    grid = TimeGrid(0.5, 128)
    a = laplace_lhs_mc(2.0, 1.0, None, bump, grid, n_paths=6000,
                       master_seed=3, chunk_size=1000, threads=1)
    b = laplace_lhs_mc(2.0, 1.0, None, bump, grid, n_paths=6000,
                       master_seed=3, chunk_size=1000, threads=4)
    assert a == b


def test_chunk_size_does_not_change_results(bump):
    grid = TimeGrid(0.5, 64)
    a = laplace_lhs_mc(2.0, 1.0, None, bump, grid, n_paths=3000,
                       master_seed=5, chunk_size=512)
    b = laplace_lhs_mc(2.0, 1.0, None, bump, grid, n_paths=3000,
                       master_seed=5, chunk_size=3000)
    assert a[0] == pytest.approx(b[0], rel=1e-12)
    assert a[2] == b[2]


def test_bad_parameters_rejected(bump):
    grid = TimeGrid(0.5, 64)
    with pytest.raises(ParameterError):
        laplace_lhs_mc(-1.0, 1.0, None, bump, grid, n_paths=10, master_seed=0)
    with pytest.raises(ParameterError):
        laplace_lhs_mc(2.0, -0.5, None, bump, grid, n_paths=10, master_seed=0)
    with pytest.raises(ParameterError):
        laplace_lhs_mc(2.0, 1.0, None, bump, grid, n_paths=0, master_seed=0)
