import math

import numpy as np
import pytest
from scipy.integrate import quad

from volterra_lab.errors import DomainError, ParameterError
from volterra_lab.kernels import (ALPHA_TO_THETA, THETA_TO_ALPHA,
                                  TestFunction, alpha_theta_convert, c_theta,
                                  frac_heat_kernel_eval, frac_integral_partial,
                                  integrate_adaptive, kernel_l2_partial,
                                  kernel_moment_partial,
                                  kernel_space_increment_l2,
                                  kernel_time_increment_l2, power_kernel_eval,
                                  semigroup_at_origin)
from volterra_lab.kernels import test_function_mass as total_mass
from volterra_lab.presets import phi_preset
from volterra_lab.sie_solver import c_alpha


def _mass_window(theta: float, t: float) -> float:
    # beyond L the density is below exp(-60); the tail mass is negligible
    return (2.0 * t * 60.0) ** (1.0 / (2.0 + theta)) * 1.5


@pytest.mark.parametrize("theta", [0.5, 1.0, 2.0, 5.0])
@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_kernel_unit_mass(theta, t):
    L = _mass_window(theta, t)
    mass = integrate_adaptive(lambda x: frac_heat_kernel_eval(theta, t, x),
                              -L, L, rel_tol=1e-12)
    assert abs(mass - 1.0) < 1e-8


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_theta_zero_is_gaussian(t):
    x = np.linspace(-5.0, 5.0, 401)
    gauss = np.exp(-x * x / (2.0 * t)) / math.sqrt(2.0 * math.pi * t)
    ours = frac_heat_kernel_eval(0.0, t, x)
    assert np.max(np.abs(ours - gauss)) < 1e-10


def test_c_theta_gaussian_value():
    assert abs(c_theta(0.0) - 1.0 / math.sqrt(2.0 * math.pi)) < 1e-12


def test_c_theta_normalizes():
    # the closed form is exactly the constant making the mass one
    for theta in (0.3, 1.7, 4.0):
        L = _mass_window(theta, 1.0)
        mass = integrate_adaptive(lambda x: frac_heat_kernel_eval(theta, 1.0, x),
                                  -L, L, rel_tol=1e-12)
        assert abs(mass - 1.0) < 1e-10


def test_c_alpha_quarter():
    assert abs(c_alpha(0.25) - math.pi * math.sqrt(2.0)) < 1e-12
    # quadrature of int_0^1 (1-r)**(a-1) r**(-a) dr, with the endpoint
    # singularities handled by the algebraic-weight rule
    val, _ = quad(lambda r: 1.0, 0.0, 1.0, weight="alg", wvar=(-0.25, -0.75),
                  epsabs=0.0, epsrel=1e-12)
    assert abs(c_alpha(0.25) - val) < 1e-8


@pytest.mark.parametrize("alpha", [0.1, 0.3])
def test_c_alpha_symmetry(alpha):
    assert abs(c_alpha(alpha) - c_alpha(1.0 - alpha)) < 1e-10


def test_alpha_theta_roundtrip():
    for theta in (0.0, 0.5, 2.0, 7.0):
        alpha = alpha_theta_convert(theta, THETA_TO_ALPHA)
        assert abs(alpha_theta_convert(alpha, ALPHA_TO_THETA) - theta) < 1e-12
    # the Gaussian edge is admitted by the conversion, not by the solvers
    assert alpha_theta_convert(0.0, THETA_TO_ALPHA) == 0.5
    assert alpha_theta_convert(0.5, ALPHA_TO_THETA) == 0.0
    with pytest.raises(ParameterError):
        alpha_theta_convert(0.6, ALPHA_TO_THETA)
    with pytest.raises(ParameterError):
        alpha_theta_convert(-0.1, THETA_TO_ALPHA)
    with pytest.raises(ParameterError):
        alpha_theta_convert(0.3, "sideways")


def test_power_kernel_eval_domain():
    assert power_kernel_eval(0.25, 2.0, 1.0) == 1.0
    with pytest.raises(DomainError):
        power_kernel_eval(0.25, 1.0, 1.0)  # s == t excluded
    with pytest.raises(DomainError):
        power_kernel_eval(0.25, 1.0, -0.1)
    with pytest.raises(ParameterError):
        power_kernel_eval(0.5, 1.0, 0.5)


@pytest.mark.parametrize("alpha,a,b", [
    (0.25, 0.0, 1.0), (0.25, 0.3, 0.7), (0.1, 0.0, 0.2), (0.4, 0.9, 1.0),
])
def test_partial_integrals_match_quadrature(alpha, a, b):
    t = 1.0
    for fn, p in ((kernel_l2_partial, 2 * alpha),
                  (kernel_moment_partial, alpha),
                  (frac_integral_partial, 1 - alpha)):
        val = fn(alpha, t, a, b)
        ref, _ = quad(lambda s: (t - s) ** (-p), a, b,
                      epsabs=0.0, epsrel=1e-12)
        assert abs(val - ref) < 1e-9 * max(1.0, abs(ref))


def test_partial_integrals_edges():
    assert kernel_l2_partial(0.25, 1.0, 0.4, 0.4) == 0.0
    # b == t allowed: the singularity is integrable
    assert kernel_l2_partial(0.25, 1.0, 0.0, 1.0) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        kernel_l2_partial(0.25, 1.0, 0.5, 1.5)
    with pytest.raises(DomainError):
        kernel_moment_partial(0.25, 1.0, -0.5, 0.5)


def test_test_function_contracts():
    phi = phi_preset("bump:-1:1")
    assert abs(total_mass(phi) - 1.0) < 1e-12
    with pytest.raises(ParameterError):
        TestFunction(lambda x: -np.ones_like(x), support=(-1.0, 1.0))
    with pytest.raises(ParameterError):
        TestFunction(lambda x: np.ones_like(x), support=(1.0, 1.0))


def test_semigroup_at_origin_limits():
    phi = phi_preset("bump:-1:1")
    # t = 0 is the identity
    assert semigroup_at_origin(2.0, 0.0, phi) == pytest.approx(phi(0.0))
    # smoothing contracts the peak
    v1 = semigroup_at_origin(2.0, 0.1, phi)
    v2 = semigroup_at_origin(2.0, 0.5, phi)
    assert phi(0.0) > v1 > v2 > 0.0
    with pytest.raises(DomainError):
        semigroup_at_origin(2.0, -0.1, phi)


def test_integrate_adaptive_polynomial_exact():
    assert integrate_adaptive(lambda x: 3.0 * x ** 2, 0.0, 2.0) == pytest.approx(8.0, rel=1e-12)
    assert integrate_adaptive(lambda x: np.ones_like(x), 1.0, 1.0) == 0.0
    with pytest.raises(DomainError):
        integrate_adaptive(lambda x: x, 1.0, 0.0)


@pytest.mark.parametrize("alpha", [0.1, 0.25, 0.4])
def test_time_increment_slope(alpha):
    deltas = np.array([1e-2, 1e-3, 1e-4])
    vals = [kernel_time_increment_l2(alpha, 0.0, 1.0, 1.0 + d) for d in deltas]
    slope = np.polyfit(np.log(deltas), np.log(vals), 1)[0]
    assert slope >= (1.0 - 2.0 * alpha) - 0.05


@pytest.mark.parametrize("alpha", [0.1, 0.25, 0.4])
def test_space_increment_slope(alpha):
    seps = np.array([0.5, 0.35, 0.25])
    vals = [kernel_space_increment_l2(alpha, 1.0, 0.0, s) for s in seps]
    slope = np.polyfit(np.log(seps), np.log(vals), 1)[0]
    assert slope >= (1.0 - 2.0 * alpha) - 0.05


def test_space_increment_symmetry():
    a = kernel_space_increment_l2(0.25, 1.0, 0.2, 0.3)
    b = kernel_space_increment_l2(0.25, 1.0, 0.3, 0.2)
    assert a == b
    assert kernel_space_increment_l2(0.25, 1.0, 0.4, 0.4) == 0.0


def test_time_increment_domain():
    with pytest.raises(DomainError):
        kernel_time_increment_l2(0.25, 0.0, 1.0, 0.5)
