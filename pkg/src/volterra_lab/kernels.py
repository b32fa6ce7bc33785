"""Convolution kernels, their normalizing constants, and kernel quadrature.

Three kernel families drive everything else in the library:

* the singular power kernel ``(t - s)**(-alpha)`` with ``0 < alpha < 1/2``,
* the heavy-tailed heat kernel
  ``p_t(x) = c(theta) * t**(-alpha) * exp(-|x|**(2+theta) / (2*t))``
  with ``alpha = 1/(2 + theta)``, normalized to unit mass for every ``t``,
* smooth bounded two-argument kernels ``kappa(s, t)`` used as a regular
  control case.

The exponent identity ``alpha = 1/(2 + theta)`` ties the two singular
families together: the heat kernel evaluated on the diagonal in space is
exactly ``c(theta) * (t - s)**(-alpha)``, which is why the power kernel's
admissible range is the open interval (0, 1/2).

Normalizing constants are closed forms (no runtime quadrature):

* ``c(theta) = 1 / (2**(1+alpha) * Gamma(1+alpha))`` via the substitution
  ``u = x**(2+theta) / (2t)``; ``theta = 0`` recovers ``1/sqrt(2*pi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np

from .errors import DomainError, NumericalError, ParameterError

__all__ = [
    "SingularPower",
    "FractionalHeat",
    "SmoothKernel",
    "TestFunction",
    "power_kernel_eval",
    "c_theta",
    "frac_heat_kernel_eval",
    "alpha_theta_convert",
    "kernel_l2_partial",
    "kernel_moment_partial",
    "frac_integral_partial",
    "semigroup_at_origin",
    "test_function_mass",
    "integrate_adaptive",
    "kernel_time_increment_l2",
    "kernel_space_increment_l2",
]

ALPHA_RANGE_MESSAGE = "alpha must lie in the open interval (0, 0.5)"


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 0.5:
        raise ParameterError(f"{ALPHA_RANGE_MESSAGE}; got {alpha!r}")
    return alpha


def _check_theta(theta: float) -> float:
    theta = float(theta)
    if theta < 0.0 or not math.isfinite(theta):
        raise ParameterError(f"theta must be finite and >= 0; got {theta!r}")
    return theta


# ---------------------------------------------------------------------------
# kernel descriptions


@dataclass(frozen=True)
class SingularPower:
    """The weakly singular convolution kernel ``(t - s)**(-alpha)``."""

    alpha: float

    def __post_init__(self):
        _check_alpha(self.alpha)


@dataclass(frozen=True)
class FractionalHeat:
    """Heavy-tailed heat kernel parameters.

    ``theta = 0`` is admitted here (it is the Gaussian cross-check case)
    even though the induced ``alpha = 1/2`` sits outside the range the
    stochastic solvers accept.
    """

    theta: float

    def __post_init__(self):
        _check_theta(self.theta)

    @property
    def alpha(self) -> float:
        return 1.0 / (2.0 + self.theta)

    @property
    def constant(self) -> float:
        return c_theta(self.theta)


@dataclass(frozen=True)
class SmoothKernel:
    """A smooth bounded kernel ``kappa(s, t)`` bounded away from zero.

    ``kappa`` must accept numpy arrays in both arguments.  ``lower`` is a
    positive lower bound used only for validation; it is the caller's
    statement, spot-checked on a coarse grid at construction.
    """

    kappa: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lower: float = 1.0
    name: str = ""

    def __post_init__(self):
        if not float(self.lower) > 0.0:
            raise ParameterError(f"lower bound must be positive; got {self.lower!r}")
        s = np.linspace(0.0, 4.0, 17)
        vals = np.asarray(self.kappa(s, s + 0.5), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ParameterError("kappa produced non-finite values on a probe grid")
        if np.any(vals < self.lower - 1e-12):
            raise ParameterError(
                f"kappa dips below its declared lower bound {self.lower} on a probe grid"
            )


KernelSpec = Union[SingularPower, FractionalHeat, SmoothKernel]


@dataclass(frozen=True)
class TestFunction:
    """A nonnegative compactly supported test function.

    ``phi`` must be vectorized and must vanish outside ``support``.
    Nonnegativity is audited on a sample grid at construction time.
    """

    phi: Callable[[np.ndarray], np.ndarray]
    support: tuple[float, float]
    name: str = ""
    smoothness: str = ""

    # not a test case, despite the name
    __test__ = False

    def __post_init__(self):
        a, b = (float(self.support[0]), float(self.support[1]))
        if not (math.isfinite(a) and math.isfinite(b) and a < b):
            raise ParameterError(f"support must be a finite interval; got {self.support!r}")
        object.__setattr__(self, "support", (a, b))
        xs = np.linspace(a, b, 257)
        vals = np.asarray(self.phi(xs), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ParameterError("phi produced non-finite values on its support")
        if np.any(vals < -1e-12):
            raise ParameterError("phi must be nonnegative on its support")

    def __call__(self, x):
        return self.phi(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# scalar kernel evaluations


def power_kernel_eval(alpha: float, t: float, s) -> np.ndarray | float:
    """Evaluate ``(t - s)**(-alpha)`` for ``0 <= s < t``.

    Parameters
    ----------
    alpha : float
        Singularity exponent, required to lie in (0, 1/2).
    t : float
        Right endpoint, ``t > 0``.
    s : float or array_like
        Evaluation points, each in ``[0, t)``.
    """
    alpha = _check_alpha(alpha)
    t = float(t)
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0.0) or np.any(s_arr >= t):
        raise DomainError(f"s must satisfy 0 <= s < t = {t}; got {s!r}")
    out = (t - s_arr) ** (-alpha)
    return float(out) if np.isscalar(s) or out.ndim == 0 else out


@lru_cache(maxsize=256)
def c_theta(theta: float) -> float:
    """Unit-mass normalizing constant of the heavy-tailed heat kernel.

    Closed form ``1 / (2**(1+alpha) * Gamma(1+alpha))`` with
    ``alpha = 1/(2+theta)``; memoized because solvers query it per step.
    """
    theta = _check_theta(theta)
    alpha = 1.0 / (2.0 + theta)
    return 1.0 / (2.0 ** (1.0 + alpha) * math.gamma(1.0 + alpha))


def frac_heat_kernel_eval(theta: float, t: float, x) -> np.ndarray | float:
    """Evaluate the heavy-tailed heat kernel ``p_t(x)`` at time ``t > 0``.

    Even in ``x``, unit mass in ``x`` for every ``t``; ``theta = 0``
    reproduces the Gaussian heat kernel with variance ``t``.
    """
    theta = _check_theta(theta)
    t = float(t)
    if not t > 0.0:
        raise DomainError(f"t must be positive; got {t!r}")
    alpha = 1.0 / (2.0 + theta)
    x_arr = np.asarray(x, dtype=float)
    out = c_theta(theta) * t ** (-alpha) * np.exp(-np.abs(x_arr) ** (2.0 + theta) / (2.0 * t))
    return float(out) if out.ndim == 0 else out


THETA_TO_ALPHA = "theta_to_alpha"
ALPHA_TO_THETA = "alpha_to_theta"


def alpha_theta_convert(value: float, direction: str) -> float:
    """Convert between the kernel exponent ``alpha`` and the tail index ``theta``.

    ``alpha = 1/(2 + theta)``.  The boundary pair ``theta = 0, alpha = 1/2``
    is admitted in both directions (it is the Gaussian edge case, excluded
    from the stochastic solvers' range but meaningful for the kernels).
    """
    value = float(value)
    if direction == THETA_TO_ALPHA:
        if value < 0.0 or not math.isfinite(value):
            raise ParameterError(f"theta must be finite and >= 0; got {value!r}")
        return 1.0 / (2.0 + value)
    if direction == ALPHA_TO_THETA:
        if not 0.0 < value <= 0.5:
            raise ParameterError(
                f"alpha must lie in (0, 0.5] for conversion; got {value!r}"
            )
        return 1.0 / value - 2.0
    raise ParameterError(
        f"direction must be {THETA_TO_ALPHA!r} or {ALPHA_TO_THETA!r}; got {direction!r}"
    )


# ---------------------------------------------------------------------------
# exact partial integrals of the singular kernels
#
# All three reduce to int_a^b (t - s)**(-p) ds with p < 1:
#   p = 2*alpha  -> squared-kernel (L2) partial
#   p = alpha    -> first kernel moment
#   p = 1 - alpha-> fractional-integral weight


def _power_partial(p: float, t: float, a: float, b: float) -> float:
    # closed form ((t-a)**(1-p) - (t-b)**(1-p)) / (1-p); b == t allowed (p < 1)
    q = 1.0 - p
    return ((t - a) ** q - (t - b) ** q) / q


def _check_partial_window(t: float, a: float, b: float) -> tuple[float, float, float]:
    t, a, b = float(t), float(a), float(b)
    if not (0.0 <= a <= b <= t):
        raise DomainError(f"window must satisfy 0 <= a <= b <= t; got a={a!r} b={b!r} t={t!r}")
    return t, a, b


def kernel_l2_partial(alpha: float, t: float, a: float, b: float) -> float:
    """Exact ``int_a^b (t - s)**(-2*alpha) ds`` for ``0 <= a <= b <= t``.

    This is the squared-kernel mass on a subinterval; ``b = t`` is allowed
    because ``2*alpha < 1`` keeps the singularity integrable.
    """
    alpha = _check_alpha(alpha)
    t, a, b = _check_partial_window(t, a, b)
    if a == b:
        return 0.0
    return _power_partial(2.0 * alpha, t, a, b)


def kernel_moment_partial(alpha: float, t: float, a: float, b: float) -> float:
    """Exact ``int_a^b (t - s)**(-alpha) ds`` for ``0 <= a <= b <= t``."""
    alpha = _check_alpha(alpha)
    t, a, b = _check_partial_window(t, a, b)
    if a == b:
        return 0.0
    return _power_partial(alpha, t, a, b)


def frac_integral_partial(alpha: float, t: float, a: float, b: float) -> float:
    """Exact ``int_a^b (t - s)**(alpha - 1) ds`` for ``0 <= a <= b <= t``.

    The weight of the order-``alpha`` fractional integral; here any
    ``alpha`` in (0, 1) is meaningful, not just the kernel range.
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1); got {alpha!r}")
    t, a, b = _check_partial_window(t, a, b)
    if a == b:
        return 0.0
    return _power_partial(1.0 - alpha, t, a, b)


# ---------------------------------------------------------------------------
# fixed-order Gauss-Legendre with panel doubling


@lru_cache(maxsize=8)
def _leggauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def integrate_adaptive(f, a: float, b: float, rel_tol: float = 1e-10,
                       order: int = 16, max_panels: int = 1 << 15) -> float:
    """Integrate a vectorized ``f`` over ``[a, b]`` by panel doubling.

    Fixed-order Gauss-Legendre per panel; the panel count doubles until the
    result changes by less than ``rel_tol`` in relative terms.  Intended for
    smooth integrands (test functions against kernels); raises
    ``NumericalError`` if the doubling never settles.
    """
    a, b = float(a), float(b)
    if a == b:
        return 0.0
    if a > b:
        raise DomainError(f"inverted interval [{a}, {b}]")
    x, w = _leggauss(order)
    prev = None
    n_panels = 1
    while n_panels <= max_panels:
        edges = np.linspace(a, b, n_panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1:] - edges[:-1])
        pts = mid[:, None] + half[:, None] * x[None, :]
        vals = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
        total = float(np.sum(half[:, None] * w[None, :] * vals))
        if prev is not None:
            scale = max(abs(total), abs(prev), 1e-300)
            if abs(total - prev) <= rel_tol * scale:
                return total
        prev = total
        n_panels *= 2
    raise NumericalError(
        f"panel doubling did not converge on [{a}, {b}] within {max_panels} panels"
    )


def semigroup_at_origin(theta: float, t: float, phi: TestFunction,
                        rel_tol: float = 1e-10) -> float:
    """Heat-kernel smoothing of ``phi`` evaluated at the origin.

    Computes ``int p_t(y) phi(y) dy`` over the support of ``phi``; ``t = 0``
    returns ``phi(0)``.  Integration is Gauss-Legendre with panel doubling
    until the relative change drops below ``rel_tol``.
    """
    theta = _check_theta(theta)
    t = float(t)
    if t < 0.0:
        raise DomainError(f"t must be >= 0; got {t!r}")
    a, b = phi.support
    if t == 0.0:
        return float(phi(np.array(0.0)))
    alpha = 1.0 / (2.0 + theta)
    const = c_theta(theta) * t ** (-alpha)

    def integrand(y):
        return const * np.exp(-np.abs(y) ** (2.0 + theta) / (2.0 * t)) * phi(y)

    return integrate_adaptive(integrand, a, b, rel_tol=rel_tol)


def test_function_mass(phi: TestFunction, rel_tol: float = 1e-12) -> float:
    """Total mass ``int phi`` over the support, by adaptive quadrature."""
    a, b = phi.support
    return integrate_adaptive(lambda y: phi(y), a, b, rel_tol=rel_tol)


# ---------------------------------------------------------------------------
# squared L2 increments of the sigma-free heat kernel profile
#
# q_tau(x) = tau**(-alpha) * exp(-|x|**(1/alpha) / tau) is the kernel shape
# entering the Hoelder-regularity bounds; the two quadratures below measure
# how its L2-in-time mass responds to a time shift and to a space shift.
# scipy's adaptive quadrature handles the integrable endpoint singularity.


def _q_profile(alpha: float, tau, x: float):
    tau = np.asarray(tau, dtype=float)
    out = tau ** (-alpha)
    if x != 0.0:
        out = out * np.exp(-abs(x) ** (1.0 / alpha) / tau)
    return out


def kernel_time_increment_l2(alpha: float, x: float, t: float, t_prime: float) -> float:
    """``int_0^t (q_{t'-s}(x) - q_{t-s}(x))**2 ds`` for ``t < t'``.

    Decays like ``|t' - t|**(1-2*alpha)`` as the times merge; the quadrature
    feeds the slope checks of the regularity module.
    """
    alpha = _check_alpha(alpha)
    t, t_prime = float(t), float(t_prime)
    if not 0.0 < t < t_prime:
        raise DomainError(f"need 0 < t < t_prime; got t={t!r} t_prime={t_prime!r}")
    from scipy.integrate import quad

    delta = t_prime - t

    def integrand(tau):
        return (_q_profile(alpha, tau + delta, x) - _q_profile(alpha, tau, x)) ** 2

    val, _ = quad(integrand, 0.0, t, limit=400, epsabs=0.0, epsrel=1e-10)
    return float(val)


def kernel_space_increment_l2(alpha: float, t: float, x: float, y: float) -> float:
    """``int_0^t (q_{t-s}(x) - q_{t-s}(y))**2 ds`` for distinct ``x, y``.

    Vanishes at a power of ``|x - y|`` as the points merge (exponent at
    least ``1 - 2*alpha``).  The integrand's mass concentrates near
    ``tau = sep**(1/alpha)``, which can sit far below the interval scale,
    so integration runs in log time with an explicit tail cutoff whose
    contribution is bounded by ``tau0**(1-2*alpha)/(1-2*alpha)``.
    """
    alpha = _check_alpha(alpha)
    t = float(t)
    if not t > 0.0:
        raise DomainError(f"t must be positive; got {t!r}")
    if x == y:
        return 0.0
    tau0 = max(t * 1e-120, 1e-280)

    def integrand(v):
        tau = np.exp(v)
        return (_q_profile(alpha, tau, x) - _q_profile(alpha, tau, y)) ** 2 * tau

    return integrate_adaptive(integrand, math.log(tau0), math.log(t),
                              rel_tol=1e-10)
