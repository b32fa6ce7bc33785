"""Approximation-of-identity family for pathwise-uniqueness arguments.

Given a modulus ``rho`` with ``rho(x) >= sqrt(x)`` on ``(0, 1]``, a strictly
decreasing sequence ``a_0 = 1 > a_1 > ... > a_{n_max} > 0`` is chosen so
that each interval carries ``rho**-2``-mass exactly ``n``:

    int_{a_n}^{a_{n-1}} rho(x)**-2 dx = n           (closed form
    a_n = exp(-n(n+1)/2) for the default rho(x) = sqrt(x)).

On each interval a bump ``psi_n`` is built as ``rho**-2`` times a smoothstep
window, normalized to unit integral, subject to the pointwise bound
``psi_n <= 2 rho**-2 / n``.  The window lives in the *mass coordinate*
``m(x) = int_{a_n}^x rho**-2 / n``: ramps occupying an ``edge_fraction``
of the mass at each end, a plateau in between.  In that coordinate the
normalizer has the closed form ``Z_n = n * (1 - edge_fraction)``, so the
bound margin ``n / Z_n = 1 / (1 - edge_fraction)`` is the same for every
``n`` and feasibility is a single parameter check.  (Windows cut in the
plain ``x`` coordinate fail the bound for n >= 7: the mass of ``rho**-2``
piles up at the left endpoint, the x-ramp suppresses nearly all of it, and
``Z_n`` stalls at O(1) while ``n`` grows.)

The antiderivatives

    phi_n(x) = int_0^{|x|} int_0^y psi_n(z) dz dy

increase to ``|x|`` with ``|phi_n'| <= 1`` and ``phi_n'' = psi_n``; they are
evaluated from closed cumulative forms of the window plus a cached fine-grid
cumulative integral per interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import PchipInterpolator

from .errors import ConstructionError, ParameterError
from .kernels import integrate_adaptive

__all__ = [
    "MollifierFamily",
    "build_family",
    "a_sequence",
    "psi_n_eval",
    "phi_n_eval",
    "phi_prime_n_eval",
    "verify_family",
    "PropertyCheck",
    "FamilyAudit",
]

N_MAX_LIMIT = 25  # a_n = exp(-n(n+1)/2) heads toward double underflow past this
_FINE_POINTS = 10**4  # intervals in the per-n cached cumulative grid


def _smoothstep(order: int, u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    if order == 1:
        return u * u * (3.0 - 2.0 * u)
    if order == 2:
        return u ** 3 * (10.0 + u * (-15.0 + 6.0 * u))
    return u ** 4 * (35.0 + u * (-84.0 + u * (70.0 - 20.0 * u)))


def _smoothstep_cumulative(order: int, u: np.ndarray) -> np.ndarray:
    """T(u) = int_0^u S; T(1) = 1/2 for every order (S(u) + S(1-u) = 1)."""
    u = np.clip(u, 0.0, 1.0)
    if order == 1:
        return u ** 3 * (1.0 - 0.5 * u)
    if order == 2:
        return u ** 4 * (2.5 + u * (-3.0 + u))
    return u ** 5 * (7.0 + u * (-14.0 + u * (10.0 - 2.5 * u)))


def _window(order: int, ef: float, m: np.ndarray) -> np.ndarray:
    # ramp up on [0, ef], plateau, ramp down on [1-ef, 1]; all in mass units
    m = np.asarray(m, dtype=float)
    out = np.ones_like(m)
    lo = m < ef
    hi = m > 1.0 - ef
    out[lo] = _smoothstep(order, m[lo] / ef)
    out[hi] = _smoothstep(order, (1.0 - m[hi]) / ef)
    out[(m <= 0.0) | (m >= 1.0)] = 0.0
    return out


def _window_cumulative(order: int, ef: float, m: np.ndarray) -> np.ndarray:
    """U(m) = int_0^m window; U(1) = 1 - ef exactly."""
    m = np.clip(np.asarray(m, dtype=float), 0.0, 1.0)
    up = ef * _smoothstep_cumulative(order, m / ef)
    mid = 0.5 * ef + (m - ef)
    down = (1.0 - ef) - ef * _smoothstep_cumulative(order, (1.0 - m) / ef)
    return np.where(m < ef, up, np.where(m <= 1.0 - ef, mid, down))


def _default_rho(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.asarray(x, dtype=float))


def a_sequence(n_max: int, rho: Optional[Callable] = None) -> np.ndarray:
    """Endpoints ``a_0 = 1, ..., a_{n_max}`` of the mass-n intervals.

    The default modulus uses the closed form ``a_n = exp(-n(n+1)/2)``; a
    custom ``rho`` (validated against ``rho(x) >= sqrt(x)`` on sampled
    points) is handled by bisection on each interval to 1e-12 relative.
    """
    n_max = int(n_max)
    if n_max < 1:
        raise ParameterError(f"n_max must be >= 1; got {n_max!r}")
    if n_max > N_MAX_LIMIT:
        raise ConstructionError(
            f"n_max = {n_max} refused: a_n = exp(-n(n+1)/2) underflows double "
            f"precision; keep n_max <= {N_MAX_LIMIT}"
        )
    if rho is None:
        # scalar exp keeps each endpoint bit-identical to the closed form
        return np.array([math.exp(-0.5 * n * (n + 1.0))
                         for n in range(n_max + 1)])
    _validate_rho(rho)
    a = np.empty(n_max + 1)
    a[0] = 1.0
    for n in range(1, n_max + 1):
        a[n] = _bisect_endpoint(rho, a[n - 1], float(n))
    return a


def _validate_rho(rho: Callable) -> None:
    probe = np.logspace(-12, 0, 121)
    vals = np.asarray(rho(probe), dtype=float)
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0.0):
        raise ParameterError("rho must be positive and finite on (0, 1]")
    if np.any(vals < np.sqrt(probe) * (1.0 - 1e-12)):
        bad = probe[np.argmax(vals < np.sqrt(probe) * (1.0 - 1e-12))]
        raise ParameterError(
            f"rho(x) >= sqrt(x) violated near x = {bad:.3e}; the family "
            "requires the square-root domination"
        )


def _interval_mass(rho: Callable, lo: float, hi: float) -> float:
    # integrate rho(x)**-2 dx in the log coordinate z = ln x, where the
    # integrand x / rho(x)**2 is bounded by 1 under the domination condition
    def f(z):
        x = np.exp(z)
        r = np.asarray(rho(x), dtype=float)
        return x / (r * r)

    return integrate_adaptive(f, math.log(lo), math.log(hi), rel_tol=1e-11)


def _bisect_endpoint(rho: Callable, upper: float, target: float) -> float:
    hi = upper
    lo = upper * math.exp(-(target + 2.0))
    for _ in range(200):
        if _interval_mass(rho, lo, hi) >= target:
            break
        lo *= math.exp(-(target + 2.0))
        if lo < 1e-300:
            raise ConstructionError(
                "rho carries too little inverse-square mass near 0 to reach "
                f"interval mass {target}"
            )
    else:
        raise ConstructionError("endpoint bracketing failed")
    # log-space bisection to 1e-12 relative
    lz, hz = math.log(lo), math.log(hi)
    while (hz - lz) > 1e-12:
        mz = 0.5 * (lz + hz)
        if _interval_mass(rho, math.exp(mz), hi) >= target:
            lz = mz
        else:
            hz = mz
    return math.exp(0.5 * (lz + hz))


@dataclass
class _IntervalCache:
    m: np.ndarray      # mass grid on [0, 1]
    x: np.ndarray      # positions x(m)
    phi: np.ndarray    # phi_n(x(m))
    mass: float        # measured rho**-2 mass of the interval (= n)
    m_of_z: Optional[PchipInterpolator] = None  # custom-rho maps (z = ln x)
    z_of_m: Optional[PchipInterpolator] = None


class MollifierFamily:
    """Container for the interval endpoints and the per-n evaluators.

    Construction is done once; the evaluators are pure reads afterwards and
    safe for concurrent use.  Use `build_family` rather than instantiating
    directly.
    """

    def __init__(self, rho: Optional[Callable], a: np.ndarray, n_max: int,
                 edge_fraction: float, smooth_order: int):
        self.rho = rho if rho is not None else _default_rho
        self.is_default_rho = rho is None
        self.a = a
        self.n_max = n_max
        self.edge_fraction = edge_fraction
        self.smooth_order = smooth_order
        self._cache: dict[int, _IntervalCache] = {}

    # -- mass coordinate ---------------------------------------------------
    def _mass_coord(self, n: int, x: np.ndarray) -> np.ndarray:
        """m(x) = (1/n) int_{a_n}^x rho**-2, clipped to [0, 1] outside."""
        lo, hi = self.a[n], self.a[n - 1]
        x = np.asarray(x, dtype=float)
        if self.is_default_rho:
            with np.errstate(divide="ignore"):
                m = np.log(np.maximum(x, 1e-320) / lo) / float(n)
            return np.clip(m, 0.0, 1.0)
        cache = self._interval(n)
        m = cache.m_of_z(np.log(np.clip(x, lo, hi)))
        return np.where(x <= lo, 0.0, np.where(x >= hi, 1.0, np.clip(m, 0.0, 1.0)))

    def _x_of_mass(self, n: int, m: np.ndarray) -> np.ndarray:
        lo = self.a[n]
        if self.is_default_rho:
            return lo * np.exp(float(n) * np.asarray(m, dtype=float))
        cache = self._interval(n)
        return np.exp(cache.z_of_m(np.clip(m, 0.0, 1.0)))

    def _interval(self, n: int) -> _IntervalCache:
        if n in self._cache:
            return self._cache[n]
        if not 1 <= n <= self.n_max:
            raise ParameterError(f"n must lie in 1..{self.n_max}; got {n}")
        lo, hi = self.a[n], self.a[n - 1]
        ef = self.edge_fraction
        maps = (None, None)
        if self.is_default_rho:
            m = np.linspace(0.0, 1.0, _FINE_POINTS + 1)
            x = lo * np.exp(n * m)
            mass = float(n)
        else:
            # geometric x grid; mass by cumulative Simpson in the log coord,
            # monotone-cubic maps both ways so derivative checks stay sharp
            z = np.linspace(math.log(lo), math.log(hi), _FINE_POINTS + 1)
            x = np.exp(z)
            r = np.asarray(self.rho(x), dtype=float)
            dens = x / (r * r)
            cum = cumulative_simpson(dens, x=z, initial=0.0)
            mass = float(cum[-1])
            m = cum / mass
            m[0], m[-1] = 0.0, 1.0
            maps = (PchipInterpolator(z, m), PchipInterpolator(m, z))
        # phi on the interval: dphi = Cpsi(y) dy with
        # dy = mass * rho(x)**2 dm in the mass coordinate
        u = _window_cumulative(self.smooth_order, ef, m) / (1.0 - ef)
        r = np.asarray(self.rho(x), dtype=float)
        integrand = u * mass * r * r
        phi = cumulative_simpson(integrand, x=m, initial=0.0)
        cache = _IntervalCache(m=m, x=x, phi=phi, mass=mass,
                               m_of_z=maps[0], z_of_m=maps[1])
        self._cache[n] = cache
        return cache


def build_family(n_max: int = 8, rho: Optional[Callable] = None,
                 edge_fraction: float = 0.1,
                 smooth_order: int = 2) -> MollifierFamily:
    """Construct a `MollifierFamily`.

    Parameters
    ----------
    n_max : int
        Largest family index; refused above 25 (endpoint underflow).
    rho : callable, optional
        Modulus with ``rho(x) >= sqrt(x)``; default is the square root.
    edge_fraction : float
        Mass fraction of each ramp, in ``(0, 1/2]``.  The pointwise-bound
        margin is ``1 / (1 - edge_fraction)``, so anything above one half
        would push ``psi_n`` past ``2 rho**-2 / n`` and is refused.
    smooth_order : int
        Smoothstep order (1, 2 or 3 -> C^1, C^2, C^3 windows); default C^2.
    """
    ef = float(edge_fraction)
    if not 0.0 < ef <= 0.5:
        raise ConstructionError(
            f"edge_fraction = {ef!r} infeasible: the normalizer satisfies "
            "n / Z_n = 1 / (1 - edge_fraction), and the pointwise bound "
            "psi_n <= 2 rho**-2 / n requires edge_fraction <= 1/2; "
            "use a smaller edge_fraction"
        )
    if int(smooth_order) not in (1, 2, 3):
        raise ParameterError(f"smooth_order must be 1, 2 or 3; got {smooth_order!r}")
    a = a_sequence(n_max, rho)
    return MollifierFamily(rho=rho, a=a, n_max=int(n_max),
                           edge_fraction=ef, smooth_order=int(smooth_order))


def _check_n(family: MollifierFamily, n: int) -> int:
    n = int(n)
    if not 1 <= n <= family.n_max:
        raise ParameterError(f"n must lie in 1..{family.n_max}; got {n}")
    return n


def psi_n_eval(family: MollifierFamily, n: int, x) -> np.ndarray | float:
    """The n-th bump ``psi_n(x)``; zero outside ``(a_n, a_{n-1})``.

    ``psi_n = rho**-2 * window(mass coord) / Z_n`` with
    ``Z_n = mass * (1 - edge_fraction)``; the normalization makes the
    integral one exactly (up to the mass-map quadrature for custom rho).
    """
    n = _check_n(family, n)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    lo, hi = family.a[n], family.a[n - 1]
    out = np.zeros_like(x_arr)
    inside = (x_arr > lo) & (x_arr < hi)
    if np.any(inside):
        xi = x_arr[inside]
        m = family._mass_coord(n, xi)
        s = _window(family.smooth_order, family.edge_fraction, m)
        r = np.asarray(family.rho(xi), dtype=float)
        mass = family._interval(n).mass
        z_n = mass * (1.0 - family.edge_fraction)
        out[inside] = s / (r * r * z_n)
    return float(out[0]) if np.isscalar(x) or np.ndim(x) == 0 else out


def phi_prime_n_eval(family: MollifierFamily, n: int, x) -> np.ndarray | float:
    """``phi_n'(x) = sign(x) * int_0^{|x|} psi_n``; odd, bounded by 1."""
    n = _check_n(family, n)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    ax = np.abs(x_arr)
    m = family._mass_coord(n, ax)
    u = _window_cumulative(family.smooth_order, family.edge_fraction, m)
    val = u / (1.0 - family.edge_fraction)
    val = np.where(ax <= family.a[n], 0.0, np.where(ax >= family.a[n - 1], 1.0, val))
    out = np.sign(x_arr) * val
    return float(out[0]) if np.isscalar(x) or np.ndim(x) == 0 else out


def phi_n_eval(family: MollifierFamily, n: int, x) -> np.ndarray | float:
    """``phi_n(x)``: even, zero on ``[-a_n, a_n]``, slope-1 tail outside.

    Inside the active interval the value comes from the cached cumulative
    integral of ``phi_n'`` on the fine mass grid.
    """
    n = _check_n(family, n)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    ax = np.abs(x_arr)
    lo, hi = family.a[n], family.a[n - 1]
    cache = family._interval(n)
    out = np.zeros_like(ax)
    tail = ax >= hi
    out[tail] = cache.phi[-1] + (ax[tail] - hi)
    inside = (ax > lo) & (ax < hi)
    if np.any(inside):
        m = family._mass_coord(n, ax[inside])
        out[inside] = np.interp(m, cache.m, cache.phi)
    return float(out[0]) if np.isscalar(x) or np.ndim(x) == 0 else out


@dataclass(frozen=True)
class PropertyCheck:
    name: str
    n: int
    passed: bool
    measured: float
    bound: float


@dataclass(frozen=True)
class FamilyAudit:
    checks: list[PropertyCheck] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[PropertyCheck]:
        return [c for c in self.checks if not c.passed]


def verify_family(family: MollifierFamily, n_check: int = 5) -> FamilyAudit:
    """Audit the family invariants for ``n = 1..n_check``.

    Every check reports the measured quantity and its bound; derivative
    identities are tested relative to the peak of ``psi_n`` (the bumps grow
    like ``1/a_n``, so absolute comparisons would be meaningless across n).
    """
    n_check = _check_n(family, n_check)
    checks: list[PropertyCheck] = []

    def add(name, n, measured, bound, ok=None):
        passed = bool(measured <= bound) if ok is None else bool(ok)
        checks.append(PropertyCheck(name=name, n=n, passed=passed,
                                    measured=float(measured), bound=float(bound)))

    for n in range(1, n_check + 1):
        lo, hi = family.a[n], family.a[n - 1]

        mass = _interval_mass(family.rho, lo, hi)
        add("interval_mass_error", n, abs(mass - n), 1e-8)

        def psi_log(z, n=n):
            x = np.exp(z)
            return psi_n_eval(family, n, x) * x

        integral = integrate_adaptive(psi_log, math.log(lo), math.log(hi),
                                      rel_tol=1e-9)
        add("psi_integral_error", n, abs(integral - 1.0), 1e-6)

        xg = family._x_of_mass(n, np.linspace(0.0, 1.0, 4001))
        psi = psi_n_eval(family, n, xg)
        r = np.asarray(family.rho(xg), dtype=float)
        add("psi_pointwise_bound", n, float(np.max(psi * r * r * n)), 2.0 + 1e-9)

        outside = np.array([0.5 * lo, lo, hi, min(1.5 * hi, 1.0 + hi)])
        add("psi_support", n, float(np.max(np.abs(psi_n_eval(family, n, outside)))), 0.0)

        span = np.linspace(-1.5, 1.5, 10001)
        dphi = phi_prime_n_eval(family, n, span)
        add("phi_prime_bound", n, float(np.max(np.abs(dphi))), 1.0)
        add("phi_prime_odd", n, float(np.max(np.abs(dphi + dphi[::-1]))), 1e-12)

        phi = phi_n_eval(family, n, span)
        add("phi_even", n, float(np.max(np.abs(phi - phi[::-1]))), 1e-12)
        gap = np.abs(span) - phi
        add("phi_below_identity", n, float(-np.min(gap)), 1e-12)
        add("phi_identity_gap", n, float(np.max(gap)), hi * (1.0 + 1e-12))

        # centered finite differences of phi' against psi, relative to peak
        mg = np.linspace(0.01, 0.99, 197)
        xs = family._x_of_mass(n, mg)
        h = 1e-5 * xs
        fd = (phi_prime_n_eval(family, n, xs + h)
              - phi_prime_n_eval(family, n, xs - h)) / (2.0 * h)
        peak = float(np.max(psi)) if np.max(psi) > 0 else 1.0
        add("phi_second_derivative_error", n,
            float(np.max(np.abs(fd - psi_n_eval(family, n, xs))) / peak), 1e-5)

        if n < n_check:
            probe = np.linspace(0.0, 1.2, 601)
            delta = (phi_n_eval(family, n + 1, probe)
                     - phi_n_eval(family, n, probe))
            add("phi_monotone_in_n", n, float(-np.min(delta)), 1e-12)

        if family.is_default_rho:
            add("endpoint_ratio_error", n,
                abs(hi / lo - math.exp(n)) / math.exp(n), 1e-12)

    return FamilyAudit(checks=checks)
