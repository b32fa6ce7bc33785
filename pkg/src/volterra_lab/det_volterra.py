"""Deterministic weakly singular Volterra solvers.

Two scalar equations are handled by explicit product integration, both with
the integrable power kernel ``(t - s)**(-p)``, ``p < 1``:

* the second-moment equation for a linear diffusion coefficient,

      m(t) = h(t)**2 + lam**2 * int_0^t (t - s)**(-2 alpha) m(s) ds,

  which is the exact node-wise second moment of the variance-matched Euler
  scheme (Ito isometry plus independence of increments), so it doubles as a
  Monte Carlo oracle at matched discretization;

* the log-Laplace equation at the spatial origin,

      u(t) = (S_t phi)(0) - (c_theta / 2) * int_0^t (t - s)**(-alpha) u(s)**2 ds,

  whose solution gives the Laplace functional of the dual branching
  evolution.  Integrating the same equation in space (the kernel has unit
  mass) yields the total-mass trajectory

      mass(t) = <1, phi> - (1/2) * int_0^t u(s)**2 ds,

  discretized with trapezoidal weights.

Left-point product integration with exact kernel cell moments is stable here
because the singularity is integrable; an optional fixed-point resweep of the
diagonal cell is available but off by default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ParameterError
from .kernels import (
    SingularPower,
    TestFunction,
    c_theta,
    test_function_mass,
    _check_theta,
    _leggauss,
)
from .noise import TimeGrid
from .sie_solver import forcing_profile, SieProblem

__all__ = [
    "MomentOracle",
    "LogLaplaceSolution",
    "solve_linear_moment",
    "solve_log_laplace",
    "semigroup_profile",
]


@dataclass(frozen=True)
class MomentOracle:
    """Second moments ``m[k] = E[X(t_k)**2]`` on a grid, for linear sigma."""

    grid: TimeGrid
    m: np.ndarray
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "m", np.asarray(self.m, dtype=float))
        if self.m.shape != (self.grid.n_steps + 1,):
            raise ParameterError("moment array must have one entry per node")


@dataclass(frozen=True)
class LogLaplaceSolution:
    """Origin trace ``u0[k] = u(t_k, 0)`` and total mass of the dual flow.

    ``free_u0`` is the semigroup-only evolution ``(S_t phi)(0)``; the solved
    trace satisfies ``0 <= u0 <= free_u0`` node-wise.  ``clamp_count`` is the
    number of nodes at which an explicit step went negative and was clamped
    to zero (discretization noise; the continuum solution is non-negative).
    """

    grid: TimeGrid
    u0: np.ndarray
    mass: np.ndarray
    theta: float
    phi: TestFunction
    free_u0: np.ndarray
    clamp_count: int


def _moment_l2_lag_weights(alpha: float, grid: TimeGrid) -> np.ndarray:
    # v[l] = int over the cell at lag l of (t - s)**(-2 alpha) ds, exact;
    # v[0] = 0 so v can be indexed directly by lag
    n = grid.n_steps
    dt = grid.dt
    heads = np.arange(n + 1, dtype=float) ** (1.0 - 2.0 * alpha)
    v = np.empty(n + 1)
    v[0] = 0.0
    v[1:] = dt ** (1.0 - 2.0 * alpha) * np.diff(heads) / (1.0 - 2.0 * alpha)
    return v


def _frac_lag_weights(alpha: float, grid: TimeGrid) -> np.ndarray:
    # A[l] = int over the cell at lag l of (t - s)**(-alpha) ds, exact; A[0] = 0
    n = grid.n_steps
    dt = grid.dt
    heads = np.arange(n + 1, dtype=float) ** (1.0 - alpha)
    A = np.empty(n + 1)
    A[0] = 0.0
    A[1:] = dt ** (1.0 - alpha) * np.diff(heads) / (1.0 - alpha)
    return A


def solve_linear_moment(problem: SieProblem, grid: TimeGrid,
                        scheme: str = "linear",
                        diagonal_sweep: bool = False) -> MomentOracle:
    """Solve the second-moment recursion for ``sigma(x) = x``.

    Parameters
    ----------
    problem : SieProblem
        Must carry a singular power kernel.  Only the forcing profile, the
        kernel exponent and ``lambda_scale`` are read.
    grid : TimeGrid
    scheme : {"linear", "left"}
        ``"linear"`` (default) integrates the kernel exactly against a
        piecewise-linear interpolant of ``m`` (the diagonal cell is solved
        in closed form), which self-converges fast even for the rough
        kernels near ``alpha = 1/2``.  ``"left"`` uses left-point values,
        ``m[k] = h[k]**2 + lam**2 * sum_{i<k} v[k-i] * m[i]``; that
        recursion is the *exact* node-wise second moment of the
        variance-matched Euler scheme on the same grid, so it is the
        bias-free oracle for Monte Carlo comparisons at matched
        discretization.
    diagonal_sweep : bool
        Left-point scheme only: one fixed-point resweep replaces the
        diagonal cell with a trapezoidal one.  Off by default.

    Returns
    -------
    MomentOracle
        Satisfies ``m >= h**2`` node-wise.
    """
    if not isinstance(problem.kernel, SingularPower):
        raise ParameterError("moment recursion requires the singular power kernel")
    if scheme not in ("linear", "left"):
        raise ParameterError(f"scheme must be 'linear' or 'left'; got {scheme!r}")
    if diagonal_sweep and scheme != "left":
        raise ParameterError("diagonal_sweep applies to the left-point scheme only")
    alpha = problem.kernel.alpha
    lam2 = float(problem.lambda_scale) ** 2
    h = forcing_profile(problem, grid)
    n = grid.n_steps
    dt = grid.dt
    m = np.empty(n + 1)
    m[0] = h[0] ** 2
    if scheme == "left":
        v = lam2 * _moment_l2_lag_weights(alpha, grid)
        for k in range(1, n + 1):
            # sum_{i<k} v[k-i] m[i] = dot of m[0:k] with reversed v[1:k+1]
            m[k] = h[k] ** 2 + np.dot(m[:k], v[k:0:-1])
        if diagonal_sweep:
            for k in range(1, n + 1):
                tail = h[k] ** 2 + np.dot(m[:k], v[k:0:-1]) - v[1] * m[k - 1]
                # diagonal cell trapezoid: v1 * (m[k-1] + m[k]) / 2
                m[k] = (tail + 0.5 * v[1] * m[k - 1]) / (1.0 - 0.5 * v[1])
        return MomentOracle(grid=grid, m=m, alpha=alpha)
    # piecewise-linear interpolant against exact kernel cell moments.  With
    # u = t_k - s on the lag-l cell, the interpolant weights are
    # (l*dt - u)/dt on the newer node and (u - (l-1)*dt)/dt on the older one.
    p = 2.0 * alpha
    lag = np.arange(n + 1, dtype=float)
    m0 = dt ** (1.0 - p) * np.diff(lag ** (1.0 - p)) / (1.0 - p)
    m1 = dt ** (2.0 - p) * np.diff(lag ** (2.0 - p)) / (2.0 - p)
    older = lam2 * (m1 - lag[:-1] * dt * m0) / dt
    newer = lam2 * (lag[1:] * dt * m0 - m1) / dt
    if newer[0] >= 1.0:
        raise NumericalError(
            "implicit diagonal weight >= 1; refine the grid (larger n_steps)"
        )
    for k in range(1, n + 1):
        interior = np.dot(m[k - 1 :: -1], older[:k])
        if k > 1:
            interior += np.dot(m[k - 1 : 0 : -1], newer[1:k])
        # newer[0] multiplies m[k] itself; solve the scalar linear step
        m[k] = (h[k] ** 2 + interior) / (1.0 - newer[0])
    return MomentOracle(grid=grid, m=m, alpha=alpha)


def semigroup_profile(theta: float, grid: TimeGrid, phi: TestFunction,
                      rel_tol: float = 1e-10, order: int = 16,
                      max_panels: int = 4096) -> np.ndarray:
    """``(S_{t_k} phi)(0)`` for every grid node, by shared panel refinement.

    Evaluates ``int p^theta_t(y) phi(y) dy`` over the support of ``phi`` on a
    Gauss-Legendre panel mesh, doubling the panel count until every node
    value is stable to ``rel_tol`` (relative to its magnitude, floored at
    1e-300).  The node ``t = 0`` returns ``phi(0)`` exactly.
    """
    _check_theta(theta)
    times = grid.nodes()
    out = np.empty(times.size)
    out[0] = float(phi(np.asarray([0.0]))[0]) if times[0] == 0.0 else np.nan
    pos = times[times > 0.0]
    lo, hi = phi.support
    base_x, base_w = _leggauss(order)
    panels = 8
    prev = None
    while panels <= max_panels:
        edges = np.linspace(lo, hi, panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1] - edges[0])
        y = (mid[:, None] + half * base_x[None, :]).ravel()
        w = np.broadcast_to(half * base_w, (panels, order)).ravel()
        fy = phi(y) * w
        # kernel values for all (t, y) at once; scalar-t helper won't broadcast
        alpha = 1.0 / (2.0 + theta)
        p = c_theta(theta) * pos[:, None] ** (-alpha) * np.exp(
            -np.abs(y[None, :]) ** (2.0 + theta) / (2.0 * pos[:, None])
        )
        vals = p @ fy
        if prev is not None:
            scale = np.maximum(np.abs(vals), 1e-300)
            if np.max(np.abs(vals - prev) / scale) < rel_tol:
                out[times > 0.0] = vals
                if times[0] != 0.0:
                    out[0] = vals[0]
                return out
        prev = vals
        panels *= 2
    out[times > 0.0] = prev
    return out


def solve_log_laplace(theta: float, phi: TestFunction, grid: TimeGrid,
                      branching: bool = True,
                      diagonal_sweep: bool = False) -> LogLaplaceSolution:
    """Solve the log-Laplace equation at the origin by product integration.

    Parameters
    ----------
    theta : float
        Kernel shape parameter, > 0 (alpha = 1/(2 + theta) < 1/2).
    phi : TestFunction
        Non-negative, compactly supported test function.
    grid : TimeGrid
    branching : bool
        With ``branching=False`` the quadratic term is dropped and the
        result reproduces the free semigroup evolution exactly.
    diagonal_sweep : bool
        One fixed-point resweep of the diagonal cell (trapezoid in ``u**2``).

    Returns
    -------
    LogLaplaceSolution
        Explicit scheme
        ``u[k] = s[k] - (c_theta/2) * sum_{i<k} A[k-i] * u[i]**2`` with exact
        kernel cell integrals ``A``, clamped at zero (counted).  The mass
        trajectory accumulates ``<1, phi> - (1/2) int u0**2`` with
        trapezoidal weights.
    """
    if theta <= 0.0:
        raise ParameterError(f"theta must be positive; got {theta!r}")
    s_vals = semigroup_profile(theta, grid, phi)
    n = grid.n_steps
    alpha = 1.0 / (2.0 + theta)
    half_c = 0.5 * c_theta(theta)
    A = _frac_lag_weights(alpha, grid)
    u = np.empty(n + 1)
    u[0] = s_vals[0]
    clamped = 0
    if not branching:
        u = s_vals.copy()
    else:
        for k in range(1, n + 1):
            val = s_vals[k] - half_c * np.dot(u[:k] ** 2, A[k:0:-1])
            if val < 0.0:
                val = 0.0
                clamped += 1
            u[k] = val
        if diagonal_sweep:
            for k in range(1, n + 1):
                tail = s_vals[k] - half_c * (
                    np.dot(u[:k] ** 2, A[k:0:-1]) - A[1] * u[k - 1] ** 2
                )
                val = tail - half_c * A[1] * 0.5 * (u[k - 1] ** 2 + u[k] ** 2)
                if val < 0.0:
                    val = 0.0
                    clamped += 1
                u[k] = val
    mass0 = test_function_mass(phi)
    usq = u ** 2 if branching else np.zeros(n + 1)
    mass = np.empty(n + 1)
    mass[0] = mass0
    mass[1:] = mass0 - 0.5 * np.cumsum(0.5 * (usq[:-1] + usq[1:]) * grid.dt)
    return LogLaplaceSolution(
        grid=grid, u0=u, mass=mass, theta=float(theta), phi=phi,
        free_u0=s_vals, clamp_count=clamped,
    )
