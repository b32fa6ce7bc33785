"""Path-regularity estimation and the admissible-exponent bookkeeping.

The sample-path smoothness of the stochastic convolution
``int_0^t (t-s)**(-alpha) sigma(X_s) dB_s`` is measured through variograms:
the lag-``l`` mean squared increment of a Hoelder-``xi`` Gaussian-type path
scales like ``(l*dt)**(2*xi)``, so the slope of the log-log variogram is an
estimator of ``2*xi`` (for the bounded-``sigma`` convolution the target is
``xi = 1/2 - alpha``).  Moment checks do the same for p-th moments of
increments against the ``(1/2-alpha)*p`` decay floor.

The exponent bookkeeping for the pathwise-uniqueness window is closed-form:
for a Hoelder-``gamma`` coefficient the admissible continuity exponents are

    alpha/(2*gamma - 1) < xi < min((1/2 - alpha)/(1 - gamma), 1),

non-empty exactly when ``gamma > 1/(2*(1 - alpha))``, and the bootstrap map
``xi -> (min(xi*gamma + 1/2 - alpha, 1)) * (1 - 1/(n+3))`` iterates upward
to the cap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegeneratePathError, ParameterError
from .noise import TimeGrid
from .sie_solver import SieProblem, forcing_profile, iter_euler_chunks

__all__ = [
    "HolderEstimate",
    "MomentIncrementReport",
    "holder_estimate",
    "moment_increment_check",
    "xi_admissible_range",
    "xi_improvement",
    "loglog_slope",
    "geometric_lags",
]


def loglog_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope and R^2 of ``log y`` against ``log x``."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    fit = slope * lx + intercept
    ss_res = float(np.sum((ly - fit) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(r2)


def geometric_lags(lag_min: int, lag_max: int, n_lags: int = 12) -> np.ndarray:
    """Distinct integer lags, geometrically spaced inclusive of both ends."""
    if lag_min < 1 or lag_max < lag_min:
        raise ParameterError(f"need 1 <= lag_min <= lag_max; got {lag_min}, {lag_max}")
    raw = np.geomspace(lag_min, lag_max, n_lags)
    return np.unique(np.round(raw).astype(int))


@dataclass(frozen=True)
class HolderEstimate:
    """Variogram-regression estimate of a path's Hoelder exponent."""

    exponent: float
    r_squared: float
    lag_range: tuple[float, float]  # in time units
    n_lags: int
    boundary: bool  # exponent pushed against the smooth-path ceiling
    lags: np.ndarray
    variogram: np.ndarray

    def __post_init__(self):
        if not 0.0 < self.exponent < 1.0001:
            raise ParameterError(
                f"estimated exponent {self.exponent!r} outside (0, 1]"
            )


def holder_estimate(values: np.ndarray, grid: TimeGrid, lag_min: int = 4,
                    lag_max: Optional[int] = None,
                    n_lags: int = 12) -> HolderEstimate:
    """Estimate the Hoelder exponent of sampled paths by variogram slope.

    Parameters
    ----------
    values : ndarray
        Node values, shape ``(n_steps + 1,)`` for one path or
        ``(n_paths, n_steps + 1)`` to average the variogram across paths.
    grid : TimeGrid
    lag_min, lag_max : int
        Lag window in steps; ``lag_max`` defaults to ``n_steps // 4`` and
        may not exceed it.  The default ``lag_min = 4`` skips the smallest
        lags, where variance-matched weights distort increment statistics
        by design (they calibrate node variance, not node differences).
    n_lags : int
        Size of the geometric lag ladder before deduplication.

    Raises
    ------
    DegeneratePathError
        If some lag has zero mean squared increment (constant path).
    """
    x = np.asarray(values, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != grid.n_steps + 1:
        raise ParameterError("values must have one entry per grid node")
    if not np.all(np.isfinite(x)):
        raise ParameterError("values must be finite")
    cap = grid.n_steps // 4
    if lag_max is None:
        lag_max = cap
    if lag_max > cap:
        raise ParameterError(f"lag_max must be <= n_steps//4 = {cap}; got {lag_max}")
    lags = geometric_lags(lag_min, lag_max, n_lags)
    v = np.empty(lags.size)
    for j, lag in enumerate(lags):
        d = x[:, lag:] - x[:, :-lag]
        v[j] = float(np.mean(d * d))
    if np.any(v <= 0.0):
        raise DegeneratePathError(
            "variogram vanished at some lag; the path is (locally) constant"
        )
    slope, r2 = loglog_slope(lags * grid.dt, v)
    exponent = 0.5 * slope
    return HolderEstimate(
        exponent=float(exponent), r_squared=r2,
        lag_range=(float(lags[0] * grid.dt), float(lags[-1] * grid.dt)),
        n_lags=int(lags.size), boundary=bool(exponent >= 0.99),
        lags=lags, variogram=v,
    )


@dataclass(frozen=True)
class MomentIncrementReport:
    """Fitted temporal decay of ``E|Z(t+delta) - Z(t)|^p``."""

    p: int
    exponent: float
    threshold: float
    passed: bool
    degenerate: bool
    lags: np.ndarray
    moments: np.ndarray


def moment_increment_check(problem: SieProblem, p: int, n_paths: int,
                           master_seed: int, lag_min: int = 4,
                           lag_max: Optional[int] = None,
                           n_lags: int = 10) -> MomentIncrementReport:
    """Monte Carlo check of the p-th-moment increment decay exponent.

    Simulates the stochastic-convolution part ``Z = X - h`` on the
    problem's grid-free definition (the caller picks the grid through
    ``problem``-independent parameters below), measures
    ``E|Z(t0 + l*dt) - Z(t0)|^p`` from the mid-trajectory anchor
    ``t0 = t_end/2`` over a geometric lag ladder, and fits the log-log
    slope.  Passes when the fitted exponent is at least
    ``(1/2 - alpha)*p - 0.1``.

    A coefficient that never moves (``sigma == 0``) yields all-zero
    increments; the check then passes trivially with ``degenerate=True``.
    """
    if p not in (2, 4):
        raise ParameterError(f"p must be 2 or 4; got {p!r}")
    grid = TimeGrid(1.0, 512)
    alpha = getattr(problem.kernel, "alpha", None)
    if alpha is None:
        raise ParameterError("moment increment check needs the singular kernel")
    anchor = grid.n_steps // 2
    cap = grid.n_steps - anchor
    if lag_max is None:
        lag_max = grid.n_steps // 4
    if anchor + lag_max > grid.n_steps:
        raise ParameterError("lag ladder exceeds the grid")
    lags = geometric_lags(lag_min, lag_max, n_lags)
    h = forcing_profile(problem, grid)
    acc = np.zeros(lags.size)
    used = 0
    for _start, block, finite in iter_euler_chunks(problem, grid, n_paths,
                                                   master_seed):
        z = block[finite] - h[None, :]
        d = np.abs(z[:, anchor + lags] - z[:, anchor:anchor + 1]) ** p
        acc += d.sum(axis=0)
        used += int(np.count_nonzero(finite))
    moments = acc / max(used, 1)
    threshold = (0.5 - alpha) * p - 0.1
    if np.all(moments < 1e-280):
        return MomentIncrementReport(p=p, exponent=float("inf"),
                                     threshold=threshold, passed=True,
                                     degenerate=True, lags=lags,
                                     moments=moments)
    slope, _ = loglog_slope(lags * grid.dt, moments)
    return MomentIncrementReport(p=p, exponent=float(slope),
                                 threshold=threshold,
                                 passed=bool(slope >= threshold),
                                 degenerate=False, lags=lags, moments=moments)


def xi_admissible_range(alpha: float, gamma: float) -> tuple[float, float]:
    """The open window of continuity exponents compatible with uniqueness.

    Returns ``(alpha/(2*gamma - 1), min((1/2 - alpha)/(1 - gamma), 1))``.
    The window is non-empty exactly when ``gamma > 1/(2*(1 - alpha))``;
    outside that threshold a `ParameterError` names the violated
    inequality.  ``gamma = 1`` is admitted (the upper bound caps at 1).
    """
    alpha = float(alpha)
    gamma = float(gamma)
    if not 0.0 < alpha < 0.5:
        raise ParameterError(
            f"alpha must lie in the open interval (0, 0.5); got {alpha!r}"
        )
    threshold = 1.0 / (2.0 * (1.0 - alpha))
    if gamma > 1.0:
        raise ParameterError(f"gamma must lie in (0, 1]; got {gamma!r}")
    if gamma <= threshold:
        raise ParameterError(
            f"gamma = {gamma!r} is subcritical: the admissible window is "
            f"empty unless gamma > 1/(2*(1 - alpha)) = {threshold!r}"
        )
    lower = alpha / (2.0 * gamma - 1.0)
    if gamma == 1.0:
        upper = 1.0
    else:
        upper = min((0.5 - alpha) / (1.0 - gamma), 1.0)
    return (lower, upper)


def xi_improvement(xi: float, alpha: float, gamma: float, n: int) -> float:
    """One application of the exponent bootstrap map.

    ``xi_{n+1} = min(xi_n*gamma + 1/2 - alpha, 1) * (1 - 1/(n+3))``;
    iterating from a small positive seed increases monotonically toward
    ``min((1/2 - alpha)/(1 - gamma), 1)``.
    """
    xi = float(xi)
    if not 0.0 < xi < 1.0:
        raise ParameterError(f"xi must lie in (0, 1); got {xi!r}")
    if not 0.0 < alpha < 0.5:
        raise ParameterError(
            f"alpha must lie in the open interval (0, 0.5); got {alpha!r}"
        )
    if not 0.0 < gamma <= 1.0:
        raise ParameterError(f"gamma must lie in (0, 1]; got {gamma!r}")
    if n < 0:
        raise ParameterError(f"n must be non-negative; got {n!r}")
    return min(xi * gamma + 0.5 - alpha, 1.0) * (1.0 - 1.0 / (n + 3.0))
