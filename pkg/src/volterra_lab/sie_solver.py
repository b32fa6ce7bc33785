"""Euler and Picard schemes for singular-kernel stochastic integral equations.

The state equation is

    X(t) = h(t) + lam * int_0^t K(s, t) sigma(X(s)) dB(s),

with ``K(s, t) = (t - s)**(-alpha)`` (singular case, ``0 < alpha < 1/2``)
or a smooth bounded ``kappa(s, t)``, and ``h(t) = x0 + int_0^t
(t - s)**(-alpha) g(s) ds`` unless an explicit profile overrides it.

Discretization: left-point evaluation of ``sigma`` with variance-matched
weights.  On the step ``[t_i, t_{i+1}]`` the singular kernel is replaced by
the root-mean-square constant

    w(k - i) = sqrt( int_{t_i}^{t_{i+1}} (t_k - s)**(-2 alpha) ds / dt ),

so that for ``sigma == 1`` the discrete variance at every node equals the
exact value ``t**(1-2 alpha) / (1-2 alpha)``.  The Picard iteration reuses
one fixed set of Brownian increments across all iterates, which is what
shared-noise uniqueness probes require.

The forward/inverse transform pair implemented at the bottom maps a path
through the order-``alpha`` fractional integral and back; the composition
``inverse(forward(x))`` recovers ``x`` up to discretization error, with the
reconstruction constant ``c_alpha = pi / sin(pi alpha)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Union

import numpy as np
from scipy.signal import fftconvolve

from .errors import DivergenceError, ParameterError
from .kernels import SingularPower, SmoothKernel, _check_alpha
from .noise import BrownianPath, TimeGrid, derive_path_seed, sample_increment_block

__all__ = [
    "DiffusionCoefficient",
    "SieProblem",
    "SiePath",
    "PicardResult",
    "euler_solve",
    "picard_solve",
    "iter_euler_chunks",
    "transform_forward",
    "transform_inverse",
    "c_alpha",
    "singular_lag_weights",
    "forcing_profile",
    "constant_sigma_variance",
    "audit_diffusion",
]


@dataclass(frozen=True)
class DiffusionCoefficient:
    """A diffusion coefficient with declared Hoelder/growth constants.

    ``fn`` must be vectorized.  ``gamma`` is the declared Hoelder exponent
    (|sigma(x) - sigma(y)| <= holder_L * |x - y|**gamma), ``growth_c`` the
    linear-growth constant (|sigma(x)| <= growth_c * (1 + |x|)).  The
    declarations are the caller's; `audit_diffusion` spot-checks them.
    ``constant_value`` marks coefficients that do not depend on the state,
    which unlocks an exact convolution fast path in the Euler scheme.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    gamma: float
    holder_L: float = 1.0
    growth_c: float = 1.0
    name: str = ""
    constant_value: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < float(self.gamma) <= 1.0:
            raise ParameterError(f"gamma must lie in (0, 1]; got {self.gamma!r}")
        if not float(self.holder_L) > 0.0 or not float(self.growth_c) > 0.0:
            raise ParameterError("holder_L and growth_c must be positive")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.fn(x)

    @property
    def is_lipschitz(self) -> bool:
        return float(self.gamma) == 1.0


def audit_diffusion(coeff: DiffusionCoefficient, seed: int = 0,
                    n_pairs: int = 4096, box: float = 10.0) -> dict:
    """Spot-check the declared Hoelder and growth constants on random pairs.

    Returns the worst observed ratios; both should be <= 1 (up to the fp
    slack the caller tolerates) for an honestly declared coefficient.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    x = rng.uniform(-box, box, n_pairs)
    y = rng.uniform(-box, box, n_pairs)
    fx, fy = coeff(x), coeff(y)
    sep = np.abs(x - y)
    keep = sep > 1e-12
    holder_ratio = np.max(
        np.abs(fx - fy)[keep] / (coeff.holder_L * sep[keep] ** coeff.gamma)
    )
    growth_ratio = np.max(np.abs(fx) / (coeff.growth_c * (1.0 + np.abs(x))))
    return {"holder_ratio": float(holder_ratio), "growth_ratio": float(growth_ratio)}


@dataclass(frozen=True)
class SieProblem:
    """A stochastic integral equation: kernel, diffusion, and forcing.

    The forcing profile ``h`` is defined by exactly one of two routes:
    ``(x0, g_forcing)`` builds ``h(t) = x0 + int (t-s)**(-alpha) g(s) ds``
    (or the kappa-weighted analogue for a smooth kernel), while
    ``h_override`` supplies the profile directly, in which case ``x0`` and
    ``g_forcing`` must be left at their defaults.
    """

    kernel: Union[SingularPower, SmoothKernel]
    sigma: DiffusionCoefficient
    x0: float = 0.0
    g_forcing: Optional[Callable[[np.ndarray], np.ndarray]] = None
    h_override: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lambda_scale: float = 1.0

    def __post_init__(self):
        if not isinstance(self.kernel, (SingularPower, SmoothKernel)):
            raise ParameterError(
                "kernel must be SingularPower or SmoothKernel; the heat kernel "
                "enters only through the duality module"
            )
        if not float(self.lambda_scale) > 0.0:
            raise ParameterError(f"lambda_scale must be positive; got {self.lambda_scale!r}")
        if self.h_override is not None and (self.x0 != 0.0 or self.g_forcing is not None):
            raise ParameterError(
                "h is defined by exactly one route: either (x0, g_forcing) or h_override"
            )


@dataclass(frozen=True)
class SiePath:
    """A solved path: node values on a grid, plus scheme metadata."""

    grid: TimeGrid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_steps + 1,):
            raise ParameterError(
                f"values must have shape ({self.grid.n_steps + 1},); got {vals.shape}"
            )
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class PicardResult:
    final: SiePath
    n_iterations: int
    sup_gaps: np.ndarray
    converged: bool
    tol: float


# ---------------------------------------------------------------------------
# discrete weights


def singular_lag_weights(alpha: float, grid: TimeGrid) -> np.ndarray:
    """Variance-matched lag weights ``w(1..n)`` for the singular kernel.

    ``w[l-1]`` multiplies an increment ``l`` steps in the past; summing
    ``w**2 * dt`` over the history reproduces the exact squared-kernel mass
    ``t**(1-2a)/(1-2a)`` at every node.
    """
    alpha = _check_alpha(alpha)
    n = grid.n_steps
    dt = grid.dt
    lags = np.arange(n + 1, dtype=float)
    heads = lags ** (1.0 - 2.0 * alpha)
    v = dt ** (1.0 - 2.0 * alpha) * np.diff(heads) / (1.0 - 2.0 * alpha)
    return np.sqrt(v / dt)


def _moment_lag_weights(alpha: float, grid: TimeGrid) -> np.ndarray:
    # exact int_{t_i}^{t_{i+1}} (t_k - s)**(-alpha) ds as a function of lag
    n, dt = grid.n_steps, grid.dt
    heads = np.arange(n + 1, dtype=float) ** (1.0 - alpha)
    return dt ** (1.0 - alpha) * np.diff(heads) / (1.0 - alpha)


def _smooth_weight_matrix(kernel: SmoothKernel, grid: TimeGrid) -> np.ndarray:
    # W[k, i] = kappa(t_i, t_k) for i < k, zero elsewhere (left-point rule)
    nodes = grid.nodes()
    n = grid.n_steps
    W = np.asarray(kernel.kappa(nodes[None, :n], nodes[:, None]), dtype=float)
    W = np.broadcast_to(W, (n + 1, n)).copy()
    mask = np.arange(n)[None, :] < np.arange(n + 1)[:, None]
    W[~mask] = 0.0
    return W


def forcing_profile(problem: SieProblem, grid: TimeGrid) -> np.ndarray:
    """The deterministic profile ``h`` at the grid nodes."""
    nodes = grid.nodes()
    if problem.h_override is not None:
        h = np.asarray(problem.h_override(nodes), dtype=float)
        if h.shape != nodes.shape:
            raise ParameterError("h_override must be vectorized over the node array")
        return h
    h = np.full(grid.n_steps + 1, float(problem.x0))
    if problem.g_forcing is None:
        return h
    gvals = np.asarray(problem.g_forcing(nodes[:-1]), dtype=float)
    if isinstance(problem.kernel, SingularPower):
        u = _moment_lag_weights(problem.kernel.alpha, grid)
        conv = np.convolve(gvals, u)
        h[1:] += conv[: grid.n_steps]
    else:
        W = _smooth_weight_matrix(problem.kernel, grid)
        h += (W @ gvals) * grid.dt
    return h


def constant_sigma_variance(alpha: float, t: float) -> float:
    """Exact node variance of the scheme with ``sigma == 1``: ``t**(1-2a)/(1-2a)``."""
    alpha = _check_alpha(alpha)
    return float(t) ** (1.0 - 2.0 * alpha) / (1.0 - 2.0 * alpha)


# ---------------------------------------------------------------------------
# Euler scheme


def _euler_batch(problem: SieProblem, grid: TimeGrid,
                 increments: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Advance a batch of paths; returns (values, finite-row mask).

    ``increments`` has shape (m, n).  No exception is raised here; callers
    translate non-finite rows into their own divergence policy.
    """
    dB = np.asarray(increments, dtype=float)
    if dB.ndim != 2 or dB.shape[1] != grid.n_steps:
        raise ParameterError(
            f"increments must have shape (m, {grid.n_steps}); got {dB.shape}"
        )
    m, n = dB.shape
    h = forcing_profile(problem, grid)
    lam = problem.lambda_scale
    sigma = problem.sigma

    with np.errstate(all="ignore"):
        if isinstance(problem.kernel, SingularPower):
            w = singular_lag_weights(problem.kernel.alpha, grid)
            if sigma.constant_value is not None:
                scale = lam * float(sigma.constant_value)
                conv = fftconvolve(dB, w[None, :], axes=1)[:, :n]
                X = np.empty((m, n + 1))
                X[:, 0] = h[0]
                X[:, 1:] = h[1:][None, :] + scale * conv
            else:
                wr = w[::-1]
                X = np.empty((m, n + 1))
                S = np.empty((m, n))
                X[:, 0] = h[0]
                S[:, 0] = lam * sigma(X[:, 0]) * dB[:, 0]
                for k in range(1, n + 1):
                    X[:, k] = h[k] + S[:, :k] @ wr[n - k:]
                    if k < n:
                        S[:, k] = lam * sigma(X[:, k]) * dB[:, k]
        else:
            W = _smooth_weight_matrix(problem.kernel, grid)
            X = np.empty((m, n + 1))
            S = np.empty((m, n))
            X[:, 0] = h[0]
            S[:, 0] = lam * sigma(X[:, 0]) * dB[:, 0]
            for k in range(1, n + 1):
                X[:, k] = h[k] + S[:, :k] @ W[k, :k]
                if k < n:
                    S[:, k] = lam * sigma(X[:, k]) * dB[:, k]

    finite = np.isfinite(X).all(axis=1)
    return X, finite


def euler_solve(problem: SieProblem, path: BrownianPath) -> SiePath:
    """One left-point Euler path driven by ``path``'s increments.

    Raises ``DivergenceError`` (with the path seed and the first bad step)
    if the iteration leaves the finite range.
    """
    X, finite = _euler_batch(problem, path.grid, path.increments[None, :])
    if not finite[0]:
        step = int(np.argmin(np.isfinite(X[0])))
        raise DivergenceError(
            f"path diverged at step {step} (seed {path.seed})",
            path_seed=path.seed, step=step,
        )
    meta = {"scheme": "euler", "seed": path.seed}
    return SiePath(grid=path.grid, values=X[0], meta=meta)


def iter_euler_chunks(problem: SieProblem, grid: TimeGrid, n_paths: int,
                      master_seed: int, chunk_size: int = 8192,
                      exclude_divergent: bool = False,
                      ) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """Yield ``(first_index, values, finite_mask)`` over a path ensemble.

    Chunk boundaries do not affect any path (seeds are derived per path
    index), so results are identical for any ``chunk_size``.  With
    ``exclude_divergent=False`` a non-finite row raises immediately.
    """
    if n_paths < 1:
        raise ParameterError(f"n_paths must be >= 1; got {n_paths!r}")
    if chunk_size < 1:
        raise ParameterError(f"chunk_size must be >= 1; got {chunk_size!r}")
    for start in range(0, n_paths, chunk_size):
        count = min(chunk_size, n_paths - start)
        yield start, *euler_chunk(problem, grid, master_seed, start, count,
                                  exclude_divergent=exclude_divergent)


def euler_chunk(problem: SieProblem, grid: TimeGrid, master_seed: int,
                start: int, count: int, exclude_divergent: bool = False,
                ) -> tuple[np.ndarray, np.ndarray]:
    """One ensemble chunk: paths ``start .. start+count-1`` of the scheme.

    Seeds are derived per absolute path index, so any partition of the
    ensemble into chunks reproduces the same paths.  Safe to call from
    worker threads.
    """
    if count < 1:
        raise ParameterError(f"count must be >= 1; got {count!r}")
    dB = sample_increment_block(grid, master_seed, start, count)
    X, finite = _euler_batch(problem, grid, dB)
    if not exclude_divergent and not finite.all():
        row = int(np.argmin(finite))
        step = int(np.argmin(np.isfinite(X[row])))
        seed = derive_path_seed(master_seed, start + row)
        raise DivergenceError(
            f"path {start + row} diverged at step {step} (seed {seed})",
            path_seed=seed, step=step,
        )
    return X, finite


# ---------------------------------------------------------------------------
# Picard iteration on a fixed noise path


def picard_solve(problem: SieProblem, path: BrownianPath, tol: float = 1e-10,
                 max_iter: int = 200,
                 initial: Optional[np.ndarray] = None) -> PicardResult:
    """Iterate the integral map on one fixed set of Brownian increments.

    Every iterate reuses ``path.increments`` unchanged; only ``sigma``'s
    argument moves.  The iteration stops when the sup-norm gap between
    consecutive iterates drops below ``tol``.  For a Lipschitz ``sigma``
    this is a genuine contraction onto the (unique) solution of the
    discrete scheme; for ``gamma < 1`` the result is labeled a heuristic
    fixed point in the metadata and non-convergence is reported, not raised.
    """
    if not tol > 0.0:
        raise ParameterError(f"tol must be positive; got {tol!r}")
    if max_iter < 1:
        raise ParameterError(f"max_iter must be >= 1; got {max_iter!r}")
    grid = path.grid
    n = grid.n_steps
    h = forcing_profile(problem, grid)
    lam = problem.lambda_scale
    dB = path.increments

    if isinstance(problem.kernel, SingularPower):
        w = singular_lag_weights(problem.kernel.alpha, grid)

        def apply_map(x):
            s = lam * problem.sigma(x[:n]) * dB
            out = h.copy()
            out[1:] += np.convolve(s, w)[:n]
            return out
    else:
        W = _smooth_weight_matrix(problem.kernel, grid)

        def apply_map(x):
            s = lam * problem.sigma(x[:n]) * dB
            return h + W @ s

    if initial is not None:
        x = np.asarray(initial, dtype=float).copy()
        if x.shape != (n + 1,):
            raise ParameterError(f"initial iterate must have shape ({n + 1},)")
    else:
        x = h.copy()

    gaps = []
    converged = False
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            x_next = apply_map(x)
            if not np.all(np.isfinite(x_next)):
                step = int(np.argmin(np.isfinite(x_next)))
                raise DivergenceError(
                    f"Picard iterate diverged at node {step} (seed {path.seed})",
                    path_seed=path.seed, step=step,
                )
            gap = float(np.max(np.abs(x_next - x)))
            gaps.append(gap)
            x = x_next
            if gap < tol:
                converged = True
                break

    meta = {
        "scheme": "picard",
        "seed": path.seed,
        "fixed_point": "contraction" if problem.sigma.is_lipschitz else "heuristic",
    }
    final = SiePath(grid=grid, values=x, meta=meta)
    return PicardResult(final=final, n_iterations=len(gaps),
                        sup_gaps=np.asarray(gaps), converged=converged, tol=tol)


# ---------------------------------------------------------------------------
# fractional transform pair


def c_alpha(alpha: float) -> float:
    """Reconstruction constant ``int_0^1 (1-r)**(a-1) r**(-a) dr = pi/sin(pi a)``."""
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1); got {alpha!r}")
    return math.pi / math.sin(math.pi * alpha)


def _path_values(x, grid: Optional[TimeGrid]) -> tuple[np.ndarray, TimeGrid]:
    if isinstance(x, SiePath):
        return x.values, x.grid
    if grid is None:
        raise ParameterError("grid is required when passing raw values")
    vals = np.asarray(x, dtype=float)
    if vals.shape != (grid.n_steps + 1,):
        raise ParameterError(f"values must have shape ({grid.n_steps + 1},)")
    return vals, grid


def transform_forward(x, alpha: float, grid: Optional[TimeGrid] = None) -> np.ndarray:
    """Order-``alpha`` fractional integral ``int_0^t (t-s)**(a-1) x(s) ds``.

    Left-point product integration with exact subinterval weights; the
    constant path maps to ``t**alpha / alpha`` exactly at the nodes.
    Accepts a ``SiePath`` or a raw node array plus its grid.
    """
    vals, grid = _path_values(x, grid)
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1); got {alpha!r}")
    n, dt = grid.n_steps, grid.dt
    heads = np.arange(n + 1, dtype=float) ** alpha
    f = dt ** alpha * np.diff(heads) / alpha
    out = np.zeros(n + 1)
    out[1:] = np.convolve(vals[:n], f)[:n]
    return out


def _first_cell_weights(alpha: float, grid: TimeGrid) -> np.ndarray:
    """``A[l] = int_0^dt (l*dt - s)**(-alpha) * (s/dt)**alpha ds`` for lags 1..n.

    Lag 1 is the exact Beta integral; later lags have smooth integrands and
    one Gauss-Legendre panel nails them.
    """
    n, dt = grid.n_steps, grid.dt
    A = np.empty(n)
    A[0] = alpha * c_alpha(alpha) * dt ** (1.0 - alpha)
    if n > 1:
        u, wq = np.polynomial.legendre.leggauss(32)
        uu = 0.5 * (u + 1.0)
        ww = 0.5 * wq
        lags = np.arange(2, n + 1, dtype=float)[:, None]
        vals = (lags - uu[None, :]) ** (-alpha) * uu[None, :] ** alpha
        A[1:] = dt ** (1.0 - alpha) * (vals * ww[None, :]).sum(axis=1)
    return A


def transform_inverse(y, alpha: float, grid: Optional[TimeGrid] = None) -> np.ndarray:
    """Recover ``x`` from its order-``alpha`` fractional integral ``y``.

    Computes ``F(t) = int_0^t (t-s)**(-alpha) y(s) ds`` by product
    integration and differences it: ``x(t_k) ~ (F(t_{k+1}) - F(t_k)) /
    (c_alpha * dt)``, one-sided at the final node.  ``y`` is modeled as
    ``y(t_1) * (s/dt)**alpha`` on the first subinterval (the profile any
    fractional integral of a continuous path has near zero) and piecewise
    linear afterwards; both pieces use exact kernel moments, so the scheme
    is still a linear combination of the ``y`` node values.
    """
    yvals, grid = _path_values(y, grid)
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1); got {alpha!r}")
    n, dt = grid.n_steps, grid.dt

    # lag-indexed moments over one subinterval against (t_k - s)**(-alpha)
    lags = np.arange(n + 1, dtype=float)
    m0 = dt ** (1.0 - alpha) * np.diff(lags ** (1.0 - alpha)) / (1.0 - alpha)
    m2 = dt ** (2.0 - alpha) * np.diff(lags ** (2.0 - alpha)) / (2.0 - alpha)
    ell = np.arange(1, n + 1, dtype=float)
    m1 = ell * dt * m0 - m2          # int (t_k - s)**(-a) (s - t_i) ds at lag l
    b = m0 - m1 / dt                 # weight on the left node of the cell
    c = m1 / dt                      # weight on the right node of the cell

    F = np.zeros(n + 1)
    A = _first_cell_weights(alpha, grid)
    F[1:] = yvals[1] * A
    if n >= 2:
        F[2:] += np.convolve(yvals[1:n], b)[: n - 1]
        F[2:] += np.convolve(yvals[2:], c)[: n - 1]

    ca = c_alpha(alpha)
    x = np.empty(n + 1)
    x[:n] = np.diff(F) / (ca * dt)
    x[n] = (F[n] - F[n - 1]) / (ca * dt)
    return x
