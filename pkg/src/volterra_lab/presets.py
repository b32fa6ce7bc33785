"""Named built-in coefficients, forcings, test functions and kernels.

Experiments refer to model ingredients by short preset strings instead of
expressions:

======== ========================== ==========================================
kind     names                      meaning
======== ========================== ==========================================
sigma    zero, one, linear, sqrt,   0, 1, x, sqrt(max(x,0)),
         holder:G                   min(|x|**G, 1+|x|)  (Hoelder-G, capped)
g        zero, one, const:V         0, 1, V as functions of time
phi      bump:A:B                   C*(1-u**2)**2 on [A,B], unit mass
kappa    one, two_plus_sin          1, 2+sin(s+t)  (both >= 1)
======== ========================== ==========================================

Unknown names raise `ParameterError` listing the valid choices.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ParameterError
from .kernels import SmoothKernel, TestFunction
from .sie_solver import DiffusionCoefficient

__all__ = ["sigma_preset", "g_preset", "phi_preset", "kappa_preset"]

SIGMA_NAMES = ("zero", "one", "linear", "sqrt", "holder:G")
G_NAMES = ("zero", "one", "const:V")
PHI_NAMES = ("bump:A:B",)
KAPPA_NAMES = ("one", "two_plus_sin")


def _unknown(kind: str, name: str, valid) -> ParameterError:
    return ParameterError(
        f"unknown {kind} preset {name!r}; valid: {', '.join(valid)}"
    )


def sigma_preset(name: str) -> DiffusionCoefficient:
    """Build a diffusion coefficient from its preset name."""
    if name == "zero":
        return DiffusionCoefficient(lambda x: np.zeros_like(x), gamma=1.0,
                                    name="zero", constant_value=0.0)
    if name == "one":
        return DiffusionCoefficient(lambda x: np.ones_like(x), gamma=1.0,
                                    name="one", constant_value=1.0)
    if name == "linear":
        return DiffusionCoefficient(lambda x: np.asarray(x, dtype=float),
                                    gamma=1.0, name="linear")
    if name == "sqrt":
        return DiffusionCoefficient(lambda x: np.sqrt(np.maximum(x, 0.0)),
                                    gamma=0.5, name="sqrt")
    if name.startswith("holder:"):
        try:
            gamma = float(name.split(":", 1)[1])
        except ValueError:
            raise _unknown("sigma", name, SIGMA_NAMES) from None
        if not 0.0 < gamma <= 1.0:
            raise ParameterError(
                f"holder preset exponent must lie in (0, 1]; got {gamma!r}"
            )

        def fn(x, _g=gamma):
            ax = np.abs(np.asarray(x, dtype=float))
            return np.minimum(ax ** _g, 1.0 + ax)

        return DiffusionCoefficient(fn, gamma=gamma, name=name)
    raise _unknown("sigma", name, SIGMA_NAMES)


def g_preset(name: str) -> Callable[[np.ndarray], np.ndarray]:
    """Build a time-dependent forcing amplitude from its preset name."""
    if name == "zero":
        return lambda t: np.zeros_like(np.asarray(t, dtype=float))
    if name == "one":
        return lambda t: np.ones_like(np.asarray(t, dtype=float))
    if name.startswith("const:"):
        try:
            v = float(name.split(":", 1)[1])
        except ValueError:
            raise _unknown("g", name, G_NAMES) from None
        return lambda t, _v=v: np.full_like(np.asarray(t, dtype=float), _v)
    raise _unknown("g", name, G_NAMES)


def phi_preset(name: str) -> TestFunction:
    """Build a compactly supported test function from its preset name.

    ``bump:A:B`` is the C^1 polynomial bump ``C*(1 - u**2)**2`` with
    ``u`` the affine map of ``[A, B]`` onto ``[-1, 1]`` and ``C`` chosen
    for unit mass (``C = 15 / (8*(B - A))``).
    """
    if name.startswith("bump:"):
        parts = name.split(":")
        if len(parts) != 3:
            raise _unknown("phi", name, PHI_NAMES)
        try:
            a, b = float(parts[1]), float(parts[2])
        except ValueError:
            raise _unknown("phi", name, PHI_NAMES) from None
        if not a < b:
            raise ParameterError(f"bump support needs A < B; got {a}, {b}")
        c = 15.0 / (8.0 * (b - a))

        def fn(x, _a=a, _b=b, _c=c):
            x = np.asarray(x, dtype=float)
            u = (2.0 * x - (_a + _b)) / (_b - _a)
            out = _c * np.square(1.0 - u * u)
            return np.where(np.abs(u) < 1.0, out, 0.0)

        return TestFunction(fn, support=(a, b), name=name, smoothness="C1")
    raise _unknown("phi", name, PHI_NAMES)


def kappa_preset(name: str) -> SmoothKernel:
    """Build a smooth two-argument kernel from its preset name."""
    if name == "one":
        return SmoothKernel(lambda s, t: np.ones_like(np.asarray(s, dtype=float)
                                                      + np.asarray(t, dtype=float)),
                            lower=1.0, name="one")
    if name == "two_plus_sin":
        return SmoothKernel(lambda s, t: 2.0 + np.sin(np.asarray(s, dtype=float)
                                                      + np.asarray(t, dtype=float)),
                            lower=1.0, name="two_plus_sin")
    raise _unknown("kappa", name, KAPPA_NAMES)
