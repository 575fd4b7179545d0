"""Fixed-step explicit Runge-Kutta schemes of orders 1 through 4.

The tableaus are the canonical minimal-stage choices with stage count equal
to the order: forward Euler, Heun's explicit trapezoid, Kutta's third-order
rule, and the classic fourth-order scheme. One step therefore performs
exactly p derivative evaluations, which is what the computation-delay model
in the timing module charges for.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, NumericalBlowupError

# order -> (stage matrix rows below the diagonal, weights, nodes)
_TABLEAUS = {
    1: ((), (1.0,), (0.0,)),
    2: (((1.0,),), (0.5, 0.5), (0.0, 1.0)),
    3: (((0.5,), (-1.0, 2.0)), (1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0), (0.0, 0.5, 1.0)),
    4: (
        ((0.5,), (0.0, 0.5), (0.0, 0.0, 1.0)),
        (1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0),
        (0.0, 0.5, 0.5, 1.0),
    ),
}


@dataclass(frozen=True)
class RKScheme:
    """Explicit Runge-Kutta tableau of a given order with a fixed step."""

    order: int
    h: float
    a: tuple
    b: tuple
    c: tuple

    def __post_init__(self):
        if self.order not in _TABLEAUS:
            raise ConfigurationError(f"order must be one of {sorted(_TABLEAUS)}, got {self.order}")
        if not self.h > 0:
            raise ConfigurationError("step h must satisfy h > 0")
        if abs(sum(self.b) - 1.0) > 1e-12:
            raise ConfigurationError("tableau weights must sum to 1")


def rk_scheme(order: int, h: float) -> RKScheme:
    """Scheme factory for p in {1, 2, 3, 4}."""
    if order not in _TABLEAUS:
        raise ConfigurationError(f"order must be one of {sorted(_TABLEAUS)}, got {order}")
    a, b, c = _TABLEAUS[order]
    return RKScheme(order=order, h=h, a=a, b=b, c=c)


def rk_step(scheme: RKScheme, deriv, x: np.ndarray, t: float) -> np.ndarray:
    """One explicit step of length scheme.h from (x, t).

    Performs exactly scheme.order derivative evaluations. A non-finite
    derivative raises NumericalBlowupError carrying the offending time.
    """
    h = scheme.h
    stages = []
    for i, ci in enumerate(scheme.c):
        xi = x
        if i:
            incr = None
            for j, aij in enumerate(scheme.a[i - 1]):
                if aij == 0.0:
                    continue
                term = aij * stages[j]
                incr = term if incr is None else incr + term
            if incr is not None:
                xi = x + h * incr
        ti = t + ci * h
        ki = np.asarray(deriv(xi, ti), dtype=float)
        if not np.all(np.isfinite(ki)):
            raise NumericalBlowupError(f"non-finite derivative at t={ti}", t=ti)
        stages.append(ki)
    total = scheme.b[0] * stages[0]
    for bi, ki in zip(scheme.b[1:], stages[1:]):
        total = total + bi * ki
    return x + h * total


def integrate_horizon(scheme: RKScheme, deriv, x0, t0: float, horizon: float) -> np.ndarray:
    """March ceil(horizon / h) steps, shortening the last so the endpoint is exact."""
    if horizon < 0:
        raise ConfigurationError("horizon must satisfy horizon >= 0")
    x = np.asarray(x0, dtype=float).copy()
    if horizon == 0:
        return x
    n_full = int(math.floor(horizon / scheme.h + 1e-9))
    for i in range(n_full):
        x = rk_step(scheme, deriv, x, t0 + i * scheme.h)
    remainder = horizon - n_full * scheme.h
    if remainder > 1e-12 * max(1.0, horizon):
        x = rk_step(replace(scheme, h=remainder), deriv, x, t0 + n_full * scheme.h)
    return x


@dataclass(frozen=True)
class RKErrorParams:
    """Constants of the horizon-integration error bound.

    M bounds the one-step truncation as M * h**p. Estimate it from sampled
    higher derivatives of the integrated field, or fit it to measured
    one-shot prediction errors; fields driven by piecewise-constant held
    inputs lose smoothness at the hold switches, which inflates the
    effective constant for higher orders. w is the per-step model-error
    bound. L_rk is the Lipschitz constant of the one-step map; the Lipschitz
    constant of the integrated field is the practical estimate.
    """

    M: float
    w: float
    L_rk: float

    def __post_init__(self):
        for label, value in (("M", self.M), ("w", self.w), ("L_rk", self.L_rk)):
            if not math.isfinite(value):
                raise ConfigurationError(f"{label} must be finite")
        if self.M < 0:
            raise ConfigurationError("M must satisfy M >= 0")
        if self.w < 0:
            raise ConfigurationError("w must satisfy w >= 0")
        if not self.L_rk > 0:
            raise ConfigurationError("L_rk must satisfy L_rk > 0")


def erk_bound(params: RKErrorParams, scheme: RKScheme, delta: float) -> float:
    """Prediction-error bound over a horizon delta.

    (M h**p + w) / L_rk * (exp(L_rk * delta) - 1); zero iff delta == 0 or
    the numerator vanishes.
    """
    if delta < 0:
        raise ConfigurationError("delta must satisfy delta >= 0")
    amplitude = params.M * scheme.h ** scheme.order + params.w
    return amplitude / params.L_rk * math.expm1(params.L_rk * delta)
