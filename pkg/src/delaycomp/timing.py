"""Computation-budget algebra tying integrator step and order to delay.

A predictor that integrates over the total transport delay delta_c + delta_s
with step h runs (delta_c + delta_s) / h steps, each costing p * C_f + C_0,
plus the control-law cost C_eta. Solving the resulting balance

    delta_c = (delta_c + delta_s) / h * (p * C_f + C_0) + C_eta

for delta_c gives the closed forms implemented here, together with the step
range on which the schedule is realizable and the prediction-error bound as
a function of the step alone.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InfeasibleTimingError
from .integrators import RKErrorParams, erk_bound, rk_scheme

_ORDERS = (1, 2, 3, 4)


@dataclass(frozen=True)
class TimingModel:
    """Per-call evaluation costs, system delay, and sampling period (seconds)."""

    c_f: float
    c_0: float
    c_eta: float
    delta_s: float
    T: float

    def __post_init__(self):
        if not self.c_f > 0:
            raise ConfigurationError("C_f must satisfy C_f > 0")
        if self.c_0 < 0:
            raise ConfigurationError("C_0 must satisfy C_0 >= 0")
        if self.c_eta < 0:
            raise ConfigurationError("C_eta must satisfy C_eta >= 0")
        if self.delta_s < 0:
            raise ConfigurationError("delta_s must satisfy delta_s >= 0")
        if not self.T > 0:
            raise ConfigurationError("T must satisfy T > 0")


def _check_order(p: int) -> None:
    if p not in _ORDERS:
        raise ConfigurationError(f"order must be one of {_ORDERS}, got {p}")


def step_cost(tm: TimingModel, p: int) -> float:
    """Wall time of one predictor step: p * C_f + C_0."""
    _check_order(p)
    return p * tm.c_f + tm.c_0


def comp_delay(tm: TimingModel, h: float, p: int) -> float:
    """Computation delay delta_c = (h*C_eta + delta_s*(p*C_f + C_0)) / (h - p*C_f - C_0)."""
    cost = step_cost(tm, p)
    if tm.delta_s + tm.c_eta == 0.0:
        # free controller and no system delay: nothing to predict over
        return 0.0
    if h <= cost:
        raise InfeasibleTimingError(
            f"h > p*C_f + C_0 required: h={h}, p*C_f + C_0={cost}")
    return (h * tm.c_eta + tm.delta_s * cost) / (h - cost)


def transport_delay(tm: TimingModel, h: float, p: int) -> float:
    """Total delay Delta = (delta_s + C_eta) * h / (h - p*C_f - C_0).

    Satisfies Delta == comp_delay + delta_s exactly.
    """
    cost = step_cost(tm, p)
    if tm.delta_s + tm.c_eta == 0.0:
        return 0.0
    if h <= cost:
        raise InfeasibleTimingError(
            f"h > p*C_f + C_0 required: h={h}, p*C_f + C_0={cost}")
    return (tm.delta_s + tm.c_eta) * h / (h - cost)


def feasible_step_range(tm: TimingModel, p: int) -> tuple[float, float]:
    """Step interval [h_lo, h_hi] on which the delay schedule is realizable.

    The lower end encodes delta_c <= T, the upper end h <= delta_c + delta_s.
    Requires T > C_eta + p*C_f + C_0.
    """
    cost = step_cost(tm, p)
    if not tm.T > tm.c_eta + cost:
        raise InfeasibleTimingError(
            f"T > C_eta + p*C_f + C_0 required: T={tm.T}, "
            f"C_eta + p*C_f + C_0={tm.c_eta + cost}")
    h_lo = (tm.T + tm.delta_s) / (tm.T - tm.c_eta) * cost
    h_hi = tm.delta_s + tm.c_eta + cost
    if h_lo > h_hi:  # unreachable given the T check above; kept as a guard
        raise InfeasibleTimingError(
            f"empty step range: h_lo={h_lo} > h_hi={h_hi}")
    return h_lo, h_hi


def step_for_comp_delay(tm: TimingModel, p: int, delta_c: float) -> float:
    """Invert comp_delay: the step whose schedule yields the given delta_c."""
    cost = step_cost(tm, p)
    if not delta_c > tm.c_eta:
        raise InfeasibleTimingError(
            f"delta_c > C_eta required: delta_c={delta_c}, C_eta={tm.c_eta}")
    return cost * (tm.delta_s + delta_c) / (delta_c - tm.c_eta)


def erk_of_step(tm: TimingModel, params: RKErrorParams, h: float, p: int) -> float:
    """Prediction-error bound with the transport delay substituted in terms of h."""
    return erk_bound(params, rk_scheme(p, h), transport_delay(tm, h, p))


def optimal_step(tm: TimingModel, params: RKErrorParams, p: int,
                 resolution: int = 10_000) -> tuple[float, float]:
    """Grid minimizer of erk_of_step over the feasible step range.

    Grid search rather than a closed form: the objective is cheap and its
    minimizer has no tractable expression.
    """
    if resolution < 1:
        raise ConfigurationError("resolution must satisfy resolution >= 1")
    h_lo, h_hi = feasible_step_range(tm, p)
    if h_hi - h_lo < 1e-15:
        return h_lo, erk_of_step(tm, params, h_lo, p)
    grid = np.linspace(h_lo, h_hi, resolution)
    values = np.array([erk_of_step(tm, params, float(h), p) for h in grid])
    best = int(np.argmin(values))
    return float(grid[best]), float(values[best])


def calibrate_costs(plant_f, control_fn, x, eta, t: float = 0.0,
                    loops: int = 20_000, repeats: int = 5) -> dict[str, float]:
    """Measure C_f, C_eta, and C_0 on the current host.

    Times the plant field, the control law, and the non-field share of one
    fourth-order step. Results depend on the machine; experiments use fixed
    configured costs so they stay reproducible.
    """
    x = np.asarray(x, dtype=float)
    eta = np.asarray(eta, dtype=float)

    def best_of(fn) -> float:
        timings = []
        for _ in range(repeats):
            start = time.perf_counter()
            for _ in range(loops):
                fn()
            timings.append((time.perf_counter() - start) / loops)
        return min(timings)

    c_f = best_of(lambda: plant_f(x, eta, t))
    c_eta = best_of(lambda: control_fn(x, eta, t))

    scheme = rk_scheme(4, 1e-3)
    from .integrators import rk_step

    def field(xv, tv):
        return plant_f(xv, eta, tv)

    per_step = best_of(lambda: rk_step(scheme, field, x, t))
    c_0 = max(per_step - 4 * c_f, 0.0)
    return {"C_f": c_f, "C_0": c_0, "C_eta": c_eta}
