"""Stability-budget calculators.

Assembles the coupling matrices whose smallest eigenvalues certify decay of
the composite error norm, the growth constants derived from the Lipschitz
data, the admissible sampling period, and the theoretical total-error curve
over the step/order trade-off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, InfeasibleTimingError
from .integrators import RKErrorParams
from .timing import TimingModel, comp_delay, erk_of_step, feasible_step_range, step_cost

_SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class LyapunovBudget:
    """Constants certifying exponential decay for the compensated loop.

    c1..c4 bound the design-time Lyapunov function of the undelayed loop and
    are user-supplied. The Lipschitz and spectral entries describe the error
    field, the design law and its rate, the actuator, the gain matrix, and
    the observer. alpha and beta weight the actuator and observer error
    norms; c3pp is the smallest eigenvalue of the three-way coupling matrix.
    rk carries the integration error constants used by the bound curves.
    """

    c1: float
    c2: float
    c3: float
    c4: float
    L_g: float
    L_ubar: float
    L_udot: float
    lambda_min: float
    lambda_max: float
    gamma_min: float
    gamma_max: float
    omega_min: float
    omega_max: float
    rho: float
    alpha: float
    beta: float
    c3pp: float
    rk: RKErrorParams


def alpha_lower_bound(c3: float, c4: float, L_g: float, lambda_min: float) -> float:
    return (c4 * L_g) ** 2 / (8.0 * c3 * lambda_min)


def beta_lower_bound(c3: float, c4: float, L_g: float, alpha: float, rho: float,
                     gamma_min: float, omega_min: float) -> float | None:
    """Lower bound on beta; None when the gain condition 8*c3*alpha*gamma_min >
    (c4*L_g)^2 fails, in which case no beta makes the coupling matrix definite."""
    denom = omega_min * (8.0 * c3 * alpha * gamma_min - (c4 * L_g) ** 2)
    if denom <= 0:
        return None
    return 2.0 * c3 * alpha ** 2 * rho ** 2 / denom


def gain_condition_holds(budget: LyapunovBudget) -> bool:
    """Whether 8*c3*alpha*gamma_min > (c4*L_g)^2, required for a finite beta bound."""
    return 8.0 * budget.c3 * budget.alpha * budget.gamma_min > (budget.c4 * budget.L_g) ** 2


def k1_matrix(budget: LyapunovBudget) -> np.ndarray:
    """Two-way coupling matrix for the state and actuation error norms."""
    off = -budget.c4 * budget.L_g / 2.0
    return np.array([
        [budget.c3, off],
        [off, 2.0 * budget.alpha * budget.lambda_min],
    ])


def k2_matrix(budget: LyapunovBudget) -> np.ndarray:
    """Three-way coupling matrix including the observer error norm."""
    off = -budget.c4 * budget.L_g / 2.0
    ar = -budget.alpha * budget.rho
    return np.array([
        [budget.c3, off, 0.0],
        [off, 2.0 * budget.alpha * budget.gamma_min, ar],
        [0.0, ar, 2.0 * budget.beta * budget.omega_min],
    ])


def make_budget(*, c1: float, c2: float, c3: float, c4: float, L_g: float,
                L_ubar: float, L_udot: float, lambda_min: float, lambda_max: float,
                gamma_min: float, gamma_max: float, omega_min: float,
                omega_max: float, rho: float, rk: RKErrorParams,
                alpha: float | None = None, beta: float | None = None) -> LyapunovBudget:
    """Build and validate a budget; defaults pick alpha and beta at 1.01x their
    lower bounds (beta falls back to alpha when rho == 0 makes its bound vanish)."""
    for label, value in (("c1", c1), ("c2", c2), ("c3", c3), ("c4", c4)):
        if not value > 0:
            raise ConfigurationError(f"{label} must satisfy {label} > 0")
    for label, value in (("L_g", L_g), ("L_ubar", L_ubar), ("L_udot", L_udot), ("rho", rho)):
        if value < 0:
            raise ConfigurationError(f"{label} must satisfy {label} >= 0")
    for label, value in (("lambda_min", lambda_min), ("lambda_max", lambda_max),
                         ("gamma_min", gamma_min), ("gamma_max", gamma_max),
                         ("omega_min", omega_min), ("omega_max", omega_max)):
        if not value > 0:
            raise ConfigurationError(f"{label} must satisfy {label} > 0")
    if lambda_max < lambda_min or gamma_max < gamma_min or omega_max < omega_min:
        raise ConfigurationError("spectral max entries must dominate the min entries")

    a_lb = alpha_lower_bound(c3, c4, L_g, lambda_min)
    if alpha is None:
        alpha = 1.01 * a_lb if a_lb > 0 else 1.0
    if not alpha > a_lb:
        raise ConfigurationError(
            f"alpha > (c4*L_g)^2/(8*c3*lambda_min) required: alpha={alpha}, bound={a_lb}")
    b_lb = beta_lower_bound(c3, c4, L_g, alpha, rho, gamma_min, omega_min)
    if b_lb is None:
        raise ConfigurationError(
            "gain condition 8*c3*alpha*gamma_min > (c4*L_g)^2 fails; "
            "increase alpha or gamma_min")
    if beta is None:
        beta = 1.01 * b_lb if b_lb > 0 else alpha
    if beta <= b_lb:
        raise ConfigurationError(
            f"beta > coupling bound required: beta={beta}, bound={b_lb}")

    budget = LyapunovBudget(c1=c1, c2=c2, c3=c3, c4=c4, L_g=L_g, L_ubar=L_ubar,
                            L_udot=L_udot, lambda_min=lambda_min, lambda_max=lambda_max,
                            gamma_min=gamma_min, gamma_max=gamma_max,
                            omega_min=omega_min, omega_max=omega_max, rho=rho,
                            alpha=alpha, beta=beta, c3pp=0.0, rk=rk)
    c3pp = float(np.linalg.eigvalsh(k2_matrix(budget)).min())
    if c3pp <= 0:
        raise ConfigurationError("coupling matrix must be positive definite")
    return replace(budget, c3pp=c3pp)


def mu_nu_constants(budget: LyapunovBudget) -> tuple[float, float, float]:
    """The three sqrt(3)-scaled growth constants built from the Lipschitz data."""
    b = budget
    mu = _SQRT3 * max(b.rho + b.L_udot,
                      b.lambda_max * b.L_ubar + b.L_udot * (1.0 + b.L_ubar))
    nu = _SQRT3 * max(b.lambda_max * b.L_ubar + (b.L_g + b.L_udot) * (1.0 + b.L_ubar),
                      b.lambda_max + b.L_udot + b.L_g,
                      b.omega_max + b.L_udot)
    nu0 = _SQRT3 * max(b.L_g * (1.0 + b.L_ubar),
                       b.gamma_max + b.L_g,
                       b.rho + b.omega_max)
    return mu, nu, nu0


def max_sampling_period(budget: LyapunovBudget) -> float:
    """Largest admissible sampling period:
    (1/nu) * ln(1 + (nu/nu0) * c3pp / (2*alpha*mu))."""
    mu, nu, nu0 = mu_nu_constants(budget)
    return math.log1p((nu / nu0) * budget.c3pp / (2.0 * budget.alpha * mu)) / nu


def _phi_raw(budget: LyapunovBudget, T: float) -> float:
    mu, nu, nu0 = mu_nu_constants(budget)
    return (nu0 / nu) * (2.0 * budget.alpha * mu / budget.c3pp) * math.expm1(nu * T)


def phi_of_T(budget: LyapunovBudget, T: float) -> float:
    """Sampling-margin fraction in (0, 1); inverts the period relation for phi."""
    if T <= 0:
        raise ConfigurationError("T must satisfy T > 0")
    bound = max_sampling_period(budget)
    if T >= bound:
        raise InfeasibleTimingError(
            f"T < max_sampling_period required: T={T}, bound={bound}")
    return _phi_raw(budget, T)


def delta_region(budget: LyapunovBudget, T: float, e_rk: float,
                 epsilon: float | None = None) -> tuple[float, float]:
    """Radius bounds of the region where decay is certified.

    Returns (delta_lo, delta_needed): delta_lo is the guaranteed lower edge of
    the asymptotic region (continuous limit 2*alpha*mu*E/c3pp as phi -> 0);
    delta_needed is the smallest admissible outer radius for the chosen
    epsilon, which defaults to the midpoint of (sqrt(phi), 1).
    """
    if e_rk < 0:
        raise ConfigurationError("E_RK must satisfy E_RK >= 0")
    phi = phi_of_T(budget, T)
    mu, nu, nu0 = mu_nu_constants(budget)
    numerator = (2.0 * budget.alpha * mu * nu0 / budget.c3pp) * e_rk \
        + (mu * e_rk + 1.0 / _SQRT3) * phi
    delta_lo = numerator / (nu0 * (1.0 - phi))
    if epsilon is None:
        epsilon = 0.5 * (math.sqrt(phi) + 1.0)
    if not math.sqrt(phi) < epsilon < 1.0:
        raise ConfigurationError(
            f"epsilon must lie in (sqrt(phi), 1): epsilon={epsilon}, phi={phi}")
    delta_needed = numerator / (nu0 * (epsilon ** 2 - phi))
    return delta_lo, delta_needed


@dataclass(frozen=True)
class CurvePoint:
    """One sample of the theoretical total-error curve."""

    h: float
    p: int
    delta_c: float
    e_rk: float
    phi: float
    delta_lo: float


def theory_error_curve(budget: LyapunovBudget, tm: TimingModel, p: int,
                       h_grid: Sequence[float],
                       period_mode: str = "fixed") -> list[CurvePoint]:
    """Total error bound versus computation delay along a step grid.

    period_mode "fixed" uses tm.T for the sampling margin; "delta_c" runs the
    loop as fast as the computation allows, setting T to the computation
    delay of each point. Points whose margin fraction reaches 1 carry an
    infinite bound.
    """
    if period_mode not in ("fixed", "delta_c"):
        raise ConfigurationError('period_mode must be "fixed" or "delta_c"')
    if period_mode == "fixed":
        h_lo, h_hi = feasible_step_range(tm, p)
    else:
        h_lo, h_hi = step_cost(tm, p), tm.delta_s + tm.c_eta + step_cost(tm, p)
    mu, _, nu0 = mu_nu_constants(budget)
    points = []
    for h in h_grid:
        h = float(h)
        if h < h_lo - 1e-12 or h > h_hi + 1e-12:
            raise InfeasibleTimingError(
                f"h within [{h_lo}, {h_hi}] required: h={h}")
        dc = comp_delay(tm, h, p)
        e = erk_of_step(tm, budget.rk, h, p)
        T_here = tm.T if period_mode == "fixed" else dc
        phi = _phi_raw(budget, T_here)
        if phi < 1.0:
            numerator = (2.0 * budget.alpha * mu * nu0 / budget.c3pp) * e \
                + (mu * e + 1.0 / _SQRT3) * phi
            delta_lo = numerator / (nu0 * (1.0 - phi))
        else:
            delta_lo = math.inf
        points.append(CurvePoint(h=h, p=p, delta_c=dc, e_rk=e, phi=phi,
                                 delta_lo=delta_lo))
    return sorted(points, key=lambda pt: pt.delta_c)


def curve_rows(points: Sequence[CurvePoint]) -> tuple[list[str], list[list]]:
    """Header and rows for curve tables: h, p, delta_c, E_RK, phi, delta_lo."""
    header = ["h", "p", "delta_c", "E_RK", "phi", "delta_lo"]
    rows = [[pt.h, pt.p, pt.delta_c, pt.e_rk, pt.phi, pt.delta_lo] for pt in points]
    return header, rows
