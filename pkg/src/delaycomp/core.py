"""Plant, reference-trajectory, and tracking-error domain types.

States and actuator inputs are plain 1-D float arrays. Model objects are
frozen dataclasses wrapping pure evaluator callables, so they can be shared
freely across concurrent sweep workers.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError

VectorFn = Callable[[float], np.ndarray]


def as_vector(values, dim: int | None = None, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float array, optionally of fixed length."""
    v = np.atleast_1d(np.asarray(values, dtype=float))
    if v.ndim != 1:
        raise ConfigurationError(f"{name} must be 1-D, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ConfigurationError(f"{name} must have length {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ConfigurationError(f"{name} must be finite")
    return v


@dataclass(frozen=True)
class PlantModel:
    """Plant dynamics xdot = f(x, eta, t) plus dimension metadata.

    lipschitz_f is optional; operations that need a Lipschitz constant can
    estimate one with estimate_lipschitz over a caller-declared box.
    """

    n: int
    m: int
    f: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    lipschitz_f: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("state dimension must satisfy n >= 1")
        if self.m < 1:
            raise ConfigurationError("actuator dimension must satisfy m >= 1")
        if self.lipschitz_f is not None and not self.lipschitz_f >= 0:
            raise ConfigurationError("lipschitz_f must satisfy lipschitz_f >= 0")

    def eval(self, x, eta, t: float) -> np.ndarray:
        """Validated evaluation of f. Hot loops may call .f directly."""
        x = as_vector(x, self.n, "state")
        eta = as_vector(eta, self.m, "actuator input")
        return as_vector(self.f(x, eta, t), self.n, "plant derivative")


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Time-parameterized reference with analytic first and second derivatives.

    ref_control, when present, is the feedforward actuator input that keeps
    the plant exactly on the reference.
    """

    r: VectorFn
    r_dot: VectorFn
    r_ddot: VectorFn
    ref_control: VectorFn | None = None

    @classmethod
    def from_position(cls, r: VectorFn, ref_control: VectorFn | None = None,
                      step: float = 1e-5) -> "ReferenceTrajectory":
        """Adapter for position-only references.

        Builds r_dot and r_ddot by central differences with the given step;
        use analytic derivatives whenever they are available.
        """

        def r_dot(t: float) -> np.ndarray:
            return (np.asarray(r(t + step), dtype=float)
                    - np.asarray(r(t - step), dtype=float)) / (2.0 * step)

        def r_ddot(t: float) -> np.ndarray:
            return (np.asarray(r(t + step), dtype=float)
                    - 2.0 * np.asarray(r(t), dtype=float)
                    + np.asarray(r(t - step), dtype=float)) / step ** 2

        return cls(r=r, r_dot=r_dot, r_ddot=r_ddot, ref_control=ref_control)


def reference_consistency_residual(traj: ReferenceTrajectory, times: Sequence[float],
                                   step: float = 1e-4) -> float:
    """Worst deviation of r_dot/r_ddot from central differences of r.

    Spot-check helper for the derivative-consistency requirement on
    trajectories (tolerance 1e-4 at the default step).
    """
    worst = 0.0
    for t in times:
        fd1 = (traj.r(t + step) - traj.r(t - step)) / (2.0 * step)
        fd2 = (traj.r(t + step) - 2.0 * traj.r(t) + traj.r(t - step)) / step ** 2
        worst = max(worst, float(np.max(np.abs(fd1 - traj.r_dot(t)))))
        worst = max(worst, float(np.max(np.abs(fd2 - traj.r_ddot(t)))))
    return worst


@dataclass(frozen=True)
class ErrorDynamics:
    """Tracking-error dynamics derived from a plant and a reference."""

    plant: PlantModel
    traj: ReferenceTrajectory

    def g(self, xerr: np.ndarray, act: np.ndarray, t: float) -> np.ndarray:
        """Unvalidated error-coordinate field for hot loops."""
        return self.plant.f(xerr + self.traj.r(t), act, t) - self.traj.r_dot(t)


def g_eval(ed: ErrorDynamics, xerr, act, t: float) -> np.ndarray:
    """Error-coordinate field f(xerr + r(t), act, t) - rdot(t), with dim checks."""
    xerr = as_vector(xerr, ed.plant.n, "state error")
    act = as_vector(act, ed.plant.m, "actuator input")
    f_val = as_vector(ed.plant.f(xerr + ed.traj.r(t), act, t),
                      ed.plant.n, "plant derivative")
    return f_val - ed.traj.r_dot(t)


def reference_feasibility_check(ed: ErrorDynamics, t_samples: Sequence[float],
                                tol: float = 1e-8) -> Optional[bool]:
    """True iff the reference control holds the zero-error state at every sample.

    Returns None ("not checkable") when the trajectory carries no reference
    control; that outcome is distinct from an infeasibility verdict.
    """
    if ed.traj.ref_control is None:
        return None
    zero = np.zeros(ed.plant.n)
    for t in t_samples:
        residual = g_eval(ed, zero, ed.traj.ref_control(t), t)
        if float(np.linalg.norm(residual)) > tol:
            return False
    return True


def estimate_lipschitz(fn: Callable[[np.ndarray], np.ndarray], lo, hi,
                       samples: int = 10_000, seed: int = 0) -> float:
    """Empirical Lipschitz constant of fn over the box [lo, hi].

    Samples random point pairs and returns the largest difference quotient.
    The box is a caller decision; it is never inferred.
    """
    lo = as_vector(lo, name="box lower corner")
    hi = as_vector(hi, lo.shape[0], "box upper corner")
    if np.any(hi < lo):
        raise ConfigurationError("box upper corner must dominate the lower corner")
    rng = np.random.default_rng(seed)
    a = rng.uniform(lo, hi, size=(samples, lo.shape[0]))
    b = rng.uniform(lo, hi, size=(samples, lo.shape[0]))
    best = 0.0
    for u, v in zip(a, b):
        gap = float(np.linalg.norm(u - v))
        if gap < 1e-12:
            continue
        ratio = float(np.linalg.norm(np.asarray(fn(u)) - np.asarray(fn(v)))) / gap
        best = max(best, ratio)
    return best
