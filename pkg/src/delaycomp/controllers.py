"""Delay-compensating control laws and their sampled-loop adapters.

The functional laws operate on explicit arguments. The *Sampler classes own
the per-loop state (actuator estimate, previous command) and adapt each law
to the simulator's sampling interface; a sampler instance belongs to one
simulation at a time.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import ErrorDynamics, PlantModel, ReferenceTrajectory, as_vector, g_eval
from .errors import ConfigurationError
from .integrators import RKScheme, integrate_horizon
from .sim import (ActuatorModel, CommandQueue, SampleContext, actuator_propagate)
from .timing import TimingModel, transport_delay


@dataclass(frozen=True)
class BaselineController:
    """Design-time feedback law eta = u_bar(xerr, t) with its Jacobians.

    jac_x maps (xerr, t) to the m-by-n Jacobian of u_bar in the error state;
    jac_t to its partial time derivative. Lipschitz metadata is optional.
    """

    u_bar: Callable[[np.ndarray, float], np.ndarray]
    jac_x: Callable[[np.ndarray, float], np.ndarray]
    jac_t: Callable[[np.ndarray, float], np.ndarray]
    lipschitz_u: float | None = None
    lipschitz_udot: float | None = None


def check_jacobians(bc: BaselineController, points, step: float = 1e-6) -> float:
    """Worst relative deviation of the declared Jacobians from central differences.

    points is an iterable of (xerr, t) probes.
    """
    worst = 0.0
    for xerr, t in points:
        xerr = np.asarray(xerr, dtype=float)
        jx = np.atleast_2d(np.asarray(bc.jac_x(xerr, t), dtype=float))
        for i in range(xerr.size):
            offset = np.zeros_like(xerr)
            offset[i] = step
            fd = (bc.u_bar(xerr + offset, t) - bc.u_bar(xerr - offset, t)) / (2 * step)
            denom = 1.0 + float(np.max(np.abs(jx[:, i])))
            worst = max(worst, float(np.max(np.abs(fd - jx[:, i]))) / denom)
        jt = np.asarray(bc.jac_t(xerr, t), dtype=float)
        fd_t = (bc.u_bar(xerr, t + step) - bc.u_bar(xerr, t - step)) / (2 * step)
        worst = max(worst, float(np.max(np.abs(fd_t - jt))) / (1.0 + float(np.max(np.abs(jt)))))
    return worst


def u_dot_analytic(bc: BaselineController, ed: ErrorDynamics, xerr, act,
                   t: float) -> np.ndarray:
    """Command rate along the error flow: jac_x @ g(xerr, act, t) + jac_t."""
    jx = np.atleast_2d(np.asarray(bc.jac_x(xerr, t), dtype=float))
    return jx @ g_eval(ed, xerr, act, t) + np.asarray(bc.jac_t(xerr, t), dtype=float)


def u_dot_numeric(bc: BaselineController, xerr, xerr_dot, t: float) -> np.ndarray:
    """Command rate from a measured error derivative; no actuator feedback."""
    jx = np.atleast_2d(np.asarray(bc.jac_x(xerr, t), dtype=float))
    return jx @ np.asarray(xerr_dot, dtype=float) + np.asarray(bc.jac_t(xerr, t), dtype=float)


def ctrl_fo(bc: BaselineController, ed: ErrorDynamics, am: ActuatorModel,
            xerr, act, t: float) -> np.ndarray:
    """First-order-delay compensation: u_bar + Lambda^-1 * u_bar_dot."""
    return bc.u_bar(xerr, t) + u_dot_analytic(bc, ed, xerr, act, t) / am.rates


@dataclass(frozen=True)
class ObserverState:
    """Actuator estimate plus the decay rates of its estimation error."""

    eta_hat: np.ndarray
    gain: np.ndarray

    def __post_init__(self):
        eta_hat = as_vector(self.eta_hat, name="eta_hat")
        gain = as_vector(self.gain, eta_hat.shape[0], "observer gain")
        if np.any(gain <= 0):
            raise ConfigurationError("observer gain entries must be positive")
        object.__setattr__(self, "eta_hat", eta_hat)
        object.__setattr__(self, "gain", gain)


def observer_step(obs: ObserverState, am: ActuatorModel, u_applied,
                  dt: float) -> ObserverState:
    """Propagate the estimate under the held command (exact update).

    This is the plain model-copy observer; its estimation error decays at the
    actuator rates.
    """
    return ObserverState(eta_hat=actuator_propagate(am, obs.eta_hat, u_applied, dt),
                         gain=obs.gain)


@dataclass(frozen=True)
class GainConfig:
    """Target actuator-error convergence rates (diagonal, positive)."""

    gamma: np.ndarray

    def __post_init__(self):
        gamma = as_vector(self.gamma, name="gamma")
        if np.any(gamma <= 0):
            raise ConfigurationError("gamma entries must be positive")
        object.__setattr__(self, "gamma", gamma)


def ctrl_fo_obs(bc: BaselineController, ed: ErrorDynamics, am: ActuatorModel,
                gains: GainConfig, xerr, eta_hat, t: float) -> np.ndarray:
    """Observer-based compensation with tunable convergence rates.

    (I - Lambda^-1 Gamma) eta_hat + Lambda^-1 Gamma u_bar + Lambda^-1 u_bar_dot.
    With gamma equal to the actuator rates the eta_hat coefficient vanishes
    and the law reduces exactly to ctrl_fo.
    """
    ratio = gains.gamma / am.rates
    udot = u_dot_analytic(bc, ed, xerr, eta_hat, t)
    return (1.0 - ratio) * np.asarray(eta_hat, dtype=float) \
        + ratio * bc.u_bar(xerr, t) + udot / am.rates


def predict_over_delay(plant: PlantModel, am: ActuatorModel, scheme: RKScheme,
                       x, eta_hat, queue: CommandQueue, t_i: float,
                       delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Integrate the stacked (x, eta_hat) model from t_i over delta.

    The queue snapshot's scheduled deliveries are replayed during the
    horizon, so the hold schedule seen by the model matches what the
    actuator will actually receive; without the replay the prediction is
    wrong whenever the delay spans more than one sampling period.
    """
    n = plant.n
    f = plant.f
    rates = am.rates

    def deriv(y: np.ndarray, s: float) -> np.ndarray:
        u_prime = queue.applied_at(s)
        return np.concatenate((f(y[:n], y[n:], s), rates * (u_prime - y[n:])))

    y0 = np.concatenate((np.asarray(x, dtype=float), np.asarray(eta_hat, dtype=float)))
    y = integrate_horizon(scheme, deriv, y0, t_i, delta)
    return y[:n], y[n:]


def ctrl_predictive(bc: BaselineController, ed: ErrorDynamics, am: ActuatorModel,
                    gains: GainConfig, tm: TimingModel, scheme: RKScheme,
                    x_meas, obs: ObserverState, queue: CommandQueue, t_i: float,
                    predictor_plant: PlantModel | None = None) -> np.ndarray:
    """Predict (x, eta_hat) over the transport delay, then apply ctrl_fo_obs there.

    predictor_plant, when given, replaces the model used for the state
    prediction only (model-error studies); the law itself still uses ed.
    """
    delta = transport_delay(tm, scheme.h, scheme.order)
    x_hat, eta_hat = predict_over_delay(predictor_plant or ed.plant, am, scheme,
                                        x_meas, obs.eta_hat, queue, t_i, delta)
    t_arr = t_i + delta
    return ctrl_fo_obs(bc, ed, am, gains, x_hat - ed.traj.r(t_arr), eta_hat, t_arr)


def ctrl_truncated(am: ActuatorModel, u_bar_now, u_bar_prev, T: float,
                   delta: float) -> np.ndarray:
    """Backward-difference surrogate of the predictive law.

    u_bar + (Lambda^-1 + delta) * (u_bar_now - u_bar_prev) / T, per channel.
    Needs no observer and no model evaluations; its error is second order in
    the common timescale of T, delta, and the actuator time constants.
    """
    if not T > 0:
        raise ConfigurationError("T must satisfy T > 0")
    u_bar_now = np.asarray(u_bar_now, dtype=float)
    u_bar_prev = np.asarray(u_bar_prev, dtype=float)
    return u_bar_now + (1.0 / am.rates + delta) * (u_bar_now - u_bar_prev) / T


def ctrl_pd(kp: float, kd: float, pos_err, vel_err) -> np.ndarray:
    """Plain PD benchmark law: -kp * pos_err - kd * vel_err per channel."""
    return -kp * np.asarray(pos_err, dtype=float) - kd * np.asarray(vel_err, dtype=float)


class _SamplerBase:
    """Common bits of the sampled-loop adapters."""

    delta: float = 0.0

    def reset(self) -> None:  # pragma: no cover - trivial default
        pass


class NaiveBaselineSampler(_SamplerBase):
    """Applies the undelayed design law directly at each sample."""

    def __init__(self, bc: BaselineController, traj: ReferenceTrajectory, delta: float):
        self.bc = bc
        self.traj = traj
        self.delta = delta

    def command(self, ctx: SampleContext) -> np.ndarray:
        xerr = ctx.x - self.traj.r(ctx.t)
        return self.bc.u_bar(xerr, ctx.t)


class PDSampler(_SamplerBase):
    """Double-integrator benchmark PD law on (position, velocity) error."""

    def __init__(self, kp: float, kd: float, traj: ReferenceTrajectory, delta: float):
        self.kp = kp
        self.kd = kd
        self.traj = traj
        self.delta = delta

    def command(self, ctx: SampleContext) -> np.ndarray:
        xerr = ctx.x - self.traj.r(ctx.t)
        return ctrl_pd(self.kp, self.kd, xerr[:1], xerr[1:2])


class _ObserverSamplerBase(_SamplerBase):
    """Maintains the actuator estimate by replaying the applied-hold segments."""

    def __init__(self, am: ActuatorModel, observer_init):
        self.am = am
        self._eta_hat0 = as_vector(observer_init, am.rates.shape[0], "observer_init")
        self.obs = ObserverState(eta_hat=self._eta_hat0, gain=am.rates)

    def reset(self) -> None:
        self.obs = ObserverState(eta_hat=self._eta_hat0, gain=self.am.rates)

    def _advance(self, ctx: SampleContext) -> None:
        for start, end, value in ctx.applied_segments:
            self.obs = observer_step(self.obs, self.am, value, end - start)


class DerivativeCompSampler(_ObserverSamplerBase):
    """ctrl_fo evaluated at the current sample, fed by the actuator estimate."""

    def __init__(self, bc, ed: ErrorDynamics, am: ActuatorModel, delta: float,
                 observer_init):
        super().__init__(am, observer_init)
        self.bc = bc
        self.ed = ed
        self.delta = delta

    def command(self, ctx: SampleContext) -> np.ndarray:
        self._advance(ctx)
        xerr = ctx.x - self.ed.traj.r(ctx.t)
        return ctrl_fo(self.bc, self.ed, self.am, xerr, self.obs.eta_hat, ctx.t)


class ObserverCompSampler(_ObserverSamplerBase):
    """ctrl_fo_obs evaluated at the current sample."""

    def __init__(self, bc, ed: ErrorDynamics, am: ActuatorModel, gains: GainConfig,
                 delta: float, observer_init):
        super().__init__(am, observer_init)
        self.bc = bc
        self.ed = ed
        self.gains = gains
        self.delta = delta

    def command(self, ctx: SampleContext) -> np.ndarray:
        self._advance(ctx)
        xerr = ctx.x - self.ed.traj.r(ctx.t)
        return ctrl_fo_obs(self.bc, self.ed, self.am, self.gains, xerr,
                           self.obs.eta_hat, ctx.t)


class PredictiveSampler(_ObserverSamplerBase):
    """Full predictive law; its delay follows from the timing model and scheme."""

    def __init__(self, bc, ed: ErrorDynamics, am: ActuatorModel, gains: GainConfig,
                 tm: TimingModel, scheme: RKScheme, observer_init,
                 predictor_plant: PlantModel | None = None):
        super().__init__(am, observer_init)
        self.bc = bc
        self.ed = ed
        self.gains = gains
        self.tm = tm
        self.scheme = scheme
        self.predictor_plant = predictor_plant
        self.delta = transport_delay(tm, scheme.h, scheme.order)

    def command(self, ctx: SampleContext) -> np.ndarray:
        self._advance(ctx)
        return ctrl_predictive(self.bc, self.ed, self.am, self.gains, self.tm,
                               self.scheme, ctx.x, self.obs, ctx.queue, ctx.t,
                               predictor_plant=self.predictor_plant)


class TruncatedSampler(_SamplerBase):
    """Backward-difference predictive surrogate; stateful in the previous command."""

    def __init__(self, bc, traj: ReferenceTrajectory, am: ActuatorModel,
                 T: float, delta: float):
        self.bc = bc
        self.traj = traj
        self.am = am
        self.T = T
        self.delta = delta
        self._prev: np.ndarray | None = None

    def reset(self) -> None:
        self._prev = None

    def command(self, ctx: SampleContext) -> np.ndarray:
        xerr = ctx.x - self.traj.r(ctx.t)
        u_bar_now = self.bc.u_bar(xerr, ctx.t)
        u_bar_prev = u_bar_now if self._prev is None else self._prev
        u = ctrl_truncated(self.am, u_bar_now, u_bar_prev, self.T, self.delta)
        self._prev = u_bar_now
        return u
