"""Sampled-data closed-loop simulator with delayed command delivery.

Event timeline: the controller samples the plant state at t_i = i * T and
issues a command that reaches the actuator at t_i + delta, where delta is
the controller's total transport delay (computation plus system delay).
Deliveries apply as a zero-order hold on the most recently received command.
Between events the actuator channels follow their exact first-order
response to the held command, and the plant state is integrated with the
classic fourth-order scheme at plant_step resolution; integration segments
are split exactly at sampling and delivery instants, so no event falls
inside a step.

A single run is strictly sequential and deterministic; independent runs may
execute concurrently.
"""
from __future__ import annotations

import csv
import io
import math
from bisect import bisect_right
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .core import ReferenceTrajectory, as_vector
from .errors import ConfigurationError, InfeasibleTimingError, NumericalBlowupError
from .integrators import rk_scheme, rk_step
from .timing import TimingModel, transport_delay

BLOWUP_NORM = 1e6
_TIME_EPS = 1e-12


@dataclass(frozen=True)
class ActuatorModel:
    """Diagonal first-order actuator: etadot = -rates * (eta - u_held)."""

    rates: np.ndarray

    def __post_init__(self):
        rates = as_vector(self.rates, name="actuator rates")
        if np.any(rates <= 0):
            raise ConfigurationError("actuator rates must satisfy lambda > 0")
        object.__setattr__(self, "rates", rates)

    @property
    def lambda_min(self) -> float:
        return float(np.min(self.rates))

    @property
    def lambda_max(self) -> float:
        return float(np.max(self.rates))


def actuator_propagate(am: ActuatorModel, eta, u_hold, dt: float) -> np.ndarray:
    """Exact per-channel response to a constant held command over dt."""
    if dt < 0:
        raise ConfigurationError("dt must satisfy dt >= 0")
    eta = np.asarray(eta, dtype=float)
    u_hold = np.asarray(u_hold, dtype=float)
    return u_hold + (eta - u_hold) * np.exp(-am.rates * dt)


@dataclass(frozen=True)
class ScheduledCommand:
    """A command together with when it was issued and when it applies."""

    issue_time: float
    delivery_time: float
    value: np.ndarray


@dataclass(frozen=True)
class CommandQueue:
    """Snapshot of the currently applied command and the in-flight deliveries."""

    applied: np.ndarray
    pending: tuple[ScheduledCommand, ...] = ()

    def __post_init__(self):
        times = [cmd.delivery_time for cmd in self.pending]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigurationError("pending delivery times must be strictly increasing")

    def applied_at(self, s: float) -> np.ndarray:
        """Zero-order-hold replay: the command the actuator holds at time s."""
        value = self.applied
        for cmd in self.pending:
            if cmd.delivery_time <= s:
                value = cmd.value
            else:
                break
        return value


@dataclass(frozen=True)
class SampleContext:
    """What a controller sees at a sampling instant."""

    t: float
    x: np.ndarray
    queue: CommandQueue
    applied_segments: tuple[tuple[float, float, np.ndarray], ...]


@dataclass(frozen=True)
class SimConfig:
    """Run settings. seed is reserved; runs are fully deterministic."""

    horizon: float
    plant_step: float
    T: float
    initial_state: np.ndarray
    initial_actuator: np.ndarray
    initial_command: np.ndarray | None = None
    rmse_window: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not self.horizon > 0:
            raise ConfigurationError("horizon must satisfy horizon > 0")
        if not self.plant_step > 0:
            raise ConfigurationError("plant_step must satisfy plant_step > 0")
        if not self.T > 0:
            raise ConfigurationError("T must satisfy T > 0")
        if not 0 < self.rmse_window <= 1:
            raise ConfigurationError("rmse_window must lie in (0, 1]")


@dataclass(frozen=True)
class SimResult:
    """Recorded trace plus the issued command log and the stability verdict."""

    times: np.ndarray
    states: np.ndarray
    actuator: np.ndarray
    applied: np.ndarray
    commands: tuple[ScheduledCommand, ...]
    horizon: float
    unstable: bool
    blowup_time: float | None
    rmse_ss: float


def run_closed_loop(plant, traj: ReferenceTrajectory, actuator: ActuatorModel,
                    controller, tm: TimingModel, cfg: SimConfig) -> SimResult:
    """Simulate the sampled loop; numerical blowup yields a truncated result
    flagged unstable rather than an exception."""
    delta = float(controller.delta)
    if delta < 0:
        raise ConfigurationError("controller delay must satisfy delta >= 0")
    if abs(cfg.T - tm.T) > _TIME_EPS:
        raise ConfigurationError("SimConfig.T must equal TimingModel.T")
    delta_c = delta - tm.delta_s
    if delta_c < -1e-9:
        raise ConfigurationError("controller delay must include the system delay")
    if delta_c > tm.T + 1e-9:
        raise InfeasibleTimingError(
            f"delta_c <= T required: delta_c={delta_c}, T={tm.T}")
    scheme = getattr(controller, "scheme", None)
    if scheme is not None:
        declared = transport_delay(tm, scheme.h, scheme.order)
        if abs(declared - delta) > 1e-9:
            raise ConfigurationError(
                "predictive controller delay must equal transport_delay(tm, h, p)")
    step_limit = min(cfg.T, delta) / 5.0 if delta > 0 else cfg.T / 5.0
    if cfg.plant_step > step_limit + _TIME_EPS:
        raise ConfigurationError(
            f"plant_step <= min(T, delta)/5 required: plant_step={cfg.plant_step}, "
            f"limit={step_limit}")

    x = as_vector(cfg.initial_state, plant.n, "initial_state").copy()
    eta = as_vector(cfg.initial_actuator, plant.m, "initial_actuator").copy()
    if cfg.initial_command is not None:
        u_applied = as_vector(cfg.initial_command, plant.m, "initial_command").copy()
    elif traj.ref_control is not None:
        u_applied = as_vector(traj.ref_control(0.0), plant.m, "reference control").copy()
    else:
        u_applied = np.zeros(plant.m)

    n_samples = int(math.floor((cfg.horizon - _TIME_EPS) / cfg.T)) + 1
    sample_times = [i * cfg.T for i in range(n_samples)]

    pending: list[ScheduledCommand] = []
    issued: list[ScheduledCommand] = []
    change_times: list[float] = [0.0]
    change_values: list[np.ndarray] = [u_applied.copy()]
    last_sample: float | None = None

    times: list[float] = []
    states: list[np.ndarray] = []
    etas: list[np.ndarray] = []
    applieds: list[np.ndarray] = []
    unstable = False
    blowup_time: float | None = None

    base_scheme = rk_scheme(4, cfg.plant_step)

    def record(t: float) -> None:
        times.append(t)
        states.append(x.copy())
        etas.append(eta.copy())
        applieds.append(u_applied.copy())

    def apply_due(t: float) -> None:
        nonlocal u_applied
        while pending and pending[0].delivery_time <= t + _TIME_EPS:
            cmd = pending.pop(0)
            u_applied = cmd.value.copy()
            change_times.append(cmd.delivery_time)
            change_values.append(u_applied.copy())

    def segments_since(a: float | None, b: float):
        if a is None:
            return ()
        segs = []
        idx = max(bisect_right(change_times, a + _TIME_EPS) - 1, 0)
        start = a
        for k in range(idx, len(change_times)):
            end = change_times[k + 1] if k + 1 < len(change_times) else b
            end = min(end, b)
            if end > start + _TIME_EPS:
                segs.append((start, end, change_values[k]))
            start = end
            if start >= b - _TIME_EPS:
                break
        return tuple(segs)

    def sample(t: float) -> bool:
        nonlocal last_sample
        ctx = SampleContext(
            t=t,
            x=x.copy(),
            queue=CommandQueue(applied=u_applied.copy(), pending=tuple(pending)),
            applied_segments=segments_since(last_sample, t),
        )
        try:
            u = np.asarray(controller.command(ctx), dtype=float)
        except NumericalBlowupError as exc:
            return _fail(exc.t if exc.t is not None else t)
        if u.shape != (plant.m,) or not np.all(np.isfinite(u)):
            return _fail(t)
        cmd = ScheduledCommand(issue_time=t, delivery_time=t + delta, value=u.copy())
        pending.append(cmd)
        issued.append(cmd)
        last_sample = t
        if delta == 0.0:
            apply_due(t)
        return True

    def _fail(t_bad: float) -> bool:
        nonlocal unstable, blowup_time
        unstable = True
        blowup_time = t_bad
        return False

    controller.reset()
    si = 0
    t_cur = 0.0
    apply_due(t_cur)
    if si < n_samples and sample_times[si] <= t_cur + _TIME_EPS:
        sample(t_cur)
        si += 1
    record(t_cur)

    while not unstable and t_cur < cfg.horizon - _TIME_EPS:
        t_sample = sample_times[si] if si < n_samples else math.inf
        t_delivery = pending[0].delivery_time if pending else math.inf
        t_next = min(t_sample, t_delivery, cfg.horizon)

        # hold schedule is constant on (t_cur, t_next]; actuator is exact there
        seg_len = t_next - t_cur
        eta0 = eta.copy()
        u_seg = u_applied
        rates = actuator.rates
        t_seg = t_cur

        def eta_at(s: float) -> np.ndarray:
            return u_seg + (eta0 - u_seg) * np.exp(-rates * (s - t_seg))

        def deriv(xv: np.ndarray, s: float) -> np.ndarray:
            return plant.f(xv, eta_at(s), s)

        n_sub = max(int(math.ceil(seg_len / cfg.plant_step - 1e-9)), 1)
        s_prev = t_cur
        for k in range(1, n_sub + 1):
            s_target = t_next if k == n_sub else t_cur + k * cfg.plant_step
            h_sub = s_target - s_prev
            if h_sub <= _TIME_EPS:
                continue
            scheme_sub = base_scheme if abs(h_sub - cfg.plant_step) < _TIME_EPS \
                else replace(base_scheme, h=h_sub)
            try:
                x = rk_step(scheme_sub, deriv, x, s_prev)
            except NumericalBlowupError as exc:
                _fail(exc.t if exc.t is not None else s_prev)
                break
            if not np.all(np.isfinite(x)) or float(np.linalg.norm(x)) > BLOWUP_NORM:
                _fail(s_target)
                break
            eta = eta_at(s_target)
            s_prev = s_target
            if s_target < t_next - _TIME_EPS:
                record(s_target)
        if unstable:
            break
        t_cur = t_next
        if t_cur >= cfg.horizon - _TIME_EPS:
            record(cfg.horizon)
            break
        apply_due(t_cur)
        if si < n_samples and sample_times[si] <= t_cur + _TIME_EPS:
            if not sample(t_cur):
                record(t_cur)
                break
            si += 1
        record(t_cur)

    result = SimResult(
        times=np.asarray(times),
        states=np.asarray(states),
        actuator=np.asarray(etas),
        applied=np.asarray(applieds),
        commands=tuple(issued),
        horizon=cfg.horizon,
        unstable=unstable,
        blowup_time=blowup_time,
        rmse_ss=math.inf,
    )
    return replace_rmse(result, traj, cfg.rmse_window)


def steady_state_rmse(res: SimResult, traj: ReferenceTrajectory,
                      window_fraction: float) -> float:
    """RMS of the tracking-error norm over the trailing window of the horizon.

    Unstable (truncated) runs report +inf so sweeps can record divergence.
    """
    if not 0 < window_fraction <= 1:
        raise ConfigurationError("window_fraction must lie in (0, 1]")
    if res.unstable or res.times.size == 0:
        return math.inf
    cutoff = res.horizon * (1.0 - window_fraction)
    mask = res.times >= cutoff - _TIME_EPS
    if not np.any(mask):
        return math.inf
    sq_sum = 0.0
    count = 0
    for t, state in zip(res.times[mask], res.states[mask]):
        err = state - traj.r(float(t))
        sq_sum += float(err @ err)
        count += 1
    return math.sqrt(sq_sum / count)


def replace_rmse(res: SimResult, traj: ReferenceTrajectory,
                 window_fraction: float) -> SimResult:
    rmse = steady_state_rmse(res, traj, window_fraction)
    return replace(res, rmse_ss=rmse)


def trace_rows(res: SimResult, traj: ReferenceTrajectory):
    """Header and rows for the trace table: time, x, r, eta, u_applied."""
    n = res.states.shape[1] if res.states.size else 0
    m = res.actuator.shape[1] if res.actuator.size else 0
    header = (["time"] + [f"x{i}" for i in range(n)] + [f"r{i}" for i in range(n)]
              + [f"eta{j}" for j in range(m)] + [f"u_applied{j}" for j in range(m)])
    rows = []
    for idx, t in enumerate(res.times):
        r_val = traj.r(float(t))
        rows.append([float(t)] + [float(v) for v in res.states[idx]]
                    + [float(v) for v in r_val]
                    + [float(v) for v in res.actuator[idx]]
                    + [float(v) for v in res.applied[idx]])
    return header, rows


def write_csv(res: SimResult, traj: ReferenceTrajectory, target) -> None:
    """Serialize the trace; target is a path or a text file object."""
    header, rows = trace_rows(res, traj)
    if isinstance(target, (str, bytes)) or hasattr(target, "__fspath__"):
        with open(target, "w", newline="", encoding="utf-8") as fh:
            _write(fh, header, rows)
    else:
        _write(target, header, rows)


def _write(fh: io.TextIOBase, header, rows) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
