"""Delayed double-integrator benchmark: system builders, presets, and sweeps.

The benchmark plant is a double integrator whose force input passes through
a first-order actuator channel fed by delayed commands. The experiment
functions return (fieldnames, rows) tables; the CLI writes them out as CSV
with a figure rendered alongside. Sweep cells are independent and keyed by
their parameters, so multi-process execution assembles identical tables.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .analysis import LyapunovBudget, make_budget, theory_error_curve
from .controllers import (BaselineController, NaiveBaselineSampler,
                          ObserverCompSampler, PDSampler, PredictiveSampler,
                          TruncatedSampler, GainConfig)
from .core import ErrorDynamics, PlantModel, ReferenceTrajectory
from .errors import ConfigurationError
from .integrators import RKErrorParams, rk_scheme
from .sim import ActuatorModel, SimConfig, run_closed_loop
from .timing import TimingModel, optimal_step, step_for_comp_delay


@dataclass(frozen=True)
class DDIParams:
    """Benchmark parameters: control multiplier, actuator rate, feedback gains,
    and the per-call computation costs."""

    b: float = 1.0
    lam: float = 5.0
    k1: float = 1.0
    k2: float = 2.0
    c_f: float = 0.005
    c_0: float = 0.0
    c_eta: float = 0.025

    def __post_init__(self):
        if self.b == 0:
            raise ConfigurationError("b must satisfy b != 0")
        if not self.lam > 0:
            raise ConfigurationError("lambda must satisfy lambda > 0")
        if not self.k1 > 0:
            raise ConfigurationError("k1 must satisfy k1 > 0")
        if not self.k2 > 0:
            raise ConfigurationError("k2 must satisfy k2 > 0")


TABLE2 = DDIParams()

# Observer-based law runs with gamma = GAMMA_SCALE * lambda.
GAMMA_SCALE = 2.0

# PD benchmark gains, frozen from a one-time coarse grid search minimizing
# steady-state RMSE at delta_s = 0.1, omega = 1 (see tune_pd).
PD_KP = 2.0
PD_KD = 2.0

# Integration-error constants for the trade-off curves. M grows with the
# order because the predictor replays a piecewise-constant hold schedule:
# measured one-shot errors fit a lower effective order, which inflates the
# constant for the higher-order schemes. Illustrative values; the trend
# experiments check shapes, not curve levels.
RK_ERROR_M = {1: 0.002, 2: 0.02, 3: 0.2, 4: 2.0}
RK_ERROR_L = 2.0

DELTA_C_GRID = (0.05, 0.0625, 0.075, 0.0875, 0.1)
FIG2_DELTA_S = (0.2, 0.3)
FIG2_W = (0.0, 0.2, 0.5)
FIG3_W = (0.0, 0.5)
FIG4_DELTA_S = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
FIG4_OMEGA = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0)
FIG5_S = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
FIG5_Q = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)

HORIZON = 20.0
PLANT_STEP = 0.005
SAMPLE_PERIOD = 0.1


def rk_error_params(p: int, w: float = 0.0) -> RKErrorParams:
    return RKErrorParams(M=RK_ERROR_M[p], w=w, L_rk=RK_ERROR_L)


def trend_budget(p: int, w: float = 0.0) -> LyapunovBudget:
    """Illustrative stability budget for the trade-off curves.

    Constants are chosen so the default sampling period of 0.1 s sits inside
    the admissible range; they are not derived from the benchmark plant.
    """
    return make_budget(c1=1.0, c2=1.0, c3=1.0, c4=1.0,
                       L_g=0.2, L_ubar=0.2, L_udot=0.2,
                       lambda_min=1.0, lambda_max=1.0,
                       gamma_min=1.5, gamma_max=1.5,
                       omega_min=1.0, omega_max=1.0, rho=0.5,
                       alpha=0.01, beta=0.05,
                       rk=rk_error_params(p, w))


def sine_reference(params: DDIParams, amplitude: float = 1.0,
                   omega: float = 1.0) -> ReferenceTrajectory:
    """Position/velocity sine reference with the exact feedforward command."""
    a, om, b = amplitude, omega, params.b

    def r(t: float) -> np.ndarray:
        return np.array([a * math.sin(om * t), a * om * math.cos(om * t)])

    def r_dot(t: float) -> np.ndarray:
        return np.array([a * om * math.cos(om * t), -a * om ** 2 * math.sin(om * t)])

    def r_ddot(t: float) -> np.ndarray:
        return np.array([-a * om ** 2 * math.sin(om * t), -a * om ** 3 * math.cos(om * t)])

    def ref_control(t: float) -> np.ndarray:
        return np.array([-a * om ** 2 * math.sin(om * t) / b])

    return ReferenceTrajectory(r=r, r_dot=r_dot, r_ddot=r_ddot, ref_control=ref_control)


def ddi_plant(params: DDIParams) -> PlantModel:
    b = params.b

    def f(x: np.ndarray, eta: np.ndarray, t: float) -> np.ndarray:
        return np.array([x[1], b * eta[0]])

    return PlantModel(n=2, m=1, f=f, lipschitz_f=max(1.0, abs(b)))


def ddi_actuator(params: DDIParams) -> ActuatorModel:
    return ActuatorModel(rates=np.array([params.lam]))


def ddi_baseline(params: DDIParams, traj: ReferenceTrajectory) -> BaselineController:
    """Feedback-linearizing law (r_pos'' - k1*xerr1 - k2*xerr2) / b.

    The second component of r_dot is the position reference's second
    derivative; of r_ddot, its third.
    """
    b, k1, k2 = params.b, params.k1, params.k2

    def u_bar(xerr: np.ndarray, t: float) -> np.ndarray:
        return np.array([(traj.r_dot(t)[1] - k1 * xerr[0] - k2 * xerr[1]) / b])

    def jac_x(xerr: np.ndarray, t: float) -> np.ndarray:
        return np.array([[-k1 / b, -k2 / b]])

    def jac_t(xerr: np.ndarray, t: float) -> np.ndarray:
        return np.array([traj.r_ddot(t)[1] / b])

    lip_u = math.hypot(k1, k2) / abs(b)
    lip_udot = math.hypot(k1 / abs(b), k2)
    return BaselineController(u_bar=u_bar, jac_x=jac_x, jac_t=jac_t,
                              lipschitz_u=lip_u, lipschitz_udot=lip_udot)


def ddi_system(params: DDIParams, traj: ReferenceTrajectory):
    """Plant, actuator, and baseline law for the benchmark."""
    return ddi_plant(params), ddi_actuator(params), ddi_baseline(params, traj)


@dataclass(frozen=True)
class SweepSpec:
    """Axes, controller list, and trajectory settings for a benchmark sweep."""

    axes: tuple
    controllers: tuple
    amplitude: float = 1.0
    omega: float = 1.0
    horizon: float = HORIZON
    repetitions: int = 1

    def __post_init__(self):
        if not self.axes:
            raise ConfigurationError("sweep needs at least one axis")
        for name, values in self.axes:
            if len(values) == 0:
                raise ConfigurationError(f"axis {name} must carry values")
            if not all(math.isfinite(v) for v in values):
                raise ConfigurationError(f"axis {name} values must be finite")
        if not self.controllers:
            raise ConfigurationError("sweep needs at least one controller")
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must satisfy repetitions >= 1")


def bench_timing(params: DDIParams, T: float = SAMPLE_PERIOD,
                 delta_s: float = 0.2) -> TimingModel:
    return TimingModel(c_f=params.c_f, c_0=params.c_0, c_eta=params.c_eta,
                       delta_s=delta_s, T=T)


def on_trajectory_config(traj: ReferenceTrajectory, T: float,
                         horizon: float = HORIZON,
                         plant_step: float = PLANT_STEP) -> SimConfig:
    """Run settings starting exactly on the reference."""
    return SimConfig(horizon=horizon, plant_step=plant_step, T=T,
                     initial_state=traj.r(0.0),
                     initial_actuator=traj.ref_control(0.0),
                     initial_command=traj.ref_control(0.0))


def make_controller(name: str, params: DDIParams, traj: ReferenceTrajectory,
                    tm: TimingModel, *, p: int = 4, h: float | None = None,
                    w: float = 0.0, kp: float = PD_KP, kd: float = PD_KD,
                    gamma_scale: float = GAMMA_SCALE, delta: float | None = None):
    """Build a sampled-loop controller by name.

    Non-predictive controllers carry the delay delta_s + C_eta (their
    computation is one control-law evaluation); pass delta to override, e.g.
    for idealized delay sweeps. The predictive controller derives its delay
    from the timing model and scheme; h defaults to the bound-optimal step.
    """
    plant, am, bc = ddi_system(params, traj)
    ed = ErrorDynamics(plant=plant, traj=traj)
    base_delta = tm.delta_s + tm.c_eta if delta is None else delta
    if name == "baseline":
        return NaiveBaselineSampler(bc, traj, base_delta)
    if name == "pd":
        return PDSampler(kp, kd, traj, base_delta)
    if name == "truncated":
        return TruncatedSampler(bc, traj, am, tm.T, base_delta)
    if name == "fo_obs":
        gains = GainConfig(gamma=gamma_scale * am.rates)
        return ObserverCompSampler(bc, ed, am, gains, base_delta,
                                   observer_init=traj.ref_control(0.0))
    if name == "predictive":
        if h is None:
            h = optimal_step(tm, rk_error_params(p, 0.0), p)[0]
        gains = GainConfig(gamma=gamma_scale * am.rates)
        predictor_plant = None
        if w != 0.0:
            predictor_plant = ddi_plant(replace(params, b=params.b * (1.0 + w)))
        return PredictiveSampler(bc, ed, am, gains, tm, rk_scheme(p, h),
                                 observer_init=traj.ref_control(0.0),
                                 predictor_plant=predictor_plant)
    raise ConfigurationError(f"unknown controller {name!r}")


def _run_cells(cells, fn, workers: int = 1):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, cells))
    return [fn(cell) for cell in cells]


# --- theoretical trade-off curves -----------------------------------------

FIG2_FIELDS = ["mode", "delta_s", "w", "p", "delta_c", "h", "E_RK", "phi", "delta_lo"]


def experiment_fig2(params: DDIParams = TABLE2, delta_c_grid=DELTA_C_GRID,
                    delta_s_values=FIG2_DELTA_S, w_values=FIG2_W):
    """Total error bound versus computation delay, fixed-period and
    period-matched variants."""
    rows = []
    for mode in ("fixed", "delta_c"):
        for delta_s in delta_s_values:
            tm = bench_timing(params, delta_s=delta_s)
            for w in w_values:
                for p in (1, 2, 3, 4):
                    h_grid = [step_for_comp_delay(tm, p, dc) for dc in delta_c_grid]
                    budget = trend_budget(p, w)
                    for pt in theory_error_curve(budget, tm, p, h_grid, mode):
                        rows.append({
                            "mode": mode, "delta_s": delta_s, "w": w, "p": p,
                            "delta_c": pt.delta_c, "h": pt.h, "E_RK": pt.e_rk,
                            "phi": pt.phi, "delta_lo": pt.delta_lo,
                        })
    rows.sort(key=lambda r: (r["mode"], r["delta_s"], r["w"], r["p"], r["delta_c"]))
    return FIG2_FIELDS, rows


# --- simulated trade-off ---------------------------------------------------

FIG3_FIELDS = ["mode", "delta_s", "w", "p", "delta_c", "h", "T", "delta",
               "rmse_ss", "unstable"]


def _fig3_cell(cell: dict) -> dict:
    params = DDIParams(**cell["params"])
    delta_c = cell["delta_c"]
    T = SAMPLE_PERIOD if cell["mode"] == "fixed" else delta_c
    tm = bench_timing(params, T=T, delta_s=cell["delta_s"])
    h = step_for_comp_delay(tm, cell["p"], delta_c)
    traj = sine_reference(params, cell["amplitude"], cell["omega"])
    controller = make_controller("predictive", params, traj, tm,
                                 p=cell["p"], h=h, w=cell["w"])
    plant, am, _ = ddi_system(params, traj)
    cfg = on_trajectory_config(traj, T, cell["horizon"], cell["plant_step"])
    res = run_closed_loop(plant, traj, am, controller, tm, cfg)
    return {
        "mode": cell["mode"], "delta_s": cell["delta_s"], "w": cell["w"],
        "p": cell["p"], "delta_c": delta_c, "h": h, "T": T,
        "delta": controller.delta, "rmse_ss": res.rmse_ss,
        "unstable": res.unstable,
    }


def experiment_fig3(params: DDIParams = TABLE2, delta_c_grid=DELTA_C_GRID,
                    w_values=FIG3_W, delta_s: float = 0.2, workers: int = 1,
                    horizon: float = HORIZON, plant_step: float = PLANT_STEP):
    """Closed-loop steady-state RMSE over the same (p, delta_c) grid."""
    cells = [
        {"params": vars(params), "mode": mode, "delta_s": delta_s, "w": w,
         "p": p, "delta_c": dc, "amplitude": 1.0, "omega": 1.0,
         "horizon": horizon, "plant_step": plant_step}
        for mode in ("fixed", "delta_c")
        for w in w_values
        for p in (1, 2, 3, 4)
        for dc in delta_c_grid
    ]
    rows = _run_cells(cells, _fig3_cell, workers)
    rows.sort(key=lambda r: (r["mode"], r["delta_s"], r["w"], r["p"], r["delta_c"]))
    return FIG3_FIELDS, rows


# --- controller comparison -------------------------------------------------

FIG4_FIELDS = ["axis", "controller", "delta_s", "omega", "rmse_ss", "unstable"]


def _fig4_cell(cell: dict) -> dict:
    params = DDIParams(**cell["params"])
    tm = bench_timing(params, delta_s=cell["delta_s"])
    traj = sine_reference(params, cell["amplitude"], cell["omega"])
    controller = make_controller(cell["controller"], params, traj, tm,
                                 kp=cell["kp"], kd=cell["kd"])
    plant, am, _ = ddi_system(params, traj)
    cfg = on_trajectory_config(traj, tm.T, cell["horizon"], cell["plant_step"])
    res = run_closed_loop(plant, traj, am, controller, tm, cfg)
    return {
        "axis": cell["axis"], "controller": cell["controller"],
        "delta_s": cell["delta_s"], "omega": cell["omega"],
        "rmse_ss": res.rmse_ss, "unstable": res.unstable,
    }


def experiment_fig4(params: DDIParams = TABLE2, spec: SweepSpec | None = None,
                    workers: int = 1, kp: float = PD_KP, kd: float = PD_KD,
                    plant_step: float = PLANT_STEP):
    """Steady-state RMSE per controller along the system-delay axis (at
    omega = 1) and along the reference-frequency axis (at delta_s = 0.2)."""
    if spec is None:
        spec = SweepSpec(axes=(("delta_s", FIG4_DELTA_S), ("omega", FIG4_OMEGA)),
                         controllers=("pd", "baseline", "truncated", "predictive"))
    axes = dict(spec.axes)
    cells = []
    base = {"params": vars(params), "amplitude": spec.amplitude,
            "horizon": spec.horizon, "plant_step": plant_step,
            "kp": kp, "kd": kd}
    for name in spec.controllers:
        for delta_s in axes.get("delta_s", ()):
            cells.append({**base, "axis": "delta_s", "controller": name,
                          "delta_s": delta_s, "omega": spec.omega})
        for omega in axes.get("omega", ()):
            cells.append({**base, "axis": "omega", "controller": name,
                          "delta_s": 0.2, "omega": omega})
    rows = _run_cells(cells, _fig4_cell, workers)
    rows.sort(key=lambda r: (r["axis"], r["controller"], r["delta_s"], r["omega"]))
    return FIG4_FIELDS, rows


# --- truncated-controller delay map -----------------------------------------

FIG5_FIELDS = ["s", "q", "lam", "delta", "rmse_ss", "unstable"]


def _fig5_cell(cell: dict) -> dict:
    s, q = cell["s"], cell["q"]
    lam = 1.0 / (q * s)
    delta = s * (1.0 - q)
    params = DDIParams(**{**cell["params"], "lam": lam})
    # idealized delay sweep: the whole transport delay enters as system delay
    tm = TimingModel(c_f=1e-9, c_0=0.0, c_eta=0.0, delta_s=delta, T=cell["T"])
    traj = sine_reference(params, cell["amplitude"], cell["omega"])
    controller = make_controller("truncated", params, traj, tm, delta=delta)
    plant, am, _ = ddi_system(params, traj)
    plant_step = cell["plant_step"]
    if delta > 0:
        plant_step = min(plant_step, delta / 5.0)
    cfg = on_trajectory_config(traj, tm.T, cell["horizon"], plant_step)
    res = run_closed_loop(plant, traj, am, controller, tm, cfg)
    return {"s": s, "q": q, "lam": lam, "delta": delta,
            "rmse_ss": res.rmse_ss, "unstable": res.unstable}


def experiment_fig5(params: DDIParams = TABLE2, s_grid=FIG5_S, q_grid=FIG5_Q,
                    workers: int = 1, horizon: float = HORIZON,
                    plant_step: float = PLANT_STEP):
    """Truncated-controller RMSE over combined delay s = delta + 1/lambda and
    first-order share q = 1/(lambda*delta + 1)."""
    cells = [
        {"params": vars(params), "s": s, "q": q, "amplitude": 1.0, "omega": 1.0,
         "T": SAMPLE_PERIOD, "horizon": horizon, "plant_step": plant_step}
        for s in s_grid for q in q_grid
    ]
    rows = _run_cells(cells, _fig5_cell, workers)
    rows.sort(key=lambda r: (r["s"], r["q"]))
    return FIG5_FIELDS, rows


def delay_split_roundtrip(lam: float, delta: float) -> tuple[float, float]:
    """(lam, delta) -> (s, q) -> (lam, delta); exact algebraic identity."""
    s = delta + 1.0 / lam
    q = 1.0 / (lam * delta + 1.0)
    return 1.0 / (q * s), s * (1.0 - q)


# --- PD tuning ---------------------------------------------------------------

def _pd_cell(cell: dict) -> dict:
    params = DDIParams(**cell["params"])
    tm = bench_timing(params, delta_s=cell["delta_s"])
    traj = sine_reference(params, 1.0, cell["omega"])
    controller = make_controller("pd", params, traj, tm,
                                 kp=cell["kp"], kd=cell["kd"])
    plant, am, _ = ddi_system(params, traj)
    cfg = on_trajectory_config(traj, tm.T, cell["horizon"], cell["plant_step"])
    res = run_closed_loop(plant, traj, am, controller, tm, cfg)
    return {"kp": cell["kp"], "kd": cell["kd"], "rmse_ss": res.rmse_ss}


def tune_pd(params: DDIParams = TABLE2, delta_s: float = 0.1, omega: float = 1.0,
            kp_grid=(0.5, 1.0, 1.5, 2.0, 2.5, 3.0), kd_grid=(0.5, 1.0, 1.5, 2.0, 2.5, 3.0),
            workers: int = 1, horizon: float = HORIZON,
            plant_step: float = PLANT_STEP):
    """Coarse grid search for the PD benchmark gains; returns (kp, kd, rows)."""
    cells = [
        {"params": vars(params), "delta_s": delta_s, "omega": omega,
         "kp": kp, "kd": kd, "horizon": horizon, "plant_step": plant_step}
        for kp in kp_grid for kd in kd_grid
    ]
    rows = _run_cells(cells, _pd_cell, workers)
    best = min(rows, key=lambda r: (r["rmse_ss"], r["kp"], r["kd"]))
    return best["kp"], best["kd"], rows
