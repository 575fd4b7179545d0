"""Command-line entry point.

Loads a validated JSON config and dispatches one of four modes: a single
closed-loop simulation, an experiment sweep, the stability-bound
calculators, or host cost calibration. Every run writes its tables as CSV,
a manifest recording the resolved config and its hash, and (by default) a
rendered figure alongside the delimited output. All file I/O happens here;
the library modules are in-process only.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 infeasible
timing.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from pathlib import Path
from typing import Any, Mapping

from . import __version__
from .analysis import (curve_rows, delta_region, gain_condition_holds,
                       make_budget, max_sampling_period, mu_nu_constants,
                       phi_of_T, theory_error_curve)
from .bench import (DDIParams, GAMMA_SCALE, PD_KD, PD_KP, RK_ERROR_L,
                    RK_ERROR_M, TABLE2, bench_timing, ddi_system,
                    experiment_fig2, experiment_fig3, experiment_fig4,
                    experiment_fig5, make_controller, sine_reference)
from .errors import (ConfigurationError, InfeasibleTimingError,
                     NumericalBlowupError)
from .integrators import RKErrorParams
from .output import write_csv, write_manifest
from .sim import SimConfig, run_closed_loop, trace_rows
from .timing import TimingModel, calibrate_costs, erk_of_step

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_TIMING = 4

_MODES = ("simulate", "sweep", "bounds", "calibrate")
_TOP_KEYS = {"mode", "preset", "params", "out_dir", "workers", "figures"}
_EXPERIMENTS = ("fig2", "fig3", "fig4", "fig5")

# Named parameter presets; "table2" is the benchmark baseline.
PRESETS: dict[str, dict[str, Any]] = {
    "table2": {
        "b": 1.0, "lambda": 5.0, "k1": 1.0, "k2": 2.0,
        "C_f": 0.005, "C_0": 0.0, "C_eta": 0.025,
    },
}

_SIM_KEYS = {
    "controller", "b", "lambda", "k1", "k2", "C_f", "C_0", "C_eta",
    "T", "delta_s", "amplitude", "omega", "horizon", "plant_step",
    "p", "h", "w", "kp", "kd", "gamma_scale", "rmse_window", "x0", "eta0",
}
_SWEEP_KEYS = {"experiment", "b", "lambda", "k1", "k2", "C_f", "C_0", "C_eta"}
_BOUNDS_KEYS = {"budget", "rk", "T", "E_RK", "p", "h", "C_f", "C_0", "C_eta",
                "delta_s", "curve"}
_BUDGET_KEYS = {"c1", "c2", "c3", "c4", "L_g", "L_ubar", "L_udot",
                "lambda_min", "lambda_max", "gamma_min", "gamma_max",
                "omega_min", "omega_max", "rho", "alpha", "beta"}
_CALIBRATE_KEYS = {"loops", "repeats"}


@dataclasses.dataclass
class RunConfig:
    """Validated run request."""

    mode: str
    params: dict
    preset: str | None = None
    out_dir: str = "out"
    workers: int = 0
    figures: bool = True

    def resolved(self) -> dict:
        return {
            "mode": self.mode,
            "preset": self.preset,
            "params": self.params,
            "out_dir": self.out_dir,
            "workers": self.workers,
            "figures": self.figures,
        }


def _fail(field: str, constraint: str, value) -> ConfigurationError:
    return ConfigurationError(
        f'config field "{field}" violates constraint "{constraint}" (got {value!r})')


def _check_keys(mapping: Mapping, allowed: set[str], where: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigurationError(
            f"unknown {where} keys: {sorted(unknown)}; allowed: {sorted(allowed)}")


def _number(params: Mapping, key: str, default, constraint=None,
            text: str | None = None) -> float:
    value = params.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _fail(key, f"{key} must be a number", value)
    value = float(value)
    if not math.isfinite(value):
        raise _fail(key, f"{key} must be finite", value)
    if constraint is not None and not constraint(value):
        raise _fail(key, text or f"{key} constraint", value)
    return value


def load_config(path) -> RunConfig:
    """Parse and validate a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if not isinstance(raw, dict):
        raise ConfigurationError("config root must be a JSON object")
    _check_keys(raw, _TOP_KEYS, "config")
    mode = raw.get("mode")
    if mode not in _MODES:
        raise _fail("mode", f"mode in {_MODES}", mode)
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise _fail("params", "params must be an object", params)
    preset = raw.get("preset")
    if preset is not None and preset not in PRESETS:
        raise _fail("preset", f"preset in {sorted(PRESETS)}", preset)
    workers = raw.get("workers", 0)
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 0:
        raise _fail("workers", "workers >= 0", workers)
    figures = raw.get("figures", True)
    if not isinstance(figures, bool):
        raise _fail("figures", "figures must be a boolean", figures)
    out_dir = raw.get("out_dir", "out")
    if not isinstance(out_dir, str):
        raise _fail("out_dir", "out_dir must be a string", out_dir)
    cfg = RunConfig(mode=mode, params=dict(params), preset=preset,
                    out_dir=out_dir, workers=workers, figures=figures)
    _validate_params(cfg)
    return cfg


def _merged_params(cfg: RunConfig) -> dict:
    merged = dict(PRESETS.get(cfg.preset, {})) if cfg.preset else {}
    merged.update(cfg.params)
    return merged


def _validate_params(cfg: RunConfig) -> None:
    params = _merged_params(cfg)
    if cfg.mode == "simulate":
        _check_keys(params, _SIM_KEYS, "simulate params")
        _ddi_from(params)
        _number(params, "T", 0.1, lambda v: v > 0, "T > 0")
        _number(params, "delta_s", 0.0, lambda v: v >= 0, "delta_s >= 0")
        _number(params, "horizon", 20.0, lambda v: v > 0, "horizon > 0")
        _number(params, "plant_step", 0.005, lambda v: v > 0, "plant_step > 0")
        controller = params.get("controller", "predictive")
        if controller not in ("baseline", "pd", "truncated", "fo_obs", "predictive"):
            raise _fail("controller", "controller in (baseline, pd, truncated, "
                        "fo_obs, predictive)", controller)
        p = params.get("p", 4)
        if p not in (1, 2, 3, 4):
            raise _fail("p", "p in (1, 2, 3, 4)", p)
    elif cfg.mode == "sweep":
        _check_keys(params, _SWEEP_KEYS, "sweep params")
        if params.get("experiment") not in _EXPERIMENTS:
            raise _fail("experiment", f"experiment in {_EXPERIMENTS}",
                        params.get("experiment"))
        _ddi_from(params)
    elif cfg.mode == "bounds":
        _check_keys(params, _BOUNDS_KEYS, "bounds params")
        budget = params.get("budget", {})
        if not isinstance(budget, dict):
            raise _fail("budget", "budget must be an object", budget)
        _check_keys(budget, _BUDGET_KEYS, "budget")
        _number(params, "T", None if "T" not in params else params["T"],
                lambda v: v > 0, "T > 0")
        if "T" not in params:
            raise _fail("T", "T is required for bounds mode", None)
    else:
        _check_keys(params, _CALIBRATE_KEYS, "calibrate params")


def _ddi_from(params: Mapping) -> DDIParams:
    b = _number(params, "b", TABLE2.b, lambda v: v != 0, "b != 0")
    lam = _number(params, "lambda", TABLE2.lam, lambda v: v > 0, "lambda > 0")
    k1 = _number(params, "k1", TABLE2.k1, lambda v: v > 0, "k1 > 0")
    k2 = _number(params, "k2", TABLE2.k2, lambda v: v > 0, "k2 > 0")
    c_f = _number(params, "C_f", TABLE2.c_f, lambda v: v > 0, "C_f > 0")
    c_0 = _number(params, "C_0", TABLE2.c_0, lambda v: v >= 0, "C_0 >= 0")
    c_eta = _number(params, "C_eta", TABLE2.c_eta, lambda v: v >= 0, "C_eta >= 0")
    return DDIParams(b=b, lam=lam, k1=k1, k2=k2, c_f=c_f, c_0=c_0, c_eta=c_eta)


def _run_simulate(cfg: RunConfig, out: Path) -> list[str]:
    from .core import as_vector

    params = _merged_params(cfg)
    ddi = _ddi_from(params)
    T = _number(params, "T", 0.1, lambda v: v > 0, "T > 0")
    tm = TimingModel(c_f=ddi.c_f, c_0=ddi.c_0, c_eta=ddi.c_eta,
                     delta_s=_number(params, "delta_s", 0.0),
                     T=T)
    traj = sine_reference(ddi, _number(params, "amplitude", 1.0),
                          _number(params, "omega", 1.0, lambda v: v > 0, "omega > 0"))
    h = params.get("h")
    controller = make_controller(
        params.get("controller", "predictive"), ddi, traj, tm,
        p=int(params.get("p", 4)),
        h=float(h) if h is not None else None,
        w=_number(params, "w", 0.0),
        kp=_number(params, "kp", PD_KP), kd=_number(params, "kd", PD_KD),
        gamma_scale=_number(params, "gamma_scale", GAMMA_SCALE,
                            lambda v: v > 0, "gamma_scale > 0"))
    plant, am, _ = ddi_system(ddi, traj)
    x0 = params.get("x0")
    eta0 = params.get("eta0")
    sim_cfg = SimConfig(
        horizon=_number(params, "horizon", 20.0),
        plant_step=_number(params, "plant_step", 0.005),
        T=T,
        initial_state=as_vector(x0, 2, "x0") if x0 is not None else traj.r(0.0),
        initial_actuator=as_vector(eta0, 1, "eta0") if eta0 is not None
        else traj.ref_control(0.0),
        initial_command=traj.ref_control(0.0),
        rmse_window=_number(params, "rmse_window", 0.5,
                            lambda v: 0 < v <= 1, "0 < rmse_window <= 1"),
    )
    res = run_closed_loop(plant, traj, am, controller, tm, sim_cfg)
    header, rows = trace_rows(res, traj)
    table = [dict(zip(header, row)) for row in rows]
    outputs = ["trace.csv", "summary.csv"]
    write_csv(out / "trace.csv", header, table)
    write_csv(out / "summary.csv", ["rmse_ss", "unstable", "n_commands"],
              [{"rmse_ss": res.rmse_ss, "unstable": res.unstable,
                "n_commands": len(res.commands)}])
    if cfg.figures:
        from .plots import plot_trace
        plot_trace(res, traj, out / "trace.png")
        outputs.append("trace.png")
    return outputs


def _run_sweep(cfg: RunConfig, out: Path) -> list[str]:
    params = _merged_params(cfg)
    ddi = _ddi_from(params)
    experiment = params["experiment"]
    workers = cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)
    if experiment == "fig2":
        fields, rows = experiment_fig2(ddi)
    elif experiment == "fig3":
        fields, rows = experiment_fig3(ddi, workers=workers)
    elif experiment == "fig4":
        fields, rows = experiment_fig4(ddi, workers=workers)
    else:
        fields, rows = experiment_fig5(ddi, workers=workers)
    csv_name = f"{experiment}.csv"
    write_csv(out / csv_name, fields, rows)
    outputs = [csv_name]
    if cfg.figures:
        from . import plots
        renderer = {"fig2": plots.plot_fig2, "fig3": plots.plot_fig3,
                    "fig4": plots.plot_fig4, "fig5": plots.plot_fig5}[experiment]
        renderer(rows, out / f"{experiment}.png")
        outputs.append(f"{experiment}.png")
    return outputs


def _run_bounds(cfg: RunConfig, out: Path) -> list[str]:
    params = _merged_params(cfg)
    budget_in = dict(params.get("budget", {}))
    rk_in = dict(params.get("rk", {}))
    rk = RKErrorParams(M=float(rk_in.get("M", RK_ERROR_M[4])),
                       w=float(rk_in.get("w", 0.0)),
                       L_rk=float(rk_in.get("L_rk", RK_ERROR_L)))
    defaults = {"c1": 1.0, "c2": 1.0, "c3": 1.0, "c4": 1.0,
                "L_g": 0.2, "L_ubar": 0.2, "L_udot": 0.2,
                "lambda_min": 1.0, "lambda_max": 1.0,
                "gamma_min": 1.5, "gamma_max": 1.5,
                "omega_min": 1.0, "omega_max": 1.0, "rho": 0.5,
                "alpha": 0.01, "beta": 0.05}
    defaults.update(budget_in)
    budget = make_budget(rk=rk, **defaults)
    T = float(params["T"])
    tm = TimingModel(c_f=float(params.get("C_f", TABLE2.c_f)),
                     c_0=float(params.get("C_0", TABLE2.c_0)),
                     c_eta=float(params.get("C_eta", TABLE2.c_eta)),
                     delta_s=float(params.get("delta_s", 0.2)), T=T)
    if "E_RK" in params:
        e_rk = float(params["E_RK"])
    elif "h" in params:
        e_rk = erk_of_step(tm, rk, float(params["h"]), int(params.get("p", 4)))
    else:
        raise ConfigurationError('bounds mode needs "E_RK" or "h" (plus costs)')
    mu, nu, nu0 = mu_nu_constants(budget)
    t_max = max_sampling_period(budget)
    phi = phi_of_T(budget, T)
    delta_lo, delta_needed = delta_region(budget, T, e_rk)
    write_csv(out / "bounds.csv",
              ["mu", "nu", "nu0", "T_max", "T", "phi", "E_RK",
               "delta_lo", "delta_needed", "c3pp", "alpha", "beta",
               "gain_condition"],
              [{"mu": mu, "nu": nu, "nu0": nu0, "T_max": t_max, "T": T,
                "phi": phi, "E_RK": e_rk, "delta_lo": delta_lo,
                "delta_needed": delta_needed, "c3pp": budget.c3pp,
                "alpha": budget.alpha, "beta": budget.beta,
                "gain_condition": gain_condition_holds(budget)}])
    outputs = ["bounds.csv"]
    curve = params.get("curve")
    if curve:
        orders = curve.get("p", [1, 2, 3, 4])
        n_pts = int(curve.get("points", 25))
        period_mode = curve.get("period_mode", "fixed")
        points = []
        for p in orders:
            from .timing import feasible_step_range
            import numpy as np
            h_lo, h_hi = feasible_step_range(tm, int(p))
            grid = np.linspace(h_lo, h_hi, n_pts)
            rk_p = RKErrorParams(M=float(rk_in.get("M", RK_ERROR_M[int(p)])),
                                 w=rk.w, L_rk=rk.L_rk)
            budget_p = dataclasses.replace(budget, rk=rk_p)
            points.extend(theory_error_curve(budget_p, tm, int(p), grid,
                                             period_mode))
        header, rows = curve_rows(points)
        table = [dict(zip(header, row)) for row in rows]
        write_csv(out / "theory_curve.csv", header, table)
        outputs.append("theory_curve.csv")
        if cfg.figures:
            from .plots import plot_bounds_curve
            plot_bounds_curve(points, out / "theory_curve.png")
            outputs.append("theory_curve.png")
    return outputs


def _run_calibrate(cfg: RunConfig, out: Path) -> list[str]:
    import numpy as np

    params = _merged_params(cfg)
    loops = int(params.get("loops", 20_000))
    repeats = int(params.get("repeats", 5))
    ddi = TABLE2
    traj = sine_reference(ddi)
    plant, am, bc = ddi_system(ddi, traj)

    def control_fn(x, eta, t):
        return bc.u_bar(x - traj.r(t), t)

    costs = calibrate_costs(plant.f, control_fn, traj.r(0.0),
                            traj.ref_control(0.0), loops=loops, repeats=repeats)
    with open(out / "calibration.json", "w", encoding="utf-8") as fh:
        json.dump({"params": costs}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ["calibration.json"]


def dispatch(cfg: RunConfig) -> int:
    """Run the requested mode; returns the process exit code."""
    try:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if cfg.mode == "simulate":
            outputs = _run_simulate(cfg, out)
        elif cfg.mode == "sweep":
            outputs = _run_sweep(cfg, out)
        elif cfg.mode == "bounds":
            outputs = _run_bounds(cfg, out)
        else:
            outputs = _run_calibrate(cfg, out)
        write_manifest(out / "manifest.json", preset=cfg.preset,
                       config=cfg.resolved(), outputs=outputs,
                       version=__version__)
        return EXIT_OK
    except InfeasibleTimingError as exc:
        _emit_error(exc, EXIT_TIMING)
        return EXIT_TIMING
    except NumericalBlowupError as exc:
        _emit_error(exc, EXIT_NUMERIC)
        return EXIT_NUMERIC
    except ConfigurationError as exc:
        _emit_error(exc, EXIT_CONFIG)
        return EXIT_CONFIG


def _emit_error(exc: Exception, code: int) -> None:
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="delaycomp",
        description="Sampled-data delay-compensation simulator and analyzer")
    parser.add_argument("--config", required=True, help="path to a JSON config")
    parser.add_argument("--out", default=None, help="output directory (default ./out)")
    parser.add_argument("--workers", type=int, default=None,
                        help="sweep worker count (default: logical cores)")
    parser.add_argument("--preset", default=None,
                        help="named parameter preset overriding the config")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg.out_dir = args.out
        if args.workers is not None:
            if args.workers < 0:
                raise ConfigurationError("workers must satisfy workers >= 0")
            cfg.workers = args.workers
        if args.preset is not None:
            if args.preset not in PRESETS:
                raise _fail("preset", f"preset in {sorted(PRESETS)}", args.preset)
            cfg.preset = args.preset
            _validate_params(cfg)
    except ConfigurationError as exc:
        _emit_error(exc, EXIT_CONFIG)
        return EXIT_CONFIG
    return dispatch(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
