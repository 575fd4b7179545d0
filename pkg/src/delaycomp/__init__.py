"""Sampled-data delay compensation toolkit.

Simulates closed-loop control of nonlinear plants whose commands pass
through a first-order actuator channel after a computation-plus-transport
delay, provides the compensating controller family up to full predictive
feedback with fixed-step Runge-Kutta state prediction, and computes the
step/order/delay trade-off curves and stability budgets behind them.
"""

__version__ = "0.1.0"

from .analysis import (CurvePoint, LyapunovBudget, delta_region,
                       gain_condition_holds, k1_matrix, k2_matrix, make_budget,
                       max_sampling_period, mu_nu_constants, phi_of_T,
                       theory_error_curve)
from .controllers import (BaselineController, DerivativeCompSampler, GainConfig,
                          NaiveBaselineSampler, ObserverCompSampler,
                          ObserverState, PDSampler, PredictiveSampler,
                          TruncatedSampler, check_jacobians, ctrl_fo,
                          ctrl_fo_obs, ctrl_pd, ctrl_predictive,
                          ctrl_truncated, observer_step, u_dot_analytic,
                          u_dot_numeric)
from .core import (ErrorDynamics, PlantModel, ReferenceTrajectory, as_vector,
                   estimate_lipschitz, g_eval, reference_consistency_residual,
                   reference_feasibility_check)
from .errors import (ConfigurationError, DelayCompError, InfeasibleTimingError,
                     NumericalBlowupError)
from .integrators import (RKErrorParams, RKScheme, erk_bound,
                          integrate_horizon, rk_scheme, rk_step)
from .sim import (ActuatorModel, CommandQueue, SampleContext, ScheduledCommand,
                  SimConfig, SimResult, actuator_propagate, run_closed_loop,
                  steady_state_rmse, write_csv)
from .timing import (TimingModel, calibrate_costs, comp_delay, erk_of_step,
                     feasible_step_range, optimal_step, step_cost,
                     step_for_comp_delay, transport_delay)

__all__ = [name for name in dir() if not name.startswith("_")]
