"""Model reference adaptive control of nonlinear commensurate fractional-order systems.

Grünwald-Letnikov simulation of the closed loop, the controller and its
fractional adaptation laws, and numerical checks of the fractional Lyapunov
inequalities along trajectories.
"""

from .config import ConfigError, ExperimentConfig, dump_config, load_config, parse_config
from .diagnostics import dissipation_check, lemma1_residual, lemma2_residual
from .experiment import TrackingMetrics, read_csv, run_experiment, tracking_metrics, write_csv
from .grunwald import FracOrder, GLWeightTable, SampledSignal, gl_derivative, gl_weights
from .mrac import (
    AdaptationConfig,
    BasisTerm,
    ControllerState,
    LyapunovPair,
    MatchingError,
    MatchingGains,
    NonlinearBasis,
    ParameterError,
    PlantModel,
    ReferenceModel,
    adaptation_rhs,
    closed_loop_channels,
    closed_loop_system,
    control_input,
    eval_basis,
    is_hurwitz,
    lyapunov_q,
    lyapunov_value,
    parameter_errors,
    solve_matching_gains,
)
from .signals import SignalSpec, eval_signal
from .solver import (
    FdeSystem,
    SimulationDiverged,
    SolverConfig,
    Trajectory,
    simulate,
    simulate_abm,
    simulate_gl,
)
from .special import MittagLefflerError, gamma, mittag_leffler
from .verify import VerificationReport, verify_suite

__version__ = "0.1.0"
