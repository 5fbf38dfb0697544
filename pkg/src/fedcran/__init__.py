"""Energy modeling and joint resource optimization for quantized federated
learning over OFDMA cloud radio access networks."""

from .channel import (
    Allocation,
    ChannelRealization,
    Scenario,
    sample_channels,
    uniform_bits,
    uniform_power,
)
from .convergence import ConvergenceConstants, loss_gap_bound, rounds_for_accuracy
from .energy import ChipModel, EnergyReport, expected_total_energy
from .errors import (
    AccuracyUnreachableError,
    FedCranError,
    InfeasibleAllocationError,
    InvalidConfigError,
    SimulationDivergedError,
)
from .flsim import FLRunConfig, SyntheticTask, bound_check, make_task, run_fl
from .harness import (
    ExperimentSpec,
    FLExperimentSpec,
    ModelCase,
    load_config,
    run_experiment,
    run_fl_experiment,
)
from .optimizer import (
    BASELINE_SCHEMES,
    OptimizerConfig,
    alternating_optimize,
    evaluate_baseline,
)
from .quantize import quantization_error_bound, quantize_vector

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "ChannelRealization",
    "Scenario",
    "sample_channels",
    "uniform_bits",
    "uniform_power",
    "ConvergenceConstants",
    "loss_gap_bound",
    "rounds_for_accuracy",
    "ChipModel",
    "EnergyReport",
    "expected_total_energy",
    "FedCranError",
    "InvalidConfigError",
    "InfeasibleAllocationError",
    "AccuracyUnreachableError",
    "SimulationDivergedError",
    "FLRunConfig",
    "SyntheticTask",
    "make_task",
    "run_fl",
    "bound_check",
    "ExperimentSpec",
    "FLExperimentSpec",
    "ModelCase",
    "load_config",
    "run_experiment",
    "run_fl_experiment",
    "OptimizerConfig",
    "BASELINE_SCHEMES",
    "alternating_optimize",
    "evaluate_baseline",
    "quantize_vector",
    "quantization_error_bound",
    "__version__",
]
