"""Short-horizon solution operators for ODEs/PDEs: physics-informed training
of branch/trunk operator networks, classical reference solvers, and iterative
rollout to long horizons."""

from . import artifacts, config, metrics, problems, rollout, sampling, solvers, training
from .autodiff import Jet, Tape, TapeVar, grad, jet_const, jet_seed
from .networks import Mlp, MlpSpec
from .operator_nets import OperatorNet, SensorGrid

__version__ = "0.1.0"

__all__ = [
    "artifacts", "config", "metrics", "problems", "rollout", "sampling",
    "solvers", "training", "Jet", "Tape", "TapeVar", "grad", "jet_const",
    "jet_seed", "Mlp", "MlpSpec", "OperatorNet", "SensorGrid", "__version__",
]
