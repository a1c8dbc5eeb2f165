"""Type III muscles: cylinder-wrap oracle, training data, MLP surrogate and its Jacobians."""

from .continuity import ContinuityReport, continuity_report
from .cylinder import WrapCylinder, WrapGeometryError, analytic_wrap, tangent_points, wrap_batch
from .dataset import COLUMNS, SamplingError, SamplingRanges, WrapDataset, WrapSample, generate_dataset
from .mlp import (
    MLPWeights,
    TrainConfig,
    TrainingError,
    TrainResult,
    mlp_forward,
    mlp_input_jacobian,
    mlp_train,
)
from .surrogate import ExtrapolationWarning, SurrogateEvaluator, network_positions, typeIII_jacobians

__all__ = [
    "COLUMNS",
    "ContinuityReport",
    "ExtrapolationWarning",
    "MLPWeights",
    "SamplingError",
    "SamplingRanges",
    "SurrogateEvaluator",
    "TrainConfig",
    "TrainResult",
    "TrainingError",
    "WrapCylinder",
    "WrapDataset",
    "WrapGeometryError",
    "WrapSample",
    "analytic_wrap",
    "continuity_report",
    "generate_dataset",
    "mlp_forward",
    "mlp_input_jacobian",
    "mlp_train",
    "network_positions",
    "tangent_points",
    "typeIII_jacobians",
    "wrap_batch",
]
