"""Multimodal evidential regression with Normal-Inverse-Gamma fusion."""

from .errors import (
    ConfigError,
    DomainError,
    EmptyInputError,
    GraphConsumed,
    LengthMismatch,
    MonigError,
    NegativeWeightError,
    ParseError,
    SchemaError,
    ShapeMismatch,
    SingleClass,
    SplitError,
)
from .nig import (
    NIGParams,
    StudentTParams,
    aleatoric,
    epistemic,
    marginal_student_t,
    monig_fuse,
    naive_average_fuse,
    nig_sum,
    point_prediction,
)
from .losses import LossConfig, branch_loss, evidence_regularizer, gaussian_nll, nig_nll
from .data import MultimodalDataset, NoiseSpec, gen_synthetic_cubic, gen_tabular_replica, inject_noise
from .model import ConcatRegressor, MultimodalRegressor, TrainConfig, build_model, load_model, train
from .metrics import auroc, mae, rmse, ueir
from .evaluation import EvalReport, evaluate

__version__ = "0.1.0"
