"""Partial dependence plots, joint PDPs, and any-order interaction values
for decision tree ensembles, computed by compiling leaf paths into
weighted cube families and evaluating linear cube metrics."""

from .data import Dataset, ValueGrid, bits, build_full_pdp_grid, build_joint_grid, build_pdp_grid, load_csv
from .errors import (
    CapacityError,
    DegenerateModelError,
    IngestionError,
    InputError,
    NumericError,
    ParseError,
    PDForestError,
    SchemaError,
    VerificationError,
)
from .model import LeafPath, SplitCondition, TreeEnsemble, extract_paths, load_model, parse_model, predict
from .tasks import (
    AttributionResult,
    JointPDPResult,
    PDPResult,
    compute_full_pdp,
    compute_interaction_values,
    compute_joint_pdp,
    compute_pdp,
    mean_prediction,
)

__version__ = "0.1.0"

__all__ = [
    "AttributionResult",
    "CapacityError",
    "Dataset",
    "DegenerateModelError",
    "IngestionError",
    "InputError",
    "JointPDPResult",
    "LeafPath",
    "NumericError",
    "PDForestError",
    "PDPResult",
    "ParseError",
    "SchemaError",
    "SplitCondition",
    "TreeEnsemble",
    "ValueGrid",
    "VerificationError",
    "bits",
    "build_full_pdp_grid",
    "build_joint_grid",
    "build_pdp_grid",
    "compute_full_pdp",
    "compute_interaction_values",
    "compute_joint_pdp",
    "compute_pdp",
    "extract_paths",
    "load_csv",
    "load_model",
    "mean_prediction",
    "parse_model",
    "predict",
]
