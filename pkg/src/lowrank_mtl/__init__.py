"""Low-rank multi-task linear regression: estimators, meta-transfer and experiments."""

from .datagen import (
    GenConfig,
    GroundTruth,
    MultiTaskDataset,
    TaskData,
    gen_dataset,
    gen_ground_truth,
    gen_new_task,
)
from .estimators import (
    DivergenceError,
    FitOptions,
    FitResult,
    LambdaRule,
    fit_altmin,
    fit_burer_monteiro,
    fit_mom,
    fit_nuclear_fista,
    fit_nuclear_frankwolfe,
    fit_oracle,
    fit_single_task,
    lambda_theory,
)
from .meta import extract_subspace, transfer_fit

__version__ = "0.1.0"
