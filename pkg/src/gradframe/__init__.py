"""Distributionally robust training via worst-case fictitious data.

Library surface: network substrate (``nn``), dataset handling (``data``),
the core augmentation method (``core``), reference trainers (``baselines``),
shift quantification (``shift``), evaluation and penalty search
(``evaluation``), and a CLI (``cli``).
"""

from .baselines import MixupConfig, mixup_pair, train_erm, train_groupdro, train_mixup
from .core import (
    AscentConfig,
    FictitiousPoint,
    FictitiousSet,
    PenaltyParams,
    c_conc,
    c_cov,
    generate_fictitious_set,
    inner_maximize,
    pretrain_domain_models,
    surrogate_value,
    train_gradframe,
)
from .data import (
    Boundary,
    CsvSchema,
    Domain,
    DomainSet,
    GaussianSpec,
    LabeledPoint,
    generate_gaussian_domain,
    label_by_boundary,
    load_csv_dataset,
    save_csv_dataset,
    simulation_source,
    simulation_target,
    split_into_k_domains,
    standardize,
)
from .errors import ConfigError, DataError, GradframeError, NumericError, ShapeError
from .evaluation import (
    EvalReport,
    GammaGrid,
    auroc,
    counterfactual_in_domain,
    evaluate,
    lodo_cv_search,
    welch_t_one_tailed,
)
from .nn import (
    AdamState,
    MlpModel,
    adam_step,
    bce_loss,
    forward,
    grad_input,
    grad_params,
    init_mlp,
)
from .shift import (
    KdeModel,
    KsResult,
    ShiftReport,
    concept_shift_delta,
    covariate_shift_ratio,
    kde_fit,
    kde_log_density,
    ks_two_sample,
    likelihood_difference,
    select_domain_count,
    shapley_attribution,
)
from .training import TrainConfig

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "AscentConfig",
    "Boundary",
    "ConfigError",
    "CsvSchema",
    "DataError",
    "Domain",
    "DomainSet",
    "EvalReport",
    "FictitiousPoint",
    "FictitiousSet",
    "GammaGrid",
    "GaussianSpec",
    "GradframeError",
    "KdeModel",
    "KsResult",
    "LabeledPoint",
    "MixupConfig",
    "MlpModel",
    "NumericError",
    "PenaltyParams",
    "ShapeError",
    "ShiftReport",
    "TrainConfig",
    "adam_step",
    "auroc",
    "bce_loss",
    "c_conc",
    "c_cov",
    "concept_shift_delta",
    "counterfactual_in_domain",
    "covariate_shift_ratio",
    "evaluate",
    "forward",
    "generate_fictitious_set",
    "generate_gaussian_domain",
    "grad_input",
    "grad_params",
    "init_mlp",
    "inner_maximize",
    "kde_fit",
    "kde_log_density",
    "ks_two_sample",
    "label_by_boundary",
    "likelihood_difference",
    "load_csv_dataset",
    "lodo_cv_search",
    "mixup_pair",
    "pretrain_domain_models",
    "save_csv_dataset",
    "select_domain_count",
    "shapley_attribution",
    "simulation_source",
    "simulation_target",
    "split_into_k_domains",
    "standardize",
    "surrogate_value",
    "train_erm",
    "train_gradframe",
    "train_groupdro",
    "train_mixup",
    "welch_t_one_tailed",
]
