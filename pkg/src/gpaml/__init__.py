"""GP-assisted meta-learning: decide the metadata balance of the next data batch."""

__version__ = "0.1.0"

from .acquisition import (  # noqa: E402
    AcquisitionTrace, Policy, RunConfig, apply_policy, metadata_suitability_check,
    run_campaign, subsample_robustness_study,
)
from .balance_experiment import (  # noqa: E402
    BalanceDesign, ExperimentData, compose_test_set, run_balance_experiment,
)
from .conic import (  # noqa: E402
    GPAML, AcquisitionDecision, build_transect, gpaml_step, linear_weights,
    reference_locations, reference_transects,
)
from .dataset import (  # noqa: E402
    CsvSchema, MetadataDataset, engineer_spambase_metadata, load_csv, load_spambase, samp,
    save_csv, synthetic_classification,
)
from .gp import GaussianProcess, fit_gp, log_likelihood  # noqa: E402
from .learner import (  # noqa: E402
    LearnerSpec, RandomForest, evaluate, oracle_accuracy, toy_accuracy, train,
)

__all__ = [
    "AcquisitionDecision", "AcquisitionTrace", "BalanceDesign", "CsvSchema", "ExperimentData",
    "GPAML", "GaussianProcess", "LearnerSpec", "MetadataDataset", "Policy", "RandomForest",
    "RunConfig", "apply_policy", "build_transect", "compose_test_set", "engineer_spambase_metadata",
    "evaluate", "fit_gp", "gpaml_step", "linear_weights", "load_csv", "load_spambase",
    "log_likelihood", "metadata_suitability_check", "oracle_accuracy", "reference_locations",
    "reference_transects", "run_balance_experiment", "run_campaign", "samp", "save_csv",
    "subsample_robustness_study", "synthetic_classification", "toy_accuracy", "train",
]
