"""Feature-interaction detection in feed-forward ReLU networks, measured as
the persistence of feature-subset connectivity over a descending sweep of
normalized weight strengths, with a trainer and synthetic benchmark around
it."""

from .bench import (
    DatasetSpec,
    DegenerateTruthError,
    DomainError,
    ExperimentReport,
    GroundTruth,
    SuiteConfig,
    cross_features,
    gen_synthetic,
    ground_truth_pairs,
    perturb_network,
    roc_auc,
    run_experiment,
)
from .filtration import (
    AllZeroNetworkError,
    Filtration,
    ReachabilitySweep,
    ReachabilityView,
    build_filtration,
    connected,
    masks_at,
)
from .model_io import (
    ActivationTrace,
    ModelFormatError,
    NetworkSpec,
    flatten_conv,
    forward_activations,
    load_network,
    local_weights,
    predict,
    save_network,
)
from .pid import (
    PersistenceLedger,
    StabilityReport,
    detect,
    detect_filtration,
    pairwise_strengths,
    rank,
    saliency,
    stability_check,
)
from .trainer import (
    TrainConfig,
    TrainingDivergedError,
    TrainLog,
    loss_and_gradients,
    mse,
    train_mlp,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationTrace",
    "AllZeroNetworkError",
    "DatasetSpec",
    "DegenerateTruthError",
    "DomainError",
    "ExperimentReport",
    "Filtration",
    "GroundTruth",
    "ModelFormatError",
    "NetworkSpec",
    "PersistenceLedger",
    "ReachabilitySweep",
    "ReachabilityView",
    "StabilityReport",
    "SuiteConfig",
    "TrainConfig",
    "TrainLog",
    "TrainingDivergedError",
    "build_filtration",
    "connected",
    "cross_features",
    "detect",
    "detect_filtration",
    "flatten_conv",
    "forward_activations",
    "gen_synthetic",
    "ground_truth_pairs",
    "load_network",
    "local_weights",
    "loss_and_gradients",
    "masks_at",
    "mse",
    "pairwise_strengths",
    "perturb_network",
    "predict",
    "rank",
    "roc_auc",
    "run_experiment",
    "saliency",
    "save_network",
    "stability_check",
    "train_mlp",
]
