"""Stacked discriminative autoencoders trained by alternating least squares.

The package has two entry levels: scikit-learn style estimators operating on
(samples x features) arrays, and a functional core operating on column-major
(features x samples) matrices that mirrors the underlying math.
"""

from .activations import Activation, resolve_activation
from .classify import LabeledFeatures, accuracy, fisher_ratio, knn_predict, linear_predict
from .data import (
    DataFormatError,
    Dataset,
    load_delimited,
    load_idx,
    one_hot,
    subset,
    write_idx_images,
    write_idx_labels,
)
from .estimators import (
    DiscriminativeAutoencoder,
    NearestNeighborClassifier,
    StackedDiscriminativeAutoencoder,
)
from .layer import (
    AdmmState,
    LayerWeights,
    TraceRow,
    TrainConfig,
    TrainingError,
    augmented_objective,
    encode,
    reconstruction_objective,
    solve_class_map,
    solve_code,
    solve_decoder,
    solve_encoder,
    supervised_objective,
    train_layer,
    update_bregman,
)
from .least_squares import (
    LeastSquaresError,
    SingularSystemError,
    solve_left,
    solve_right,
    vstack,
)
from .stack import (
    ModelFormatError,
    StackModel,
    encode_stack,
    load_model,
    save_model,
    train_stack,
)

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "AdmmState",
    "DataFormatError",
    "Dataset",
    "DiscriminativeAutoencoder",
    "LabeledFeatures",
    "LayerWeights",
    "LeastSquaresError",
    "ModelFormatError",
    "NearestNeighborClassifier",
    "SingularSystemError",
    "StackModel",
    "StackedDiscriminativeAutoencoder",
    "TraceRow",
    "TrainConfig",
    "TrainingError",
    "accuracy",
    "augmented_objective",
    "encode",
    "encode_stack",
    "fisher_ratio",
    "knn_predict",
    "linear_predict",
    "load_delimited",
    "load_idx",
    "load_model",
    "one_hot",
    "reconstruction_objective",
    "resolve_activation",
    "save_model",
    "solve_class_map",
    "solve_code",
    "solve_decoder",
    "solve_encoder",
    "solve_left",
    "solve_right",
    "subset",
    "supervised_objective",
    "train_layer",
    "train_stack",
    "update_bregman",
    "vstack",
    "write_idx_images",
    "write_idx_labels",
]
