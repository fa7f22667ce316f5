"""Scikit-learn style estimators wrapping the column-major core.

These follow the usual conventions (rows are samples, ``get_params`` /
``set_params`` work, transformers compose in pipelines) so the feature
extractor plugs into the wider ecosystem.  The underlying math operates on
transposed matrices; the wrappers handle the conversion.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .classify import LabeledFeatures, knn_predict
from .data import one_hot
from .layer import TrainConfig, encode, train_layer
from .stack import StackModel, encode_stack, load_model, save_model, train_stack
from .validation import as_label_vector, as_matrix

__all__ = [
    "DiscriminativeAutoencoder",
    "StackedDiscriminativeAutoencoder",
    "NearestNeighborClassifier",
]


def _samples_as_columns(X, *, allow_empty: bool = False) -> np.ndarray:
    arr = as_matrix(np.asarray(X, dtype=np.float64).T, "X",
                    allow_empty_cols=allow_empty)
    return arr


def _label_matrix(y, n_samples: int, lam: float) -> np.ndarray:
    if y is None:
        if lam != 0.0:
            raise ValueError("y is required unless lam == 0 (unsupervised baseline)")
        return np.ones((1, n_samples))
    labels = as_label_vector(y, "y")
    if labels.shape[0] != n_samples:
        raise ValueError(f"X has {n_samples} samples but y has {labels.shape[0]}")
    return one_hot(labels, int(labels.max()) + 1)


class DiscriminativeAutoencoder(TransformerMixin, BaseEstimator):
    """Single supervised autoencoder layer.

    Learns an encoder projecting samples to ``n_hidden`` dimensions, a
    decoder reconstructing the input, and a linear map from codes to class
    indicators whose residual (weighted by ``lam``) shapes the code space.

    Parameters
    ----------
    n_hidden : int
        Width of the learned representation; must be below the feature count.
    lam : float
        Weight of the label-consistency penalty.  ``0`` trains the plain
        unsupervised autoencoder (``y`` may then be omitted).
    mu : float
        Weight coupling the code proxy to the encoder output.
    max_iter, tol : int, float
        Sweep budget and relative-objective-change stopping threshold.
    damping : float
        Tikhonov damping applied inside every block solve.
    activation : {"identity", "tanh"}
        Elementwise activation; the default linear map keeps every update a
        pure least-squares problem.
    clamp : float
        Domain guard for the tanh inverse.
    bregman_rule : {"paper", "standard"}
        Update rule for the coupling-correction variable.
    random_state : int
        Seed for the encoder initialization.

    Attributes
    ----------
    weights_ : LayerWeights
    state_ : AdmmState
    n_iter_ : int
    """

    def __init__(self, n_hidden=98, lam=10.0, mu=1.0, max_iter=20, tol=1e-4,
                 damping=1e-6, activation="identity", clamp=1e-6,
                 bregman_rule="paper", random_state=0):
        self.n_hidden = n_hidden
        self.lam = lam
        self.mu = mu
        self.max_iter = max_iter
        self.tol = tol
        self.damping = damping
        self.activation = activation
        self.clamp = clamp
        self.bregman_rule = bregman_rule
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        return TrainConfig(lam=self.lam, mu=self.mu, max_iter=self.max_iter,
                           tol=self.tol, damping=self.damping,
                           seed=self.random_state, bregman_rule=self.bregman_rule,
                           activation=self.activation, clamp=self.clamp)

    def fit(self, X, y=None):
        data = _samples_as_columns(X)
        labels = _label_matrix(y, data.shape[1], self.lam)
        self.weights_, self.state_ = train_layer(data, labels,
                                                 int(self.n_hidden), self._config())
        self.n_iter_ = self.state_.n_iter
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "weights_")
        data = _samples_as_columns(X, allow_empty=True)
        return encode(self.weights_, data).T

    def reconstruct(self, X) -> np.ndarray:
        """Decode the encoding of ``X`` back to feature space."""
        check_is_fitted(self, "weights_")
        data = _samples_as_columns(X, allow_empty=True)
        return (self.weights_.decoder @ encode(self.weights_, data)).T


class StackedDiscriminativeAutoencoder(TransformerMixin, BaseEstimator):
    """Greedy stack of :class:`DiscriminativeAutoencoder` layers.

    Each layer trains to completion on the previous layer's output; there is
    no joint fine-tuning pass.  ``transform`` returns the top layer's
    representation.

    Parameters mirror the single-layer estimator; ``widths`` lists the
    strictly decreasing hidden sizes and ``lam`` may be a scalar or one
    value per layer.
    """

    def __init__(self, widths=(392, 196, 98), lam=10.0, mu=1.0, max_iter=20,
                 tol=1e-4, damping=1e-6, activation="identity", clamp=1e-6,
                 bregman_rule="paper", random_state=0):
        self.widths = widths
        self.lam = lam
        self.mu = mu
        self.max_iter = max_iter
        self.tol = tol
        self.damping = damping
        self.activation = activation
        self.clamp = clamp
        self.bregman_rule = bregman_rule
        self.random_state = random_state

    def _configs(self) -> list[TrainConfig]:
        widths = list(self.widths)
        lams = self.lam
        if np.isscalar(lams):
            lams = [float(lams)] * len(widths)
        else:
            lams = [float(v) for v in lams]
            if len(lams) != len(widths):
                raise ValueError(
                    f"got {len(lams)} lam values for {len(widths)} layers"
                )
        return [
            TrainConfig(lam=lams[k], mu=self.mu, max_iter=self.max_iter,
                        tol=self.tol, damping=self.damping,
                        seed=self.random_state + k, bregman_rule=self.bregman_rule,
                        activation=self.activation, clamp=self.clamp)
            for k in range(len(widths))
        ]

    def fit(self, X, y=None):
        data = _samples_as_columns(X)
        lam0 = self.lam if np.isscalar(self.lam) else max(self.lam)
        labels = _label_matrix(y, data.shape[1], float(lam0))
        self.model_ = train_stack(data, labels, list(self.widths), self._configs())
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        data = _samples_as_columns(X, allow_empty=True)
        return encode_stack(self.model_, data).T

    def save(self, path) -> None:
        check_is_fitted(self, "model_")
        save_model(self.model_, path)

    @classmethod
    def from_model(cls, model: StackModel) -> "StackedDiscriminativeAutoencoder":
        est = cls(widths=tuple(model.widths))
        est.model_ = model
        return est

    @classmethod
    def load(cls, path) -> "StackedDiscriminativeAutoencoder":
        return cls.from_model(load_model(path))


class NearestNeighborClassifier(ClassifierMixin, BaseEstimator):
    """Plain k-nearest-neighbor voting with deterministic tie-breaking."""

    def __init__(self, k=1):
        self.k = k

    def fit(self, X, y):
        feats = _samples_as_columns(X)
        labels = as_label_vector(y, "y")
        self.train_ = LabeledFeatures(features=feats, labels=labels)
        self.classes_ = np.unique(labels)
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "train_")
        query = _samples_as_columns(X, allow_empty=True)
        return knn_predict(self.train_, query, k=int(self.k))
