"""Evaluation tools: nearest-neighbor and linear-map classification, accuracy
and a scatter-based class-separation score."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import DimensionMismatchError, as_label_vector, as_matrix

__all__ = [
    "LabeledFeatures",
    "knn_predict",
    "linear_predict",
    "accuracy",
    "fisher_ratio",
]


@dataclass(frozen=True)
class LabeledFeatures:
    """Feature columns with one class id per column."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        feats = as_matrix(self.features, "features", allow_empty_cols=True)
        labels = as_label_vector(self.labels, "labels")
        if feats.shape[1] != labels.shape[0]:
            raise DimensionMismatchError(
                f"features have {feats.shape[1]} columns but {labels.shape[0]} labels given"
            )
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return self.labels.shape[0]


def _squared_distances(query_block: np.ndarray, train: np.ndarray) -> np.ndarray:
    # ||q - t||^2 expanded; clamp tiny negatives from cancellation.
    q2 = np.einsum("ij,ij->j", query_block, query_block)
    t2 = np.einsum("ij,ij->j", train, train)
    d = q2[:, None] + t2[None, :] - 2.0 * (query_block.T @ train)
    np.maximum(d, 0.0, out=d)
    return d


def knn_predict(train: LabeledFeatures, query, k: int = 1,
                block_size: int = 256) -> np.ndarray:
    """Majority label among the k nearest training columns, per query column.

    Distance ties are broken by the lowest training index, vote ties by the
    lowest class id.  For ``k=1`` this is the single nearest neighbor.
    """
    Q = as_matrix(query, "query", allow_empty_cols=True)
    if train.n_samples == 0:
        raise ValueError("training set is empty")
    if Q.shape[0] != train.features.shape[0]:
        raise DimensionMismatchError(
            f"query has {Q.shape[0]} rows but training features have "
            f"{train.features.shape[0]}"
        )
    if not (1 <= k <= train.n_samples):
        raise ValueError(f"k must lie in [1, {train.n_samples}], got {k}")

    n_classes = int(train.labels.max()) + 1
    out = np.empty(Q.shape[1], dtype=np.int64)
    for start in range(0, Q.shape[1], block_size):
        block = Q[:, start:start + block_size]
        d = _squared_distances(block, train.features)
        if k == 1:
            nearest = np.argmin(d, axis=1)  # first minimum = lowest index
            out[start:start + block.shape[1]] = train.labels[nearest]
        else:
            order = np.argsort(d, axis=1, kind="stable")[:, :k]
            votes = train.labels[order]
            for i in range(votes.shape[0]):
                counts = np.bincount(votes[i], minlength=n_classes)
                out[start + i] = int(np.argmax(counts))  # first max = lowest id
    return out


def linear_predict(class_map, features) -> np.ndarray:
    """Argmax over the rows of ``class_map @ features``, ties to the lowest id."""
    D = as_matrix(class_map, "class_map")
    F = as_matrix(features, "features", allow_empty_cols=True)
    if D.shape[1] != F.shape[0]:
        raise DimensionMismatchError(
            f"class_map has {D.shape[1]} columns but features have {F.shape[0]} rows"
        )
    scores = D @ F
    return np.argmax(scores, axis=0).astype(np.int64)


def accuracy(predicted, truth) -> float:
    """Fraction of exact matches between two equal-length label sequences."""
    p = as_label_vector(predicted, "predicted")
    t = as_label_vector(truth, "truth")
    if p.shape[0] != t.shape[0]:
        raise DimensionMismatchError(
            f"predicted has {p.shape[0]} entries but truth has {t.shape[0]}"
        )
    if p.shape[0] == 0:
        raise ValueError("cannot compute accuracy of empty label lists")
    return float(np.mean(p == t))


def fisher_ratio(data: LabeledFeatures) -> float:
    """trace(between-class scatter) / trace(within-class scatter).

    Higher values mean classes are more linearly separated.  Degenerate
    inputs (a single class, or zero within-class scatter) are rejected.
    """
    feats, labels = data.features, data.labels
    classes = np.unique(labels)
    if classes.shape[0] < 2:
        raise ValueError("fisher_ratio requires at least 2 classes")
    grand_mean = feats.mean(axis=1)
    within = 0.0
    between = 0.0
    for c in classes:
        cols = feats[:, labels == c]
        mean_c = cols.mean(axis=1)
        centered = cols - mean_c[:, None]
        within += float(np.sum(centered * centered))
        diff = mean_c - grand_mean
        between += cols.shape[1] * float(diff @ diff)
    if within == 0.0:
        raise ValueError("within-class scatter is zero; fisher_ratio is undefined")
    return between / within
