import os

import numpy as np
import pytest

import synth
from diae import TrainConfig, one_hot, train_layer
from diae.data import Dataset, load_idx


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance: long-running acceptance criteria checks"
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_one_hot(rng, n_classes, n_samples):
    labels = rng.integers(0, n_classes, n_samples)
    # ensure every class appears at least once
    labels[:n_classes] = np.arange(n_classes)
    return one_hot(labels, n_classes), labels


@pytest.fixture(scope="session")
def small_corpus():
    """300 train / 120 test synthetic digit images as Datasets."""
    tr_imgs, tr_y = synth.make_corpus(300, seed=71)
    te_imgs, te_y = synth.make_corpus(120, seed=72)
    train = Dataset(X=synth.corpus_matrix(tr_imgs), labels=tr_y, name="synth-train",
                    image_dims=(synth.SIDE, synth.SIDE))
    test = Dataset(X=synth.corpus_matrix(te_imgs), labels=te_y, name="synth-test",
                   image_dims=(synth.SIDE, synth.SIDE))
    return train, test


@pytest.fixture(scope="session")
def small_trained(small_corpus):
    """A width-24 layer trained on the small corpus."""
    train, _ = small_corpus
    cfg = TrainConfig(lam=10.0, mu=1.0, max_iter=12, tol=1e-12, seed=3)
    weights, state = train_layer(train.X, one_hot(train.labels, 10), 24, cfg)
    return train, weights, state


def _mnist_from_env(n_train, n_test):
    root = os.environ.get("DIAE_MNIST_DIR")
    if not root:
        return None
    paths = {
        "train_images": os.path.join(root, "train-images-idx3-ubyte"),
        "train_labels": os.path.join(root, "train-labels-idx1-ubyte"),
        "test_images": os.path.join(root, "t10k-images-idx3-ubyte"),
        "test_labels": os.path.join(root, "t10k-labels-idx1-ubyte"),
    }
    if not all(os.path.exists(p) for p in paths.values()):
        return None
    train = load_idx(paths["train_images"], paths["train_labels"], name="mnist-train")
    test = load_idx(paths["test_images"], paths["test_labels"], name="mnist-test")
    if train.n_samples < n_train or test.n_samples < n_test:
        return None
    return train, test


@pytest.fixture(scope="session")
def image_pools():
    """Image corpus for acceptance runs: real MNIST when DIAE_MNIST_DIR points
    at the standard IDX files, otherwise the deterministic synthetic corpus."""
    n_train, n_test = 12000, 2400
    mnist = _mnist_from_env(n_train, n_test)
    if mnist is not None:
        train, test = mnist
        return train, test, "mnist"
    tr_imgs, tr_y = synth.make_corpus(n_train, seed=501)
    te_imgs, te_y = synth.make_corpus(n_test, seed=502)
    train = Dataset(X=synth.corpus_matrix(tr_imgs), labels=tr_y,
                    name="synth-train", image_dims=(synth.SIDE, synth.SIDE))
    test = Dataset(X=synth.corpus_matrix(te_imgs), labels=te_y,
                   name="synth-test", image_dims=(synth.SIDE, synth.SIDE))
    return train, test, "synthetic"
