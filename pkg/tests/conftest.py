import numpy as np
import pytest

from biocrypt import synthetic
from biocrypt.detector import train_svm
from biocrypt.hog import HOGTransformer


@pytest.fixture(scope="session")
def training_windows():
    return synthetic.training_set()


@pytest.fixture(scope="session")
def training_features(training_windows):
    pos, neg = training_windows
    X = HOGTransformer().fit_transform(pos + neg)
    y = np.array([1] * len(pos) + [-1] * len(neg))
    return X, y


@pytest.fixture(scope="session")
def model(training_features):
    X, y = training_features
    return train_svm(X, y, lam=1e-3, epochs=30, seed=0)


@pytest.fixture(scope="session")
def faces():
    return synthetic.demo_faces()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
