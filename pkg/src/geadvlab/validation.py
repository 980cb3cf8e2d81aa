"""Input validation helpers for the estimator facade."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, column_or_1d

from .errors import ConfigError, DomainError, ShapeError


def check_images(X, input_shape=None) -> np.ndarray:
    """Validate a (N, C, H, W) image batch: float64, finite, in [0, 1]."""
    X = check_array(X, allow_nd=True, dtype=np.float64)
    if X.ndim != 4:
        raise ShapeError(f"expected (N, C, H, W) images, got ndim={X.ndim}")
    if input_shape is not None and tuple(X.shape[1:]) != tuple(input_shape):
        raise ShapeError(f"images have shape {X.shape[1:]}, expected {tuple(input_shape)}")
    if X.min() < 0.0 or X.max() > 1.0:
        raise DomainError("pixel values must lie in [0, 1]")
    return X


def check_labels(y, n_samples: int, n_classes=None) -> np.ndarray:
    """Integer class labels aligned with the batch; in [0, n_classes) if given."""
    y = column_or_1d(np.asarray(y), warn=False)
    if y.shape[0] != n_samples:
        raise ShapeError(f"{y.shape[0]} labels for {n_samples} samples")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(y == np.floor(y)):
            raise DomainError("labels must be integers")
        y = y.astype(np.int64)
    y = y.astype(np.int64)
    if y.min() < 0:
        raise DomainError("labels must be non-negative")
    if n_classes is not None and y.max() >= n_classes:
        raise DomainError(f"labels must lie in [0, {n_classes})")
    return y


def check_fitted_classifier(clf):
    """Resolve a source classifier argument down to NetworkParams."""
    from .models import NetworkParams

    if clf is None:
        raise ConfigError("a fitted source classifier is required")
    if isinstance(clf, NetworkParams):
        return clf
    net = getattr(clf, "network_", None)
    if isinstance(net, NetworkParams):
        return net
    raise ConfigError(
        "classifier must be NetworkParams or a fitted TinyCnnClassifier "
        f"(got {type(clf).__name__})")
