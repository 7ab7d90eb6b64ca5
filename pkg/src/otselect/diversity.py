"""Pairwise-similarity energy over training features and its gradient.

The kernel is the plain Gram matrix of the unit-norm features. It can be
held materialized, or left implicit and applied through the feature matrix,
which avoids the n^2 footprint for large pools.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FeatureMatrix
from . import _threads

# Above this size the kernel defaults to implicit application.
MATERIALIZE_LIMIT = 4096


class DiversityError(ValueError):
    pass


@dataclass
class GramKernel:
    """Similarity kernel S[i, i'] = <g_i, g_i'>, materialized or implicit."""

    matrix: np.ndarray | None = None
    features: FeatureMatrix | None = None

    def __post_init__(self) -> None:
        if (self.matrix is None) == (self.features is None):
            raise DiversityError("provide exactly one of matrix or features")
        if self.matrix is not None:
            self.matrix = np.ascontiguousarray(self.matrix, dtype=np.float64)
            if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
                raise DiversityError(f"kernel must be square, got {self.matrix.shape}")

    @classmethod
    def from_features(cls, features: FeatureMatrix, materialize: bool | None = None) -> "GramKernel":
        if materialize is None:
            materialize = features.n <= MATERIALIZE_LIMIT
        if materialize:
            return cls(matrix=_threads.matmul(features.data, features.data.T))
        return cls(features=features)

    @property
    def n(self) -> int:
        if self.matrix is not None:
            return self.matrix.shape[0]
        return self.features.n

    def matvec(self, w: np.ndarray) -> np.ndarray:
        """S @ w, computed as G (G^T w) in implicit mode."""
        if self.matrix is not None:
            return _threads.matmul(self.matrix, w[:, None])[:, 0]
        proj = _threads.matmul(self.features.data.T, w[:, None])
        return _threads.matmul(self.features.data, proj)[:, 0]


def diversity_energy(kernel: GramKernel, w) -> float:
    """Quadratic crowding energy (1/2) w^T S w."""
    values = np.ascontiguousarray(getattr(w, "values", w), dtype=np.float64)
    if kernel.n != values.size:
        raise DiversityError(f"kernel size {kernel.n} does not match weights {values.size}")
    return 0.5 * float(values @ kernel.matvec(values))


def diversity_gradient(kernel: GramKernel, w) -> np.ndarray:
    """Gradient S w of the crowding energy; large where neighborhoods are dense."""
    values = np.ascontiguousarray(getattr(w, "values", w), dtype=np.float64)
    if kernel.n != values.size:
        raise DiversityError(f"kernel size {kernel.n} does not match weights {values.size}")
    return kernel.matvec(values)
