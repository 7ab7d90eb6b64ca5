"""Subset diagnostics: effective diversity, mean attribution, transport gap.

These are the quantities used to characterize what a selector actually picked:
how many effectively distinct samples it kept, how aligned they are with the
validation mean, and how far the subset sits from the validation set under
entropic transport.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from . import _threads
from .features import FeatureMatrix
from .ot import SimplexWeights, SinkhornParams, cost_matrix, sinkhorn
from .baselines import AttributionScores


class MetricsError(ValueError):
    pass


@dataclass
class SubsetReport:
    method: str
    k: int
    vendi: float
    mean_attr: float
    ot_to_val: float
    params: dict


def vendi_score(sub: FeatureMatrix) -> float:
    """Effective sample count: exp of the entropy of the Gram spectrum.

    Eigenvalues of K/n are clamped at tiny negative values (floating-point
    PSD violations) and renormalized before the entropy is taken. The score
    lies in [1, n].
    """
    n = sub.n
    gram = _threads.matmul(sub.data, sub.data.T)
    eigvals = np.linalg.eigvalsh(gram / n)
    if np.any(eigvals < -1e-9):
        raise MetricsError(f"kernel spectrum has eigenvalue {eigvals.min():.3e} below the PSD floor")
    eigvals = np.clip(eigvals, 0.0, None)
    eigvals = eigvals / eigvals.sum()
    return float(np.exp(-np.sum(xlogy(eigvals, eigvals))))


def mean_attribution(sub_indices, scores: AttributionScores) -> float:
    """Arithmetic mean of attribution scores over a subset."""
    idx = np.asarray(sub_indices, dtype=np.intp)
    if idx.size == 0:
        raise MetricsError("subset is empty")
    if idx.min() < 0 or idx.max() >= scores.scores.size:
        raise MetricsError("subset index out of range")
    return float(scores.scores[idx].mean())


def subset_ot(sub: FeatureMatrix, val: FeatureMatrix, params: SinkhornParams) -> float:
    """Entropic transport cost between uniform subset and validation atoms."""
    cost = cost_matrix(sub, val)
    sol = sinkhorn(
        SimplexWeights.uniform(sub.n), SimplexWeights.uniform(val.n), cost, params
    )
    return sol.transport_cost
