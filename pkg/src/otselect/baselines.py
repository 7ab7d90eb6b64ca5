"""Reference selectors the joint method is compared against.

All of them honor the same budget rule and produce the same result record as
the main selector: random sampling, mean-validation-gradient attribution,
small-cluster-first k-means, attribution-pruned clustering, and a
nearest-neighbor transport weighting with KDE redundancy discounting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _threads
from .features import FeatureMatrix
from .ot import SimplexWeights, cost_matrix
from .selector import SelectionResult, SelectorError, budget, top_k_indices

ATTR_DIV_PRUNE_FRACTION = 0.25


class InfeasibleBudgetError(ValueError):
    """Requested subset size exceeds the candidates left after pruning."""


@dataclass
class AttributionScores:
    """Per-training-example alignment scores against the validation mean."""

    scores: np.ndarray

    def __post_init__(self) -> None:
        self.scores = np.ascontiguousarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 1 or not np.all(np.isfinite(self.scores)):
            raise SelectorError("attribution scores must be a finite vector")


@dataclass
class TsdsParams:
    max_k: int = 5000
    kde_k: int = 1000
    sigma: float = 0.75
    alpha: float = 0.5
    c_scale: float = 5.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.max_k >= self.kde_k >= 1:
            raise SelectorError("need max_k >= kde_k >= 1")
        if self.sigma <= 0:
            raise SelectorError("sigma must be > 0")


def attribution_scores(train: FeatureMatrix, val: FeatureMatrix) -> AttributionScores:
    """Inner product of each training row with the raw validation mean."""
    if train.d != val.d:
        raise SelectorError(f"feature dims differ: train {train.d} vs val {val.d}")
    center = val.data.mean(axis=0)
    return AttributionScores(_threads.matmul(train.data, center[:, None])[:, 0])


def _indicator_weights(n: int, selected: list[int]) -> np.ndarray:
    w = np.zeros(n)
    w[selected] = 1.0 / len(selected)
    return w


def _result(selected, n, k, weights, method, seed, params) -> SelectionResult:
    return SelectionResult(
        selected=sorted(int(i) for i in selected),
        k=k,
        final_weights=SimplexWeights(weights),
        trace=[],
        params=params,
        method=method,
        seed=seed,
    )


def select_random(n: int, rho: float, seed: int) -> SelectionResult:
    """Uniform subset without replacement."""
    k = budget(n, rho)
    rng = np.random.default_rng(seed)
    selected = sorted(int(i) for i in rng.choice(n, size=k, replace=False))
    return _result(selected, n, k, np.full(n, 1.0 / n), "random", seed, {"rho": rho})


def select_attribution(train: FeatureMatrix, val: FeatureMatrix, rho: float) -> SelectionResult:
    """Top-k training rows by attribution score."""
    scores = attribution_scores(train, val).scores
    k = budget(train.n, rho)
    selected = top_k_indices(scores, k)
    return _result(
        selected, train.n, k, _indicator_weights(train.n, selected),
        "attribution", 0, {"rho": rho},
    )


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (
        np.sum(x * x, axis=1)[:, None]
        - 2.0 * _threads.matmul(x, centers.T)
        + np.sum(centers * centers, axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _kmeans_pp_init(x: np.ndarray, n_clusters: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((n_clusters, x.shape[1]))
    centers[0] = x[int(rng.integers(n))]
    closest = _sq_dists(x, centers[:1])[:, 0]
    for c in range(1, n_clusters):
        total = closest.sum()
        if total <= 0:
            # All points coincide with chosen centers; any pick works.
            centers[c] = x[int(rng.integers(n))]
            continue
        centers[c] = x[int(rng.choice(n, p=closest / total))]
        closest = np.minimum(closest, _sq_dists(x, centers[c:c + 1])[:, 0])
    return centers


def _lloyd(x: np.ndarray, n_clusters: int, seed: int, max_iter: int = 100):
    """Seeded k-means++ plus Lloyd iterations to an assignment fixed point."""
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(x, n_clusters, rng)
    labels = np.full(x.shape[0], -1)
    for _ in range(max_iter):
        d2 = _sq_dists(x, centers)
        new_labels = np.argmin(d2, axis=1)
        point_d2 = d2[np.arange(x.shape[0]), new_labels]
        for c in range(n_clusters):
            if not np.any(new_labels == c):
                # Re-seed an empty cluster at the point farthest from its
                # current centroid, then claim that point.
                far = int(np.argmax(point_d2))
                centers[c] = x[far]
                new_labels[far] = c
                point_d2[far] = 0.0
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(n_clusters):
            members = labels == c
            centers[c] = x[members].mean(axis=0)
    d2 = _sq_dists(x, centers)
    return labels, centers, d2[np.arange(x.shape[0]), labels]


def _smallest_cluster_order(labels, dist_to_center, k, n_clusters) -> list[int]:
    """Budget-filling order: smallest clusters first, nearest members first."""
    sizes = np.bincount(labels, minlength=n_clusters)
    cluster_order = np.lexsort((np.arange(n_clusters), sizes))
    picked: list[int] = []
    for c in cluster_order:
        if len(picked) >= k:
            break
        members = np.flatnonzero(labels == c)
        if members.size == 0:
            continue
        inner = members[np.lexsort((members, dist_to_center[members]))]
        picked.extend(int(i) for i in inner[: k - len(picked)])
    return picked


def select_diversity(
    train: FeatureMatrix, rho: float, cluster_ratio: float = 0.1, seed: int = 0
) -> SelectionResult:
    """Cluster the pool and fill the budget starting from the smallest clusters."""
    if not 0.0 < cluster_ratio <= 1.0:
        raise SelectorError(f"cluster_ratio must be in (0, 1], got {cluster_ratio}")
    k = budget(train.n, rho)
    selected = _diversity_core(train.data, k, cluster_ratio, seed)
    return _result(
        selected, train.n, k, _indicator_weights(train.n, selected),
        "diversity", seed, {"rho": rho, "cluster_ratio": cluster_ratio},
    )


def _diversity_core(x: np.ndarray, k: int, cluster_ratio: float, seed: int) -> list[int]:
    n = x.shape[0]
    n_clusters = max(1, int(np.floor(n * cluster_ratio)))
    labels, _, dist = _lloyd(x, n_clusters, seed)
    return sorted(_smallest_cluster_order(labels, dist, k, n_clusters))


def select_attr_div(
    train: FeatureMatrix,
    val: FeatureMatrix,
    rho: float,
    cluster_ratio: float = 0.1,
    seed: int = 0,
) -> SelectionResult:
    """Prune the worst-attributed quartile, then cluster-select the rest.

    The budget is computed from the full pool size before pruning; indices in
    the result refer to the original numbering.
    """
    n = train.n
    k = budget(n, rho)
    scores = attribution_scores(train, val).scores
    n_drop = int(np.floor(ATTR_DIV_PRUNE_FRACTION * n))
    # Drop lowest scores; among ties prefer dropping larger indices.
    drop_order = np.lexsort((-np.arange(n), scores))
    survivors = np.setdiff1d(np.arange(n), drop_order[:n_drop])
    if k > survivors.size:
        raise InfeasibleBudgetError(
            f"budget {k} exceeds the {survivors.size} candidates left after pruning"
        )
    local = _diversity_core(train.data[survivors], k, cluster_ratio, seed)
    selected = sorted(int(survivors[i]) for i in local)
    return _result(
        selected, n, k, _indicator_weights(n, selected),
        "attrdiv", seed, {"rho": rho, "cluster_ratio": cluster_ratio},
    )


def select_tsds(
    train: FeatureMatrix, val: FeatureMatrix, rho: float, params: TsdsParams
) -> SelectionResult:
    """Nearest-neighbor transport mass, KDE-discounted, then weighted sampling."""
    n, m = train.n, val.n
    k = budget(n, rho)
    kde_k = min(params.kde_k, n - 1) if n > 1 else 0
    cost = cost_matrix(train, val).data

    raw = np.zeros(n)
    nearest = np.argmin(cost, axis=0)
    np.add.at(raw, nearest, 1.0 / m)

    if kde_k > 0:
        gram = _threads.matmul(train.data, train.data.T)
        sq = np.clip(2.0 - 2.0 * gram, 0.0, None)
        np.fill_diagonal(sq, np.inf)
        neighbor_sq = np.sort(sq, axis=1)[:, :kde_k]
        density = np.exp(-neighbor_sq / (2.0 * params.sigma**2)).mean(axis=1)
    else:
        density = np.ones(n)
    density_hat = density / density.mean()

    fallback = bool(raw.sum() == 0.0)
    weights = np.full(n, 1.0 / n) if fallback else raw / (1.0 + params.c_scale * params.alpha * density_hat)
    weights = weights / weights.sum()

    rng = np.random.default_rng(params.seed)
    support = np.flatnonzero(weights > 0)
    if support.size >= k:
        selected = rng.choice(n, size=k, replace=False, p=weights, shuffle=False)
    else:
        rest = np.setdiff1d(np.arange(n), support)
        extra = rng.choice(rest, size=k - support.size, replace=False)
        selected = np.concatenate([support, extra])
    return _result(
        sorted(int(i) for i in selected), n, k, weights, "tsds", params.seed,
        {
            "rho": rho,
            "max_k": min(params.max_k, n),
            "kde_k": kde_k,
            "sigma": params.sigma,
            "alpha": params.alpha,
            "c_scale": params.c_scale,
            "fallback_uniform": fallback,
        },
    )
