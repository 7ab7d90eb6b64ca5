"""Joint alignment/diversity selection over the weight simplex.

Each step solves entropic transport from the current training weights to the
uniform validation marginal, reads off the dual potential as the alignment
gradient, adds the kernel crowding gradient, and applies a multiplicative
weight update. The top-k weights at the end form the selected subset.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from .diversity import GramKernel, diversity_gradient
from .features import FeatureMatrix
from .ot import SimplexWeights, SinkhornParams, cost_matrix, sinkhorn


class SelectorError(ValueError):
    pass


# Step directions are snapped to this absolute lattice. Sub-ulp residue from
# a dual-gauge shift (the dual is defined only up to a constant) then cannot
# perturb the weight trajectory, making gauge invariance exact, not just
# approximate. The lattice is ~1e-6, far below any meaningful gradient scale.
_STEP_LATTICE = 2.0**20


@dataclass
class EvoParams:
    rho: float = 0.5
    steps: int = 10
    lr: float = 0.1
    epsilon: float = 0.5
    sinkhorn: SinkhornParams = field(default_factory=SinkhornParams)
    std_guard: float = 1e-12

    def __post_init__(self) -> None:
        if not 0.0 < self.rho <= 1.0:
            raise SelectorError(f"rho must be in (0, 1], got {self.rho}")
        if self.steps < 0:
            raise SelectorError("steps must be >= 0")
        if self.lr < 0:
            raise SelectorError("lr must be >= 0")
        if self.epsilon <= 0:
            raise SelectorError("epsilon must be > 0")
        if self.std_guard <= 0:
            raise SelectorError("std_guard must be > 0")


@dataclass
class TraceRecord:
    step: int
    ot_value: float
    div_energy: float
    entropy: float
    sinkhorn_violation: float


@dataclass
class SelectionResult:
    selected: list[int]
    k: int
    final_weights: SimplexWeights
    trace: list[TraceRecord]
    params: dict
    method: str = "evoselect"
    seed: int = 0


def budget(n: int, rho: float) -> int:
    """Subset size: max(1, floor(n * rho))."""
    return max(1, int(np.floor(n * rho)))


def standardize(v: np.ndarray, guard: float = 1e-12) -> np.ndarray:
    """Z-score with population standard deviation, floored at ``guard``.

    Constant input maps to the zero vector; output always has mean zero.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size < 1 or not np.all(np.isfinite(v)):
        raise SelectorError("standardize requires a non-empty finite vector")
    centered = v - v.mean()
    std = float(np.sqrt(np.mean(centered * centered)))
    return centered / max(std, guard)


def exp_update(w: SimplexWeights, g: np.ndarray, lr: float) -> SimplexWeights:
    """Multiplicative simplex step: w * exp(-lr g), renormalized in L1."""
    g = np.asarray(g, dtype=np.float64)
    if g.size != w.len:
        raise SelectorError("gradient size does not match weights")
    if lr < 0:
        raise SelectorError("lr must be >= 0")
    raw = w.values * np.exp(-lr * g)
    total = raw.sum()
    assert total > 0, "all weights vanished in the multiplicative update"
    return SimplexWeights(raw / total)


def top_k_indices(values: np.ndarray, k: int) -> list[int]:
    """Indices of the k largest entries, smaller index winning ties, sorted."""
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    if not 1 <= k <= n:
        raise SelectorError(f"k must be in [1, {n}], got {k}")
    order = np.lexsort((np.arange(n), -values))
    return sorted(int(i) for i in order[:k])


def top_k(w: SimplexWeights, k: int) -> list[int]:
    """Indices of the k largest weights, smaller index winning ties, sorted."""
    return top_k_indices(w.values, k)


def _weight_entropy(w: np.ndarray) -> float:
    return -float(np.sum(xlogy(w, w)))


def evoselect(
    train: FeatureMatrix,
    val: FeatureMatrix,
    params: EvoParams,
    _dual_shift: float = 0.0,
    _cold_start: bool = False,
    _observer=None,
) -> SelectionResult:
    """Run the full interleaved alignment/diversity optimization.

    The underscore keywords are testing hooks: ``_dual_shift`` offsets the
    transport dual before standardization (selections must be invariant to
    it, the dual being defined only up to an additive constant);
    ``_cold_start`` disables the per-step Sinkhorn warm start; ``_observer``
    receives (step, weights) after every update.
    """
    n = train.n
    k = budget(n, params.rho)
    cost = cost_matrix(train, val)
    kernel = GramKernel.from_features(train)
    b = SimplexWeights.uniform(val.n)
    w = SimplexWeights.uniform(n)
    sink = SinkhornParams(
        epsilon=params.epsilon,
        tol=params.sinkhorn.tol,
        max_iter=params.sinkhorn.max_iter,
        log_domain=params.sinkhorn.log_domain,
    )
    warm: tuple[np.ndarray, np.ndarray] | None = None
    trace: list[TraceRecord] = []
    for t in range(params.steps):
        sol = sinkhorn(w, b, cost, sink, init=warm)
        if not _cold_start:
            warm = (sol.potential_train, sol.potential_val)
        u = sol.potential_train
        if _dual_shift:
            u = u + _dual_shift
        d = diversity_gradient(kernel, w)
        g = standardize(u, params.std_guard) + standardize(d, params.std_guard)
        g = np.round(g * _STEP_LATTICE) / _STEP_LATTICE
        trace.append(
            TraceRecord(
                step=t,
                ot_value=sol.value,
                div_energy=0.5 * float(w.values @ d),
                entropy=_weight_entropy(w.values),
                sinkhorn_violation=sol.marginal_violation,
            )
        )
        w = exp_update(w, g, params.lr)
        if _observer is not None:
            _observer(t, w.values)
    return SelectionResult(
        selected=top_k(w, k),
        k=k,
        final_weights=w,
        trace=trace,
        params={
            "rho": params.rho,
            "steps": params.steps,
            "lr": params.lr,
            "epsilon": params.epsilon,
            "tol": sink.tol,
            "max_iter": sink.max_iter,
            "log_domain": sink.log_domain,
            "std_guard": params.std_guard,
        },
    )
