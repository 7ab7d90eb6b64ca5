"""Entropic optimal transport between weighted training and validation atoms.

Provides the squared-distance cost matrix for unit-norm features, a Sinkhorn
solver (standard and log-domain scaling), the dual potential that acts as the
gradient of the transport objective with respect to the training marginal,
and an exact linear-program solver for small instances used as a test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.special import xlogy

from .features import FeatureMatrix
from . import _threads


class OtError(ValueError):
    """Invalid transport problem: shape mismatch or degenerate marginals."""


class SinkhornOverflowError(FloatingPointError):
    """Scalings overflowed in standard-domain mode; retry with log_domain=True."""


@dataclass
class CostMatrix:
    """Nonnegative n x m matrix of pairwise transport costs."""

    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise OtError(f"cost matrix must be 2-D, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)) or np.any(self.data < 0):
            raise OtError("cost matrix entries must be finite and nonnegative")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def m(self) -> int:
        return self.data.shape[1]


@dataclass
class SimplexWeights:
    """Nonnegative weights summing to one."""

    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size < 1:
            raise OtError("weights must be a non-empty vector")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise OtError("weights must be finite and nonnegative")
        if abs(float(self.values.sum()) - 1.0) > 1e-9:
            raise OtError(f"weights sum to {self.values.sum():.12f}, expected 1 within 1e-9")

    @classmethod
    def uniform(cls, n: int) -> "SimplexWeights":
        return cls(np.full(n, 1.0 / n))

    @property
    def len(self) -> int:
        return self.values.size


@dataclass
class SinkhornParams:
    epsilon: float = 0.5
    tol: float = 1e-6
    max_iter: int = 10000
    log_domain: bool = True

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise OtError("epsilon must be > 0")
        if self.tol <= 0:
            raise OtError("tol must be > 0")
        if self.max_iter < 1:
            raise OtError("max_iter must be >= 1")


@dataclass
class TransportSolution:
    """Converged (or best-effort) entropic transport solution.

    ``potential_train`` is mean-centered; the complementary shift is folded
    into ``potential_val`` so the plan is unchanged. ``value`` is the
    entropy-regularized objective, ``transport_cost`` the bare <P, C>.
    """

    plan: np.ndarray
    potential_train: np.ndarray
    potential_val: np.ndarray
    value: float
    transport_cost: float
    iterations: int
    marginal_violation: float


def cost_matrix(train: FeatureMatrix, val: FeatureMatrix) -> CostMatrix:
    """Pairwise squared distances 2 - 2<g_i, g_j> between unit-norm rows."""
    if train.d != val.d:
        raise OtError(f"feature dims differ: train {train.d} vs val {val.d}")
    inner = _threads.matmul(train.data, val.data.T)
    return CostMatrix(np.clip(2.0 - 2.0 * inner, 0.0, 4.0))


def _check_problem(w: SimplexWeights, b: SimplexWeights, cost: CostMatrix) -> None:
    if w.len != cost.n or b.len != cost.m:
        raise OtError(f"marginal sizes ({w.len}, {b.len}) do not match cost shape ({cost.n}, {cost.m})")
    if np.any(w.values == 0) or np.any(b.values == 0):
        raise OtError("zero-mass atoms are not supported; strip them before solving")


def _violation(plan: np.ndarray, w: np.ndarray, b: np.ndarray) -> float:
    row = float(np.abs(plan.sum(axis=1) - w).sum())
    col = float(np.abs(plan.sum(axis=0) - b).sum())
    return max(row, col)


def sinkhorn(
    w: SimplexWeights,
    b: SimplexWeights,
    cost: CostMatrix,
    params: SinkhornParams,
    init: tuple[np.ndarray, np.ndarray] | None = None,
) -> TransportSolution:
    """Alternating scaling on the Gibbs kernel exp(-C/eps).

    Runs until the larger of the two L1 marginal residuals drops to
    ``params.tol`` or ``params.max_iter`` rounds elapse; a non-converged
    solution is still returned, flagged by its ``marginal_violation``.
    Log-domain updates are used when requested, and also forced whenever
    eps < 0.05 * median(C), where the plain kernel underflows. ``init``
    warm-starts from a previous solution's (uncentered) dual pair.
    """
    _check_problem(w, b, cost)
    eps = params.epsilon
    use_log = params.log_domain or eps < 0.05 * float(np.median(cost.data))
    if use_log:
        return _sinkhorn_log(w, b, cost, params, init)
    return _sinkhorn_scaling(w, b, cost, params, init)


def _round_to_polytope(plan: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Project an almost-feasible plan onto the transport polytope.

    Row/column scalings capped at one, then a rank-one patch distributing the
    leftover mass. The result has exact marginals (to roundoff), so its cost
    can never undercut the true optimum.
    """
    row = plan.sum(axis=1)
    plan = plan * np.minimum(1.0, w / np.where(row > 0, row, 1.0))[:, None]
    col = plan.sum(axis=0)
    plan = plan * np.minimum(1.0, b / np.where(col > 0, col, 1.0))[None, :]
    err_r = w - plan.sum(axis=1)
    err_c = b - plan.sum(axis=0)
    total = err_r.sum()
    if total > 0:
        plan = plan + np.outer(err_r, err_c) / total
    return plan


def _finish(
    cost: np.ndarray,
    plan: np.ndarray,
    w: np.ndarray,
    b: np.ndarray,
    alpha: np.ndarray,
    beta: np.ndarray,
    eps: float,
    iterations: int,
    violation: float,
) -> TransportSolution:
    # The reported violation is the solver's stopping state; the returned
    # plan is additionally rounded to exact feasibility, which only shrinks
    # its actual residuals.
    plan = _round_to_polytope(plan, w, b)
    transport_cost = float(np.sum(plan * cost))
    value = transport_cost + eps * float(np.sum(xlogy(plan, plan)) - plan.sum())
    shift = float(alpha.mean())
    return TransportSolution(
        plan=plan,
        potential_train=alpha - shift,
        potential_val=beta + shift,
        value=value,
        transport_cost=transport_cost,
        iterations=iterations,
        marginal_violation=violation,
    )


def _lse(t: np.ndarray, axis: int) -> np.ndarray:
    # max-shifted logsumexp; scipy's wrapper is too heavy for hot tiny arrays
    mx = t.max(axis=axis)
    return mx + np.log(np.exp(t - np.expand_dims(mx, axis)).sum(axis=axis))


def _log_rounds(cost, log_w, log_b, w, b, eps, f, g, tol, max_iter):
    """Log-domain scaling rounds at one eps; returns updated duals in place."""
    ck = cost / eps
    plan = None
    violation = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        g = log_b - _lse(f[:, None] - ck, axis=0)
        f = log_w - _lse(g[None, :] - ck, axis=1)
        plan = np.exp((f[:, None] + g[None, :]) - ck)
        violation = np.abs(plan.sum(axis=1) - w).sum()
        col = np.abs(plan.sum(axis=0) - b).sum()
        if col > violation:
            violation = col
        if violation <= tol:
            break
    return f, g, plan, float(violation), it


# Cold starts far below the cost scale anneal eps down a fixed ladder first;
# pure fixed-eps iteration can need orders of magnitude more rounds there.
_ANNEAL_FACTOR = 0.25
_ANNEAL_TOL = 1e-3
_ANNEAL_MAX_ITER = 500


def _sinkhorn_log(w, b, cost, params, init):
    eps = params.epsilon
    log_w = np.log(w.values)
    log_b = np.log(b.values)
    if init is not None:
        alpha = np.asarray(init[0], dtype=np.float64)
        beta = np.asarray(init[1], dtype=np.float64)
    else:
        alpha = np.zeros(w.len)
        beta = np.zeros(b.len)
        scale = float(np.median(cost.data))
        if 0.0 < eps < 0.05 * scale:
            stage = 0.5 * scale
            while stage > eps:
                f, g, _, _, _ = _log_rounds(
                    cost.data, log_w, log_b, w.values, b.values, stage,
                    alpha / stage, beta / stage, _ANNEAL_TOL, _ANNEAL_MAX_ITER,
                )
                alpha, beta = stage * f, stage * g
                stage *= _ANNEAL_FACTOR
    f, g, plan, violation, it = _log_rounds(
        cost.data, log_w, log_b, w.values, b.values, eps,
        alpha / eps, beta / eps, params.tol, params.max_iter,
    )
    return _finish(cost.data, plan, w.values, b.values, eps * f, eps * g, eps, it, violation)


def _sinkhorn_scaling(w, b, cost, params, init):
    eps = params.epsilon
    kernel = np.exp(-cost.data / eps)
    if init is not None:
        u = np.exp(np.asarray(init[0], dtype=np.float64) / eps)
        v = np.exp(np.asarray(init[1], dtype=np.float64) / eps)
    else:
        u = np.ones(w.len)
        v = np.ones(b.len)
    violation = np.inf
    it = 0
    for it in range(1, params.max_iter + 1):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            v = b.values / (kernel.T @ u)
            u = w.values / (kernel @ v)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))) or np.any(u <= 0) or np.any(v <= 0):
            raise SinkhornOverflowError(
                "scaling overflow/underflow at eps="
                f"{eps:g}; rerun with log_domain=True"
            )
        plan = u[:, None] * kernel * v[None, :]
        violation = _violation(plan, w.values, b.values)
        if violation <= params.tol:
            break
    return _finish(cost.data, plan, w.values, b.values, eps * np.log(u), eps * np.log(v), eps, it, violation)


def ot_gradient(
    w: SimplexWeights,
    b: SimplexWeights,
    cost: CostMatrix,
    params: SinkhornParams,
    init: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Gradient of the regularized transport value in the training marginal.

    This is the mean-centered training-side dual potential: for any direction
    delta with sum(delta) = 0, <u, delta> is the directional derivative.
    """
    return sinkhorn(w, b, cost, params, init).potential_train


_EXACT_LIMIT = 8


def exact_ot_small(
    w: SimplexWeights, b: SimplexWeights, cost: CostMatrix
) -> tuple[np.ndarray, float]:
    """Exact unregularized optimum over the transport polytope (n, m <= 8).

    Solves the flattened linear program with equality marginal constraints;
    used as the independent oracle for the entropic solver.
    """
    if cost.n > _EXACT_LIMIT or cost.m > _EXACT_LIMIT:
        raise OtError(f"exact solver limited to {_EXACT_LIMIT}x{_EXACT_LIMIT}, got {cost.n}x{cost.m}")
    if w.len != cost.n or b.len != cost.m:
        raise OtError("marginal sizes do not match cost shape")
    n, m = cost.n, cost.m
    a_eq = np.zeros((n + m, n * m))
    for i in range(n):
        a_eq[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        a_eq[n + j, j::m] = 1.0
    rhs = np.concatenate([w.values, b.values])
    res = linprog(cost.data.ravel(), A_eq=a_eq, b_eq=rhs, bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"exact transport LP failed: {res.message}")
    plan = res.x.reshape(n, m)
    return plan, float(res.fun)
