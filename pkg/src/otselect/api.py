"""Single dispatch layer shared by the CLI, the HTTP service, and the simulator.

Every front end funnels through these functions so that the same inputs take
the same numeric path no matter how they arrive.
"""

from __future__ import annotations

import numpy as np

from . import baselines, metrics, selector
from .features import FeatureMatrix
from .ot import SinkhornParams, SimplexWeights
from .selector import EvoParams, SelectionResult

METHODS = ("evoselect", "random", "attribution", "diversity", "attrdiv", "tsds")


class UnknownMethodError(ValueError):
    pass


def _evo_params(rho: float, params: dict) -> EvoParams:
    sink = SinkhornParams(
        epsilon=float(params.get("epsilon", 0.5)),
        tol=float(params.get("tol", 1e-6)),
        max_iter=int(params.get("max_iter", 10000)),
        log_domain=bool(params.get("log_domain", True)),
    )
    return EvoParams(
        rho=rho,
        steps=int(params.get("steps", 10)),
        lr=float(params.get("lr", 0.1)),
        epsilon=sink.epsilon,
        sinkhorn=sink,
        std_guard=float(params.get("std_guard", 1e-12)),
    )


def select(
    train: FeatureMatrix,
    val: FeatureMatrix | None,
    method: str,
    rho: float,
    seed: int = 0,
    params: dict | None = None,
) -> SelectionResult:
    """Run one of the six selectors on a candidate pool."""
    params = dict(params or {})
    if method not in METHODS:
        raise UnknownMethodError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    if method != "random" and val is None:
        raise ValueError(f"method {method!r} requires validation features")
    if method == "evoselect":
        result = selector.evoselect(train, val, _evo_params(rho, params))
        result.seed = seed
        return result
    if method == "random":
        return baselines.select_random(train.n, rho, seed)
    if method == "attribution":
        return baselines.select_attribution(train, val, rho)
    if method == "diversity":
        return baselines.select_diversity(
            train, rho, float(params.get("cluster_ratio", 0.1)), seed
        )
    if method == "attrdiv":
        return baselines.select_attr_div(
            train, val, rho, float(params.get("cluster_ratio", 0.1)), seed
        )
    tsds = baselines.TsdsParams(
        max_k=int(params.get("max_k", 5000)),
        kde_k=int(params.get("kde_k", 1000)),
        sigma=float(params.get("sigma", 0.75)),
        alpha=float(params.get("alpha", 0.5)),
        c_scale=float(params.get("c_scale", 5.0)),
        seed=seed,
    )
    return baselines.select_tsds(train, val, rho, tsds)


def score_subset(
    sub: FeatureMatrix,
    val: FeatureMatrix,
    method: str = "subset",
    epsilon: float = 0.5,
    tol: float = 1e-6,
) -> metrics.SubsetReport:
    """Diagnostics for an already-selected subset against validation features."""
    scores = baselines.AttributionScores(sub.data @ val.data.mean(axis=0))
    return metrics.SubsetReport(
        method=method,
        k=sub.n,
        vendi=metrics.vendi_score(sub),
        mean_attr=float(scores.scores.mean()),
        ot_to_val=metrics.subset_ot(sub, val, SinkhornParams(epsilon=epsilon, tol=tol)),
        params={"epsilon": epsilon, "tol": tol},
    )


def selection_to_dict(result: SelectionResult) -> dict:
    """JSON-ready mapping with a fixed key order."""
    return {
        "k": result.k,
        "selected": [int(i) for i in result.selected],
        "weights": [float(x) for x in result.final_weights.values],
        "trace": [
            {
                "step": rec.step,
                "ot_value": rec.ot_value,
                "div_energy": rec.div_energy,
                "entropy": rec.entropy,
                "sinkhorn_violation": rec.sinkhorn_violation,
            }
            for rec in result.trace
        ],
        "params": result.params,
        "method": result.method,
        "seed": result.seed,
    }


def report_to_dict(report: metrics.SubsetReport) -> dict:
    return {
        "method": report.method,
        "k": report.k,
        "vendi": report.vendi,
        "mean_attr": report.mean_attr,
        "ot_to_val": report.ot_to_val,
        "params": report.params,
    }


def sinkhorn_to_dict(sol) -> dict:
    return {
        "plan": [[float(x) for x in row] for row in sol.plan],
        "potential_train": [float(x) for x in sol.potential_train],
        "potential_val": [float(x) for x in sol.potential_val],
        "value": sol.value,
        "transport_cost": sol.transport_cost,
        "iterations": sol.iterations,
        "marginal_violation": sol.marginal_violation,
    }


def weights_from_list(values: list[float]) -> SimplexWeights:
    return SimplexWeights(np.asarray(values, dtype=np.float64))
