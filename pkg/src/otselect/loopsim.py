"""Seeded simulator of the candidate-generation / selection loop.

Candidates are drawn from a mixture of tight directional components on the
unit sphere. Two knobs reproduce the failure modes the selection stage is
meant to counter: ``drift`` rotates the generating mixture away from the
(fixed) validation distribution a little more each round, and ``redundancy``
resamples a fraction of each round's candidates near the previous round's.
Model training is replaced by metric evaluation of the accumulated pool.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import api, metrics
from .features import FeatureMatrix
from .ot import SinkhornParams

# Substream tags for the per-config RNG family.
_STREAM_VAL = 1
_STREAM_SEEDPOOL = 2
_STREAM_PLANE = 3
_STREAM_MIXTURE = 4
_STREAM_CAND_BASE = 1000

_REDUNDANT_NOISE = 0.05


class LoopConfigError(ValueError):
    pass


@dataclass
class MixtureComponent:
    mean: np.ndarray
    concentration: float

    def __post_init__(self) -> None:
        self.mean = np.ascontiguousarray(self.mean, dtype=np.float64)
        norm = float(np.linalg.norm(self.mean))
        if self.mean.ndim != 1 or norm == 0.0 or not np.isfinite(norm):
            raise LoopConfigError("component mean must be a nonzero finite vector")
        self.mean = self.mean / norm
        if not self.concentration > 0:
            raise LoopConfigError("component concentration must be > 0")


@dataclass
class LoopConfig:
    d: int
    m_val: int
    n_cand: int
    iterations: int
    mixture: list[MixtureComponent]
    drift: float = 0.0
    redundancy: float = 0.0
    rho: float = 0.5
    method: str = "evoselect"
    method_params: dict = field(default_factory=dict)
    seed: int = 0
    n_seed: int = 32
    metric_epsilon: float = 0.5

    def __post_init__(self) -> None:
        if self.d < 2:
            raise LoopConfigError("d must be >= 2")
        if self.m_val < 1 or self.n_cand < 1:
            raise LoopConfigError("m_val and n_cand must be >= 1")
        if self.iterations < 1:
            raise LoopConfigError("iterations must be >= 1")
        if not self.mixture:
            raise LoopConfigError("mixture must have at least one component")
        if any(c.mean.size != self.d for c in self.mixture):
            raise LoopConfigError("component mean dimension must equal d")
        if not 0.0 <= self.redundancy <= 1.0:
            raise LoopConfigError("redundancy must be in [0, 1]")
        if self.drift < 0:
            raise LoopConfigError("drift must be >= 0")
        if not 0.0 < self.rho <= 1.0:
            raise LoopConfigError("rho must be in (0, 1]")
        if self.method not in api.METHODS:
            raise LoopConfigError(f"unknown method {self.method!r}")
        if self.n_seed < 0:
            raise LoopConfigError("n_seed must be >= 0")


@dataclass
class LoopRecord:
    iteration: int
    method: str
    ot_to_val: float
    vendi: float
    mean_attr: float
    selected_count: int


@dataclass
class ComparisonRecord:
    method: str
    k: int
    mean_attr: float
    vendi: float
    ot_to_val: float


@dataclass
class LoopReport:
    records: list[LoopRecord]
    comparison: list[ComparisonRecord]
    pool_size: int


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


def _unit(rows: np.ndarray) -> np.ndarray:
    return rows / np.linalg.norm(rows, axis=1)[:, None]


def _sample_mixture(
    rng: np.random.Generator, count: int, means: np.ndarray, concentrations: np.ndarray
) -> np.ndarray:
    comp = rng.integers(means.shape[0], size=count)
    noise = rng.standard_normal((count, means.shape[1]))
    rows = means[comp] + noise / np.sqrt(concentrations[comp])[:, None]
    return _unit(rows)


def _rotation_plane(cfg: LoopConfig) -> tuple[np.ndarray, np.ndarray]:
    rng = _rng(cfg.seed, _STREAM_PLANE)
    p = rng.standard_normal(cfg.d)
    p /= np.linalg.norm(p)
    q = rng.standard_normal(cfg.d)
    q -= (q @ p) * p
    q /= np.linalg.norm(q)
    return p, q


def _rotate(vecs: np.ndarray, p: np.ndarray, q: np.ndarray, angle: float) -> np.ndarray:
    a = vecs @ p
    b = vecs @ q
    cos, sin = np.cos(angle), np.sin(angle)
    return (
        vecs
        + (cos - 1.0) * (a[:, None] * p[None, :] + b[:, None] * q[None, :])
        + sin * (a[:, None] * q[None, :] - b[:, None] * p[None, :])
    )


def generate_candidates(
    cfg: LoopConfig, iteration: int, prev: FeatureMatrix | None
) -> FeatureMatrix:
    """Candidate pool for one round, deterministic given (cfg.seed, iteration).

    Fresh draws come from the mixture with component means rotated by
    drift * iteration; a ``redundancy`` fraction instead perturbs rows of the
    previous round's pool. The first round never has a previous pool, so its
    redundancy is zero.
    """
    if iteration < 1:
        raise LoopConfigError("iteration must be >= 1")
    rng = _rng(cfg.seed, _STREAM_CAND_BASE + iteration)
    means = np.vstack([c.mean for c in cfg.mixture])
    concentrations = np.array([c.concentration for c in cfg.mixture])
    p, q = _rotation_plane(cfg)
    drifted = _unit(_rotate(means, p, q, cfg.drift * iteration))

    redundancy = cfg.redundancy if prev is not None else 0.0
    # All streams are drawn unconditionally so positions never depend on the
    # coin flips.
    flips = rng.random(cfg.n_cand)
    fresh = _sample_mixture(rng, cfg.n_cand, drifted, concentrations)
    prev_n = prev.n if prev is not None else 1
    picks = rng.integers(prev_n, size=cfg.n_cand)
    perturb = rng.standard_normal((cfg.n_cand, cfg.d))
    if prev is not None:
        redone = _unit(prev.data[picks] + _REDUNDANT_NOISE * perturb)
    else:
        redone = fresh
    rows = np.where((flips < redundancy)[:, None], redone, fresh)
    return FeatureMatrix(rows)


def _pool_metrics(
    pool: np.ndarray, val: FeatureMatrix, epsilon: float
) -> tuple[float, float, float]:
    fm = FeatureMatrix(pool)
    ot_to_val = metrics.subset_ot(fm, val, SinkhornParams(epsilon=epsilon))
    vendi = metrics.vendi_score(fm)
    mean_attr = float((pool @ val.data.mean(axis=0)).mean())
    return ot_to_val, vendi, mean_attr


def _selector_seed(cfg: LoopConfig, iteration: int) -> int:
    return (cfg.seed * 1_000_003 + iteration) % (2**63)


def run_loop(cfg: LoopConfig) -> LoopReport:
    """Iterate generation and selection, scoring the accumulated pool."""
    val = FeatureMatrix(
        _sample_mixture(
            _rng(cfg.seed, _STREAM_VAL),
            cfg.m_val,
            np.vstack([c.mean for c in cfg.mixture]),
            np.array([c.concentration for c in cfg.mixture]),
        )
    )
    pool_rows = []
    if cfg.n_seed:
        pool_rows.append(
            _sample_mixture(
                _rng(cfg.seed, _STREAM_SEEDPOOL),
                cfg.n_seed,
                np.vstack([c.mean for c in cfg.mixture]),
                np.array([c.concentration for c in cfg.mixture]),
            )
        )

    records: list[LoopRecord] = []
    comparison: list[ComparisonRecord] = []
    prev: FeatureMatrix | None = None
    for t in range(1, cfg.iterations + 1):
        cand = generate_candidates(cfg, t, prev)
        result = api.select(
            cand, val, cfg.method, cfg.rho,
            seed=_selector_seed(cfg, t), params=cfg.method_params,
        )
        pool_rows.append(cand.data[result.selected])
        pool = np.vstack(pool_rows)
        ot_to_val, vendi, mean_attr = _pool_metrics(pool, val, cfg.metric_epsilon)
        records.append(
            LoopRecord(
                iteration=t,
                method=cfg.method,
                ot_to_val=ot_to_val,
                vendi=vendi,
                mean_attr=mean_attr,
                selected_count=len(result.selected),
            )
        )
        if t == 1:
            comparison = _compare_methods(cfg, cand, val)
        prev = cand
    return LoopReport(records=records, comparison=comparison, pool_size=int(sum(len(r) for r in pool_rows)))


def _compare_methods(cfg: LoopConfig, cand: FeatureMatrix, val: FeatureMatrix) -> list[ComparisonRecord]:
    """Per-method subset diagnostics on the first round's candidates."""
    from .baselines import InfeasibleBudgetError, attribution_scores

    scores = attribution_scores(cand, val)
    out = []
    for method in api.METHODS:
        try:
            result = api.select(
                cand, val, method, cfg.rho,
                seed=_selector_seed(cfg, 1), params=cfg.method_params if method == cfg.method else {},
            )
        except InfeasibleBudgetError:
            # A pruning method can be infeasible at large rho; skip its row.
            continue
        sub = FeatureMatrix(cand.data[result.selected])
        out.append(
            ComparisonRecord(
                method=method,
                k=result.k,
                mean_attr=metrics.mean_attribution(result.selected, scores),
                vendi=metrics.vendi_score(sub),
                ot_to_val=metrics.subset_ot(sub, val, SinkhornParams(epsilon=cfg.metric_epsilon)),
            )
        )
    return out


def report_to_dict(report: LoopReport) -> dict:
    return {
        "records": [
            {
                "iteration": r.iteration,
                "method": r.method,
                "ot_to_val": r.ot_to_val,
                "vendi": r.vendi,
                "mean_attr": r.mean_attr,
                "selected_count": r.selected_count,
            }
            for r in report.records
        ],
        "comparison": [
            {
                "method": c.method,
                "k": c.k,
                "mean_attr": c.mean_attr,
                "vendi": c.vendi,
                "ot_to_val": c.ot_to_val,
            }
            for c in report.comparison
        ],
        "pool_size": report.pool_size,
    }


def report_rows(report: LoopReport) -> list[dict]:
    """Flat per-iteration rows for CSV export."""
    return [
        {
            "iteration": r.iteration,
            "method": r.method,
            "ot_to_val": r.ot_to_val,
            "vendi": r.vendi,
            "mean_attr": r.mean_attr,
            "selected_count": r.selected_count,
        }
        for r in report.records
    ]


def seeded_means(seed: int, count: int, d: int) -> np.ndarray:
    """Unit component directions derived from a seed, for config shorthand."""
    rng = _rng(seed, _STREAM_MIXTURE)
    return _unit(rng.standard_normal((count, d)))


_SCALAR_FIELDS = {
    "d": int,
    "m_val": int,
    "n_cand": int,
    "iterations": int,
    "drift": float,
    "redundancy": float,
    "rho": float,
    "method": str,
    "seed": int,
    "n_seed": int,
    "metric_epsilon": float,
}


def _parse_scalar(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def config_from_dict(raw: dict) -> LoopConfig:
    """Build a LoopConfig from parsed config data.

    ``mixture`` entries are either mappings with explicit ``mean`` and
    ``concentration``, or bare concentrations, in which case the mean
    directions are derived from the config seed.
    """
    data = dict(raw)
    mixture_spec = data.pop("mixture", None)
    if mixture_spec is None:
        raise LoopConfigError("config is missing 'mixture'")
    kwargs = {}
    for key, caster in _SCALAR_FIELDS.items():
        if key in data:
            kwargs[key] = caster(data.pop(key))
    method_params = data.pop("method_params", {})
    if not isinstance(method_params, dict):
        raise LoopConfigError("method_params must be a mapping")
    unknown = set(data)
    if unknown:
        raise LoopConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
    if "d" not in kwargs:
        raise LoopConfigError("config is missing 'd'")

    seed = int(kwargs.get("seed", 0))
    d = kwargs["d"]
    components: list[MixtureComponent] = []
    bare = [c for c in mixture_spec if not isinstance(c, dict)]
    auto_means = seeded_means(seed, len(bare), d) if bare else None
    auto_i = 0
    for entry in mixture_spec:
        if isinstance(entry, dict):
            if "mean" not in entry or "concentration" not in entry:
                raise LoopConfigError("mixture mapping entries need 'mean' and 'concentration'")
            components.append(MixtureComponent(np.asarray(entry["mean"], dtype=np.float64),
                                               float(entry["concentration"])))
        else:
            components.append(MixtureComponent(auto_means[auto_i], float(entry)))
            auto_i += 1
    return LoopConfig(mixture=components, method_params=dict(method_params), **kwargs)


def _parse_keyvalue(text: str) -> dict:
    raw: dict = {}
    method_params: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise LoopConfigError(f"line {lineno}: expected 'key = value': {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key == "mixture":
            raw["mixture"] = [_parse_scalar(v) for v in value.split(",") if v.strip()]
        elif key.startswith("method."):
            method_params[key[len("method."):]] = _parse_scalar(value)
        else:
            raw[key] = _parse_scalar(value)
    if method_params:
        raw["method_params"] = method_params
    return raw


def load_config(path: str) -> LoopConfig:
    """Parse a JSON or key=value config file into a LoopConfig."""
    import json

    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise LoopConfigError(f"{path}: invalid JSON: {exc}") from exc
    else:
        raw = _parse_keyvalue(text)
    return config_from_dict(raw)
