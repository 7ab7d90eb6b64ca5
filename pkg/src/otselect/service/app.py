"""HTTP service wrapping the selection engine.

Every endpoint delegates to the same operation layer the CLI uses, so the
two paths return numerically identical records for identical inputs. Rows
that are not unit-norm are normalized on ingestion (a documented copy);
rows already unit-norm pass through untouched.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import _threads, api, loopsim
from ..baselines import InfeasibleBudgetError
from ..features import FeatureError, FeatureMatrix, ProjectionSpec, RawFeatureMatrix, normalize_rows, project
from ..ot import CostMatrix, OtError, SinkhornParams, sinkhorn
from ..metrics import MetricsError, vendi_score
from . import schemas

_DOMAIN_ERRORS = (FeatureError, OtError, MetricsError, InfeasibleBudgetError,
                  loopsim.LoopConfigError, api.UnknownMethodError, ValueError)


def _as_features(rows: list[list[float]], what: str) -> FeatureMatrix:
    data = np.asarray(rows, dtype=np.float64)
    if data.ndim != 2 or data.size == 0:
        raise FeatureError(f"{what} must be a non-empty 2-D array")
    if not np.all(np.isfinite(data)):
        raise FeatureError(f"{what} contains non-finite entries")
    norms = np.linalg.norm(data, axis=1)
    if np.max(np.abs(norms - 1.0)) > 1e-6:
        return normalize_rows(RawFeatureMatrix(data))
    return FeatureMatrix(data)


def create_app() -> FastAPI:
    _threads.configure_process()
    app = FastAPI(title="otselect", version="0.1.0")

    @app.exception_handler(Exception)
    async def _unhandled(request, exc):  # pragma: no cover - safety net
        raise exc

    def _guard(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except api.UnknownMethodError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except _DOMAIN_ERRORS as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=app.version)

    @app.post("/select", response_model=schemas.SelectResponse)
    def select(req: schemas.SelectRequest) -> schemas.SelectResponse:
        def run():
            train = _as_features(req.train, "train")
            val = _as_features(req.val, "val") if req.val is not None else None
            result = api.select(train, val, req.method, req.rho, seed=req.seed, params=req.params)
            return schemas.SelectResponse(**api.selection_to_dict(result))

        return _guard(run)

    @app.post("/sinkhorn", response_model=schemas.SinkhornResponse)
    def run_sinkhorn(req: schemas.SinkhornRequest) -> schemas.SinkhornResponse:
        def run():
            sol = sinkhorn(
                api.weights_from_list(req.w),
                api.weights_from_list(req.b),
                CostMatrix(np.asarray(req.cost, dtype=np.float64)),
                SinkhornParams(epsilon=req.epsilon, tol=req.tol,
                               max_iter=req.max_iter, log_domain=req.log_domain),
            )
            return schemas.SinkhornResponse(**api.sinkhorn_to_dict(sol))

        return _guard(run)

    @app.post("/vendi", response_model=schemas.VendiResponse)
    def vendi(req: schemas.VendiRequest) -> schemas.VendiResponse:
        def run():
            return schemas.VendiResponse(score=vendi_score(_as_features(req.features, "features")))

        return _guard(run)

    @app.post("/project", response_model=schemas.ProjectResponse)
    def project_features(req: schemas.ProjectRequest) -> schemas.ProjectResponse:
        def run():
            raw = RawFeatureMatrix(np.asarray(req.data, dtype=np.float64))
            spec = ProjectionSpec(d_in=raw.d_in, d_out=req.d_out, sparsity=req.sparsity, seed=req.seed)
            out = project(raw, spec)
            return schemas.ProjectResponse(n=out.n, d=out.d, data=[[float(x) for x in row] for row in out.data])

        return _guard(run)

    @app.post("/score", response_model=schemas.ScoreResponse)
    def score(req: schemas.ScoreRequest) -> schemas.ScoreResponse:
        def run():
            report = api.score_subset(
                _as_features(req.sub, "sub"), _as_features(req.val, "val"),
                method=req.method, epsilon=req.epsilon, tol=req.tol,
            )
            return schemas.ScoreResponse(**api.report_to_dict(report))

        return _guard(run)

    @app.post("/simulate")
    def simulate(req: schemas.SimulateRequest) -> dict:
        def run():
            report = loopsim.run_loop(loopsim.config_from_dict(req.config))
            return loopsim.report_to_dict(report)

        return _guard(run)

    return app
