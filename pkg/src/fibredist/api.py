"""HTTP JSON API exposing the run pipeline to the web console.

Endpoints mirror the submit-and-poll workflow: POST /api/runs returns a run
id, GET /api/runs/{id}/status reports QUEUED/PROCESSING/DONE/FAILED, and the
result, report and compare endpoints serve the finished artifacts. Every
error carries a machine-readable code plus human-readable text.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field

from .dataset import ProcessInputs, polymer_subset, range_summary
from .learners import ModelKind
from .seeding import DEFAULT_SEED
from .service import (
    DataStore,
    JobRegistry,
    RunRequest,
    artifacts_to_json,
    compare_samples,
    list_capabilities,
)


class RunBody(BaseModel):
    polymer: str
    collector_type: str = ""
    concentration: float
    needle_diameter: float
    rotation_speed: float
    voltage: float
    flow_rate: float
    distance: float
    model: str
    seed: int = DEFAULT_SEED
    include_collector: bool = False


class CompareBody(BaseModel):
    real: list[float] = Field(min_length=1)
    simulated: list[float] = Field(min_length=1)


class ReloadBody(BaseModel):
    path: str


def _error(status: int, code: str, message: str):
    raise HTTPException(status_code=status, detail={"code": code, "message": message})


def create_app(store: DataStore, workers: int = 2, n_jobs: int = 1,
               static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="fibredist", version="0.1.0")
    registry = JobRegistry(store, workers=workers, n_jobs=n_jobs)
    app.state.store = store
    app.state.registry = registry

    @app.exception_handler(HTTPException)
    async def handle_http_error(request, exc):
        detail = exc.detail
        if not isinstance(detail, dict):
            detail = {"code": "error", "message": str(detail)}
        return JSONResponse(status_code=exc.status_code, content={"error": detail})

    @app.get("/api/capabilities")
    def capabilities():
        return list_capabilities(store)

    @app.get("/api/range/{polymer}")
    def polymer_range(polymer: str):
        try:
            table = polymer_subset(store.records, polymer)
        except ValueError as exc:
            _error(404, "unknown_polymer", str(exc))
        return {"polymer": table.polymer, "ranges": range_summary(table).to_dict()}

    @app.post("/api/runs")
    def submit_run(body: RunBody):
        try:
            kind = ModelKind(body.model)
        except ValueError:
            _error(400, "unknown_model",
                   f"unknown model {body.model!r}; available: {[k.value for k in ModelKind]}")
        try:
            inputs = ProcessInputs(
                concentration=body.concentration,
                needle_diameter=body.needle_diameter,
                rotation_speed=body.rotation_speed,
                voltage=body.voltage,
                flow_rate=body.flow_rate,
                distance=body.distance,
                collector_type=body.collector_type,
            )
        except ValueError as exc:
            _error(400, "bad_inputs", str(exc))
        if body.polymer.strip().lower() not in {p.lower() for p in store.polymers()}:
            _error(404, "unknown_polymer",
                   f"unknown polymer {body.polymer!r}; available: {store.polymers()}")
        request = RunRequest(
            polymer=body.polymer, inputs=inputs, model=kind,
            seed=body.seed, include_collector=body.include_collector,
        )
        run_id = registry.submit(request)
        return {"run_id": run_id}

    @app.get("/api/runs/{run_id}/status")
    def run_status(run_id: str):
        status = registry.status(run_id)
        if status is None:
            _error(404, "unknown_run", f"no run with id {run_id!r}")
        return status.to_dict()

    @app.get("/api/runs/{run_id}/result")
    def run_result(run_id: str):
        artifacts = registry.artifacts(run_id)
        if artifacts is None:
            status = registry.status(run_id)
            if status is None:
                _error(404, "unknown_run", f"no run with id {run_id!r}")
            _error(409, "not_finished", f"run {run_id} is {status.state.value}")
        return artifacts_to_json(artifacts, run_id=run_id)

    @app.get("/api/runs/{run_id}/report")
    def run_report(run_id: str):
        data = registry.report_bytes(run_id)
        if data is None:
            _error(404, "unknown_run", f"no finished run with id {run_id!r}")
        return Response(
            content=data,
            media_type="application/zip",
            headers={"Content-Disposition": f'attachment; filename="report_{run_id}.zip"'},
        )

    @app.post("/api/compare")
    def compare(body: CompareBody):
        try:
            return compare_samples(body.real, body.simulated)
        except ValueError as exc:
            _error(400, "bad_samples", str(exc))

    @app.post("/api/admin/reload")
    def reload_dataset(body: ReloadBody):
        try:
            new_store = DataStore.from_path(body.path)
        except Exception as exc:
            _error(400, "reload_failed", str(exc))
        store.reload(new_store.records)
        return {"dataset_fingerprint": store.fingerprint, "n_records": len(store.records)}

    if static_dir and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app
