"""HTTP front end over the sweep runners.

Each endpoint's request body is exactly the JSON config document the CLI
accepts; results come back as a table (columns, rows, and the canonical
CSV rendering) or a fit report.  Semantic errors map to 422 with a
machine-readable code: ``config_error`` for invalid inputs,
``capacity_error`` for computations beyond the configured work bounds.

Run standalone with ``uvicorn apdlab.service:app``.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import __version__, dataio, experiments
from .errors import CapacityError
from .schemas import (
    CorrectionTableRequest,
    FitReportModel,
    FitRequest,
    HealthResponse,
    SimulateRequest,
    TableResponse,
    TmdRequest,
)


def _run(func, request):
    try:
        return func(request)
    except CapacityError as exc:
        raise HTTPException(
            status_code=422, detail={"code": "capacity_error", "message": str(exc)}
        ) from exc
    except (ValueError, ZeroDivisionError) as exc:
        raise HTTPException(
            status_code=422, detail={"code": "config_error", "message": str(exc)}
        ) from exc


def _table_response(table: experiments.Table) -> TableResponse:
    return TableResponse(columns=list(table.columns), rows=table.rows, csv=table.to_csv())


def create_app() -> FastAPI:
    app = FastAPI(title="apdlab", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/simulate", response_model=TableResponse)
    def simulate(request: SimulateRequest) -> TableResponse:
        return _table_response(_run(experiments.run_simulate, request))

    @app.post("/tmd", response_model=TableResponse)
    def tmd(request: TmdRequest) -> TableResponse:
        return _table_response(_run(experiments.run_tmd, request))

    @app.post("/fit", response_model=FitReportModel)
    def fit(request: FitRequest) -> FitReportModel:
        result = _run(experiments.run_fit, request)
        return FitReportModel(**dataio.fit_report_dict(result))

    @app.post("/correction-table", response_model=TableResponse)
    def correction(request: CorrectionTableRequest) -> TableResponse:
        return _table_response(_run(experiments.run_correction_table, request))

    return app


app = create_app()
