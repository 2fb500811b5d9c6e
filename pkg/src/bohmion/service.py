"""HTTP service wrapping the simulation lab.

Endpoints:

  GET  /health    -- liveness probe
  GET  /checks    -- names of the available invariant checks
  POST /run       -- run one scenario from a config text, return CSV + summary
  POST /check     -- run invariant suites with a fixed seed
  POST /converge  -- refinement study on dt / grid_spacing / alpha

Config problems map to HTTP 400 with a field-level message; a physics
blow-up (non-convergent solve, particles leaving the grid) is a valid
outcome reported as status = "numerical_failure"; invariant-tolerance
violations come back as status = "invariant_failure" with the offending
names.  File writing is the client's job: responses carry CSV text.
"""

from __future__ import annotations

from typing import Literal

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .checks import available_checks, run_checks
from .config import load_config
from .convergence import PARAMETERS, converge
from .errors import (
    BohmionError,
    ConfigurationError,
    DegenerateEnsembleError,
    DimensionError,
    StructureError,
)
from .scenarios import run_scenario


class RunRequest(BaseModel):
    config_text: str = Field(description="scenario configuration, INI-style text")


class SeriesPayload(BaseModel):
    name: str
    csv: str


class RunResponse(BaseModel):
    status: Literal["ok", "invariant_failure", "numerical_failure"]
    scenario: str
    summary: dict
    series: list[SeriesPayload]
    failures: list[str] = []
    message: str = ""


class CheckRequest(BaseModel):
    seed: int = 1234
    names: list[str] | None = None


class CheckOutcome(BaseModel):
    name: str
    passed: bool
    measured: float | None
    tolerance: float | None
    detail: str = ""


class CheckResponse(BaseModel):
    passed: bool
    results: list[CheckOutcome]


class ConvergeRequest(BaseModel):
    config_text: str
    parameter: Literal["dt", "grid_spacing", "alpha"]
    levels: int = 3


class ConvergeResponse(BaseModel):
    parameter: str
    values: list[float]
    errors: list[float]
    observed_orders: list[float]
    monotone: bool
    detail: str = ""


app = FastAPI(
    title="bohmion lab",
    version=__version__,
    description="Regularized quantum hydrodynamics simulation and verification service",
)

_CONFIG_FAULTS = (ConfigurationError, DimensionError, DegenerateEnsembleError, StructureError)


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.get("/checks")
def list_checks() -> dict:
    return {"checks": available_checks()}


@app.post("/run", response_model=RunResponse)
def run(request: RunRequest) -> RunResponse:
    try:
        cfg = load_config(request.config_text)
    except ConfigurationError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    try:
        result = run_scenario(cfg)
    except _CONFIG_FAULTS as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except BohmionError as exc:
        return RunResponse(
            status="numerical_failure",
            scenario=cfg.scenario,
            summary={"error": str(exc)},
            series=[],
            message=f"{type(exc).__name__}: {exc}",
        )
    return RunResponse(
        status=result.status,
        scenario=result.scenario,
        summary=result.summary,
        series=[SeriesPayload(name=k, csv=v) for k, v in sorted(result.series.items())],
        failures=result.failures,
    )


@app.post("/check", response_model=CheckResponse)
def check(request: CheckRequest) -> CheckResponse:
    results = run_checks(seed=request.seed, names=request.names)
    outcomes = [
        CheckOutcome(
            name=r.name,
            passed=r.passed,
            measured=None if r.measured != r.measured else r.measured,  # NaN -> None
            tolerance=None if r.tolerance != r.tolerance else r.tolerance,
            detail=r.detail,
        )
        for r in results
    ]
    return CheckResponse(passed=all(r.passed for r in results), results=outcomes)


@app.post("/converge", response_model=ConvergeResponse)
def converge_endpoint(request: ConvergeRequest) -> ConvergeResponse:
    if request.parameter not in PARAMETERS:
        raise HTTPException(status_code=400, detail=f"unknown parameter {request.parameter}")
    try:
        cfg = load_config(request.config_text)
        report = converge(cfg, request.parameter, request.levels)
    except _CONFIG_FAULTS as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return ConvergeResponse(**report.as_dict())
