"""FastAPI service exposing the experiment commands."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from ..io import TOOL_VERSION, ParseError
from ..model import ContractViolation
from . import ops, schemas

app = FastAPI(
    title="iir",
    version=TOOL_VERSION,
    description=(
        "Incremental iterative regularization for least squares: training, "
        "learning curves, rate estimation and numerical verification."
    ),
)


def _guard(fn, req) -> schemas.Envelope:
    try:
        env = fn(req)
    except (ContractViolation, ParseError, FileNotFoundError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return schemas.Envelope(**env.to_dict())


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": TOOL_VERSION}


@app.post("/fit", response_model=schemas.Envelope)
def fit(req: schemas.FitRequest) -> schemas.Envelope:
    return _guard(ops.run_fit, req)


@app.post("/curve", response_model=schemas.Envelope)
def curve(req: schemas.CurveRequest) -> schemas.Envelope:
    return _guard(ops.run_curve, req)


@app.post("/rates", response_model=schemas.Envelope)
def rates(req: schemas.RatesRequest) -> schemas.Envelope:
    return _guard(ops.run_rates, req)


@app.post("/verify", response_model=schemas.Envelope)
def verify(req: schemas.VerifyRequest) -> schemas.Envelope:
    return _guard(ops.run_verify, req)


@app.post("/bench", response_model=schemas.Envelope)
def bench(req: schemas.BenchRequest) -> schemas.Envelope:
    return _guard(ops.run_bench, req)


@app.post("/synth", response_model=schemas.Envelope)
def synth(req: schemas.SynthRequest) -> schemas.Envelope:
    return _guard(ops.run_synth, req)
