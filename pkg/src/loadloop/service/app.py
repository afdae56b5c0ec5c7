"""HTTP service: session lifecycle, pipeline control, ledger views, guidance,
deployment, chat bridge, and a resumable server-sent event stream."""

from __future__ import annotations

import json
import time
from typing import Iterator, Optional

from fastapi import FastAPI, Header, Query, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse

from .. import dataset as ds
from ..deployment import DeploymentError, PostprocessRule
from ..features import FeatureError
from ..metrics import MetricError, MetricSpec
from ..models import ModelError
from ..optimizer import (
    GuidanceDirective,
    GuidanceError,
    best_so_far,
    hyperparameter_importance,
    summarize_trials,
)
from ..optimizer.analysis import AnalysisError
from ..agents.pipeline import OptimizeSettings, PipelineError
from . import schemas
from .sessions import InvalidStage, SessionManager, UnknownSession

DOMAIN_ERRORS = (
    ds.DatasetError,
    MetricError,
    FeatureError,
    ModelError,
    GuidanceError,
    DeploymentError,
    AnalysisError,
    PipelineError,
    ValueError,
)


def create_app(data_dir: str = "loadloop_data", backend_factory=None) -> FastAPI:
    app = FastAPI(title="loadloop", version="0.1.0")
    manager = SessionManager(data_dir, backend_factory)
    app.state.manager = manager

    @app.exception_handler(UnknownSession)
    async def _unknown(request: Request, exc: UnknownSession):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(InvalidStage)
    async def _stage(request: Request, exc: InvalidStage):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    for err in DOMAIN_ERRORS:

        @app.exception_handler(err)
        async def _domain(request: Request, exc: Exception):
            return JSONResponse(status_code=422, content={"detail": str(exc)})

    # ------------------------------------------------------------- lifecycle

    @app.post("/sessions", response_model=schemas.SessionCreated)
    def create_session():
        session = manager.create()
        return schemas.SessionCreated(session_id=session.session_id)

    @app.get("/sessions/{session_id}", response_model=schemas.SessionState)
    def session_state(session_id: str):
        session = manager.get(session_id)
        return schemas.SessionState(
            session_id=session.session_id,
            stage=session.stage,
            detail=session.pipeline.state_dict(),
        )

    # ------------------------------------------------------------ preparation

    @app.post("/sessions/{session_id}/dataset", response_model=schemas.SemanticsProposal)
    async def upload_dataset(session_id: str, request: Request):
        session = manager.get(session_id)
        session.require_stage("created", "preparing")
        body = await request.body()
        with session.lock:
            proposal = session.pipeline.ingest_dataset_text(body.decode("utf-8"))
        return schemas.SemanticsProposal(assignments=proposal.to_dict())

    @app.put("/sessions/{session_id}/semantics", response_model=schemas.SemanticsProposal)
    def put_semantics(session_id: str, update: schemas.SemanticsUpdate):
        session = manager.get(session_id)
        session.require_stage("preparing")
        with session.lock:
            sem = session.pipeline.confirm_semantics(update.assignments)
        return schemas.SemanticsProposal(assignments=sem.to_dict(), proposed=False)

    @app.put("/sessions/{session_id}/task")
    def put_task(session_id: str, update: schemas.TaskUpdate):
        session = manager.get(session_id)
        session.require_stage("preparing")
        with session.lock:
            task = session.pipeline.set_task(update.interval_delta, update.horizon)
        return task.to_dict()

    @app.post("/sessions/{session_id}/clean", response_model=schemas.CleanResult)
    def clean(session_id: str):
        session = manager.get(session_id)
        session.require_stage("preparing")
        with session.lock:
            report, summary = session.pipeline.run_cleaning()
        return schemas.CleanResult(
            cleaning_report=report.to_dict(), data_summary=summary.to_dict()
        )

    @app.put("/sessions/{session_id}/metric")
    def put_metric(session_id: str, update: schemas.MetricUpdate):
        session = manager.get(session_id)
        session.require_stage("preparing")
        payload = update.model_dump(exclude_none=True)
        spec = MetricSpec.from_dict(payload)
        spec.validate()
        with session.lock:
            session.pipeline.set_metric(spec)
        return spec.to_dict()

    # ----------------------------------------------------------- optimization

    @app.post("/sessions/{session_id}/optimize")
    def optimize(session_id: str, request_model: schemas.OptimizeRequest):
        session = manager.get(session_id)
        session.require_stage("preparing")
        settings = OptimizeSettings(
            max_trials=request_model.max_trials,
            init_samples=request_model.init_samples,
            batch_size=request_model.batch_size,
            epsilon=request_model.epsilon,
            seed=request_model.seed,
        )
        if request_model.split_ratios:
            session.pipeline.config.split_ratios = tuple(request_model.split_ratios)
        # fail fast on unprepared sessions before spawning the worker
        session.pipeline._require_prepared()
        session.start_optimization(settings)
        return {"status": "optimizing", "settings": settings.to_dict()}

    @app.post("/sessions/{session_id}/guidance", response_model=schemas.GuidanceResponse)
    def guidance(session_id: str, request_model: schemas.GuidanceRequest):
        session = manager.get(session_id)
        session.require_stage("optimizing")
        queued = []
        clarification = None
        if request_model.directives:
            directives = [GuidanceDirective.from_dict(d) for d in request_model.directives]
            session.pipeline.enqueue_guidance_directives(directives)
            queued = [d.to_dict() for d in directives]
        elif request_model.text:
            directives, clarification = session.pipeline.enqueue_guidance_text(request_model.text)
            queued = [d.to_dict() for d in directives]
        return schemas.GuidanceResponse(queued=queued, clarification=clarification)

    @app.get("/sessions/{session_id}/trials")
    def trials(session_id: str):
        session = manager.get(session_id)
        if session.pipeline.opt_run is not None:
            records = [r.to_dict() for r in session.pipeline.opt_run.ledger]
        else:
            records = session.pipeline.run.read_jsonl("trials.jsonl")
        return {"trials": records}

    @app.get("/sessions/{session_id}/summary", response_model=schemas.SummaryResponse)
    def summary(session_id: str):
        session = manager.get(session_id)
        run = session.pipeline.opt_run
        if run is None:
            raise InvalidStage("no optimization has run in this session")
        batch = run.batch_size
        s = summarize_trials(run.ledger, batch)
        curve = best_so_far(run.ledger) if any(not r.failed for r in run.ledger) else []
        return schemas.SummaryResponse(summary=s.to_dict(), rendered=s.render_text(), best_so_far=curve)

    @app.get("/sessions/{session_id}/importance/{model_type}", response_model=schemas.ImportanceResponse)
    def importance(session_id: str, model_type: str):
        session = manager.get(session_id)
        run = session.pipeline.opt_run
        if run is None:
            raise InvalidStage("no optimization has run in this session")
        ranked = hyperparameter_importance(run.ledger, model_type, run.space)
        return schemas.ImportanceResponse(
            model_type=model_type, importances=[[n, v] for n, v in ranked]
        )

    @app.get("/sessions/{session_id}/best", response_model=schemas.BestResponse)
    def best(session_id: str):
        session = manager.get(session_id)
        record = session.pipeline.best_record
        if record is None:
            raise InvalidStage("no winning configuration yet")
        report = session.pipeline.best_train_report or {}
        return schemas.BestResponse(
            config=record["config"],
            loss=record["loss"],
            trial_index=record["trial_index"],
            train_curve=report.get("train_curve", []),
            val_curve=report.get("val_curve", []),
        )

    # ------------------------------------------------------------- deployment

    @app.post("/sessions/{session_id}/deploy", response_model=schemas.ForecastModel)
    def deploy(session_id: str, request_model: schemas.DeployRequest):
        session = manager.get(session_id)
        session.require_stage("deploying", "done")
        with session.lock:
            fc = session.pipeline.deploy(request_model.origin_index)
            if session.stage != "done":
                session.pipeline.finish()
        index = len(session.pipeline.forecasts) - 1
        return schemas.ForecastModel(index=index, **fc.to_dict())

    @app.post("/sessions/{session_id}/postprocess", response_model=schemas.ForecastModel)
    def postprocess(session_id: str, request_model: schemas.PostprocessRequest):
        session = manager.get(session_id)
        session.require_stage("deploying", "done")
        rule = PostprocessRule.from_dict(request_model.model_dump(exclude_none=True))
        with session.lock:
            fc = session.pipeline.postprocess(rule)
        index = len(session.pipeline.forecasts) - 1
        return schemas.ForecastModel(index=index, **fc.to_dict())

    @app.get("/sessions/{session_id}/forecasts/{index}.csv", response_class=PlainTextResponse)
    def forecast_csv(session_id: str, index: int):
        session = manager.get(session_id)
        path = session.pipeline.run.file(f"forecasts/forecast_{index:03d}.csv")
        try:
            with open(path) as fh:
                return PlainTextResponse(fh.read(), media_type="text/csv")
        except FileNotFoundError:
            return JSONResponse(status_code=404, content={"detail": f"no forecast {index}"})

    # ------------------------------------------------------------------ events

    @app.get("/sessions/{session_id}/events")
    def events(
        session_id: str,
        since: Optional[int] = Query(default=None),
        follow: bool = Query(default=False),
        timeout: float = Query(default=10.0),
        last_event_id: Optional[str] = Header(default=None, alias="Last-Event-ID"),
    ):
        session = manager.get(session_id)
        start_after: Optional[int] = None
        if last_event_id is not None:
            start_after = int(last_event_id)
        if since is not None:
            start_after = since - 1

        def sse() -> Iterator[str]:
            cursor = start_after
            deadline = time.monotonic() + timeout
            while True:
                batch = session.events_since(cursor)
                for record in batch:
                    cursor = record["seq"]
                    yield f"id: {record['seq']}\nevent: {record['kind']}\ndata: {json.dumps(record, sort_keys=True)}\n\n"
                if not follow:
                    break
                if time.monotonic() >= deadline:
                    break
                with session.event_cond:
                    session.event_cond.wait(timeout=0.2)

        return StreamingResponse(sse(), media_type="text/event-stream")

    # -------------------------------------------------------------------- chat

    @app.get("/sessions/{session_id}/chat", response_model=schemas.ChatTranscript)
    def chat_transcript(session_id: str):
        session = manager.get(session_id)
        return schemas.ChatTranscript(messages=session.pipeline.chat_transcript())

    @app.post("/sessions/{session_id}/chat", response_model=schemas.ChatTranscript)
    def chat_post(session_id: str, message: schemas.ChatMessage):
        session = manager.get(session_id)
        with session.lock:
            transcript = session.pipeline.user_message(message.text)
        return schemas.ChatTranscript(messages=transcript)

    @app.get("/sessions/{session_id}/tokens", response_model=schemas.TokensResponse)
    def tokens(session_id: str):
        session = manager.get(session_id)
        return schemas.TokensResponse(report=session.pipeline.tokens.report())

    return app
