"""HTTP service exposing sessions, annotation, exports, generation, reports.

All endpoints live under /v1 and return errors as {code, message, details}.
Auth is two bearer-token classes: the student token covers session
endpoints, the staff token covers everything else; with no tokens
configured the service runs open (development mode).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any

import uvicorn
from fastapi import Depends, FastAPI, Header, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import genai
from .annotations import UnknownFeedbackError, annotation_queue, record_annotation
from .harness import Harness, HarnessConfig
from .models import DomainError, PrefeedbackSubmission, ProblemPack
from .metrics import aggregate, multi_attribute_kappa
from .pipeline import (
    DEFAULT_MAX_WORDS,
    DEFAULT_MIN_WORDS,
    PipelineError,
    build_finetune_dataset,
    export_records,
    filter_by_length,
)
from .store import Store
from .taskflow import (
    EmptyFeedbackError,
    FlowError,
    OutOfOrderError,
    SessionCompleteError,
    TaskFlow,
    UnknownSessionError,
)


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    store_path: str = "flipfeed.jsonl"
    export_dir: str = "exports"
    endpoints_path: str | None = None
    student_token: str | None = None
    staff_token: str | None = None
    wall_ms: int = 5000
    max_output_bytes: int = 65536
    workers: int = 0  # harness pool size; 0 = CPU count

    def harness_config(self) -> HarnessConfig:
        return HarnessConfig(
            wall_ms=self.wall_ms,
            max_output_bytes=self.max_output_bytes,
            workers=self.workers,
        )


@dataclass
class ServiceContext:
    store: Store
    pack: ProblemPack
    harness: Harness
    flow: TaskFlow
    config: ServiceConfig = field(default_factory=ServiceConfig)


def pack_digest(pack: ProblemPack) -> str:
    canonical = json.dumps(pack.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class SessionRequest(BaseModel):
    student_id: str


class PrefeedbackRequest(BaseModel):
    input: str
    claimed_buggy_output: str
    claimed_correct_output: str


class FeedbackRequest(BaseModel):
    text: str


class AnnotationRequest(BaseModel):
    annotator_id: str
    correct: int
    gives_fix: int
    mentions_variables: int
    mentions_lines: int
    overwrite: bool = False


class ExportRequest(BaseModel):
    min_words: int = DEFAULT_MIN_WORDS
    max_words: int = DEFAULT_MAX_WORDS
    out_path: str | None = None


class GenerateRequest(BaseModel):
    endpoints: list[str] | None = None
    strategies: list[str] = ["basic", "engineered"]
    dry_run: bool = False
    rerun: bool = False


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, details: Any = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.details = details


def _error_response(status: int, code: str, message: str, details: Any = None):
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "details": details},
    )


def create_app(ctx: ServiceContext) -> FastAPI:
    app = FastAPI(title="flipfeed", version="1")
    config = ctx.config

    # The web frontend may be served from a different origin than the API;
    # auth is bearer-token only (no cookies), so a wildcard is safe here.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def _check_token(authorization: str | None, allowed: tuple[str | None, ...]) -> None:
        tokens = [t for t in allowed if t]
        if not tokens:
            return  # open mode
        if authorization is None or not authorization.startswith("Bearer "):
            raise ApiError(401, "unauthorized", "missing bearer token")
        if authorization[len("Bearer ") :] not in tokens:
            raise ApiError(403, "forbidden", "token not valid for this endpoint")

    def student_auth(authorization: str | None = Header(default=None)) -> None:
        _check_token(authorization, (config.student_token, config.staff_token))

    def staff_auth(authorization: str | None = Header(default=None)) -> None:
        _check_token(authorization, (config.staff_token,))

    # -- error mapping -------------------------------------------------

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return _error_response(exc.status, exc.code, exc.message, exc.details)

    @app.exception_handler(FlowError)
    async def _flow_error(request: Request, exc: FlowError):
        status = {
            UnknownSessionError: 404,
            SessionCompleteError: 409,
            OutOfOrderError: 409,
            EmptyFeedbackError: 400,
        }.get(type(exc), 400)
        return _error_response(status, exc.code, str(exc))

    @app.exception_handler(UnknownFeedbackError)
    async def _unknown_feedback(request: Request, exc: UnknownFeedbackError):
        return _error_response(404, "unknown_feedback", str(exc))

    @app.exception_handler(DomainError)
    async def _domain_error(request: Request, exc: DomainError):
        return _error_response(400, "invalid_request", str(exc))

    @app.exception_handler(PipelineError)
    async def _pipeline_error(request: Request, exc: PipelineError):
        return _error_response(400, "pipeline_error", str(exc))

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return _error_response(422, "validation_error", "invalid request body",
                               details=exc.errors())

    # -- session flow ----------------------------------------------------

    @app.post("/v1/sessions", dependencies=[Depends(student_auth)])
    def create_session(body: SessionRequest):
        session = ctx.flow.start_session(body.student_id)
        task = ctx.flow.get_current_task(session.id).to_dict() if not session.complete else None
        return {"session_id": session.id, "task": task}

    @app.get("/v1/sessions/{session_id}/task", dependencies=[Depends(student_auth)])
    def get_task(session_id: str):
        return ctx.flow.get_current_task(session_id).to_dict()

    @app.post("/v1/sessions/{session_id}/prefeedback", dependencies=[Depends(student_auth)])
    def post_prefeedback(session_id: str, body: PrefeedbackRequest):
        submission = PrefeedbackSubmission(
            input=body.input,
            claimed_buggy_output=body.claimed_buggy_output,
            claimed_correct_output=body.claimed_correct_output,
        )
        understanding, reasons, fixed_source = ctx.flow.submit_prefeedback(
            session_id, submission
        )
        return {
            "understanding": understanding,
            "reasons": list(reasons),
            "fixed_source": fixed_source,
        }

    @app.post("/v1/sessions/{session_id}/feedback", dependencies=[Depends(student_auth)])
    def post_feedback(session_id: str, body: FeedbackRequest):
        instance = ctx.flow.submit_feedback(session_id, body.text)
        session = ctx.store.get_session(session_id)
        next_task = None
        if session is not None and not session.complete:
            next_task = ctx.flow.get_current_task(session_id).to_dict()
        return {
            "feedback_id": instance.id,
            "next_task": next_task,
            "complete": next_task is None,
        }

    # -- annotation --------------------------------------------------------

    @app.get("/v1/annotation/queue", dependencies=[Depends(staff_auth)])
    def get_queue(
        annotator: str = Query(...),
        per_problem: int = Query(default=100, ge=1),
        source: str | None = Query(default=None),
    ):
        items = annotation_queue(ctx.store, annotator, per_problem, source)
        # attach the scenario (problem + buggy source) so labeling tools
        # can show context without a second request
        out = []
        for inst in items:
            d = inst.to_dict()
            try:
                d["problem_title"] = ctx.pack.problem(inst.problem_id).title
                d["buggy_source"] = ctx.pack.program(inst.buggy_program_id).buggy_source
            except KeyError:
                d["problem_title"] = None
                d["buggy_source"] = None
            out.append(d)
        return {"items": out}

    @app.post("/v1/annotation/{feedback_id}", dependencies=[Depends(staff_auth)])
    def post_annotation(feedback_id: str, body: AnnotationRequest):
        existing = ctx.store.get_annotation(f"{feedback_id}:{body.annotator_id}")
        if existing is not None and not body.overwrite:
            raise ApiError(
                409,
                "annotation_exists",
                f"{body.annotator_id} already annotated {feedback_id}; "
                "resubmit with overwrite=true to replace it",
            )
        try:
            annotation = record_annotation(
                ctx.store,
                feedback_id,
                body.annotator_id,
                {
                    "correct": body.correct,
                    "gives_fix": body.gives_fix,
                    "mentions_variables": body.mentions_variables,
                    "mentions_lines": body.mentions_lines,
                },
            )
        except (ValueError, DomainError) as exc:
            raise ApiError(400, "invalid_annotation", str(exc))
        return annotation.to_dict()

    # -- exports, generation, reports ---------------------------------------

    @app.post("/v1/exports/finetune", dependencies=[Depends(staff_auth)])
    def post_export(body: ExportRequest):
        students = [
            i for i in ctx.store.feedback_instances() if i.source == "student"
        ]
        kept = filter_by_length(students, body.min_words, body.max_words)
        records = build_finetune_dataset(kept, ctx.pack)
        out_path = body.out_path
        if out_path is None:
            os.makedirs(config.export_dir, exist_ok=True)
            out_path = os.path.join(config.export_dir, "finetune.jsonl")
        return export_records(
            records,
            out_path,
            pack_id=ctx.pack.id,
            min_words=body.min_words,
            max_words=body.max_words,
        )

    @app.post("/v1/generate", dependencies=[Depends(staff_auth)])
    def post_generate(body: GenerateRequest):
        if config.endpoints_path is None:
            raise ApiError(400, "no_endpoints", "no endpoint config file configured")
        endpoints = genai.load_endpoint_configs(config.endpoints_path)
        if body.endpoints is not None:
            by_name = {e.name: e for e in endpoints}
            unknown = sorted(set(body.endpoints) - set(by_name))
            if unknown:
                raise ApiError(400, "unknown_endpoint", f"unknown endpoints: {unknown}")
            endpoints = [by_name[name] for name in body.endpoints]
        results, manifest = genai.batch_generate(
            endpoints,
            ctx.pack,
            body.strategies,
            store=ctx.store,
            dry_run=body.dry_run,
            rerun=body.rerun,
        )
        return {"generated": len(results), "manifest": manifest}

    @app.get("/v1/reports/summary", dependencies=[Depends(staff_auth)])
    def get_summary(group_by: str = Query(default="problem,understanding")):
        try:
            rows = aggregate(
                ctx.store.feedback_instances(), ctx.store.annotations(), group_by
            )
        except ValueError as exc:
            raise ApiError(400, "invalid_group_by", str(exc))
        return {"rows": [row.to_dict() for row in rows]}

    @app.get("/v1/reports/kappa", dependencies=[Depends(staff_auth)])
    def get_kappa(annotator_a: str = Query(...), annotator_b: str = Query(...)):
        annotations = ctx.store.annotations()
        a = [x for x in annotations if x.annotator_id == annotator_a]
        b = [x for x in annotations if x.annotator_id == annotator_b]
        shared = {x.feedback_id for x in a} & {x.feedback_id for x in b}
        if not shared:
            return {
                "annotator_a": annotator_a,
                "annotator_b": annotator_b,
                "items": 0,
                "pooled": None,
                "attributes": {},
            }
        report = multi_attribute_kappa(
            [x for x in a if x.feedback_id in shared],
            [x for x in b if x.feedback_id in shared],
        )
        return {
            "annotator_a": annotator_a,
            "annotator_b": annotator_b,
            "items": report.n_items,
            "pooled": {
                "kappa": report.kappa,
                "band": report.band,
                "observed_agreement": report.observed_agreement,
                "chance_agreement": report.chance_agreement,
            },
            "attributes": {
                name: {"kappa": sub.kappa, "band": sub.band}
                for name, sub in (report.per_attribute or {}).items()
            },
        }

    @app.get("/healthz")
    def healthz():
        return {
            "status": "ok",
            "pack_id": ctx.pack.id,
            "pack_digest": pack_digest(ctx.pack),
        }

    return app


def build_context(config: ServiceConfig) -> ServiceContext:
    store = Store(config.store_path)
    pack = store.active_pack()
    if pack is None:
        store.close()
        raise RuntimeError(
            f"store {config.store_path!r} holds no ingested pack; "
            f"run the ingest command first"
        )
    harness = Harness(config.harness_config())
    flow = TaskFlow(pack, harness, store)
    return ServiceContext(store=store, pack=pack, harness=harness, flow=flow, config=config)


def serve(config: ServiceConfig) -> None:
    """Run the service until shutdown, then release harness and store."""
    ctx = build_context(config)
    app = create_app(ctx)
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    finally:
        ctx.harness.close()
        ctx.store.close()
