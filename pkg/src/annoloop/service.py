"""HTTP surface over the platform.

State-mutating endpoints acknowledge only after their event hits the log;
malformed bodies come back as HTTP 400 with a structured {"error"} body and
internal failures never leak stack detail.
"""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Optional

import httpx
from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict

from .annotation import GeneratorSource
from .backends import (
    AnswerSpan,
    ERR_INVALID_BODY,
    ERR_INTERNAL,
    HttpCandidates,
    HttpGenerator,
    HttpQA,
)
from .config import GENERATOR_SOURCES, ServiceConfig
from .corpus import PassageStore, load_store
from .errors import ConfigError, PlatformError
from .events import EventLog
from .metrics import format_report_table
from .mocks import MockCandidateExtractor, MockGenerator, MockQA
from .prompts import PromptCache, PromptEngine
from .state import Platform
from .validation import FlagMode

log = logging.getLogger("annoloop.service")


class WireAnswer(BaseModel):
    model_config = ConfigDict(extra="forbid")
    text: str
    char_start: int

    def to_span(self) -> AnswerSpan:
        return AnswerSpan(self.text, self.char_start)


class StartSessionBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    worker: str
    setting: Optional[str] = None


class PromptBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    answer: Optional[WireAnswer] = None


class SubmitBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    question: str
    answer: WireAnswer
    idempotency_key: Optional[str] = None


class VoteBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    validator: str
    verdict: str
    idempotency_key: Optional[str] = None


def _is_mock(url: str) -> bool:
    return url.startswith("mock://")


def build_backends(config: ServiceConfig) -> tuple[dict, object, object]:
    """Generator/QA/candidate backends per config; mock:// URLs stay in-process."""
    qa = (
        MockQA(seed=config.seed)
        if _is_mock(config.qa_url)
        else HttpQA(config.qa_url, client=_client(config))
    )
    extractor = (
        MockCandidateExtractor(seed=config.seed)
        if _is_mock(config.candidates_url)
        else HttpCandidates(config.candidates_url, client=_client(config))
    )
    generators = {}
    for source in GENERATOR_SOURCES:
        url = config.generator_urls[source]
        if _is_mock(url):
            generators[source] = MockGenerator(seed=config.seed, source=source)
        else:
            generators[source] = HttpGenerator(url, client=_client(config))
    return generators, qa, extractor


def _client(config: ServiceConfig) -> httpx.Client:
    limits = httpx.Limits(max_connections=config.backend_concurrency)
    return httpx.Client(timeout=10.0, limits=limits)


def build_platform(
    config: ServiceConfig,
    store: Optional[PassageStore] = None,
    events_path: Optional[Path] = None,
) -> Platform:
    """Assemble engines, restore caches, open the log and replay any history."""
    config.validate()
    storage = Path(config.storage_path)
    storage.mkdir(parents=True, exist_ok=True)
    if not os.access(storage, os.W_OK):
        raise ConfigError(f"storage path {storage} is not writable")
    if store is None:
        corpus_file = config.resolved_corpus_path
        store = load_store(corpus_file, seed=config.seed) if corpus_file.exists() else PassageStore(seed=config.seed)
    generators, qa, extractor = build_backends(config)
    engines = {}
    for source in GENERATOR_SOURCES:
        cache = PromptCache()
        cache_file = config.cache_path(source)
        if cache_file.exists():
            with open(cache_file, encoding="utf-8") as fp:
                cache = PromptCache.load(fp)
        engines[GeneratorSource(source)] = PromptEngine(
            generator=generators[source],
            qa=qa,
            extractor=extractor,
            cache=cache,
            depth=config.cache_depth,
            top_p=config.top_p,
        )
    events_path = events_path if events_path is not None else config.events_path
    kwargs = dict(
        store=store,
        engines=engines,
        qa=qa,
        seed=config.seed,
        fooling_threshold=config.fooling_threshold,
        flag_threshold=config.validation_threshold,
        flag_mode=FlagMode(config.flag_mode),
        bonus_amount=config.bonus_amount,
    )
    if events_path.exists() and events_path.stat().st_size > 0:
        return Platform.from_log(events_path, **kwargs)
    return Platform(log=EventLog(events_path), **kwargs)


def dump_caches(platform: Platform, config: ServiceConfig) -> dict[str, int]:
    """Persist each engine's prompt cache next to the event log."""
    written = {}
    for source, engine in platform.engines.items():
        path = config.cache_path(source.value)
        with open(path, "w", encoding="utf-8") as fp:
            engine.cache.dump(fp)
        written[source.value] = engine.cache.size()
    return written


def check_backends(config: ServiceConfig) -> dict[str, str]:
    """Best-effort reachability map; mocks are always 'ok'."""
    status: dict[str, str] = {}
    urls = {"qa": config.qa_url, "candidates": config.candidates_url}
    for source in GENERATOR_SOURCES:
        urls[f"generator:{source}"] = config.generator_urls[source]
    for name, url in urls.items():
        if _is_mock(url):
            status[name] = "ok"
            continue
        try:
            httpx.get(url.rstrip("/") + "/v1/health", timeout=2.0)
            status[name] = "ok"
        except httpx.HTTPError as exc:
            status[name] = f"unreachable: {type(exc).__name__}"
    return status


def create_app(config: Optional[ServiceConfig] = None, platform: Optional[Platform] = None) -> FastAPI:
    config = config or ServiceConfig()
    if platform is None:
        platform = build_platform(config)
    app = FastAPI(title="annoloop", openapi_url=None)
    app.state.platform = platform
    app.state.config = config

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": ERR_INVALID_BODY})

    @app.exception_handler(PlatformError)
    async def on_platform_error(request: Request, exc: PlatformError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(Exception)
    async def on_internal_error(request: Request, exc: Exception):
        log.exception("internal error on %s", request.url.path)
        return JSONResponse(status_code=500, content={"error": ERR_INTERNAL})

    @app.post("/v1/sessions")
    def start_session(body: StartSessionBody):
        setting = body.setting or platform.assign_setting(body.worker)
        return platform.start_session(body.worker, setting)

    @app.post("/v1/sessions/{session_id}/prompt")
    def request_prompt(session_id: str, body: PromptBody):
        answer = body.answer.to_span() if body.answer is not None else None
        return platform.request_prompt(session_id, answer)

    @app.post("/v1/sessions/{session_id}/submit")
    def submit_example(session_id: str, body: SubmitBody):
        return platform.submit_example(
            session_id, body.question, body.answer.to_span(), body.idempotency_key
        )

    @app.get("/v1/validation/next")
    def next_validation(validator: str = Query(...)):
        return {"task": platform.next_validation(validator)}

    @app.post("/v1/validation/{task_id}/vote")
    def cast_vote(task_id: str, body: VoteBody):
        return platform.cast_vote(task_id, body.validator, body.verdict, body.idempotency_key)

    @app.get("/v1/metrics")
    def metrics(setting: Optional[str] = None):
        reports = platform.metrics_reports(setting)
        return {
            "reports": [r.to_dict() for r in reports],
            "table": format_report_table(reports),
        }

    @app.get("/v1/export")
    def export(setting: str = Query(...)):
        document, metadata = platform.export(setting)
        return {"dataset": document, "metadata": metadata}

    @app.get("/v1/health")
    def health():
        return {
            "status": "ok",
            "events": len(platform.log),
            "passages": len(platform.store),
            "backends": check_backends(config),
        }

    return app


def serve(config: ServiceConfig, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    app = create_app(config)
    for name, status in check_backends(config).items():
        if status != "ok":
            log.warning("backend %s:%s", name, status)
    uvicorn.run(app, host=host, port=port, log_level="info")
