"""FastAPI service speaking the groundsight backend wire protocol.

Request bodies are validated strictly (unknown or missing fields are 400s),
model work runs in worker threads behind a bounded semaphore so the event
loop, and with it GET /healthz, stays responsive during inference, and every
failure path answers with the protocol's error object shape:

    {"error": {"code": "...", "message": "..."}}

Codes: bad_request (400), not_configured (503), timeout (504),
no_detection / internal (500).
"""

from __future__ import annotations

import asyncio
import base64
import binascii
import functools

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict

from . import __version__
from .config import AdapterConfig, AdapterError
from .models import build_model


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GenerateRequest(_Strict):
    image_b64: str
    system_prompt: str
    user_prompt: str


class LocalizeRequest(_Strict):
    image_b64: str
    text_query: str


class EmbedRequest(_Strict):
    image_b64: str


class JudgeRequest(_Strict):
    query: str
    ground_truth: str
    prediction: str
    system_prompt: str


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"code": code, "message": message}})


class _NotConfigured(Exception):
    def __init__(self, endpoint: str):
        self.endpoint = endpoint


class _Timeout(Exception):
    pass


def _decode_image(image_b64: str) -> bytes:
    try:
        return base64.b64decode(image_b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise AdapterError(f"invalid image_b64: {exc}")


def create_app(config: AdapterConfig, models: dict[str, object] | None = None) -> FastAPI:
    """Build the service.

    models overrides the registry-built instances per endpoint name; tests
    use it to inject instrumented or misbehaving models.
    """
    resolved: dict[str, object] = {}
    for name, enabled in config.enabled_endpoints().items():
        if models is not None and name in models:
            resolved[name] = models[name]
        elif enabled:
            resolved[name] = build_model(name, config.model_for(name), config)

    app = FastAPI(title="groundsight-adapter", version=__version__)
    semaphore = asyncio.Semaphore(config.max_concurrent)

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return _error(400, "bad_request", str(exc.errors()[:3]))

    @app.exception_handler(AdapterError)
    async def on_adapter_error(request: Request, exc: AdapterError):
        return _error(400, "bad_request", str(exc))

    @app.exception_handler(Exception)
    async def on_internal_error(request: Request, exc: Exception):
        return _error(500, "internal", f"{type(exc).__name__}: {exc}")

    @app.exception_handler(_NotConfigured)
    async def on_not_configured(request: Request, exc: _NotConfigured):
        return _error(503, "not_configured", f"no model configured for {exc.endpoint!r}")

    @app.exception_handler(_Timeout)
    async def on_timeout(request: Request, exc: _Timeout):
        return _error(504, "timeout", f"request exceeded {config.request_timeout}s")

    def require(endpoint: str):
        model = resolved.get(endpoint)
        if model is None:
            raise _NotConfigured(endpoint)
        return model

    async def run_bounded(fn):
        """Run sync model work in a thread under the concurrency bound.

        A timeout abandons the worker thread rather than interrupting it,
        and the abandoned work keeps holding its semaphore slot until it
        actually finishes, so runaway inference cannot pile up unbounded.
        """
        loop = asyncio.get_running_loop()

        async def guarded():
            await semaphore.acquire()
            fut = loop.run_in_executor(None, fn)
            # done-callbacks run on the event loop, after the thread finishes
            fut.add_done_callback(lambda _: semaphore.release())
            return await fut

        if config.request_timeout is None:
            return await guarded()
        try:
            return await asyncio.wait_for(guarded(), timeout=config.request_timeout)
        except asyncio.TimeoutError:
            raise _Timeout()

    def generate_endpoint(name: str):
        async def handler(body: GenerateRequest):
            model = require(name)
            image = _decode_image(body.image_b64)
            text = await run_bounded(
                functools.partial(model.generate, image, body.system_prompt, body.user_prompt)
            )
            return {"text": text}

        return handler

    app.post("/v1/answer")(generate_endpoint("answer"))
    app.post("/v1/summarize")(generate_endpoint("summarize"))

    @app.post("/v1/localize")
    async def localize(body: LocalizeRequest):
        model = require("localize")
        image = _decode_image(body.image_b64)
        detections = await run_bounded(
            functools.partial(model.detect, image, body.text_query)
        )
        if not detections:
            return _error(500, "no_detection", "detector returned no boxes")
        # single-box reduction: the protocol carries exactly one best box
        box, confidence = max(detections, key=lambda d: d[1])
        return {"bbox": [float(v) for v in box], "confidence": float(confidence)}

    @app.post("/v1/embed")
    async def embed(body: EmbedRequest):
        model = require("embed")
        image = _decode_image(body.image_b64)
        vec = await run_bounded(functools.partial(model.embed, image))
        arr = np.asarray(vec, dtype=np.float64).reshape(-1)
        norm = float(np.linalg.norm(arr))
        if arr.size == 0 or norm == 0.0 or not np.all(np.isfinite(arr)):
            return _error(500, "internal", "embedding model produced an unusable vector")
        return {"embedding": [float(v) for v in arr / norm]}

    @app.post("/v1/judge")
    async def judge(body: JudgeRequest):
        model = require("judge")
        verdict = await run_bounded(
            functools.partial(
                model.judge, body.query, body.ground_truth, body.prediction, body.system_prompt
            )
        )
        return {"accuracy": bool(verdict)}

    @app.get("/healthz")
    async def healthz():
        return {
            "status": "ok",
            "version": __version__,
            "endpoints": config.enabled_endpoints(),
        }

    return app


def serve(config: AdapterConfig, host: str = "127.0.0.1") -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=config.port)
