"""Backend boundary: every learned model sits behind one request/response pair.

Two implementations: ScriptedMock (deterministic lookup table, used by the
whole test suite) and RemoteBackend (HTTP client for an adapter service
speaking the wire protocol below). Pipeline and evaluation code only ever
see `Backend.call`, so swapping a mock for a live service changes nothing
upstream.

Wire protocol: HTTP POST with JSON bodies.

    /v1/answer     {image_b64, system_prompt, user_prompt} -> {"text": str}
    /v1/summarize  {image_b64, system_prompt, user_prompt} -> {"text": str}
    /v1/localize   {image_b64, text_query} -> {"bbox": [4 floats], "confidence": float}
    /v1/embed      {image_b64} -> {"embedding": [floats]}
    /v1/judge      {query, ground_truth, prediction, system_prompt} -> {"accuracy": bool}

Errors come back as {"error": {"code": str, "message": str}} with a 4xx/5xx
status.
"""

from __future__ import annotations

import base64
import json
import math
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Protocol

import httpx

from .errors import (
    BackendRefusal,
    JudgeParseError,
    ParseError,
    ProtocolError,
    TransportError,
)
from .geometry import BBox
from .images import ImageRef
from .prompts import JUDGE_SYSTEM_PROMPT

# Characters of scripting key taken from the request text (see discriminator()).
DISCRIMINATOR_LEN = 32


class Op(str, Enum):
    ANSWER = "answer"
    SUMMARIZE = "summarize"
    LOCALIZE = "localize"
    EMBED = "embed"
    JUDGE = "judge"


WIRE_PATHS = {
    Op.ANSWER: "/v1/answer",
    Op.SUMMARIZE: "/v1/summarize",
    Op.LOCALIZE: "/v1/localize",
    Op.EMBED: "/v1/embed",
    Op.JUDGE: "/v1/judge",
}


@dataclass(frozen=True)
class JudgeTriple:
    query: str
    ground_truth: str
    prediction: str


@dataclass(frozen=True)
class BackendRequest:
    """One call to a learned model; fields required depend on op."""

    op: Op
    image: ImageRef | None = None
    system_prompt: str | None = None
    user_prompt: str | None = None
    text_query: str | None = None
    judge_payload: JudgeTriple | None = None

    def __post_init__(self) -> None:
        if self.op in (Op.ANSWER, Op.SUMMARIZE):
            if self.image is None or self.system_prompt is None or self.user_prompt is None:
                raise ValueError(f"{self.op.value} requires image, system_prompt, user_prompt")
        elif self.op is Op.LOCALIZE:
            if self.image is None or self.text_query is None:
                raise ValueError("localize requires image and text_query")
        elif self.op is Op.EMBED:
            if self.image is None:
                raise ValueError("embed requires image")
        elif self.op is Op.JUDGE:
            if self.judge_payload is None:
                raise ValueError("judge requires judge_payload")
            if not self.judge_payload.ground_truth:
                raise ValueError("judge requires non-empty ground_truth")


@dataclass(frozen=True)
class BackendResponse:
    """Exactly the field(s) matching the request op are set."""

    text: str | None = None
    bbox: BBox | None = None
    confidence: float | None = None
    embedding: tuple[float, ...] | None = None
    verdict: bool | None = None


class Backend(Protocol):
    def call(self, request: BackendRequest) -> BackendResponse: ...


def discriminator(request: BackendRequest) -> str:
    """Scripting key fragment derived from the request text.

    The first 32 characters of user_prompt (or of text_query for
    localize), so one image can carry different scripted answers for
    different prompts. Judge requests key on the whole prediction, since
    predictions about one subject often share a long common prefix. Ops
    with no text (embed) key on the empty string.
    """
    if request.user_prompt is not None:
        return request.user_prompt[:DISCRIMINATOR_LEN]
    if request.text_query is not None:
        return request.text_query[:DISCRIMINATOR_LEN]
    if request.judge_payload is not None:
        return request.judge_payload.prediction
    return ""


def _request_image_id(request: BackendRequest) -> str:
    return request.image.image_id if request.image is not None else ""


def response_from_payload(op: Op, payload: object) -> BackendResponse:
    """Validate a wire (or scripted) response body against the op's schema.

    Raises ProtocolError on violations; judge responses raise
    JudgeParseError instead so callers can fall back to the lexical judge.
    """
    err = JudgeParseError if op is Op.JUDGE else ProtocolError
    if not isinstance(payload, dict):
        raise err(f"{op.value}: response is not an object")
    if op in (Op.ANSWER, Op.SUMMARIZE):
        text = payload.get("text")
        if not isinstance(text, str):
            raise ProtocolError(f"{op.value}: missing or non-string 'text'")
        return BackendResponse(text=text)
    if op is Op.LOCALIZE:
        bbox = payload.get("bbox")
        conf = payload.get("confidence")
        if (
            not isinstance(bbox, (list, tuple))
            or len(bbox) != 4
            or not all(isinstance(v, (int, float)) and math.isfinite(v) for v in bbox)
        ):
            raise ProtocolError("localize: 'bbox' must be 4 finite numbers")
        if not isinstance(conf, (int, float)) or not 0.0 <= float(conf) <= 1.0:
            raise ProtocolError("localize: 'confidence' must be in [0, 1]")
        try:
            box = BBox(float(bbox[0]), float(bbox[1]), float(bbox[2]), float(bbox[3]))
        except ValueError as exc:
            raise ProtocolError(f"localize: {exc}")
        return BackendResponse(bbox=box, confidence=float(conf))
    if op is Op.EMBED:
        emb = payload.get("embedding")
        if (
            not isinstance(emb, (list, tuple))
            or not emb
            or not all(isinstance(v, (int, float)) and math.isfinite(v) for v in emb)
        ):
            raise ProtocolError("embed: 'embedding' must be a non-empty list of finite numbers")
        return BackendResponse(embedding=tuple(float(v) for v in emb))
    accuracy = payload.get("accuracy")
    if not isinstance(accuracy, bool):
        raise JudgeParseError("judge: missing or non-boolean 'accuracy'")
    return BackendResponse(verdict=accuracy)


class ScriptedMock:
    """Deterministic backend: (op, image_id, discriminator) -> response.

    Missing keys fall to the op's default response; an op with neither a
    matching key nor a default raises ProtocolError. The table is frozen
    at construction; only the call log mutates, under a lock, so one mock
    can serve any number of concurrent workers.
    """

    def __init__(
        self,
        table: dict[tuple[Op, str, str], BackendResponse] | None = None,
        defaults: dict[Op, BackendResponse] | None = None,
    ):
        self._table = dict(table or {})
        self._defaults = dict(defaults or {})
        self._log: list[tuple[str, str, str]] = []
        self._lock = threading.Lock()

    @classmethod
    def from_script(cls, path: str | Path) -> "ScriptedMock":
        """Load a JSON script file.

        Shape: {"defaults": {op: response, ...},
                "entries": [{"op", "image_id", "discriminator", "response"}, ...]}
        Response payloads use the wire schema and are validated here, so a
        bad script fails at load time, not mid-run.
        """
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"mock script is not valid JSON: {exc}")
        if not isinstance(raw, dict):
            raise ParseError("mock script must be a JSON object")
        defaults: dict[Op, BackendResponse] = {}
        for op_name, payload in (raw.get("defaults") or {}).items():
            op = _parse_op(op_name)
            defaults[op] = response_from_payload(op, payload)
        table: dict[tuple[Op, str, str], BackendResponse] = {}
        entries = raw.get("entries") or []
        if not isinstance(entries, list):
            raise ParseError("mock script 'entries' must be a list")
        for i, entry in enumerate(entries):
            if not isinstance(entry, dict):
                raise ParseError(f"mock script entry {i} is not an object")
            op = _parse_op(entry.get("op"))
            image_id = entry.get("image_id", "")
            disc = entry.get("discriminator", "")
            if not isinstance(image_id, str) or not isinstance(disc, str):
                raise ParseError(f"mock script entry {i}: image_id/discriminator must be strings")
            # Mirror discriminator(): judge keys are full predictions.
            key = (op, image_id, disc if op is Op.JUDGE else disc[:DISCRIMINATOR_LEN])
            if key in table:
                raise ParseError(f"mock script entry {i}: duplicate key {key}")
            table[key] = response_from_payload(op, entry.get("response"))
        return cls(table=table, defaults=defaults)

    def call(self, request: BackendRequest) -> BackendResponse:
        key = (request.op, _request_image_id(request), discriminator(request))
        with self._lock:
            self._log.append((key[0].value, key[1], key[2]))
        response = self._table.get(key)
        if response is None:
            response = self._defaults.get(request.op)
        if response is None:
            raise ProtocolError(
                f"no scripted response for op={key[0].value} image_id={key[1]!r} "
                f"discriminator={key[2]!r} and no default"
            )
        return response

    def call_log(self) -> list[tuple[str, str, str]]:
        """Snapshot of (op, image_id, discriminator) in call order."""
        with self._lock:
            return list(self._log)

    def calls_for(self, image_id: str) -> list[tuple[str, str, str]]:
        return [c for c in self.call_log() if c[1] == image_id]

    def reset_log(self) -> None:
        with self._lock:
            self._log.clear()


def _parse_op(name: object) -> Op:
    try:
        return Op(name)
    except ValueError:
        raise ParseError(f"unknown backend op {name!r}")


def _request_body(request: BackendRequest) -> dict:
    if request.op in (Op.ANSWER, Op.SUMMARIZE):
        return {
            "image_b64": base64.b64encode(request.image.read_bytes()).decode("ascii"),
            "system_prompt": request.system_prompt,
            "user_prompt": request.user_prompt,
        }
    if request.op is Op.LOCALIZE:
        return {
            "image_b64": base64.b64encode(request.image.read_bytes()).decode("ascii"),
            "text_query": request.text_query,
        }
    if request.op is Op.EMBED:
        return {"image_b64": base64.b64encode(request.image.read_bytes()).decode("ascii")}
    triple = request.judge_payload
    return {
        "query": triple.query,
        "ground_truth": triple.ground_truth,
        "prediction": triple.prediction,
        "system_prompt": request.system_prompt or JUDGE_SYSTEM_PROMPT,
    }


class RemoteBackend:
    """HTTP client for an adapter service speaking the wire protocol.

    Every response is schema-validated before being returned; transport
    failures are retried with byte-identical request bodies up to
    max_attempts, then surface as TransportError. Service-side error
    objects become BackendRefusal. The underlying httpx client is
    thread-safe and bounds concurrent connections.
    """

    def __init__(
        self,
        base_url: str,
        timeout: float = 30.0,
        max_attempts: int = 3,
        retry_backoff: float = 0.1,
        max_connections: int = 16,
        expected_embed_dim: int | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        self.max_attempts = max_attempts
        self.retry_backoff = retry_backoff
        self.expected_embed_dim = expected_embed_dim
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"),
            timeout=timeout,
            limits=httpx.Limits(max_connections=max_connections),
            transport=transport,
        )

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "RemoteBackend":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def call(self, request: BackendRequest) -> BackendResponse:
        body = json.dumps(_request_body(request), ensure_ascii=False).encode("utf-8")
        path = WIRE_PATHS[request.op]
        last_exc: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                http_response = self._client.post(
                    path, content=body, headers={"content-type": "application/json"}
                )
            except httpx.HTTPError as exc:
                last_exc = exc
                if attempt < self.max_attempts and self.retry_backoff > 0:
                    time.sleep(self.retry_backoff * attempt)
                continue
            return self._interpret(request.op, http_response)
        raise TransportError(f"{path}: {last_exc} after {self.max_attempts} attempts")

    def _interpret(self, op: Op, http_response: httpx.Response) -> BackendResponse:
        try:
            payload = http_response.json()
        except ValueError:
            raise ProtocolError(
                f"{op.value}: non-JSON response with HTTP {http_response.status_code}"
            )
        if http_response.status_code != 200:
            error = payload.get("error") if isinstance(payload, dict) else None
            if isinstance(error, dict) and isinstance(error.get("code"), str):
                raise BackendRefusal(
                    code=error["code"],
                    message=str(error.get("message", "")),
                    status=http_response.status_code,
                )
            raise ProtocolError(
                f"{op.value}: HTTP {http_response.status_code} without a valid error object"
            )
        response = response_from_payload(op, payload)
        if (
            op is Op.EMBED
            and self.expected_embed_dim is not None
            and len(response.embedding) != self.expected_embed_dim
        ):
            raise ProtocolError(
                f"embed: expected dim {self.expected_embed_dim}, got {len(response.embedding)}"
            )
        return response


def call_judge(backend: Backend, query: str, ground_truth: str, prediction: str) -> bool:
    """Ask the judge whether prediction answers query per the ground truth.

    Raises JudgeParseError when the response cannot be read as an accuracy
    object; callers then fall back to the lexical judge.
    """
    request = BackendRequest(
        op=Op.JUDGE,
        judge_payload=JudgeTriple(query=query, ground_truth=ground_truth, prediction=prediction),
        system_prompt=JUDGE_SYSTEM_PROMPT,
    )
    response = backend.call(request)
    if response.verdict is None:
        raise JudgeParseError("judge backend returned no verdict")
    return response.verdict
