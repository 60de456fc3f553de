"""Shared test helpers: tiny images, corpora, and scripted responses."""

from __future__ import annotations

import io
import json
from pathlib import Path

from PIL import Image

from groundsight.backends import BackendResponse, Op
from groundsight.geometry import BBox
from groundsight.images import ImageRef

FIXTURES = Path(__file__).parent / "fixtures"


def png_bytes(width: int = 64, height: int = 64, color=(200, 30, 30)) -> bytes:
    buf = io.BytesIO()
    Image.new("RGB", (width, height), color).save(buf, format="PNG")
    return buf.getvalue()


def image_ref(image_id: str = "img", width: int = 64, height: int = 64, color=(200, 30, 30)) -> ImageRef:
    return ImageRef(image_id=image_id, data=png_bytes(width, height, color))


def write_jsonl(path: Path, rows: list[dict]) -> Path:
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")
    return path


def text_resp(text: str) -> BackendResponse:
    return BackendResponse(text=text)


def bbox_resp(x0, y0, x1, y1, conf: float) -> BackendResponse:
    return BackendResponse(bbox=BBox(x0, y0, x1, y1), confidence=conf)


def embed_resp(*values: float) -> BackendResponse:
    return BackendResponse(embedding=tuple(float(v) for v in values))


def verdict_resp(accuracy: bool) -> BackendResponse:
    return BackendResponse(verdict=accuracy)


DEFAULTS_ALL = {
    Op.ANSWER: text_resp("I don't know"),
    Op.SUMMARIZE: text_resp(""),
    Op.LOCALIZE: bbox_resp(0, 0, 1, 1, 0.0),
    Op.EMBED: embed_resp(1.0, 0.0, 0.0, 0.0),
    Op.JUDGE: verdict_resp(False),
}
