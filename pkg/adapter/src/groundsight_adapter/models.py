"""Model interfaces, deterministic stubs, and the factory registry.

Every model kind is a small protocol the service drives; the bundled
"stub" implementations are fully deterministic functions of their inputs,
so transcripts and tests reproduce bit-for-bit. Real checkpoints plug in
by registering a factory under a new identifier prefix:

    from groundsight_adapter.models import register_factory
    register_factory("mydet", lambda spec, config: MyDetector(spec))

and configuring e.g. localize_model="mydet:weights-v2". Generation-style
models are expected to decode deterministically (greedy / temperature 0)
so repeated requests agree.
"""

from __future__ import annotations

import hashlib
import io
from typing import Callable, Protocol

import numpy as np
from PIL import Image, UnidentifiedImageError

from .config import AdapterConfig, AdapterError

Box = tuple[float, float, float, float]


class VisionLanguageModel(Protocol):
    def generate(self, image_bytes: bytes, system_prompt: str, user_prompt: str) -> str: ...


class DetectionModel(Protocol):
    def detect(self, image_bytes: bytes, text_query: str) -> list[tuple[Box, float]]:
        """All candidate boxes with confidences; the service keeps the best."""
        ...


class EmbeddingModel(Protocol):
    def embed(self, image_bytes: bytes) -> np.ndarray: ...


class JudgeModel(Protocol):
    def judge(self, query: str, ground_truth: str, prediction: str, system_prompt: str) -> bool: ...


def _decode_size(image_bytes: bytes) -> tuple[int, int]:
    try:
        with Image.open(io.BytesIO(image_bytes)) as img:
            return img.size
    except (UnidentifiedImageError, OSError) as exc:
        raise AdapterError(f"undecodable image: {exc}")


def _digest(*parts: bytes) -> bytes:
    h = hashlib.sha256()
    for part in parts:
        h.update(len(part).to_bytes(8, "big"))
        h.update(part)
    return h.digest()


class StubVLM:
    """Echo-style generator: fixed text if configured, else a stable tag
    derived from the image bytes and prompt."""

    def __init__(self, fixed_text: str | None = None):
        self.fixed_text = fixed_text

    def generate(self, image_bytes: bytes, system_prompt: str, user_prompt: str) -> str:
        if self.fixed_text is not None:
            return self.fixed_text
        tag = _digest(image_bytes, user_prompt.encode("utf-8")).hex()[:12]
        return f"stub response {tag}"


class StubLocalizer:
    """Emits three nested candidate boxes; the centered half-size box gets
    the top confidence, so single-best reduction is observable."""

    def detect(self, image_bytes: bytes, text_query: str) -> list[tuple[Box, float]]:
        width, height = _decode_size(image_bytes)
        full = (0.0, 0.0, float(width), float(height))
        center = (width * 0.25, height * 0.25, width * 0.75, height * 0.75)
        corner = (0.0, 0.0, width * 0.5, height * 0.5)
        return [(full, 0.5), (center, 0.9), (corner, 0.7)]


class StubEmbedder:
    """Unit vector seeded from the image digest: identical bytes, identical
    embedding; different bytes, (almost surely) different embedding."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim

    def embed(self, image_bytes: bytes) -> np.ndarray:
        seed = int.from_bytes(_digest(image_bytes)[:8], "big")
        rng = np.random.default_rng(seed)
        vec = rng.standard_normal(self.dim)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:  # unreachable for standard_normal, kept for safety
            vec = np.zeros(self.dim)
            vec[0] = 1.0
            return vec
        return vec / norm


class StubJudge:
    """Lexical containment: correct iff the normalized ground truth appears
    inside the prediction."""

    def judge(self, query: str, ground_truth: str, prediction: str, system_prompt: str) -> bool:
        return ground_truth.strip().lower() in prediction.strip().lower()


def _build_stub(kind: str, spec: str, config: AdapterConfig):
    if kind in ("answer", "summarize"):
        return StubVLM(fixed_text=spec if spec else None)
    if kind == "localize":
        return StubLocalizer()
    if kind == "embed":
        return StubEmbedder(config.embed_dim)
    if kind == "judge":
        return StubJudge()
    raise AdapterError(f"no stub for endpoint kind {kind!r}")


# factory signature: (kind, spec, config) -> model instance, where spec is
# the identifier text after the first ":" ("" when absent)
Factory = Callable[[str, str, AdapterConfig], object]

_FACTORIES: dict[str, Factory] = {"stub": _build_stub}


def register_factory(prefix: str, factory: Factory) -> None:
    if not prefix or ":" in prefix:
        raise ValueError("factory prefix must be non-empty and contain no ':'")
    _FACTORIES[prefix] = factory


def build_model(kind: str, model_id: str, config: AdapterConfig):
    """Resolve a configured identifier ("prefix" or "prefix:spec")."""
    prefix, _, spec = model_id.partition(":")
    factory = _FACTORIES.get(prefix)
    if factory is None:
        known = ", ".join(sorted(_FACTORIES))
        raise AdapterError(
            f"unknown model identifier {model_id!r} for {kind} (registered: {known})"
        )
    return factory(kind, spec, config)
