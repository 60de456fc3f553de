"""Strategy orchestration: baseline, crop+search, crop+summarize, full policy.

Four variants, each producing one Transcript per corpus record:

    baseline     Answer only, empty search context.
    crop         Localize -> crop -> Embed -> search -> filter -> Answer.
    cos          Summarize first; the summary line is prepended to the
                 final answer prompt.
    groundsight  cos plus abstention: policy types abstain before any
                 backend call, and an empty post-filter context abstains
                 before the Answer call.

Backend failures never abort a run: the item degrades to a failed
transcript whose answer is exactly "I don't know" (graded Missing).
Transcripts serialize without wall-clock timings so identical runs
produce byte-identical files.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable

from .backends import Backend, BackendRequest, Op
from .dataset import Corpus, QARecord
from .errors import ClampedToEmpty, GroundsightError, ParseError
from .geometry import BBox, clamp_to_image
from .images import ImageRef, crop_region
from .prompts import assemble_agent_prompt, assemble_cos_prompt, prepend_roi_summary
from .question_policy import (
    ABSTAIN_ANSWER,
    AbstentionPolicy,
    DEFAULT_POLICY,
    QuestionType,
    classify,
)
from .retrieval import Index, RetrievedEntity, as_embedding, filter_by_threshold, format_entities


class Strategy(str, Enum):
    BASELINE = "baseline"
    CROP_SEARCH = "crop"
    CROP_SEARCH_COS = "cos"
    GROUNDSIGHT = "groundsight"


@dataclass(frozen=True)
class StrategyConfig:
    variant: Strategy
    tau: float = 0.75
    k: int = 3
    localizer_conf_floor: float = 0.25
    policy: AbstentionPolicy | None = None
    # Which image the final Answer call sees. Crop-only search answers on
    # the crop; the summarize variants answer on the original image, whose
    # context the summary line restores.
    final_image: str | None = None

    def __post_init__(self) -> None:
        if not -1.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [-1, 1], got {self.tau}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.localizer_conf_floor <= 1.0:
            raise ValueError("localizer_conf_floor must be in [0, 1]")
        if self.variant is Strategy.GROUNDSIGHT and self.policy is None:
            object.__setattr__(self, "policy", DEFAULT_POLICY)
        if self.final_image is None:
            default = "crop" if self.variant is Strategy.CROP_SEARCH else "original"
            object.__setattr__(self, "final_image", default)
        if self.final_image not in ("original", "crop"):
            raise ValueError(f"final_image must be 'original' or 'crop', got {self.final_image!r}")


@dataclass(frozen=True)
class Transcript:
    """Everything observable about one record's run.

    stage_timings is in-memory diagnostics only and is excluded from
    serialization (wall-clock noise would break byte-identical reruns);
    the ordered `stages` tuple is what persists.
    """

    interaction_id: str
    strategy: str
    qtype: QuestionType
    final_prompt: str
    answer: str
    roi_summary: str | None = None
    bbox: BBox | None = None
    retrieved: tuple[RetrievedEntity, ...] = ()
    stages: tuple[str, ...] = ()
    failed: bool = False
    error: str | None = None
    stage_timings: dict[str, float] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not self.answer:
            raise ValueError("transcript answer must be non-empty")

    def to_json_dict(self) -> dict:
        return {
            "interaction_id": self.interaction_id,
            "strategy": self.strategy,
            "qtype": self.qtype.value,
            "roi_summary": self.roi_summary,
            "bbox": list(self.bbox.as_tuple()) if self.bbox is not None else None,
            "retrieved": [
                {
                    "entity_name": e.entity_name,
                    "attributes": dict(e.attributes),
                    "similarity": e.similarity,
                }
                for e in self.retrieved
            ],
            "final_prompt": self.final_prompt,
            "answer": self.answer,
            "stages": list(self.stages),
            "failed": self.failed,
            "error": self.error,
        }

    @classmethod
    def from_json_dict(cls, raw: dict) -> "Transcript":
        try:
            bbox = None
            if raw.get("bbox") is not None:
                b = raw["bbox"]
                bbox = BBox(float(b[0]), float(b[1]), float(b[2]), float(b[3]))
            return cls(
                interaction_id=raw["interaction_id"],
                strategy=raw["strategy"],
                qtype=QuestionType(raw["qtype"]),
                roi_summary=raw.get("roi_summary"),
                bbox=bbox,
                retrieved=tuple(
                    RetrievedEntity(
                        entity_name=e["entity_name"],
                        attributes=dict(e["attributes"]),
                        similarity=e.get("similarity"),
                    )
                    for e in raw.get("retrieved", [])
                ),
                final_prompt=raw["final_prompt"],
                answer=raw["answer"],
                stages=tuple(raw.get("stages", [])),
                failed=bool(raw.get("failed", False)),
                error=raw.get("error"),
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ParseError(f"malformed transcript record: {exc}")


class _StageClock:
    """Collects per-stage wall time; never serialized."""

    def __init__(self) -> None:
        self.timings: dict[str, float] = {}
        self.stages: list[str] = []

    def run(self, name: str, fn):
        start = time.perf_counter()
        result = fn()
        self.timings[name] = time.perf_counter() - start
        self.stages.append(name)
        return result


def _qtype_of(record: QARecord) -> QuestionType:
    return record.question_type if record.question_type is not None else classify(record.query)


def _answer(backend: Backend, image: ImageRef, system_prompt: str, user_prompt: str) -> str:
    response = backend.call(
        BackendRequest(
            op=Op.ANSWER, image=image, system_prompt=system_prompt, user_prompt=user_prompt
        )
    )
    if not response.text:
        raise ParseError("answer backend returned empty text")
    return response.text


def run_baseline(record: QARecord, backend: Backend) -> Transcript:
    """Single Answer call with empty search context; no retrieval stages."""
    clock = _StageClock()
    system, user = assemble_agent_prompt("", record.query)
    answer = clock.run("answer", lambda: _answer(backend, record.image, system, user))
    return Transcript(
        interaction_id=record.interaction_id,
        strategy=Strategy.BASELINE.value,
        qtype=_qtype_of(record),
        final_prompt=user,
        answer=answer,
        stages=tuple(clock.stages),
        stage_timings=clock.timings,
    )


def _localize_and_crop(
    record: QARecord, backend: Backend, config: StrategyConfig, clock: _StageClock
) -> tuple[ImageRef, BBox | None]:
    """Localize the question's subject and crop to it.

    Falls back to the full image (bbox None in the transcript) when the
    localizer is unconfident, the box clamps to nothing, or the box spans
    no whole pixel.
    """
    response = clock.run(
        "localize",
        lambda: backend.call(
            BackendRequest(op=Op.LOCALIZE, image=record.image, text_query=record.query)
        ),
    )

    def crop() -> tuple[ImageRef, BBox | None]:
        if response.confidence < config.localizer_conf_floor:
            return record.image, None
        dims = record.image.ensure_dims()
        try:
            clamped = clamp_to_image(response.bbox, dims)
            return crop_region(record.image, clamped), clamped
        except (ClampedToEmpty, ValueError):
            return record.image, None

    return clock.run("crop", crop)


def _retrieve(
    crop_ref: ImageRef, backend: Backend, index: Index, config: StrategyConfig, clock: _StageClock
) -> tuple[RetrievedEntity, ...]:
    response = clock.run("embed", lambda: backend.call(BackendRequest(op=Op.EMBED, image=crop_ref)))
    query_vec = as_embedding(response.embedding, dim=index.dim)
    results = clock.run("search", lambda: index.search(query_vec, config.k))
    kept = clock.run("filter", lambda: filter_by_threshold(results, config.tau))
    entities: list[RetrievedEntity] = []
    for result in kept:
        for entity in index.entities_for(result.image_id):
            entities.append(replace(entity, similarity=result.similarity))
    return tuple(entities)


def _search_context(entities: tuple[RetrievedEntity, ...]) -> str:
    rendered = format_entities(entities)
    return rendered + "\n" if rendered else ""


def run_crop_search(
    record: QARecord, backend: Backend, index: Index, config: StrategyConfig
) -> Transcript:
    """Localize, crop, retrieve on the crop, then answer with the context."""
    clock = _StageClock()
    crop_ref, bbox = _localize_and_crop(record, backend, config, clock)
    entities = _retrieve(crop_ref, backend, index, config, clock)
    system, user = assemble_agent_prompt(_search_context(entities), record.query)
    final_image = crop_ref if config.final_image == "crop" else record.image
    answer = clock.run("answer", lambda: _answer(backend, final_image, system, user))
    return Transcript(
        interaction_id=record.interaction_id,
        strategy=config.variant.value,
        qtype=_qtype_of(record),
        bbox=bbox,
        retrieved=entities,
        final_prompt=user,
        answer=answer,
        stages=tuple(clock.stages),
        stage_timings=clock.timings,
    )


def _summarize(record: QARecord, backend: Backend, clock: _StageClock) -> str | None:
    """ROI summary for the record's question; None if the summarizer fails
    (the run then degrades to plain crop+search)."""
    try:
        cos_system, cos_user = assemble_cos_prompt(record.query)
        response = clock.run(
            "summarize",
            lambda: backend.call(
                BackendRequest(
                    op=Op.SUMMARIZE,
                    image=record.image,
                    system_prompt=cos_system,
                    user_prompt=cos_user,
                )
            ),
        )
        # a blank summary carries nothing worth prepending
        return response.text if response.text.strip() else None
    except GroundsightError:
        return None


def run_cos(
    record: QARecord, backend: Backend, index: Index, config: StrategyConfig
) -> Transcript:
    """Summarize the region of interest first, then crop, retrieve, answer.

    The final user prompt carries the summary on a leading line. If the
    summarizer fails the run degrades to plain crop+search (summary absent
    from prompt and transcript).
    """
    clock = _StageClock()
    summary = _summarize(record, backend, clock)
    crop_ref, bbox = _localize_and_crop(record, backend, config, clock)
    entities = _retrieve(crop_ref, backend, index, config, clock)
    system, user = assemble_agent_prompt(_search_context(entities), record.query)
    if summary is not None:
        user = prepend_roi_summary(user, summary)
    final_image = crop_ref if config.final_image == "crop" else record.image
    answer = clock.run("answer", lambda: _answer(backend, final_image, system, user))
    return Transcript(
        interaction_id=record.interaction_id,
        strategy=config.variant.value,
        qtype=_qtype_of(record),
        roi_summary=summary,
        bbox=bbox,
        retrieved=entities,
        final_prompt=user,
        answer=answer,
        stages=tuple(clock.stages),
        stage_timings=clock.timings,
    )


def run_groundsight(
    record: QARecord, backend: Backend, index: Index, config: StrategyConfig
) -> Transcript:
    """Abstention-gated summarize-and-retrieve flow.

    Policy question types abstain before any backend call; an empty
    post-filter context abstains before the Answer call.
    """
    policy = config.policy
    qtype = _qtype_of(record)
    if policy is not None and qtype in policy.abstain_types:
        return Transcript(
            interaction_id=record.interaction_id,
            strategy=config.variant.value,
            qtype=qtype,
            final_prompt="",
            answer=ABSTAIN_ANSWER,
            stages=("abstain",),
        )

    clock = _StageClock()
    summary = _summarize(record, backend, clock)
    crop_ref, bbox = _localize_and_crop(record, backend, config, clock)
    entities = _retrieve(crop_ref, backend, index, config, clock)
    if not entities and policy is not None and policy.abstain_on_empty_context:
        clock.stages.append("abstain")
        return Transcript(
            interaction_id=record.interaction_id,
            strategy=config.variant.value,
            qtype=qtype,
            roi_summary=summary,
            bbox=bbox,
            retrieved=entities,
            final_prompt="",
            answer=ABSTAIN_ANSWER,
            stages=tuple(clock.stages),
            stage_timings=clock.timings,
        )

    system, user = assemble_agent_prompt(_search_context(entities), record.query)
    if summary is not None:
        user = prepend_roi_summary(user, summary)
    final_image = crop_ref if config.final_image == "crop" else record.image
    answer = clock.run("answer", lambda: _answer(backend, final_image, system, user))
    return Transcript(
        interaction_id=record.interaction_id,
        strategy=config.variant.value,
        qtype=qtype,
        roi_summary=summary,
        bbox=bbox,
        retrieved=entities,
        final_prompt=user,
        answer=answer,
        stages=tuple(clock.stages),
        stage_timings=clock.timings,
    )


def run_record(
    record: QARecord, backend: Backend, index: Index | None, config: StrategyConfig
) -> Transcript:
    """Run one record under the configured strategy.

    Any pipeline-level failure (backend, decode, embedding shape) yields a
    failed transcript answering "I don't know" instead of raising.
    """
    try:
        if config.variant is Strategy.BASELINE:
            return run_baseline(record, backend)
        if index is None:
            raise ParseError(f"strategy {config.variant.value!r} requires an index")
        if config.variant is Strategy.CROP_SEARCH:
            return run_crop_search(record, backend, index, config)
        if config.variant is Strategy.CROP_SEARCH_COS:
            return run_cos(record, backend, index, config)
        return run_groundsight(record, backend, index, config)
    except GroundsightError as exc:
        return Transcript(
            interaction_id=record.interaction_id,
            strategy=config.variant.value,
            qtype=_qtype_of(record),
            final_prompt="",
            answer=ABSTAIN_ANSWER,
            failed=True,
            error=f"{type(exc).__name__}: {exc}",
        )


def run_corpus(
    corpus: Corpus,
    backend: Backend,
    index: Index | None,
    config: StrategyConfig,
    parallelism: int = 1,
) -> list[Transcript]:
    """One transcript per record, in corpus order regardless of schedule.

    Records are independent work units sharing only immutable state, so
    any parallelism yields identical output with deterministic backends.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    if parallelism == 1:
        return [run_record(r, backend, index, config) for r in corpus]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(lambda r: run_record(r, backend, index, config), corpus))


def write_transcripts(path: str | Path, transcripts: Iterable[Transcript]) -> None:
    """Write one JSON record per line, atomically (write then rename)."""
    path = Path(path)
    lines = [
        json.dumps(t.to_json_dict(), ensure_ascii=False) for t in transcripts
    ]
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n" if lines else "", encoding="utf-8")
    os.replace(tmp, path)


def read_transcripts(path: str | Path) -> list[Transcript]:
    out: list[Transcript] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc}", line_no)
            out.append(Transcript.from_json_dict(raw))
    return out
