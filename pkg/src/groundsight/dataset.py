"""Single-turn QA corpus ingestion.

Corpus files are UTF-8 JSON Lines, one record per line:

    {"interaction_id": "...", "query": "...", "ground_truth": "...",
     "image_path": "..."}            # or "image_b64": "..."
     # optional: "question_type": "who" | "color" | ...

Unknown fields are ignored with a warning. A loaded corpus is immutable and
safe to share between concurrent pipeline workers.
"""

from __future__ import annotations

import base64
import binascii
import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .errors import DuplicateIdError, ParseError
from .images import ImageRef
from .question_policy import QuestionType

logger = logging.getLogger(__name__)

_KNOWN_FIELDS = {"interaction_id", "query", "ground_truth", "image_path", "image_b64", "question_type"}

# Published sizes of the two official corpus versions; loading under one of
# these tags enforces the matching record count.
EXPECTED_COUNTS = {"v1": 1548, "v2": 1938}


@dataclass(frozen=True)
class QARecord:
    """One single-turn interaction: a question about an image plus its answer."""

    interaction_id: str
    query: str
    image: ImageRef
    ground_truth: str
    question_type: QuestionType | None = None


@dataclass(frozen=True)
class Corpus:
    """An ordered, immutable collection of QA records."""

    records: tuple[QARecord, ...]
    version_tag: str

    def __post_init__(self) -> None:
        if not self.records:
            raise ParseError("empty corpus")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[QARecord]:
        return iter(self.records)


def _parse_record(raw: dict, line_no: int, base_dir: Path) -> QARecord:
    for key in ("interaction_id", "query", "ground_truth"):
        value = raw.get(key)
        if not isinstance(value, str):
            raise ParseError(f"missing or non-string field {key!r}", line_no)
    interaction_id = raw["interaction_id"]
    query = raw["query"].strip()
    ground_truth = raw["ground_truth"].strip()
    if not query:
        raise ParseError("field 'query' is empty", line_no)
    if not ground_truth:
        raise ParseError("field 'ground_truth' is empty", line_no)

    has_path = isinstance(raw.get("image_path"), str)
    has_b64 = isinstance(raw.get("image_b64"), str)
    if has_path == has_b64:
        raise ParseError("exactly one of 'image_path' or 'image_b64' required", line_no)
    if has_path:
        path = Path(raw["image_path"])
        if not path.is_absolute():
            path = base_dir / path
        image = ImageRef(image_id=interaction_id, path=path)
    else:
        try:
            data = base64.b64decode(raw["image_b64"], validate=True)
        except (binascii.Error, ValueError) as exc:
            raise ParseError(f"field 'image_b64' is not valid base64: {exc}", line_no)
        image = ImageRef(image_id=interaction_id, data=data)

    question_type = None
    if raw.get("question_type") is not None:
        try:
            question_type = QuestionType(raw["question_type"])
        except ValueError:
            raise ParseError(f"unknown question_type {raw['question_type']!r}", line_no)

    unknown = set(raw) - _KNOWN_FIELDS
    if unknown:
        logger.warning("line %d: ignoring unknown fields %s", line_no, sorted(unknown))

    return QARecord(
        interaction_id=interaction_id,
        query=query,
        image=image,
        ground_truth=ground_truth,
        question_type=question_type,
    )


def load_corpus(path: str | Path, version_tag: str = "custom") -> Corpus:
    """Load and validate a JSONL corpus file, preserving record order.

    Relative image paths are resolved against the corpus file's directory.

    Raises:
        ParseError: malformed line, missing field, or (for the "v1"/"v2"
            tags) a record count that contradicts the tag.
        DuplicateIdError: repeated interaction_id.
    """
    path = Path(path)
    records: list[QARecord] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc}", line_no)
            if not isinstance(raw, dict):
                raise ParseError("record is not an object", line_no)
            record = _parse_record(raw, line_no, path.parent)
            if record.interaction_id in seen:
                raise DuplicateIdError(record.interaction_id)
            seen.add(record.interaction_id)
            records.append(record)
    if not records:
        raise ParseError("empty corpus")
    expected = EXPECTED_COUNTS.get(version_tag)
    if expected is not None and len(records) != expected:
        raise ParseError(
            f"corpus tagged {version_tag!r} must have {expected} records, found {len(records)}"
        )
    return Corpus(records=tuple(records), version_tag=version_tag)


def split(corpus: Corpus, fraction: float, seed: int) -> tuple[Corpus, Corpus]:
    """Deterministically partition a corpus into two disjoint, non-empty parts.

    The first part receives round(n * fraction) records, clamped to
    [1, n - 1] so neither side is ever empty. Records keep their original
    corpus order within each part. Requires at least two records.
    """
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    n = len(corpus)
    if n < 2:
        raise ValueError("cannot split a corpus with fewer than 2 records")
    n_first = min(max(round(n * fraction), 1), n - 1)
    indices = list(range(n))
    random.Random(seed).shuffle(indices)
    chosen = set(indices[:n_first])
    first = tuple(r for i, r in enumerate(corpus.records) if i in chosen)
    second = tuple(r for i, r in enumerate(corpus.records) if i not in chosen)
    return (
        Corpus(records=first, version_tag=corpus.version_tag),
        Corpus(records=second, version_tag=corpus.version_tag),
    )


def convert_records(rows: Iterator[dict] | list[dict]) -> Iterator[dict]:
    """Map records from common external key spellings onto the corpus schema.

    Plumbing for third-party dumps whose field names differ ("id" for
    "interaction_id", "question" for "query", "answer" for "ground_truth",
    "image" for "image_path"). Values pass through untouched; unknown keys
    are kept for load-time warnings.
    """
    aliases = {
        "id": "interaction_id",
        "question": "query",
        "answer": "ground_truth",
        "image": "image_path",
    }
    for row in rows:
        converted = {k: v for k, v in row.items() if k not in aliases}
        for key, target in aliases.items():
            if key in row and target not in converted:
                converted[target] = row[key]
        yield converted
