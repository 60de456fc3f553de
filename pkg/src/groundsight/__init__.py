"""Grounded retrieval-augmented visual question answering.

The pipeline localizes the image region a question is about, retrieves
similar images from an embedding index, and answers with the retrieved
entity context, with optional region summarization and question-type
abstention. An evaluation harness grades answers and computes
truthfulness metrics. All learned models sit behind one backend
interface with deterministic scripted mocks for testing.
"""

__version__ = "0.1.0"

from .backends import (
    Backend,
    BackendRequest,
    BackendResponse,
    Op,
    RemoteBackend,
    ScriptedMock,
    call_judge,
)
from .dataset import Corpus, QARecord, load_corpus, split
from .errors import GroundsightError
from .evaluation import (
    Grade,
    MetricsReport,
    compute_metrics,
    exact_match,
    fallback_judge,
    grade_answer,
    grade_transcripts,
    render_report,
)
from .geometry import BBox, ImageDims, clamp_to_image, intersect, iou
from .images import ImageRef, crop_region
from .pipeline import (
    Strategy,
    StrategyConfig,
    Transcript,
    run_corpus,
    run_record,
)
from .question_policy import (
    ABSTAIN_ANSWER,
    AbstentionPolicy,
    DEFAULT_POLICY,
    QuestionType,
    classify,
    should_abstain,
)
from .retrieval import (
    Index,
    IndexEntry,
    RetrievedEntity,
    build_index,
    cosine_similarity,
    filter_by_threshold,
    format_entities,
    load_index,
)

__all__ = [
    "ABSTAIN_ANSWER",
    "AbstentionPolicy",
    "BBox",
    "Backend",
    "BackendRequest",
    "BackendResponse",
    "Corpus",
    "DEFAULT_POLICY",
    "Grade",
    "GroundsightError",
    "ImageDims",
    "ImageRef",
    "Index",
    "IndexEntry",
    "MetricsReport",
    "Op",
    "QARecord",
    "QuestionType",
    "RemoteBackend",
    "RetrievedEntity",
    "ScriptedMock",
    "Strategy",
    "StrategyConfig",
    "Transcript",
    "build_index",
    "call_judge",
    "clamp_to_image",
    "classify",
    "compute_metrics",
    "cosine_similarity",
    "crop_region",
    "exact_match",
    "fallback_judge",
    "filter_by_threshold",
    "format_entities",
    "grade_answer",
    "grade_transcripts",
    "intersect",
    "iou",
    "load_corpus",
    "load_index",
    "render_report",
    "run_corpus",
    "run_record",
    "should_abstain",
    "split",
    "__version__",
]
