"""Answer grading and truthfulness metrics.

Grading prefers the LLM judge behind the backend boundary; when the judge
is unreachable or returns garbage, a deterministic lexical judge takes
over and the item is flagged, so offline evaluation always completes.

Scores: Perfect 1.0, Acceptable 0.5, Missing 0.0, Incorrect -1.0. The
truthfulness score is the mean score over the set; accuracy, missing rate,
and hallucination rate are the Perfect(+Acceptable), Missing, and
Incorrect percentages.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources

from .backends import Backend, call_judge
from .errors import BackendError, EmptyInputError, ParseError
from .question_policy import ABSTAIN_ANSWER, QuestionType

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def _load_stopwords() -> frozenset[str]:
    text = resources.files("groundsight").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(w for w in text.split() if w)


STOPWORDS = _load_stopwords()


class Grade(str, Enum):
    PERFECT = "perfect"
    ACCEPTABLE = "acceptable"
    MISSING = "missing"
    INCORRECT = "incorrect"

    @property
    def score(self) -> float:
        return _SCORES[self]


_SCORES = {
    Grade.PERFECT: 1.0,
    Grade.ACCEPTABLE: 0.5,
    Grade.MISSING: 0.0,
    Grade.INCORRECT: -1.0,
}


@dataclass(frozen=True)
class GradeResult:
    grade: Grade
    fallback: bool  # true when the lexical judge decided, not the LLM judge


@dataclass(frozen=True)
class GradedItem:
    """One grade-log record."""

    interaction_id: str
    qtype: QuestionType
    grade: Grade
    exact: bool
    fallback: bool


def _tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def fallback_judge(query: str, ground_truth: str, prediction: str) -> bool:
    """Deterministic lexical judge: every content token of the ground truth
    (stop-words removed) must appear in the prediction.

    A ground truth made only of stop-words is vacuously matched; the
    identity fallback_judge(gt, gt) = true holds for any non-empty gt.
    """
    if not ground_truth.strip():
        raise ValueError("ground_truth must be non-empty")
    pred_tokens = set(_tokens(prediction))
    content = [t for t in _tokens(ground_truth) if t not in STOPWORDS]
    return all(t in pred_tokens for t in content)


def exact_match(prediction: str, ground_truth: str) -> bool:
    """Full-string equality after lexical normalization (not containment)."""
    return _tokens(prediction) == _tokens(ground_truth)


def grade_answer(
    judge_backend: Backend,
    query: str,
    ground_truth: str,
    prediction: str,
    acceptable_enabled: bool = False,
) -> GradeResult:
    """Grade one prediction.

    An exact "I don't know" (after trim) is Missing with no judge call.
    Otherwise the judge's verdict maps true -> Perfect, false -> Incorrect;
    any judge failure falls back to the lexical judge and flags the item.

    acceptable_enabled keeps the Acceptable(0.5) rubric slot reachable for
    judge backends with graded output; the binary wire judge never
    produces it, so with that judge the flag is inert.
    """
    del acceptable_enabled  # reserved for graded judges; see docstring
    if not ground_truth.strip():
        raise ValueError("ground_truth must be non-empty")
    if prediction.strip() == ABSTAIN_ANSWER:
        return GradeResult(grade=Grade.MISSING, fallback=False)
    try:
        verdict = call_judge(judge_backend, query, ground_truth, prediction)
        used_fallback = False
    except BackendError:
        verdict = fallback_judge(query, ground_truth, prediction)
        used_fallback = True
    grade = Grade.PERFECT if verdict else Grade.INCORRECT
    return GradeResult(grade=grade, fallback=used_fallback)


@dataclass(frozen=True)
class MetricsReport:
    """Aggregate metrics; rates are unrounded percents, display rounds."""

    total: int
    n_perfect: int
    n_acceptable: int
    n_missing: int
    n_incorrect: int
    exact_acc: float
    accuracy: float
    missing_rate: float
    hallucination_rate: float
    truthfulness: float
    by_type: dict[QuestionType, "MetricsReport"] = field(default_factory=dict)

    def format_row(self) -> str:
        """The four headline numbers as displayed: 2-decimal percents, 4-decimal score."""
        return (
            f"{self.accuracy:.2f} | {self.missing_rate:.2f} | "
            f"{self.hallucination_rate:.2f} | {self.truthfulness:.4f}"
        )


def compute_metrics(grades: list[tuple[QuestionType, Grade, bool]]) -> MetricsReport:
    """Fold a grade multiset into a MetricsReport.

    Order-insensitive; by_type partitions the same items per question type
    (empty types omitted). Raises EmptyInputError on an empty list.
    """
    if not grades:
        raise EmptyInputError("cannot compute metrics over zero grades")
    report = _fold(grades)
    by_type: dict[QuestionType, MetricsReport] = {}
    for qtype in QuestionType:
        bucket = [g for g in grades if g[0] is qtype]
        if bucket:
            by_type[qtype] = _fold(bucket)
    return replace(report, by_type=by_type)


def _fold(grades: list[tuple[QuestionType, Grade, bool]]) -> MetricsReport:
    total = len(grades)
    counts = {g: 0 for g in Grade}
    n_exact = 0
    for _, grade, exact in grades:
        counts[grade] += 1
        if exact:
            n_exact += 1
    n_perfect = counts[Grade.PERFECT]
    n_acceptable = counts[Grade.ACCEPTABLE]
    n_missing = counts[Grade.MISSING]
    n_incorrect = counts[Grade.INCORRECT]
    score_sum = sum(grade.score * n for grade, n in counts.items())
    return MetricsReport(
        total=total,
        n_perfect=n_perfect,
        n_acceptable=n_acceptable,
        n_missing=n_missing,
        n_incorrect=n_incorrect,
        exact_acc=100.0 * n_exact / total,
        accuracy=100.0 * (n_perfect + n_acceptable) / total,
        missing_rate=100.0 * n_missing / total,
        hallucination_rate=100.0 * n_incorrect / total,
        truthfulness=score_sum / total,
    )


def grade_transcripts(
    transcripts,
    records_by_id: dict,
    judge_backend: Backend,
    parallelism: int = 1,
    acceptable_enabled: bool = False,
) -> list[GradedItem]:
    """Grade a transcript list against its corpus, preserving order.

    Judge calls fan out across threads; aggregation is a pure fold so the
    result is independent of completion order.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")

    def one(transcript) -> GradedItem:
        record = records_by_id.get(transcript.interaction_id)
        if record is None:
            raise ParseError(f"transcript {transcript.interaction_id!r} has no corpus record")
        result = grade_answer(
            judge_backend,
            record.query,
            record.ground_truth,
            transcript.answer,
            acceptable_enabled=acceptable_enabled,
        )
        return GradedItem(
            interaction_id=transcript.interaction_id,
            qtype=transcript.qtype,
            grade=result.grade,
            exact=exact_match(transcript.answer, record.ground_truth),
            fallback=result.fallback,
        )

    if parallelism == 1:
        return [one(t) for t in transcripts]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, transcripts))


def metrics_to_dict(report: MetricsReport) -> dict:
    """JSON-ready form; rates stay unrounded so round-trips are lossless."""
    out = {
        "total": report.total,
        "n_perfect": report.n_perfect,
        "n_acceptable": report.n_acceptable,
        "n_missing": report.n_missing,
        "n_incorrect": report.n_incorrect,
        "exact_acc": report.exact_acc,
        "accuracy": report.accuracy,
        "missing_rate": report.missing_rate,
        "hallucination_rate": report.hallucination_rate,
        "truthfulness": report.truthfulness,
    }
    if report.by_type:
        out["by_type"] = {
            qtype.value: metrics_to_dict(sub) for qtype, sub in report.by_type.items()
        }
    return out


def metrics_from_dict(raw: dict) -> MetricsReport:
    try:
        by_type = {
            QuestionType(name): metrics_from_dict(sub)
            for name, sub in (raw.get("by_type") or {}).items()
        }
        return MetricsReport(
            total=int(raw["total"]),
            n_perfect=int(raw["n_perfect"]),
            n_acceptable=int(raw["n_acceptable"]),
            n_missing=int(raw["n_missing"]),
            n_incorrect=int(raw["n_incorrect"]),
            exact_acc=float(raw["exact_acc"]),
            accuracy=float(raw["accuracy"]),
            missing_rate=float(raw["missing_rate"]),
            hallucination_rate=float(raw["hallucination_rate"]),
            truthfulness=float(raw["truthfulness"]),
            by_type=by_type,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed metrics record: {exc}")


_BAR_WIDTH = 20


def render_report(rows: list[tuple[str, MetricsReport]]) -> str:
    """Render strategy rows in the published column layout plus per-type bars.

    Columns: Total conv. | Total turns | Exact acc. | Accuracy | Missing
    rate | Hallucination rate | Truthfulness score. Corpora here are
    single-turn, so conversations equal turns.
    """
    if not rows:
        raise EmptyInputError("no metrics rows to render")
    header = (
        "strategy | Total conv. | Total turns | Exact acc. (%) | Accuracy (%) | "
        "Missing rate (%) | Hallucination rate (%) | Truthfulness score"
    )
    lines = [header, "-" * len(header)]
    for label, m in rows:
        lines.append(
            f"{label} | {m.total} | {m.total} | {m.exact_acc:.2f} | {m.format_row()}"
        )
    for label, m in rows:
        if not m.by_type:
            continue
        lines.append("")
        lines.append(f"{label}: accuracy by question type")
        for qtype, sub in m.by_type.items():
            filled = round(_BAR_WIDTH * sub.accuracy / 100.0)
            bar = "#" * filled + "." * (_BAR_WIDTH - filled)
            lines.append(f"  {qtype.value:<18} {bar} {sub.accuracy:6.2f}%  (n={sub.total})")
    return "\n".join(lines) + "\n"
