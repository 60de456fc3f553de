"""Question taxonomy and abstention policy.

Classification is a fixed, auditable rule table rather than a learned model:
the first matching rule in precedence order wins, so every query maps to
exactly one type and repeated calls always agree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

# An abstaining strategy must answer with exactly this string, nothing else.
ABSTAIN_ANSWER = "I don't know"


class QuestionType(str, Enum):
    WHO = "who"
    COLOR = "color"
    COUNTING = "counting"
    LOCATION = "location"
    OBJECT_RECOGNITION = "object_recognition"
    REASONING = "reasoning"
    YES_NO = "yes_no"
    OTHER = "other"


def parse_question_type(value: str) -> QuestionType:
    """Parse a user-supplied type name, tolerating case and ``-`` for ``_``."""
    normalized = value.strip().lower().replace("-", "_")
    try:
        return QuestionType(normalized)
    except ValueError:
        valid = ", ".join(t.value for t in QuestionType)
        raise ValueError(f"unknown question type {value!r} (valid: {valid})")


_WHO_STARTS = {"who", "whose", "whom"}
_YESNO_STARTS = {"is", "are", "does", "do", "can", "did", "was", "were"}


def classify(query: str) -> QuestionType:
    """Assign a question type by the first matching rule, in fixed order.

    Precedence: Who, YesNo, Counting, Color, Location, Reasoning,
    ObjectRecognition, Other. Matching is case-insensitive.
    """
    if not query.strip():
        raise ValueError("query must be non-empty")
    norm = query.strip().lower()
    # Leading token = first alphabetic run, so quotes or brackets around a
    # question do not change its class.
    match = re.search(r"[a-z]+", norm)
    first = match.group(0) if match else ""

    if first in _WHO_STARTS:
        return QuestionType.WHO
    if first in _YESNO_STARTS:
        return QuestionType.YES_NO
    if "how many" in norm or "how much" in norm or "count" in norm:
        return QuestionType.COUNTING
    if "color" in norm or "colour" in norm:
        return QuestionType.COLOR
    if first == "where" or "located" in norm:
        return QuestionType.LOCATION
    if first == "why" or first == "when" or norm.startswith("how old") or "how does" in norm:
        return QuestionType.REASONING
    if first in ("what", "which"):
        return QuestionType.OBJECT_RECOGNITION
    return QuestionType.OTHER


@dataclass(frozen=True)
class AbstentionPolicy:
    """Which question types to refuse, and whether to refuse on empty context."""

    abstain_types: frozenset[QuestionType] = field(default_factory=frozenset)
    abstain_on_empty_context: bool = False

    def __post_init__(self) -> None:
        # Tolerate plain sets from callers; normalize to frozenset.
        if not isinstance(self.abstain_types, frozenset):
            object.__setattr__(self, "abstain_types", frozenset(self.abstain_types))
        for t in self.abstain_types:
            if not isinstance(t, QuestionType):
                raise TypeError(f"abstain_types must contain QuestionType, got {t!r}")

    @classmethod
    def from_names(cls, names: list[str] | str, abstain_on_empty_context: bool = False) -> "AbstentionPolicy":
        """Build a policy from type names, e.g. ``"who,reasoning"``."""
        if isinstance(names, str):
            names = [n for n in names.split(",") if n.strip()]
        return cls(
            abstain_types=frozenset(parse_question_type(n) for n in names),
            abstain_on_empty_context=abstain_on_empty_context,
        )


# Default policy for the full pipeline: refuse identity and reasoning
# questions outright, and refuse anything once retrieval comes back empty.
DEFAULT_POLICY = AbstentionPolicy(
    abstain_types=frozenset({QuestionType.WHO, QuestionType.REASONING}),
    abstain_on_empty_context=True,
)


def should_abstain(qtype: QuestionType, policy: AbstentionPolicy, context_empty: bool) -> bool:
    """True when the policy mandates answering exactly ``ABSTAIN_ANSWER``."""
    if qtype in policy.abstain_types:
        return True
    return context_empty and policy.abstain_on_empty_context
