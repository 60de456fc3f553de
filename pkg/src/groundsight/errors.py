"""Exception types shared across the package.

The CLI maps these onto exit codes: anything derived from GroundsightError
is a data error (exit 1); bad invocations are usage errors (exit 2).
"""

from __future__ import annotations


class GroundsightError(Exception):
    """Base class for all errors raised by this package."""


# --- geometry / images ---------------------------------------------------


class ClampedToEmpty(GroundsightError):
    """Clipping a box to the image frame left nothing (zero area).

    Callers treat this as a signal to fall back to the full image.
    """


class DecodeError(GroundsightError):
    """Image bytes could not be decoded."""


# --- dataset -------------------------------------------------------------


class ParseError(GroundsightError):
    """A corpus file (or one of its lines) failed validation."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class DuplicateIdError(GroundsightError):
    """An id that must be unique appeared more than once."""

    def __init__(self, duplicate_id: str):
        self.duplicate_id = duplicate_id
        super().__init__(f"duplicate id: {duplicate_id!r}")


# --- retrieval -----------------------------------------------------------


class DimMismatchError(GroundsightError):
    """Vector dimensions disagree."""


class ZeroNormError(GroundsightError):
    """Cosine similarity is undefined for a zero-norm vector."""


class EmptyIndexError(GroundsightError):
    """An index cannot be built from zero entries."""


class IndexFormatError(GroundsightError):
    """An index file is corrupt or not an index file at all."""


# --- backends ------------------------------------------------------------


class BackendError(GroundsightError):
    """Base class for model-backend failures."""


class ProtocolError(BackendError):
    """A backend response violated the wire schema."""


class TransportError(BackendError):
    """The backend was unreachable or timed out after all retries."""


class BackendRefusal(BackendError):
    """The backend returned a structured error object."""

    def __init__(self, code: str, message: str, status: int | None = None):
        self.code = code
        self.status = status
        super().__init__(f"{code}: {message}")


class JudgeParseError(BackendError):
    """The judge response did not contain a usable accuracy verdict."""


# --- evaluation ----------------------------------------------------------


class EmptyInputError(GroundsightError):
    """Metrics cannot be computed over zero grades."""
