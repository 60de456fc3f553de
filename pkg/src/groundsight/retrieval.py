"""Embedding index: exact cosine-similarity search over image embeddings.

Embeddings are stored as float32 and compared in float64. Search is an
exact brute-force scan with a deterministic tie-break (descending
similarity, then ascending image_id), so results are reproducible across
runs and machines. The index is immutable after build; concurrent
searches need no locking.

Index file layout (little-endian throughout):

    magic b"GSIX" | version u16 | dim u16 | count u32
    then per entry:
        id_len u16 | id UTF-8 | dim * float32 | payload_len u32 | payload

The payload is the entry's entity list as UTF-8 JSON.
"""

from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimMismatchError,
    DuplicateIdError,
    EmptyIndexError,
    IndexFormatError,
    ZeroNormError,
)

MAGIC = b"GSIX"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sHHI")
_ID_LEN = struct.Struct("<H")
_PAYLOAD_LEN = struct.Struct("<I")


@dataclass(frozen=True)
class RetrievedEntity:
    """Named entity attached to an indexed image.

    attributes preserves insertion order; similarity is None at rest and
    set on entities returned from a search.
    """

    entity_name: str
    attributes: dict[str, str] = field(default_factory=dict)
    similarity: float | None = None

    def __post_init__(self) -> None:
        if not self.entity_name:
            raise ValueError("entity_name must be non-empty")


@dataclass(frozen=True)
class IndexEntry:
    image_id: str
    embedding: np.ndarray
    entities: tuple[RetrievedEntity, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "embedding", as_embedding(self.embedding))
        object.__setattr__(self, "entities", tuple(self.entities))


@dataclass(frozen=True)
class SearchResult:
    image_id: str
    similarity: float


def as_embedding(values: Sequence[float] | np.ndarray, dim: int | None = None) -> np.ndarray:
    """Validate and convert to a float32 vector; finite entries required."""
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"embedding must be a non-empty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("embedding contains NaN or Inf")
    if dim is not None and arr.size != dim:
        raise DimMismatchError(f"embedding has dim {arr.size}, expected {dim}")
    return arr


def cosine_similarity(u: Sequence[float] | np.ndarray, v: Sequence[float] | np.ndarray) -> float:
    """Cosine of the angle between u and v, clamped to [-1, 1].

    Raises:
        DimMismatchError: different lengths.
        ZeroNormError: either vector has norm 0.
    """
    ua = np.asarray(u, dtype=np.float64)
    va = np.asarray(v, dtype=np.float64)
    if ua.shape != va.shape or ua.ndim != 1:
        raise DimMismatchError(f"dims differ: {ua.shape} vs {va.shape}")
    nu = float(np.linalg.norm(ua))
    nv = float(np.linalg.norm(va))
    if nu == 0.0 or nv == 0.0:
        raise ZeroNormError("cosine similarity undefined for zero-norm vector")
    sim = float(np.dot(ua, va) / (nu * nv))
    return max(-1.0, min(1.0, sim))


class Index:
    """Immutable collection of (image_id, embedding, entities) rows."""

    def __init__(self, ids: list[str], matrix: np.ndarray, entities: list[tuple[RetrievedEntity, ...]]):
        self._ids = ids
        self._matrix = matrix  # float32, shape (n, dim)
        self._entities = entities
        self._by_id = {image_id: i for i, image_id in enumerate(ids)}
        # Precomputed float64 norms; build_index guarantees none are zero.
        self._norms = np.linalg.norm(matrix.astype(np.float64), axis=1)

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def dim(self) -> int:
        return self._matrix.shape[1]

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(self._ids)

    def entities_for(self, image_id: str) -> tuple[RetrievedEntity, ...]:
        return self._entities[self._by_id[image_id]]

    def search(self, query: Sequence[float] | np.ndarray, k: int) -> list[SearchResult]:
        """Exact top-k by cosine similarity.

        Returns min(k, len(index)) results sorted by similarity descending,
        ties broken by ascending image_id.
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        q = np.asarray(query, dtype=np.float64)
        if q.ndim != 1 or q.size != self.dim:
            raise DimMismatchError(f"query has dim {q.size}, index has dim {self.dim}")
        if not np.all(np.isfinite(q)):
            raise ValueError("query contains NaN or Inf")
        qnorm = float(np.linalg.norm(q))
        if qnorm == 0.0:
            raise ZeroNormError("cosine similarity undefined for zero-norm query")
        sims = (self._matrix.astype(np.float64) @ q) / (self._norms * qnorm)
        np.clip(sims, -1.0, 1.0, out=sims)
        order = sorted(range(len(self._ids)), key=lambda i: (-sims[i], self._ids[i]))
        return [SearchResult(self._ids[i], float(sims[i])) for i in order[:k]]

    def retrieve(self, query: Sequence[float] | np.ndarray, k: int, tau: float) -> list[RetrievedEntity]:
        """Search, threshold, and flatten the kept images' entities.

        Each returned entity carries the similarity of the image it came
        from. May be empty: the pipeline then runs context-free.
        """
        kept = filter_by_threshold(self.search(query, k), tau)
        out: list[RetrievedEntity] = []
        for result in kept:
            for entity in self.entities_for(result.image_id):
                out.append(replace(entity, similarity=result.similarity))
        return out

    def save(self, path: str | Path) -> None:
        """Persist to the binary index format, atomically (write then rename)."""
        path = Path(path)
        blob = bytearray()
        blob += _HEADER.pack(MAGIC, FORMAT_VERSION, self.dim, len(self._ids))
        for i, image_id in enumerate(self._ids):
            id_bytes = image_id.encode("utf-8")
            if len(id_bytes) > 0xFFFF:
                raise ValueError(f"image_id too long to serialize: {image_id[:40]}...")
            blob += _ID_LEN.pack(len(id_bytes))
            blob += id_bytes
            blob += self._matrix[i].astype("<f4").tobytes()
            payload = json.dumps(
                [
                    {"entity_name": e.entity_name, "attributes": dict(e.attributes)}
                    for e in self._entities[i]
                ],
                ensure_ascii=False,
            ).encode("utf-8")
            blob += _PAYLOAD_LEN.pack(len(payload))
            blob += payload
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(bytes(blob))
        os.replace(tmp, path)


def build_index(entries: Iterable[IndexEntry]) -> Index:
    """Validate entries (uniform dims, unique ids, nonzero norms) and build.

    Zero-norm embeddings are rejected here because every search compares
    the query against every row; one zero row would poison all searches.
    """
    entries = list(entries)
    if not entries:
        raise EmptyIndexError("cannot build an index with no entries")
    dim = entries[0].embedding.size
    ids: list[str] = []
    seen: set[str] = set()
    rows: list[np.ndarray] = []
    entities: list[tuple[RetrievedEntity, ...]] = []
    for entry in entries:
        if entry.embedding.size != dim:
            raise DimMismatchError(
                f"entry {entry.image_id!r} has dim {entry.embedding.size}, expected {dim}"
            )
        if entry.image_id in seen:
            raise DuplicateIdError(entry.image_id)
        if float(np.linalg.norm(entry.embedding.astype(np.float64))) == 0.0:
            raise ZeroNormError(f"entry {entry.image_id!r} has zero-norm embedding")
        seen.add(entry.image_id)
        ids.append(entry.image_id)
        rows.append(entry.embedding)
        entities.append(entry.entities)
    return Index(ids, np.stack(rows), entities)


def load_index(path: str | Path) -> Index:
    """Read an index file; raises IndexFormatError on any malformation."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise IndexFormatError("file too short for header")
    magic, version, dim, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise IndexFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise IndexFormatError(f"unsupported format version {version}")
    if dim == 0:
        raise IndexFormatError("dim must be positive")
    offset = _HEADER.size
    ids: list[str] = []
    rows: list[np.ndarray] = []
    entities: list[tuple[RetrievedEntity, ...]] = []
    vec_bytes = 4 * dim
    for i in range(count):
        try:
            (id_len,) = _ID_LEN.unpack_from(data, offset)
            offset += _ID_LEN.size
            if len(data) < offset + id_len:
                raise IndexFormatError(f"entry {i}: truncated id")
            image_id = data[offset : offset + id_len].decode("utf-8")
            offset += id_len
            if len(data) < offset + vec_bytes:
                raise IndexFormatError(f"entry {i}: truncated embedding")
            vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
            offset += vec_bytes
            (payload_len,) = _PAYLOAD_LEN.unpack_from(data, offset)
            offset += _PAYLOAD_LEN.size
            if len(data) < offset + payload_len:
                raise IndexFormatError(f"entry {i}: truncated payload")
            payload = json.loads(data[offset : offset + payload_len].decode("utf-8"))
            offset += payload_len
        except struct.error:
            raise IndexFormatError(f"entry {i}: truncated record")
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise IndexFormatError(f"entry {i}: {exc}")
        if not isinstance(payload, list):
            raise IndexFormatError(f"entry {i}: payload is not a list")
        ids.append(image_id)
        rows.append(vec)
        entities.append(
            tuple(
                RetrievedEntity(entity_name=e["entity_name"], attributes=dict(e["attributes"]))
                for e in payload
            )
        )
    if offset != len(data):
        raise IndexFormatError(f"{len(data) - offset} trailing bytes after last entry")
    if not ids:
        raise EmptyIndexError("index file holds no entries")
    # Re-run build validation so a corrupt file cannot smuggle in duplicate
    # ids or zero rows.
    return build_index(
        IndexEntry(image_id=i_, embedding=r, entities=e) for i_, r, e in zip(ids, rows, entities)
    )


def filter_by_threshold(results: list[SearchResult], tau: float) -> list[SearchResult]:
    """Keep the leading run of results with similarity >= tau.

    Input must already be sorted descending (as search returns it); the
    result may be empty.
    """
    if math.isnan(tau):
        raise ValueError("tau must not be NaN")
    kept: list[SearchResult] = []
    for r in results:
        if r.similarity >= tau:
            kept.append(r)
        else:
            break
    return kept


def format_entities(entities: Sequence[RetrievedEntity]) -> str:
    """Render entities one per line: ``name: key=value; key=value``.

    Attribute order is preserved; an empty list renders as the empty
    string. This rendering feeds the answer prompt verbatim, so it must
    stay byte-stable.
    """
    lines = []
    for entity in entities:
        rendered = "; ".join(f"{k}={v}" for k, v in entity.attributes.items())
        if rendered:
            lines.append(f"{entity.entity_name}: {rendered}")
        else:
            lines.append(f"{entity.entity_name}:")
    return "\n".join(lines)
