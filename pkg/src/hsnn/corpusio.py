"""On-disk artifacts: binary vector logs, token indices, vocabularies, parses.

Formats
-------
vector log   binary: magic ``HSV1``, little-endian u32 dim, u64 count, then
             count x dim float32, row-major. No padding, no trailing bytes.
token index  UTF-8 TSV with header
             ``row_id sentence_id token_id surface origin_word pos``;
             one row per vector, row_id a permutation of 0..count-1.
vocab        UTF-8 TSV ``row_id token_type``, row_id sequential from 0.
parses       one bracketed tree per line, line number == sentence_id;
             an empty line marks a sentence without a parse.

All indices are 0-based. Loaded structures are immutable and safe to share
across threads.
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AlignmentFailure,
    BadMagic,
    DuplicatePosition,
    EmptyInput,
    HeaderMismatch,
    MalformedRow,
    NonFiniteValue,
    RowCountMismatch,
)

MAGIC = b"HSV1"
_HEADER = struct.Struct("<4sIQ")

TOKEN_INDEX_COLUMNS = ("row_id", "sentence_id", "token_id", "surface", "origin_word", "pos")

DEFAULT_MARKER = "@@"


@dataclass(frozen=True)
class VectorSet:
    """Dense float32 matrix of logged representations."""

    dim: int
    count: int
    data: np.ndarray  # (count, dim) float32, read-only

    def row(self, r: int) -> np.ndarray:
        return self.data[r]


@dataclass(frozen=True)
class TokenOccurrence:
    row_id: int
    sentence_id: int
    token_id: int
    surface: str
    origin_word: str
    pos: str


@dataclass(frozen=True)
class OccurrenceTable:
    """Per-row token metadata, ordered and indexable by row_id."""

    occurrences: tuple[TokenOccurrence, ...]
    sentence_lengths: dict[int, int]

    def __len__(self) -> int:
        return len(self.occurrences)

    def occurrence(self, row_id: int) -> TokenOccurrence:
        return self.occurrences[row_id]

    @property
    def sentence_count(self) -> int:
        return len(self.sentence_lengths)

    def support_counts(self) -> np.ndarray:
        """|S_{l(s) >= j}| for 1-based j; entry [j-1] counts sentences of length >= j.

        Non-increasing by construction; sums to the total token count.
        """
        if not self.sentence_lengths:
            return np.zeros(0, dtype=np.int64)
        lengths = np.fromiter(self.sentence_lengths.values(), dtype=np.int64)
        hist = np.bincount(lengths)  # hist[L] = sentences of length L; L >= 1 always
        shorter = np.cumsum(hist[:-1])  # shorter[j-1] = sentences of length < j
        return lengths.size - shorter


@dataclass(frozen=True)
class SegmentMap:
    """Maps each BPE segment position of one sentence to its word index."""

    segment_to_word: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.segment_to_word)

    def word_of(self, segment_index: int) -> int:
        return self.segment_to_word[segment_index]


@dataclass(frozen=True)
class QuerySet:
    """Row ids whose surface-type frequency falls inside the configured band."""

    rows: frozenset[int]
    min_freq: int
    max_freq: int

    def __len__(self) -> int:
        return len(self.rows)

    def sorted_rows(self) -> np.ndarray:
        return np.array(sorted(self.rows), dtype=np.int64)


# --- vector log ----------------------------------------------------------------

def load_vector_log(path) -> VectorSet:
    """Read a binary vector log, validating header, size, and finiteness."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size or blob[:4] != MAGIC:
        raise BadMagic(f"{path}: expected magic {MAGIC!r}")
    _, dim, count = _HEADER.unpack_from(blob)
    if dim < 1:
        raise HeaderMismatch(f"{path}: dim must be positive, got {dim}")
    expected = _HEADER.size + 4 * dim * count
    if len(blob) != expected:
        raise HeaderMismatch(
            f"{path}: header declares {dim}x{count} ({expected} bytes), file has {len(blob)} bytes"
        )
    data = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(count, dim)
    bad = ~np.isfinite(data)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise NonFiniteValue(int(r), int(c))
    data.flags.writeable = False
    return VectorSet(dim=int(dim), count=int(count), data=data)


def write_vector_log(path, data: np.ndarray) -> None:
    """Write a (count, dim) array as a vector log; values are cast to float32."""
    arr = np.ascontiguousarray(data, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {arr.shape}")
    count, dim = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, dim, count))
        fh.write(arr.tobytes())


# --- token index -----------------------------------------------------------------

def load_token_index(path, vectors: VectorSet) -> OccurrenceTable:
    """Read the token index TSV and verify it is a bijection onto vector rows."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if tuple(header.split("\t")) != TOKEN_INDEX_COLUMNS:
            raise MalformedRow(1, f"bad header {header!r}")
        slots: list[TokenOccurrence | None] = [None] * vectors.count
        positions: set[tuple[int, int]] = set()
        n_rows = 0
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 6:
                raise MalformedRow(line_no, f"expected 6 fields, got {len(parts)}")
            try:
                row_id, sentence_id, token_id = int(parts[0]), int(parts[1]), int(parts[2])
            except ValueError as exc:
                raise MalformedRow(line_no, str(exc)) from None
            if min(row_id, sentence_id, token_id) < 0:
                raise MalformedRow(line_no, "negative index")
            surface, origin_word, pos = parts[3], parts[4], parts[5]
            if not surface or not origin_word or not pos:
                raise MalformedRow(line_no, "empty field")
            n_rows += 1
            if n_rows > vectors.count:
                raise RowCountMismatch(
                    f"{path}: more than {vectors.count} rows for {vectors.count} vectors"
                )
            if row_id >= vectors.count:
                raise MalformedRow(line_no, f"row_id {row_id} out of range for count {vectors.count}")
            if slots[row_id] is not None:
                raise MalformedRow(line_no, f"duplicate row_id {row_id}")
            if (sentence_id, token_id) in positions:
                raise DuplicatePosition(sentence_id, token_id)
            positions.add((sentence_id, token_id))
            slots[row_id] = TokenOccurrence(row_id, sentence_id, token_id, surface, origin_word, pos)
    if n_rows != vectors.count:
        raise RowCountMismatch(f"{path}: {n_rows} rows for {vectors.count} vectors")
    occurrences = tuple(slots)  # type: ignore[arg-type]
    lengths: dict[int, int] = {}
    for occ in occurrences:
        cur = lengths.get(occ.sentence_id, 0)
        if occ.token_id + 1 > cur:
            lengths[occ.sentence_id] = occ.token_id + 1
    return OccurrenceTable(occurrences=occurrences, sentence_lengths=lengths)


def write_token_index(path, occurrences) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(TOKEN_INDEX_COLUMNS) + "\n")
        for occ in occurrences:
            fh.write(
                f"{occ.row_id}\t{occ.sentence_id}\t{occ.token_id}\t"
                f"{occ.surface}\t{occ.origin_word}\t{occ.pos}\n"
            )


# --- embedding vocabulary -----------------------------------------------------------

def load_embedding_vocab(path) -> list[str]:
    """Read the ``row_id\ttoken_type`` TSV; row ids must be sequential from 0."""
    vocab: list[str] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise MalformedRow(line_no, f"expected 2 fields, got {len(parts)}")
            try:
                row_id = int(parts[0])
            except ValueError as exc:
                raise MalformedRow(line_no, str(exc)) from None
            if row_id != len(vocab):
                raise MalformedRow(line_no, f"row_id {row_id}, expected {len(vocab)}")
            token_type = parts[1]
            if not token_type:
                raise MalformedRow(line_no, "empty token type")
            if token_type in seen:
                raise MalformedRow(line_no, f"duplicate token type {token_type!r}")
            seen.add(token_type)
            vocab.append(token_type)
    return vocab


def write_embedding_vocab(path, vocab) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row_id, token_type in enumerate(vocab):
            fh.write(f"{row_id}\t{token_type}\n")


def load_parse_lines(path) -> list[str | None]:
    """One bracketed tree per line; blank lines mean 'no parse for this sentence'."""
    lines: list[str | None] = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            stripped = raw.strip()
            lines.append(stripped if stripped else None)
    return lines


# --- BPE alignment ----------------------------------------------------------------

def align_bpe(words, segments, marker: str = DEFAULT_MARKER) -> SegmentMap:
    """Map BPE segments (continuation-marker convention) back onto their words.

    A segment ending in ``marker`` continues its word; a segment without the
    marker must close it. Any mismatch against the character stream of
    ``words`` raises AlignmentFailure.
    """
    if not words or not segments:
        raise EmptyInput("align_bpe needs at least one word and one segment")
    mapping: list[int] = []
    word_idx = 0
    consumed = 0  # chars of words[word_idx] already matched
    for seg_no, segment in enumerate(segments):
        continued = segment.endswith(marker) and len(segment) > len(marker)
        piece = segment[: -len(marker)] if continued else segment
        if not piece:
            raise AlignmentFailure(f"segment {seg_no} is empty after stripping {marker!r}")
        if word_idx >= len(words):
            raise AlignmentFailure(f"segment {seg_no} ({segment!r}) extends past the last word")
        word = words[word_idx]
        if word[consumed : consumed + len(piece)] != piece:
            raise AlignmentFailure(
                f"segment {seg_no} ({segment!r}) does not match word {word_idx} ({word!r}) at offset {consumed}"
            )
        mapping.append(word_idx)
        consumed += len(piece)
        if consumed == len(word):
            if continued:
                raise AlignmentFailure(
                    f"segment {seg_no} ({segment!r}) is marked as continuing but ends word {word_idx} ({word!r})"
                )
            word_idx += 1
            consumed = 0
        elif not continued:
            raise AlignmentFailure(
                f"segment {seg_no} ({segment!r}) ends mid-word {word_idx} ({word!r}) without a marker"
            )
    if word_idx != len(words):
        raise AlignmentFailure(f"segments cover {word_idx} of {len(words)} words")
    return SegmentMap(segment_to_word=tuple(mapping))


# --- frequency band ------------------------------------------------------------------

def apply_frequency_band(table: OccurrenceTable, min_freq: int, max_freq: int) -> QuerySet:
    """Select rows whose surface-type frequency in this corpus lies in [min, max]."""
    if min_freq > max_freq:
        raise ValueError(f"min_freq {min_freq} > max_freq {max_freq}")
    freq = Counter(occ.surface for occ in table.occurrences)
    rows = frozenset(
        occ.row_id for occ in table.occurrences if min_freq <= freq[occ.surface] <= max_freq
    )
    return QuerySet(rows=rows, min_freq=min_freq, max_freq=max_freq)
