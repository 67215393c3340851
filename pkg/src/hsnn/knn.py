"""Exact cosine-similarity nearest neighbors over occurrences and types.

The scan is exact but two-pass: a float32 prefilter (row-normalized matrix
product, blocked over queries) collects every candidate within a safety
margin of the per-query n-th best score, and the shortlist is rescored with
the reference formula — float64 dot over the raw float32 inputs divided by
float64 norms — before the final ranking. The margin (1e-3) is two orders of
magnitude above the worst-case float32/float64 divergence for unit vectors
at these dimensionalities, so the float64 top-n always survives the filter.

Ordering is fully deterministic: descending score, then ascending
(sentence_id, token_id) for occurrences, ascending type string for types.
Query blocks have a fixed size, so results do not depend on the thread
count.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .corpusio import OccurrenceTable, QuerySet, VectorSet
from .errors import (
    DimensionMismatch,
    SizeMismatch,
    UnknownType,
    UnqueryableRow,
    ZeroVector,
)

SAME_TYPE = "same-type"
SELF_ONLY = "self-only"
EXCLUSION_POLICIES = (SAME_TYPE, SELF_ONLY)

PREFILTER_MARGIN = np.float32(1e-3)
BLOCK_ROWS = 256
_MASKED = np.float32(-2.0)  # sentinel below any real cosine


def cosine(u, v) -> float:
    """u.v / (|u| |v|), accumulated in float64, clamped to [-1, 1]."""
    u64 = np.asarray(u, dtype=np.float64).ravel()
    v64 = np.asarray(v, dtype=np.float64).ravel()
    if u64.shape != v64.shape:
        raise DimensionMismatch(f"dims {u64.shape[0]} vs {v64.shape[0]}")
    nu = float(np.linalg.norm(u64))
    nv = float(np.linalg.norm(v64))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine undefined for zero-norm vector")
    score = float(np.dot(u64, v64)) / (nu * nv)
    return min(1.0, max(-1.0, score))


@dataclass(frozen=True)
class NeighborList:
    """Ranked neighbors of one occurrence; truncated=True marks a short list."""

    query: int
    neighbor_rows: np.ndarray  # int64
    scores: np.ndarray  # float64, non-increasing
    truncated: bool

    @property
    def n(self) -> int:
        return len(self.neighbor_rows)

    def __len__(self) -> int:
        return len(self.neighbor_rows)

    @property
    def entries(self) -> list[tuple[int, float]]:
        return [(int(r), float(s)) for r, s in zip(self.neighbor_rows, self.scores)]


@dataclass(frozen=True)
class TypeNeighborList:
    """Ranked neighbor types of one vocabulary type."""

    query_type: str
    types: tuple[str, ...]
    scores: np.ndarray  # float64
    truncated: bool

    @property
    def n(self) -> int:
        return len(self.types)

    def __len__(self) -> int:
        return len(self.types)

    @property
    def entries(self) -> list[tuple[str, float]]:
        return [(t, float(s)) for t, s in zip(self.types, self.scores)]

    def type_set(self) -> frozenset[str]:
        return frozenset(self.types)


@dataclass(frozen=True)
class SimilarityIndex:
    """Immutable scan state: norms, normalized rows, and occurrence keys."""

    vectors: VectorSet
    table: OccurrenceTable
    norms: np.ndarray  # float64
    queryable: np.ndarray  # bool
    unit32: np.ndarray  # float32 row-normalized (zero rows stay zero)
    sentence_ids: np.ndarray  # int64
    token_ids: np.ndarray  # int64
    type_ids: np.ndarray  # int64
    type_rows: dict[int, np.ndarray]
    queryable_per_type: dict[int, int]
    unqueryable_rows: np.ndarray

    @property
    def count(self) -> int:
        return self.vectors.count

    @property
    def queryable_count(self) -> int:
        return self.count - len(self.unqueryable_rows)


@dataclass(frozen=True)
class NeighborRun:
    """all_neighbors output: lists in ascending query order plus skipped rows."""

    lists: list[NeighborList]
    skipped: list[int]


def build_index(vectors: VectorSet, table: OccurrenceTable) -> SimilarityIndex:
    if vectors.count != len(table):
        raise SizeMismatch(f"{vectors.count} vectors vs {len(table)} occurrences")
    count, dim = vectors.count, vectors.dim
    norms = np.zeros(count, dtype=np.float64)
    unit32 = np.zeros((count, dim), dtype=np.float32)
    chunk = 8192
    for lo in range(0, count, chunk):
        hi = min(lo + chunk, count)
        block64 = vectors.data[lo:hi].astype(np.float64)
        n = np.sqrt(np.einsum("ij,ij->i", block64, block64))
        norms[lo:hi] = n
        nz = n > 0
        if nz.any():
            block64[nz] /= n[nz, None]
            unit32[lo:hi][nz] = block64[nz].astype(np.float32)
    queryable = norms > 0

    occs = table.occurrences
    sentence_ids = np.fromiter((o.sentence_id for o in occs), dtype=np.int64, count=count)
    token_ids = np.fromiter((o.token_id for o in occs), dtype=np.int64, count=count)
    type_of: dict[str, int] = {}
    type_ids = np.empty(count, dtype=np.int64)
    for r, occ in enumerate(occs):
        type_ids[r] = type_of.setdefault(occ.surface, len(type_of))
    rows_by_type: dict[int, list[int]] = {}
    for r in range(count):
        rows_by_type.setdefault(int(type_ids[r]), []).append(r)
    type_rows = {t: np.array(rows, dtype=np.int64) for t, rows in rows_by_type.items()}
    queryable_per_type = {t: int(queryable[rows].sum()) for t, rows in type_rows.items()}

    unit32.flags.writeable = False
    norms.flags.writeable = False
    return SimilarityIndex(
        vectors=vectors,
        table=table,
        norms=norms,
        queryable=queryable,
        unit32=unit32,
        sentence_ids=sentence_ids,
        token_ids=token_ids,
        type_ids=type_ids,
        type_rows=type_rows,
        queryable_per_type=queryable_per_type,
        unqueryable_rows=np.nonzero(~queryable)[0],
    )


def _check_policy(exclusion: str) -> None:
    if exclusion not in EXCLUSION_POLICIES:
        raise ValueError(f"unknown exclusion policy {exclusion!r}; expected one of {EXCLUSION_POLICIES}")


def _block_lists(index: SimilarityIndex, qrows: np.ndarray, n: int, exclusion: str) -> list[NeighborList]:
    """Exact top-n lists for one block of queryable query rows."""
    count = index.count
    scores32 = index.unit32[qrows] @ index.unit32.T  # (B, count) float32
    if index.unqueryable_rows.size:
        scores32[:, index.unqueryable_rows] = _MASKED

    n_candidates = np.empty(len(qrows), dtype=np.int64)
    for b, r in enumerate(qrows):
        if exclusion == SAME_TYPE:
            tid = int(index.type_ids[r])
            scores32[b, index.type_rows[tid]] = _MASKED
            n_candidates[b] = index.queryable_count - index.queryable_per_type[tid]
        else:
            scores32[b, r] = _MASKED
            n_candidates[b] = index.queryable_count - 1

    kth = count - n
    thresholds = np.partition(scores32, kth, axis=1)[:, kth] if kth > 0 else None

    raw = index.vectors.data
    lists: list[NeighborList] = []
    for b, r in enumerate(qrows):
        row = scores32[b]
        if thresholds is not None and n_candidates[b] > n:
            shortlist = np.nonzero(row >= thresholds[b] - PREFILTER_MARGIN)[0]
        else:
            shortlist = np.nonzero(row > -1.5)[0]
        if shortlist.size == 0:
            lists.append(
                NeighborList(
                    query=int(r),
                    neighbor_rows=np.empty(0, dtype=np.int64),
                    scores=np.empty(0, dtype=np.float64),
                    truncated=True,
                )
            )
            continue
        # einsum (not BLAS) keeps accumulation identical for every row, so
        # bitwise-equal vectors always tie exactly and fall through to the
        # (sentence_id, token_id) order
        rescored = np.einsum("ij,j->i", raw[shortlist].astype(np.float64), raw[r].astype(np.float64))
        rescored /= index.norms[shortlist] * index.norms[r]
        np.clip(rescored, -1.0, 1.0, out=rescored)
        order = np.lexsort((index.token_ids[shortlist], index.sentence_ids[shortlist], -rescored))
        top = order[:n]
        lists.append(
            NeighborList(
                query=int(r),
                neighbor_rows=shortlist[top].astype(np.int64),
                scores=rescored[top],
                truncated=top.size < n,
            )
        )
    return lists


def query_neighbors(index: SimilarityIndex, query: int, n: int, exclusion: str = SAME_TYPE) -> NeighborList:
    """Exact top-n neighbors of one occurrence row."""
    _check_policy(exclusion)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0 <= query < index.count:
        raise IndexError(f"row {query} out of range for count {index.count}")
    if not index.queryable[query]:
        raise UnqueryableRow(query)
    return _block_lists(index, np.array([query], dtype=np.int64), n, exclusion)[0]


def all_neighbors(
    index: SimilarityIndex,
    queries: QuerySet,
    n: int,
    exclusion: str = SAME_TYPE,
    threads: int = 1,
) -> NeighborRun:
    """Neighbor lists for every queryable row in the query set, ascending row order.

    Unqueryable rows are skipped and reported. Output is byte-stable across
    thread counts: blocks are a fixed size and merged in block order, and
    BLAS is pinned to one thread while the pool is active.
    """
    _check_policy(exclusion)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    qrows = queries.sorted_rows()
    skipped = [int(r) for r in qrows if not index.queryable[r]]
    live = qrows[index.queryable[qrows]] if qrows.size else qrows
    blocks = [live[lo : lo + BLOCK_ROWS] for lo in range(0, live.size, BLOCK_ROWS)]

    if threads <= 1 or len(blocks) <= 1:
        lists: list[NeighborList] = []
        for block in blocks:
            lists.extend(_block_lists(index, block, n, exclusion))
        return NeighborRun(lists=lists, skipped=skipped)

    from threadpoolctl import threadpool_limits

    lists = []
    with threadpool_limits(limits=1, user_api="blas"):
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for part in pool.map(lambda blk: _block_lists(index, blk, n, exclusion), blocks):
                lists.extend(part)
    return NeighborRun(lists=lists, skipped=skipped)


# --- embedding (type-level) neighbors -------------------------------------------

def embedding_neighbors_many(
    embeddings: VectorSet,
    vocab: list[str],
    query_types: list[str],
    n: int,
) -> dict[str, TypeNeighborList]:
    """Exact top-n neighbor types for each query type; ties break lexicographically."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if embeddings.count != len(vocab):
        raise SizeMismatch(f"{embeddings.count} embedding rows vs {len(vocab)} vocab entries")
    index_of = {t: i for i, t in enumerate(vocab)}
    vocab_arr = np.array(vocab)
    e64 = embeddings.data.astype(np.float64)
    norms = np.sqrt(np.einsum("ij,ij->i", e64, e64))
    nonzero = norms > 0
    unit = np.zeros_like(e64)
    unit[nonzero] = e64[nonzero] / norms[nonzero, None]
    zero_rows = np.nonzero(~nonzero)[0]

    qidx = np.empty(len(query_types), dtype=np.int64)
    for k, t in enumerate(query_types):
        if t not in index_of:
            raise UnknownType(f"type {t!r} not in embedding vocabulary")
        i = index_of[t]
        if not nonzero[i]:
            raise ZeroVector(f"type {t!r} has a zero embedding")
        qidx[k] = i

    out: dict[str, TypeNeighborList] = {}
    v = len(vocab)
    n_candidates = int(nonzero.sum()) - 1
    for k, query_type in enumerate(query_types):
        i = qidx[k]
        # per-row einsum: equal embedding vectors tie bitwise, so equal-score
        # candidates order lexicographically
        row = np.einsum("ij,j->i", unit, unit[i])
        if zero_rows.size:
            row[zero_rows] = -2.0
        row[i] = -2.0
        if n_candidates > n:
            thresh = np.partition(row, v - n)[v - n]
            shortlist = np.nonzero(row >= thresh)[0]
        else:
            shortlist = np.nonzero(row > -1.5)[0]
        vals = np.clip(row[shortlist], -1.0, 1.0)
        order = np.lexsort((vocab_arr[shortlist], -vals))
        top = order[:n]
        out[query_type] = TypeNeighborList(
            query_type=query_type,
            types=tuple(vocab_arr[shortlist[top]]),
            scores=vals[top],
            truncated=top.size < n,
        )
    return out


def embedding_neighbors(embeddings: VectorSet, vocab: list[str], query_type: str, n: int) -> TypeNeighborList:
    return embedding_neighbors_many(embeddings, vocab, [query_type], n)[query_type]


# --- neighbor record serialization ------------------------------------------------

_BIN_MAGIC = b"NNB1"
_BIN_RECORD = struct.Struct("<IHId")


def write_neighbors_tsv(path, lists) -> None:
    """TSV ``query_row rank neighbor_row score`` with 6-decimal scores."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("query_row\trank\tneighbor_row\tscore\n")
        for nl in lists:
            for rank, (row, score) in enumerate(zip(nl.neighbor_rows, nl.scores), start=1):
                fh.write(f"{nl.query}\t{rank}\t{int(row)}\t{score:.6f}\n")


def read_neighbors_tsv(path) -> list[NeighborList]:
    """Rebuild lists from the TSV wire format (scores carry 6 decimals)."""
    per_query: dict[int, list[tuple[int, int, float]]] = {}
    order: list[int] = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("query_row\t"):
            raise ValueError(f"{path}: not a neighbors TSV")
        for line in fh:
            q, rank, row, score = line.rstrip("\n").split("\t")
            qi = int(q)
            if qi not in per_query:
                per_query[qi] = []
                order.append(qi)
            per_query[qi].append((int(rank), int(row), float(score)))
    lists = []
    for q in order:
        recs = sorted(per_query[q])
        lists.append(
            NeighborList(
                query=q,
                neighbor_rows=np.array([r for _, r, _ in recs], dtype=np.int64),
                scores=np.array([s for _, _, s in recs], dtype=np.float64),
                truncated=False,
            )
        )
    return lists


def write_neighbors_bin(path, lists) -> None:
    """Compact binary mirror of the TSV records, full-precision scores."""
    total = sum(len(nl) for nl in lists)
    with open(path, "wb") as fh:
        fh.write(_BIN_MAGIC)
        fh.write(struct.pack("<Q", total))
        for nl in lists:
            for rank, (row, score) in enumerate(zip(nl.neighbor_rows, nl.scores), start=1):
                fh.write(_BIN_RECORD.pack(nl.query, rank, int(row), float(score)))


def read_neighbors_bin(path) -> list[tuple[int, int, int, float]]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _BIN_MAGIC:
        raise ValueError(f"{path}: bad magic")
    (total,) = struct.unpack_from("<Q", blob, 4)
    records = []
    offset = 12
    for _ in range(total):
        q, rank, row, score = _BIN_RECORD.unpack_from(blob, offset)
        records.append((q, rank, row, score))
        offset += _BIN_RECORD.size
    if offset != len(blob):
        raise ValueError(f"{path}: trailing bytes")
    return records
