"""Coverage, concentration, positional means, and POS-stratified aggregation.

Conventions fixed here:
- coverage counts per neighbor slot (a repeated neighbor type counts each
  time it appears) and divides by the list length, so values stay comparable
  across queries;
- concentration is the uncentered mean squared cosine distance
  v = (1/n) sum (1 - x_k)^2 over the stored scores;
- positional means divide by the number of sentences of length >= j; a
  sentence with no record at position j contributes 0 to the numerator but
  stays in the denominator (mode "all"); mode "present" divides by the
  number of recorded sentences instead;
- stratified dispersion is the population variance of the per-occurrence
  values, times 100, like the means (mode "type" uses variance of per-word
  means instead).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpusio import OccurrenceTable
from .errors import EmptyNeighborList
from .knn import NeighborList, TypeNeighborList

KIND_EMBED = "EMBED"
KIND_LEXICON = "LEXICON"

ACP_EMBED = "ACP_EMBED"
ACP_LEX = "ACP_LEX"
AV = "AV"

POS_BUCKETS = ("VERB", "NOUN", "ADJ", "ADV")
ALL_BUCKET = "All"


@dataclass(frozen=True)
class CoverageRecord:
    row_id: int
    sentence_id: int
    token_id: int
    kind: str
    numerator: int
    denominator: int

    @property
    def value(self) -> float:
        return self.numerator / self.denominator


@dataclass(frozen=True)
class ConcentrationRecord:
    row_id: int
    sentence_id: int
    token_id: int
    value: float


@dataclass(frozen=True)
class PositionalSeries:
    """Per-position means, 1-based positions, defined where support > 0."""

    kind: str
    values: dict[int, float]
    support: dict[int, int]

    def positions(self) -> list[int]:
        return sorted(self.values)


@dataclass(frozen=True)
class StratumRow:
    bucket: str
    mean_pct: float
    var: float
    count: int


@dataclass(frozen=True)
class StratifiedTable:
    kind: str
    rows: tuple[StratumRow, ...]

    def bucket(self, name: str) -> StratumRow | None:
        for row in self.rows:
            if row.bucket == name:
                return row
        return None


def _require_nonempty(neighbors: NeighborList) -> None:
    if len(neighbors) == 0:
        raise EmptyNeighborList(f"query row {neighbors.query} has no neighbors")


def embedding_coverage(
    neighbors: NeighborList,
    type_neighbors: TypeNeighborList,
    table: OccurrenceTable,
    key: str = "surface",
) -> CoverageRecord:
    """Fraction of neighbor slots whose token type is in the embedding list."""
    _require_nonempty(neighbors)
    reference = type_neighbors.type_set()
    numerator = 0
    for row in neighbors.neighbor_rows:
        occ = table.occurrence(int(row))
        token = occ.surface if key == "surface" else occ.origin_word
        if token in reference:
            numerator += 1
    q = table.occurrence(neighbors.query)
    return CoverageRecord(
        row_id=neighbors.query,
        sentence_id=q.sentence_id,
        token_id=q.token_id,
        kind=KIND_EMBED,
        numerator=numerator,
        denominator=len(neighbors),
    )


def lexical_coverage(
    neighbors: NeighborList,
    relations: frozenset[str] | set[str],
    table: OccurrenceTable,
    key: str = "origin",
    fold_case: bool = False,
) -> CoverageRecord:
    """Fraction of neighbor slots whose word is directly related to the query word."""
    _require_nonempty(neighbors)
    numerator = 0
    for row in neighbors.neighbor_rows:
        occ = table.occurrence(int(row))
        token = occ.origin_word if key == "origin" else occ.surface
        if fold_case:
            token = token.casefold()
        if token in relations:
            numerator += 1
    q = table.occurrence(neighbors.query)
    return CoverageRecord(
        row_id=neighbors.query,
        sentence_id=q.sentence_id,
        token_id=q.token_id,
        kind=KIND_LEXICON,
        numerator=numerator,
        denominator=len(neighbors),
    )


def concentration(neighbors: NeighborList, table: OccurrenceTable | None = None) -> ConcentrationRecord:
    """Mean squared cosine distance of the neighbors from the query state.

    The occurrence coordinates are filled from ``table`` when given,
    otherwise left as -1.
    """
    _require_nonempty(neighbors)
    d = 1.0 - neighbors.scores
    v = float(np.sum(d * d) / len(neighbors))
    if table is not None:
        occ = table.occurrence(neighbors.query)
        sid, tid = occ.sentence_id, occ.token_id
    else:
        sid, tid = -1, -1
    return ConcentrationRecord(row_id=neighbors.query, sentence_id=sid, token_id=tid, value=v)


def positional_mean(
    records,
    table: OccurrenceTable,
    kind: str,
    denominator: str = "all",
) -> PositionalSeries:
    """Per-position mean of record values; positions are reported 1-based.

    ``records`` is an iterable of objects with sentence_id, token_id and
    value. Mode "all" divides by |S_{l(s) >= j}| over the whole corpus; mode
    "present" divides by the number of sentences with a record at j.
    """
    if denominator not in ("all", "present"):
        raise ValueError(f"unknown denominator mode {denominator!r}")
    support = table.support_counts()
    max_len = len(support)
    sums = np.zeros(max_len, dtype=np.float64)
    present = np.zeros(max_len, dtype=np.int64)
    for rec in records:
        j = rec.token_id  # 0-based
        sums[j] += rec.value
        present[j] += 1
    values: dict[int, float] = {}
    support_map: dict[int, int] = {}
    for j0 in range(max_len):
        denom = int(support[j0]) if denominator == "all" else int(present[j0])
        if support[j0] > 0:
            support_map[j0 + 1] = int(support[j0])
        if denom > 0:
            values[j0 + 1] = float(sums[j0] / denom)
    return PositionalSeries(kind=kind, values=values, support=support_map)


def _population_variance(values: np.ndarray) -> float:
    return float(np.var(values)) if values.size else 0.0


def stratify_by_pos(records, table: OccurrenceTable, var_mode: str = "occurrence") -> StratifiedTable:
    """Percent coverage per POS bucket with dispersion and occurrence count.

    Buckets: "All" plus VERB/NOUN/ADJ/ADV; occurrences with other tags (or
    "_") land only in "All". Empty buckets are omitted. var_mode
    "occurrence" is the population variance of per-occurrence values x100;
    "type" replaces it with the variance of per-origin-word means x100.
    """
    if var_mode not in ("occurrence", "type"):
        raise ValueError(f"unknown var mode {var_mode!r}")
    records = list(records)
    if not records:
        return StratifiedTable(kind="", rows=())
    kind = records[0].kind
    per_bucket: dict[str, list] = {ALL_BUCKET: []}
    for bucket in POS_BUCKETS:
        per_bucket[bucket] = []
    for rec in records:
        per_bucket[ALL_BUCKET].append(rec)
        pos = table.occurrence(rec.row_id).pos
        if pos in per_bucket:
            per_bucket[pos].append(rec)
    rows = []
    for bucket in (ALL_BUCKET, *POS_BUCKETS):
        bucket_records = per_bucket[bucket]
        if not bucket_records:
            continue
        values = np.array([r.value for r in bucket_records], dtype=np.float64)
        if var_mode == "occurrence":
            var = _population_variance(values) * 100.0
        else:
            by_word: dict[str, list[float]] = {}
            for r in bucket_records:
                by_word.setdefault(table.occurrence(r.row_id).origin_word, []).append(r.value)
            means = np.array([float(np.mean(v)) for v in by_word.values()], dtype=np.float64)
            var = _population_variance(means) * 100.0
        rows.append(
            StratumRow(
                bucket=bucket,
                mean_pct=float(np.mean(values)) * 100.0,
                var=var,
                count=len(bucket_records),
            )
        )
    return StratifiedTable(kind=kind, rows=tuple(rows))
