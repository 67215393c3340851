"""Nearest-neighbor analysis of logged encoder hidden states."""

__version__ = "0.1.0"

from .corpusio import (  # noqa: F401
    OccurrenceTable,
    QuerySet,
    SegmentMap,
    TokenOccurrence,
    VectorSet,
    align_bpe,
    apply_frequency_band,
    load_embedding_vocab,
    load_parse_lines,
    load_token_index,
    load_vector_log,
    write_vector_log,
)
from .knn import (  # noqa: F401
    NeighborList,
    SimilarityIndex,
    TypeNeighborList,
    all_neighbors,
    build_index,
    cosine,
    embedding_neighbors,
    query_neighbors,
)
from .lexicon import RelationLexicon, load_relations, related_set  # noqa: F401
from .metrics import (  # noqa: F401
    ConcentrationRecord,
    CoverageRecord,
    PositionalSeries,
    StratifiedTable,
    concentration,
    embedding_coverage,
    lexical_coverage,
    positional_mean,
    stratify_by_pos,
)
from .pipeline import AnalysisConfig, PipelineResult, run_pipeline  # noqa: F401
from .synth import SynthBundle, SynthSpec, generate_synthetic  # noqa: F401
from .treesim import (  # noqa: F401
    ConstTree,
    ParsevalScores,
    SubtreeSpan,
    average_treesim,
    parse_bracketed,
    parseval,
    smallest_phrase_subtree,
)
