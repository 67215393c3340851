"""Export encoder states and the embedding table into the canonical formats.

The output bundle mirrors what the analysis toolkit consumes: a binary
vector log (magic HSV1, little-endian u32 dim, u64 count, float32 rows), a
token-index TSV, an embedding-table vector log, and a vocab TSV. The k-th
vector corresponds to the k-th corpus token in reading order; word-level
origin is recovered by undoing the ``@@`` continuation markers. Exports are
float32 regardless of model precision and deterministic for a fixed
checkpoint and corpus.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .models import SELECTORS, VocabularyMismatch, load_checkpoint

MAGIC = b"HSV1"
_HEADER = struct.Struct("<4sIQ")

TOKEN_INDEX_HEADER = "row_id\tsentence_id\ttoken_id\tsurface\torigin_word\tpos"


@dataclass(frozen=True)
class ExportSpec:
    checkpoint: str
    corpus: str
    out_dir: str
    selector: str = "concat"
    batch_size: int = 16
    marker: str = "@@"


@dataclass(frozen=True)
class ExportResult:
    vectors: Path
    tokens: Path
    embeddings: Path
    vocab: Path
    dim: int
    token_count: int
    sentence_count: int
    vocab_size: int


def write_vector_log(path, data: np.ndarray) -> None:
    arr = np.ascontiguousarray(data, dtype="<f4")
    count, dim = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, dim, count))
        fh.write(arr.tobytes())


def read_corpus(path) -> list[list[str]]:
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            tokens = line.split()
            if tokens:
                sentences.append(tokens)
    return sentences


def origin_words(tokens: list[str], marker: str) -> list[str]:
    """Per-token pre-BPE word, undoing the continuation markers."""
    origins = [""] * len(tokens)
    start = 0
    word = ""
    for i, token in enumerate(tokens):
        continued = token.endswith(marker) and len(token) > len(marker)
        word += token[: -len(marker)] if continued else token
        if not continued:
            for j in range(start, i + 1):
                origins[j] = word
            start = i + 1
            word = ""
    if word:  # trailing marked token: treat the open word as complete
        for j in range(start, len(tokens)):
            origins[j] = word
    return origins


def export_states(spec: ExportSpec) -> ExportResult:
    """Run the encoder over the corpus and write the four-artifact bundle.

    Raises VocabularyMismatch if the corpus contains a token absent from the
    checkpoint vocabulary, and ValueError for a selector the model type does
    not support.
    """
    model, vocab, model_type, config = load_checkpoint(spec.checkpoint)
    if spec.selector not in SELECTORS[model_type]:
        raise ValueError(
            f"selector {spec.selector!r} invalid for {model_type} encoders "
            f"(expected one of {SELECTORS[model_type]})"
        )
    index_of = {t: i for i, t in enumerate(vocab)}
    sentences = read_corpus(spec.corpus)
    for sid, tokens in enumerate(sentences):
        for token in tokens:
            if token not in index_of:
                raise VocabularyMismatch(f"sentence {sid}: token {token!r} not in model vocabulary")

    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    chunks: list[np.ndarray] = []
    with torch.no_grad():
        for lo in range(0, len(sentences), spec.batch_size):
            batch = sentences[lo : lo + spec.batch_size]
            lengths = torch.tensor([len(s) for s in batch], dtype=torch.int64)
            padded = torch.zeros((len(batch), int(lengths.max())), dtype=torch.int64)
            for b, tokens in enumerate(batch):
                padded[b, : len(tokens)] = torch.tensor([index_of[t] for t in tokens])
            states = model.states(padded, lengths)[spec.selector]
            for b, tokens in enumerate(batch):
                chunks.append(states[b, : len(tokens)].to(torch.float32).numpy())
    hidden = np.concatenate(chunks, axis=0) if chunks else np.zeros((0, 1), dtype=np.float32)

    result = ExportResult(
        vectors=out / "vectors.hsv",
        tokens=out / "tokens.tsv",
        embeddings=out / "embeddings.hsv",
        vocab=out / "vocab.tsv",
        dim=int(hidden.shape[1]),
        token_count=int(hidden.shape[0]),
        sentence_count=len(sentences),
        vocab_size=len(vocab),
    )
    write_vector_log(result.vectors, hidden)

    with open(result.tokens, "w", encoding="utf-8") as fh:
        fh.write(TOKEN_INDEX_HEADER + "\n")
        row_id = 0
        for sid, tokens in enumerate(sentences):
            origins = origin_words(tokens, spec.marker)
            for tid, token in enumerate(tokens):
                fh.write(f"{row_id}\t{sid}\t{tid}\t{token}\t{origins[tid]}\t_\n")
                row_id += 1

    with torch.no_grad():
        table = model.embedding.weight.to(torch.float32).numpy()
    write_vector_log(result.embeddings, table)
    with open(result.vocab, "w", encoding="utf-8") as fh:
        for i, token in enumerate(vocab):
            fh.write(f"{i}\t{token}\n")

    _validate_with_primary(result)
    return result


def _validate_with_primary(result: ExportResult) -> None:
    """The bundle must load cleanly through the analysis toolkit's readers."""
    from hsnn.corpusio import load_embedding_vocab, load_token_index, load_vector_log

    vectors = load_vector_log(result.vectors)
    table = load_token_index(result.tokens, vectors)
    embeddings = load_vector_log(result.embeddings)
    vocab = load_embedding_vocab(result.vocab)
    assert vectors.count == len(table) == result.token_count
    assert embeddings.count == len(vocab) == result.vocab_size
