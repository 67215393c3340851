"""Synthetic analysis bundles with planted structure.

The generator plants token-type clusters on orthogonal axes: cluster c's
types sit at axis_c plus a small per-type offset along one shared secondary
axis, so within-cluster cosines stay near 1 while cross-cluster cosines stay
near 0. Hidden states are the type embedding plus optional isotropic noise
and optional progressive context mixing: position p is pulled toward its
sentence's random context direction with weight min(0.95, mixing * p), so
late positions lose type identity and per-position coverage decays, while
mixing 0 keeps every position's states equal to the embeddings. Relations
are planted only within clusters; parses come from a small template grammar.

Everything is drawn from one seeded generator in a fixed order, so a seed
fully determines the bundle bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpusio import TokenOccurrence, write_embedding_vocab, write_token_index, write_vector_log
from .errors import SpecError
from .lexicon import RELATIONS, write_relations

POS_CYCLE = ("NOUN", "VERB", "ADJ", "ADV")
PHRASE_LABELS = ("NP", "VP", "PP")
_CHUNK = 16384


@dataclass(frozen=True)
class SynthSpec:
    clusters: int
    tokens_per_cluster: int
    dim: int
    noise: float
    planted_coverage: float
    seed: int
    occurrences_per_type: int = 1
    sentence_length: int = 8
    mixing: float = 0.0
    split_fraction: float = 0.0
    marker: str = "@@"

    def validate(self) -> None:
        problems = []
        if self.clusters < 1:
            problems.append("clusters must be >= 1")
        if self.tokens_per_cluster < 1:
            problems.append("tokens_per_cluster must be >= 1")
        if self.dim < 2:
            problems.append("dim must be >= 2")
        if self.dim < self.clusters + 1:
            problems.append(f"dim must be >= clusters + 1 (axes for {self.clusters} clusters plus offsets)")
        if self.noise < 0:
            problems.append("noise must be >= 0")
        if not 0.0 <= self.planted_coverage <= 1.0:
            problems.append("planted_coverage must be in [0, 1]")
        if self.occurrences_per_type < 1:
            problems.append("occurrences_per_type must be >= 1")
        if self.sentence_length < 1:
            problems.append("sentence_length must be >= 1")
        if self.mixing < 0:
            problems.append("mixing must be >= 0")
        if not 0.0 <= self.split_fraction <= 1.0:
            problems.append("split_fraction must be in [0, 1]")
        if not self.marker:
            problems.append("marker must be nonempty")
        if problems:
            raise SpecError("; ".join(problems))


@dataclass(frozen=True)
class SynthBundle:
    out_dir: Path
    vectors: Path
    tokens: Path
    embeddings: Path
    vocab: Path
    parses: Path
    lexicon: Path
    clusters: Path
    manifest: Path
    token_count: int
    sentence_count: int
    vocab_size: int


def generate_synthetic(out_dir, spec: SynthSpec) -> SynthBundle:
    """Write a mutually consistent vectors/tokens/embeddings/vocab/parses/lexicon bundle."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    # word types per cluster, optionally split into two BPE segments
    words: list[str] = []  # origin word per word type
    word_cluster: list[int] = []
    word_segments: list[tuple[str, ...]] = []  # surfaces, marker included
    seg_types: list[str] = []  # embedding vocabulary, in creation order
    seg_cluster: list[int] = []
    seg_index: dict[str, int] = {}
    for c in range(spec.clusters):
        for k in range(spec.tokens_per_cluster):
            split = rng.random() < spec.split_fraction
            if split:
                first, second = f"p{c:03d}k{k:03d}", f"q{c:03d}k{k:03d}"
                word = first + second
                segments = (first + spec.marker, second)
                new_types = [first + spec.marker, second]
            else:
                word = f"w{c:03d}k{k:03d}"
                segments = (word,)
                new_types = [word]
            words.append(word)
            word_cluster.append(c)
            word_segments.append(segments)
            for t in new_types:
                seg_index[t] = len(seg_types)
                seg_types.append(t)
                seg_cluster.append(c)

    word_pos = [POS_CYCLE[i % len(POS_CYCLE)] for i in range(len(words))]

    # embeddings: axis_c plus a distinct small offset along the shared axis
    offset_axis = spec.clusters
    emb = np.zeros((len(seg_types), spec.dim), dtype=np.float64)
    for t in range(len(seg_types)):
        eps = 0.05 + 0.10 * rng.random()
        emb[t, seg_cluster[t]] = 1.0
        emb[t, offset_axis] = eps

    # sentences: a seeded permutation of all word-occurrence instances
    instances = np.repeat(np.arange(len(words), dtype=np.int64), spec.occurrences_per_type)
    instances = rng.permutation(instances)
    sentences: list[list[int]] = [
        list(instances[lo : lo + spec.sentence_length])
        for lo in range(0, len(instances), spec.sentence_length)
    ]

    occurrences: list[TokenOccurrence] = []
    row_type: list[int] = []
    row_position: list[int] = []
    row_sentence: list[int] = []
    for sid, sentence in enumerate(sentences):
        tid = 0
        for w in sentence:
            for segment in word_segments[w]:
                occurrences.append(
                    TokenOccurrence(
                        row_id=len(occurrences),
                        sentence_id=sid,
                        token_id=tid,
                        surface=segment,
                        origin_word=words[w],
                        pos=word_pos[w],
                    )
                )
                row_type.append(seg_index[segment])
                row_position.append(tid)
                row_sentence.append(sid)
                tid += 1
    count = len(occurrences)
    type_ids = np.array(row_type, dtype=np.int64)
    positions = np.array(row_position, dtype=np.int64)
    sentence_of = np.array(row_sentence, dtype=np.int64)

    # hidden states: embedding + per-sentence context mixing + isotropic noise
    context = None
    if spec.mixing > 0:
        context = rng.standard_normal((len(sentences), spec.dim))
        context /= np.linalg.norm(context, axis=1, keepdims=True)
    hidden = np.empty((count, spec.dim), dtype=np.float32)
    for lo in range(0, count, _CHUNK):
        hi = min(lo + _CHUNK, count)
        block = emb[type_ids[lo:hi]].copy()
        if context is not None:
            alpha = np.minimum(0.95, spec.mixing * positions[lo:hi]).astype(np.float64)
            block *= (1.0 - alpha)[:, None]
            block += alpha[:, None] * context[sentence_of[lo:hi]]
        if spec.noise > 0:
            block += spec.noise * rng.standard_normal((hi - lo, spec.dim))
        hidden[lo:hi] = block.astype(np.float32)

    # parses: chunk each sentence's words into 2-3 word phrases; 3-word
    # chunks sometimes nest a 2-word subphrase on either side, so tokens
    # hanging beside it get multi-span subtrees (left vs right nesting of
    # the same yield produces crossing brackets between neighbors)
    parse_lines = []

    def preterm(w):
        return f"({word_pos[w]} {words[w]})"

    for sentence in sentences:
        chunks: list[list[int]] = []
        pos = 0
        while pos < len(sentence):
            size = int(rng.integers(2, 4))
            chunks.append(sentence[pos : pos + size])
            pos += size
        parts = []
        for chunk in chunks:
            label = PHRASE_LABELS[int(rng.integers(0, len(PHRASE_LABELS)))]
            nested = len(chunk) == 3 and rng.random() < 0.5
            if nested:
                sub = PHRASE_LABELS[int(rng.integers(0, len(PHRASE_LABELS)))]
                if rng.random() < 0.5:
                    inner = f"{preterm(chunk[0])} ({sub} {preterm(chunk[1])} {preterm(chunk[2])})"
                else:
                    inner = f"({sub} {preterm(chunk[0])} {preterm(chunk[1])}) {preterm(chunk[2])}"
            else:
                inner = " ".join(preterm(w) for w in chunk)
            parts.append(f"({label} {inner})")
        while len(parts) >= 2 and rng.random() < 0.3:
            at = int(rng.integers(0, len(parts) - 1))
            label = PHRASE_LABELS[int(rng.integers(0, len(PHRASE_LABELS)))]
            parts[at : at + 2] = [f"({label} {parts[at]} {parts[at + 1]})"]
        parse_lines.append("(S " + " ".join(parts) + ")")

    # lexicon: relations planted within clusters only
    relation_rows = []
    rel_cycle = 0
    for c in range(spec.clusters):
        members = [w for w in range(len(words)) if word_cluster[w] == c]
        for u in members:
            for v in members:
                if u == v:
                    continue
                if rng.random() < spec.planted_coverage:
                    relation_rows.append((words[u], RELATIONS[rel_cycle % len(RELATIONS)], words[v]))
                    rel_cycle += 1

    paths = SynthBundle(
        out_dir=out,
        vectors=out / "vectors.hsv",
        tokens=out / "tokens.tsv",
        embeddings=out / "embeddings.hsv",
        vocab=out / "vocab.tsv",
        parses=out / "parses.txt",
        lexicon=out / "lexicon.tsv",
        clusters=out / "clusters.tsv",
        manifest=out / "synth.json",
        token_count=count,
        sentence_count=len(sentences),
        vocab_size=len(seg_types),
    )
    write_vector_log(paths.vectors, hidden)
    write_token_index(paths.tokens, occurrences)
    write_vector_log(paths.embeddings, emb.astype(np.float32))
    write_embedding_vocab(paths.vocab, seg_types)
    with open(paths.parses, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parse_lines) + ("\n" if parse_lines else ""))
    write_relations(paths.lexicon, relation_rows)
    with open(paths.clusters, "w", encoding="utf-8") as fh:
        for w, word in enumerate(words):
            fh.write(f"word\t{word}\t{word_cluster[w]}\n")
        for t, seg in enumerate(seg_types):
            fh.write(f"type\t{seg}\t{seg_cluster[t]}\n")
    with open(paths.manifest, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "spec": spec.__dict__,
                "token_count": count,
                "sentence_count": len(sentences),
                "vocab_size": len(seg_types),
                "word_types": len(words),
                "relation_rows": len(relation_rows),
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    return paths
