"""End-to-end analysis driver: load, scan, score, aggregate, report.

The driver owns stage sequencing and all file emission. Analysis stages are
pure given their inputs; every output file is byte-deterministic for a fixed
config (the manifest, which records wall-clock timings, is the one
exception and is documented as such).
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import yaml

from . import __version__
from .corpusio import (
    OccurrenceTable,
    VectorSet,
    align_bpe,
    apply_frequency_band,
    load_embedding_vocab,
    load_parse_lines,
    load_token_index,
    load_vector_log,
)
from .errors import ConfigError, InputInconsistency, ToolkitError
from .knn import (
    EXCLUSION_POLICIES,
    SAME_TYPE,
    all_neighbors,
    build_index,
    embedding_neighbors_many,
    write_neighbors_bin,
    write_neighbors_tsv,
)
from .lexicon import load_relations, related_set
from .metrics import (
    ACP_EMBED,
    ACP_LEX,
    AV,
    PositionalSeries,
    StratifiedTable,
    concentration,
    embedding_coverage,
    lexical_coverage,
    positional_mean,
    stratify_by_pos,
)
from .treesim import TreesimSummary, average_treesim, parse_bracketed, smallest_phrase_subtree

NEIGHBORS_TSV = "neighbors.tsv"
NEIGHBORS_BIN = "neighbors.bin"
COVERAGE_TSV = "coverage.tsv"
POSITIONAL_TSV = "positional.tsv"
STRATA_TSV = "strata.tsv"
CONCENTRATION_TSV = "concentration.tsv"
TREESIM_TSV = "treesim.tsv"
REPORT_TXT = "report.txt"
MANIFEST_JSON = "manifest.json"

FIGURE_FILES = {
    ACP_EMBED: "figure_acp_embedding.tsv",
    ACP_LEX: "figure_acp_lexicon.tsv",
    AV: "figure_av.tsv",
}


@dataclass
class AnalysisConfig:
    """Declarative pipeline configuration; flags override file values."""

    vectors: str
    tokens: str
    out_dir: str
    embeddings: str | None = None
    vocab: str | None = None
    parses: str | None = None
    lexicon: str | None = None
    n: int = 10
    min_freq: int = 10
    max_freq: int = 2000
    exclusion: str = SAME_TYPE
    embed_key: str = "surface"
    lex_key: str = "origin"
    var_mode: str = "occurrence"
    positional_mode: str = "all"
    fold_case: bool = False
    lexicon_pos_filter: bool = False
    threads: int = 1
    marker: str = "@@"
    neighbors_bin: bool = False

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "AnalysisConfig":
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: expected a mapping")
        unknown = set(raw) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
        merged = dict(raw)
        for key, value in (overrides or {}).items():
            if value is not None:
                merged[key] = value
        missing = [k for k in ("vectors", "tokens", "out_dir") if k not in merged]
        if missing:
            raise ConfigError(f"missing required config keys: {missing}")
        return cls(**merged)

    def validate(self) -> None:
        problems = []
        if self.n < 1:
            problems.append(f"n must be >= 1, got {self.n}")
        if self.min_freq > self.max_freq:
            problems.append(f"min_freq {self.min_freq} > max_freq {self.max_freq}")
        if self.exclusion not in EXCLUSION_POLICIES:
            problems.append(f"unknown exclusion policy {self.exclusion!r}")
        if self.embed_key not in ("surface", "origin"):
            problems.append(f"embed_key must be surface|origin, got {self.embed_key!r}")
        if self.lex_key not in ("origin", "surface"):
            problems.append(f"lex_key must be origin|surface, got {self.lex_key!r}")
        if self.var_mode not in ("occurrence", "type"):
            problems.append(f"var_mode must be occurrence|type, got {self.var_mode!r}")
        if self.positional_mode not in ("all", "present"):
            problems.append(f"positional_mode must be all|present, got {self.positional_mode!r}")
        if self.threads < 1:
            problems.append(f"threads must be >= 1, got {self.threads}")
        if (self.embeddings is None) != (self.vocab is None):
            problems.append("embeddings and vocab must be given together")
        for name in ("vectors", "tokens", "embeddings", "vocab", "parses", "lexicon"):
            value = getattr(self, name)
            if value is not None and not Path(value).is_file():
                problems.append(f"{name} path does not exist: {value}")
        if problems:
            raise ConfigError("; ".join(problems))


@dataclass
class PipelineResult:
    out_dir: Path
    files: dict[str, Path]
    manifest: dict
    embed_strata: StratifiedTable | None
    lex_strata: StratifiedTable | None
    series: dict[str, PositionalSeries]
    treesim: TreesimSummary | None
    mean_embed_coverage: float | None
    mean_lex_coverage: float | None


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _type_neighbor_map(embeddings: VectorSet, vocab: list[str], types: list[str], n: int):
    """Type neighbor lists for every resolvable type; reports missing/zero types."""
    import numpy as np

    vocab_set = set(vocab)
    norms = np.sqrt((embeddings.data.astype(np.float64) ** 2).sum(axis=1))
    zero_types = {vocab[i] for i in np.nonzero(norms == 0)[0]}
    missing = sorted(t for t in types if t not in vocab_set)
    zeroed = sorted(t for t in types if t in zero_types)
    usable = [t for t in types if t in vocab_set and t not in zero_types]
    lists = embedding_neighbors_many(embeddings, vocab, usable, n) if usable else {}
    return lists, missing, zeroed


def _write_coverage_tsv(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("kind\trow_id\tsentence_id\ttoken_id\tnumerator\tdenominator\tvalue\n")
        for rec in records:
            fh.write(
                f"{rec.kind}\t{rec.row_id}\t{rec.sentence_id}\t{rec.token_id}\t"
                f"{rec.numerator}\t{rec.denominator}\t{rec.value:.6f}\n"
            )


def _write_concentration_tsv(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("row_id\tsentence_id\ttoken_id\tvalue\n")
        for rec in records:
            fh.write(f"{rec.row_id}\t{rec.sentence_id}\t{rec.token_id}\t{rec.value:.6f}\n")


def _write_positional_tsv(path, series_list) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("kind\tposition\tvalue\tsupport\n")
        for series in series_list:
            for j in series.positions():
                fh.write(f"{series.kind}\t{j}\t{series.values[j]:.6f}\t{series.support.get(j, 0)}\n")


def _write_strata_tsv(path, tables) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("kind\tbucket\tmean_pct\tvar\tcount\n")
        for table in tables:
            for row in table.rows:
                fh.write(f"{table.kind}\t{row.bucket}\t{row.mean_pct:.6f}\t{row.var:.6f}\t{row.count}\n")


def _write_treesim_tsv(path, summary: TreesimSummary) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("precision\trecall\tmatched_brackets\tcross_brackets\ttag_accuracy\tpair_count\tskipped_pairs\n")
        fh.write(
            f"{summary.precision:.6f}\t{summary.recall:.6f}\t{summary.matched_brackets:.6f}\t"
            f"{summary.cross_brackets:.6f}\t{summary.tag_accuracy:.6f}\t"
            f"{summary.pair_count}\t{summary.skipped_pairs}\n"
        )


def emit_figure_data(out_dir, series_list) -> dict[str, Path]:
    """One TSV per figure family: position, value, support; empty positions omitted."""
    out = {}
    for series in series_list:
        name = FIGURE_FILES.get(series.kind, f"figure_{series.kind.lower()}.tsv")
        path = Path(out_dir) / name
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("position\tvalue\tsupport\n")
            for j in series.positions():
                support = series.support.get(j, 0)
                if support > 0:
                    fh.write(f"{j}\t{series.values[j]:.6f}\t{support}\n")
        out[series.kind] = path
    return out


def _strata_section(title: str, table: StratifiedTable | None) -> list[str]:
    lines = [title]
    if table is None or not table.rows:
        lines.append("  (stage skipped or no records)")
        return lines
    lines.append(f"  {'POS':<8}{'mean%':>10}{'var':>10}{'count':>10}")
    for row in table.rows:
        lines.append(f"  {row.bucket:<8}{row.mean_pct:>10.2f}{row.var:>10.2f}{row.count:>10}")
    return lines


def _write_report(path, embed_strata, lex_strata, treesim_summary, skipped_stages) -> None:
    lines = ["Nearest-neighbor analysis report", ""]
    lines += _strata_section("Coverage by embedding nearest neighbors", embed_strata)
    lines.append("")
    lines += _strata_section("Coverage by direct lexicon relations", lex_strata)
    lines.append("")
    lines.append("Subtree similarity (means over query/neighbor pairs)")
    if treesim_summary is None:
        lines.append("  (stage skipped)")
    else:
        s = treesim_summary
        lines.append(
            f"  {'precision':>10}{'recall':>10}{'matched':>10}{'crossing':>10}{'tags':>10}{'pairs':>10}{'skipped':>10}"
        )
        lines.append(
            f"  {s.precision:>10.2f}{s.recall:>10.2f}{s.matched_brackets:>10.2f}"
            f"{s.cross_brackets:>10.2f}{s.tag_accuracy:>10.2f}{s.pair_count:>10}{s.skipped_pairs:>10}"
        )
    if skipped_stages:
        lines.append("")
        lines.append("Skipped stages:")
        for stage, reason in sorted(skipped_stages.items()):
            lines.append(f"  {stage}: {reason}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def run_pipeline(config: AnalysisConfig) -> PipelineResult:
    """Run every stage the inputs allow; emit reports plus a manifest.

    The manifest is written even on failure, with status and the error
    message.
    """
    config.validate()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    started = time.perf_counter()
    timings: dict[str, float] = {}
    counts: dict[str, int] = {}
    stages: dict[str, str] = {}
    files: dict[str, Path] = {}
    manifest: dict = {
        "tool": "hsnn",
        "version": __version__,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
        "config": asdict(config),
        "inputs": {},
        "counts": counts,
        "timings": timings,
        "stages": stages,
        "status": "running",
    }

    embed_strata = lex_strata = None
    series: dict[str, PositionalSeries] = {}
    treesim_summary = None
    mean_embed = mean_lex = None

    try:
        for name in ("vectors", "tokens", "embeddings", "vocab", "parses", "lexicon"):
            value = getattr(config, name)
            if value is not None:
                manifest["inputs"][name] = {"path": str(value), "sha256": _sha256(value)}

        t = time.perf_counter()
        vectors = load_vector_log(config.vectors)
        table = load_token_index(config.tokens, vectors)
        embeddings = vocab = None
        if config.embeddings is not None:
            embeddings = load_vector_log(config.embeddings)
            vocab = load_embedding_vocab(config.vocab)
            if embeddings.count != len(vocab):
                raise InputInconsistency(
                    f"embedding count {embeddings.count} != vocab size {len(vocab)}"
                )
        parse_lines = None
        if config.parses is not None:
            parse_lines = load_parse_lines(config.parses)
            required = (max(table.sentence_lengths) + 1) if table.sentence_lengths else 0
            if len(parse_lines) != required:
                raise InputInconsistency(
                    f"parses file has {len(parse_lines)} lines, corpus needs {required} "
                    f"(line number == sentence_id)"
                )
        relations = load_relations(config.lexicon) if config.lexicon is not None else None
        counts["sentences"] = table.sentence_count
        counts["tokens"] = len(table)
        timings["load"] = time.perf_counter() - t

        t = time.perf_counter()
        queries = apply_frequency_band(table, config.min_freq, config.max_freq)
        counts["queries"] = len(queries)
        timings["queries"] = time.perf_counter() - t

        t = time.perf_counter()
        index = build_index(vectors, table)
        run = all_neighbors(index, queries, config.n, config.exclusion, threads=config.threads)
        lists = [nl for nl in run.lists if len(nl) > 0]
        counts["neighbor_lists"] = len(run.lists)
        counts["empty_neighbor_lists"] = len(run.lists) - len(lists)
        counts["skipped_unqueryable"] = len(run.skipped)
        files[NEIGHBORS_TSV] = out / NEIGHBORS_TSV
        write_neighbors_tsv(files[NEIGHBORS_TSV], run.lists)
        if config.neighbors_bin:
            files[NEIGHBORS_BIN] = out / NEIGHBORS_BIN
            write_neighbors_bin(files[NEIGHBORS_BIN], run.lists)
        stages["knn"] = "ok"
        timings["knn"] = time.perf_counter() - t

        embed_records: list = []
        if embeddings is not None:
            t = time.perf_counter()
            key_of = (lambda occ: occ.surface) if config.embed_key == "surface" else (
                lambda occ: occ.origin_word
            )
            unique_types = sorted({key_of(table.occurrence(nl.query)) for nl in lists})
            type_lists, missing, zeroed = _type_neighbor_map(embeddings, vocab, unique_types, config.n)
            counts["types_missing_embedding"] = len(missing)
            counts["types_zero_embedding"] = len(zeroed)
            skipped_embed = 0
            for nl in lists:
                tnl = type_lists.get(key_of(table.occurrence(nl.query)))
                if tnl is None:
                    skipped_embed += 1
                    continue
                embed_records.append(embedding_coverage(nl, tnl, table, key=config.embed_key))
            counts["embed_records"] = len(embed_records)
            counts["embed_skipped_occurrences"] = skipped_embed
            if embed_records:
                mean_embed = sum(r.value for r in embed_records) / len(embed_records)
            stages["embedding_coverage"] = "ok"
            timings["embedding_coverage"] = time.perf_counter() - t
        else:
            stages["embedding_coverage"] = "skipped (no embeddings/vocab)"

        lex_records: list = []
        if relations is not None:
            t = time.perf_counter()
            cache: dict[tuple[str, str | None], frozenset[str]] = {}
            for nl in lists:
                occ = table.occurrence(nl.query)
                word = occ.origin_word if config.lex_key == "origin" else occ.surface
                pos = occ.pos if config.lexicon_pos_filter and occ.pos != "_" else None
                cache_key = (word, pos)
                if cache_key not in cache:
                    cache[cache_key] = related_set(relations, word, pos=pos, fold_case=config.fold_case)
                lex_records.append(
                    lexical_coverage(nl, cache[cache_key], table, key=config.lex_key, fold_case=config.fold_case)
                )
            counts["lex_records"] = len(lex_records)
            if lex_records:
                mean_lex = sum(r.value for r in lex_records) / len(lex_records)
            stages["lexical_coverage"] = "ok"
            timings["lexical_coverage"] = time.perf_counter() - t
        else:
            stages["lexical_coverage"] = "skipped (no lexicon)"

        t = time.perf_counter()
        conc_records = [concentration(nl, table) for nl in lists]
        counts["concentration_records"] = len(conc_records)
        files[CONCENTRATION_TSV] = out / CONCENTRATION_TSV
        _write_concentration_tsv(files[CONCENTRATION_TSV], conc_records)
        stages["concentration"] = "ok"
        timings["concentration"] = time.perf_counter() - t

        t = time.perf_counter()
        if embed_records:
            series[ACP_EMBED] = positional_mean(embed_records, table, ACP_EMBED, config.positional_mode)
        if lex_records:
            series[ACP_LEX] = positional_mean(lex_records, table, ACP_LEX, config.positional_mode)
        if conc_records:
            series[AV] = positional_mean(conc_records, table, AV, config.positional_mode)
        if series:
            files[POSITIONAL_TSV] = out / POSITIONAL_TSV
            _write_positional_tsv(files[POSITIONAL_TSV], [series[k] for k in (ACP_EMBED, ACP_LEX, AV) if k in series])
            for kind, path in emit_figure_data(out, series.values()).items():
                files[FIGURE_FILES.get(kind, kind)] = path
        timings["positional"] = time.perf_counter() - t

        t = time.perf_counter()
        strata_tables = []
        if embed_records:
            embed_strata = stratify_by_pos(embed_records, table, var_mode=config.var_mode)
            strata_tables.append(embed_strata)
        if lex_records:
            lex_strata = stratify_by_pos(lex_records, table, var_mode=config.var_mode)
            strata_tables.append(lex_strata)
        if embed_records or lex_records:
            files[COVERAGE_TSV] = out / COVERAGE_TSV
            _write_coverage_tsv(files[COVERAGE_TSV], [*embed_records, *lex_records])
        if strata_tables:
            files[STRATA_TSV] = out / STRATA_TSV
            _write_strata_tsv(files[STRATA_TSV], strata_tables)
        timings["strata"] = time.perf_counter() - t

        if parse_lines is not None:
            t = time.perf_counter()
            subtrees, failed, first_error = _collect_subtrees(table, parse_lines, config.marker)
            treesim_summary = average_treesim(lists, subtrees)
            counts["treesim_pairs"] = treesim_summary.pair_count
            counts["treesim_skipped_pairs"] = treesim_summary.skipped_pairs
            counts["treesim_failed_sentences"] = failed
            if first_error:
                stages["treesim"] = f"ok ({failed} sentences unusable; first: {first_error})"
            else:
                stages["treesim"] = "ok"
            files[TREESIM_TSV] = out / TREESIM_TSV
            _write_treesim_tsv(files[TREESIM_TSV], treesim_summary)
            timings["treesim"] = time.perf_counter() - t
        else:
            stages["treesim"] = "skipped (no parses)"

        skipped_stages = {k: v for k, v in stages.items() if v.startswith("skipped")}
        files[REPORT_TXT] = out / REPORT_TXT
        _write_report(files[REPORT_TXT], embed_strata, lex_strata, treesim_summary, skipped_stages)

        manifest["status"] = "ok"
    except BaseException as exc:
        manifest["status"] = "failed"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        timings["total"] = time.perf_counter() - started
        manifest["files"] = {name: str(path) for name, path in files.items()}
        with open(out / MANIFEST_JSON, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")

    files[MANIFEST_JSON] = out / MANIFEST_JSON
    return PipelineResult(
        out_dir=out,
        files=files,
        manifest=manifest,
        embed_strata=embed_strata,
        lex_strata=lex_strata,
        series=series,
        treesim=treesim_summary,
        mean_embed_coverage=mean_embed,
        mean_lex_coverage=mean_lex,
    )


def _collect_subtrees(table: OccurrenceTable, parse_lines, marker: str):
    """Subtree spans per occurrence row, propagated to BPE segments.

    Sentences whose parse is missing, unparseable, or unalignable contribute
    no subtrees; they are counted and the first failure is reported.
    """
    by_sentence: dict[int, list] = {}
    for occ in table.occurrences:
        by_sentence.setdefault(occ.sentence_id, []).append(occ)
    subtrees: dict[int, object] = {}
    failed = 0
    first_error = None
    for sid in sorted(by_sentence):
        occs = sorted(by_sentence[sid], key=lambda o: o.token_id)
        line = parse_lines[sid] if sid < len(parse_lines) else None
        if line is None:
            failed += 1
            if first_error is None:
                first_error = f"sentence {sid}: no parse"
            continue
        try:
            tree = parse_bracketed(line)
            words = tree.leaf_words(unescape=True)
            segment_map = align_bpe(words, [o.surface for o in occs], marker=marker)
            span_cache: dict[int, object] = {}
            for occ in occs:
                leaf = segment_map.word_of(occ.token_id)
                if leaf not in span_cache:
                    span_cache[leaf] = smallest_phrase_subtree(tree, leaf)
                subtrees[occ.row_id] = span_cache[leaf]
        except ToolkitError as exc:
            failed += 1
            if first_error is None:
                first_error = f"sentence {sid}: {exc}"
    return subtrees, failed, first_error
