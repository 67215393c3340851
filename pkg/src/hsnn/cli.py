"""Command-line driver.

Subcommands: synth, knn, coverage, treesim, concentration, report, run.
Exit codes: 0 success, 2 config error, 3 input inconsistency, 4 stage
failure. HSNN_THREADS overrides the configured thread count unless --threads
is given explicitly (flags always win).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .corpusio import (
    apply_frequency_band,
    load_embedding_vocab,
    load_parse_lines,
    load_token_index,
    load_vector_log,
)
from .lexicon import load_relations, related_set
from .errors import (
    BadMagic,
    ConfigError,
    DuplicatePosition,
    HeaderMismatch,
    InputInconsistency,
    MalformedRow,
    NonFiniteValue,
    RowCountMismatch,
    ToolkitError,
    UnknownRelationTag,
)
from .knn import read_neighbors_tsv
from .metrics import (
    ACP_EMBED,
    ACP_LEX,
    AV,
    KIND_EMBED,
    ConcentrationRecord,
    CoverageRecord,
    positional_mean,
    stratify_by_pos,
)
from .pipeline import (
    CONCENTRATION_TSV,
    COVERAGE_TSV,
    POSITIONAL_TSV,
    REPORT_TXT,
    STRATA_TSV,
    TREESIM_TSV,
    AnalysisConfig,
    _collect_subtrees,
    _type_neighbor_map,
    _write_concentration_tsv,
    _write_coverage_tsv,
    _write_positional_tsv,
    _write_report,
    _write_strata_tsv,
    _write_treesim_tsv,
    emit_figure_data,
    run_pipeline,
)
from .synth import SynthSpec, generate_synthetic
from .treesim import TreesimSummary, average_treesim

INPUT_ERRORS = (
    InputInconsistency,
    BadMagic,
    HeaderMismatch,
    NonFiniteValue,
    RowCountMismatch,
    DuplicatePosition,
    MalformedRow,
    UnknownRelationTag,
)

EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_STAGE = 4


def _threads_default() -> int | None:
    value = os.environ.get("HSNN_THREADS")
    if value is None:
        return None
    try:
        return max(1, int(value))
    except ValueError:
        raise ConfigError(f"HSNN_THREADS must be an integer, got {value!r}") from None


def _add_io_args(parser, vectors=True, tokens=True, out=True):
    if vectors:
        parser.add_argument("--vectors", required=True, help="binary vector log")
    if tokens:
        parser.add_argument("--tokens", required=True, help="token index TSV")
    if out:
        parser.add_argument("--out-dir", required=True, help="output directory")


def _load_corpus(args):
    vectors = load_vector_log(args.vectors)
    table = load_token_index(args.tokens, vectors)
    return vectors, table


def _read_coverage_tsv(path):
    embed, lex = [], []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("kind\t"):
            raise InputInconsistency(f"{path}: not a coverage TSV")
        for line in fh:
            kind, row_id, sid, tid, num, den, _value = line.rstrip("\n").split("\t")
            rec = CoverageRecord(
                row_id=int(row_id),
                sentence_id=int(sid),
                token_id=int(tid),
                kind=kind,
                numerator=int(num),
                denominator=int(den),
            )
            (embed if kind == KIND_EMBED else lex).append(rec)
    return embed, lex


def _read_concentration_tsv(path):
    records = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("row_id\t"):
            raise InputInconsistency(f"{path}: not a concentration TSV")
        for line in fh:
            row_id, sid, tid, value = line.rstrip("\n").split("\t")
            records.append(
                ConcentrationRecord(
                    row_id=int(row_id), sentence_id=int(sid), token_id=int(tid), value=float(value)
                )
            )
    return records


def _read_treesim_tsv(path):
    with open(path, encoding="utf-8") as fh:
        fh.readline()
        parts = fh.readline().rstrip("\n").split("\t")
    return TreesimSummary(
        precision=float(parts[0]),
        recall=float(parts[1]),
        matched_brackets=float(parts[2]),
        cross_brackets=float(parts[3]),
        tag_accuracy=float(parts[4]),
        pair_count=int(parts[5]),
        skipped_pairs=int(parts[6]),
    )


def cmd_synth(args) -> int:
    spec = SynthSpec(
        clusters=args.clusters,
        tokens_per_cluster=args.tokens_per_cluster,
        dim=args.dim,
        noise=args.noise,
        planted_coverage=args.planted_coverage,
        seed=args.seed,
        occurrences_per_type=args.occurrences_per_type,
        sentence_length=args.sentence_length,
        mixing=args.mixing,
        split_fraction=args.split_fraction,
        marker=args.marker,
    )
    bundle = generate_synthetic(args.out_dir, spec)
    print(
        f"wrote {bundle.token_count} tokens, {bundle.sentence_count} sentences, "
        f"{bundle.vocab_size} types to {bundle.out_dir}"
    )
    return 0


def cmd_run(args) -> int:
    overrides = {
        key: getattr(args, key)
        for key in AnalysisConfig.__dataclass_fields__
        if hasattr(args, key)
    }
    if overrides.get("threads") is None:
        overrides["threads"] = _threads_default()
    if args.config:
        config = AnalysisConfig.from_file(args.config, overrides)
    else:
        missing = [k for k in ("vectors", "tokens", "out_dir") if overrides.get(k) is None]
        if missing:
            raise ConfigError(f"missing required options without --config: {missing}")
        config = AnalysisConfig(**{k: v for k, v in overrides.items() if v is not None})
    result = run_pipeline(config)
    print(f"analysis complete: {result.out_dir}")
    return 0


def cmd_knn(args) -> int:
    threads = args.threads if args.threads is not None else (_threads_default() or 1)
    config = AnalysisConfig(
        vectors=args.vectors,
        tokens=args.tokens,
        out_dir=args.out_dir,
        n=args.n,
        min_freq=args.min_freq,
        max_freq=args.max_freq,
        exclusion=args.exclusion,
        threads=threads,
        marker=args.marker,
        neighbors_bin=args.neighbors_bin,
    )
    config.validate()
    from .knn import all_neighbors, build_index, write_neighbors_bin, write_neighbors_tsv

    vectors, table = _load_corpus(args)
    queries = apply_frequency_band(table, config.min_freq, config.max_freq)
    index = build_index(vectors, table)
    run = all_neighbors(index, queries, config.n, config.exclusion, threads=config.threads)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_neighbors_tsv(out / "neighbors.tsv", run.lists)
    if config.neighbors_bin:
        write_neighbors_bin(out / "neighbors.bin", run.lists)
    print(f"wrote {len(run.lists)} neighbor lists ({len(run.skipped)} unqueryable skipped)")
    return 0


def cmd_coverage(args) -> int:
    vectors, table = _load_corpus(args)
    lists = [nl for nl in read_neighbors_tsv(args.neighbors) if len(nl) > 0]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    from .metrics import embedding_coverage, lexical_coverage

    embed_records, lex_records = [], []
    strata_tables = []
    if args.embeddings:
        if not args.vocab:
            raise ConfigError("--embeddings requires --vocab")
        embeddings = load_vector_log(args.embeddings)
        vocab = load_embedding_vocab(args.vocab)
        if embeddings.count != len(vocab):
            raise InputInconsistency(f"embedding count {embeddings.count} != vocab size {len(vocab)}")
        key_of = (lambda occ: occ.surface) if args.embed_key == "surface" else (lambda occ: occ.origin_word)
        unique_types = sorted({key_of(table.occurrence(nl.query)) for nl in lists})
        type_lists, _missing, _zeroed = _type_neighbor_map(embeddings, vocab, unique_types, args.n)
        for nl in lists:
            tnl = type_lists.get(key_of(table.occurrence(nl.query)))
            if tnl is not None:
                embed_records.append(embedding_coverage(nl, tnl, table, key=args.embed_key))
    if args.lexicon:
        relations = load_relations(args.lexicon)
        cache = {}
        for nl in lists:
            occ = table.occurrence(nl.query)
            word = occ.origin_word if args.lex_key == "origin" else occ.surface
            if word not in cache:
                cache[word] = related_set(relations, word, fold_case=args.fold_case)
            lex_records.append(lexical_coverage(nl, cache[word], table, key=args.lex_key, fold_case=args.fold_case))
    if not embed_records and not lex_records:
        raise ConfigError("coverage needs --embeddings/--vocab and/or --lexicon")
    _write_coverage_tsv(out / COVERAGE_TSV, [*embed_records, *lex_records])
    for records in (embed_records, lex_records):
        if records:
            strata_tables.append(stratify_by_pos(records, table, var_mode=args.var_mode))
    _write_strata_tsv(out / STRATA_TSV, strata_tables)
    print(f"wrote {len(embed_records)} embedding and {len(lex_records)} lexicon coverage records")
    return 0


def cmd_concentration(args) -> int:
    from .metrics import concentration

    _vectors, table = _load_corpus(args)
    lists = [nl for nl in read_neighbors_tsv(args.neighbors) if len(nl) > 0]
    records = [concentration(nl, table) for nl in lists]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_concentration_tsv(out / CONCENTRATION_TSV, records)
    print(f"wrote {len(records)} concentration records")
    return 0


def cmd_treesim(args) -> int:
    _vectors, table = _load_corpus(args)
    parse_lines = load_parse_lines(args.parses)
    required = (max(table.sentence_lengths) + 1) if table.sentence_lengths else 0
    if len(parse_lines) != required:
        raise InputInconsistency(
            f"parses file has {len(parse_lines)} lines, corpus needs {required}"
        )
    lists = [nl for nl in read_neighbors_tsv(args.neighbors) if len(nl) > 0]
    subtrees, failed, first_error = _collect_subtrees(table, parse_lines, args.marker)
    summary = average_treesim(lists, subtrees)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_treesim_tsv(out / TREESIM_TSV, summary)
    msg = f"scored {summary.pair_count} pairs ({summary.skipped_pairs} skipped"
    msg += f", {failed} sentences unusable: {first_error})" if failed else ")"
    print(msg)
    return 0


def cmd_report(args) -> int:
    _vectors, table = _load_corpus(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    embed_records, lex_records = ([], [])
    coverage_path = Path(args.coverage) if args.coverage else out / COVERAGE_TSV
    if coverage_path.is_file():
        embed_records, lex_records = _read_coverage_tsv(coverage_path)
    conc_path = Path(args.concentration) if args.concentration else out / CONCENTRATION_TSV
    conc_records = _read_concentration_tsv(conc_path) if conc_path.is_file() else []
    series = []
    if embed_records:
        series.append(positional_mean(embed_records, table, ACP_EMBED, args.positional_mode))
    if lex_records:
        series.append(positional_mean(lex_records, table, ACP_LEX, args.positional_mode))
    if conc_records:
        series.append(positional_mean(conc_records, table, AV, args.positional_mode))
    if series:
        _write_positional_tsv(out / POSITIONAL_TSV, series)
        emit_figure_data(out, series)
    embed_strata = stratify_by_pos(embed_records, table, var_mode=args.var_mode) if embed_records else None
    lex_strata = stratify_by_pos(lex_records, table, var_mode=args.var_mode) if lex_records else None
    treesim_path = Path(args.treesim) if args.treesim else out / TREESIM_TSV
    summary = _read_treesim_tsv(treesim_path) if treesim_path.is_file() else None
    skipped = {}
    if embed_strata is None:
        skipped["embedding_coverage"] = "no records"
    if lex_strata is None:
        skipped["lexical_coverage"] = "no records"
    if summary is None:
        skipped["treesim"] = "no treesim.tsv"
    _write_report(out / REPORT_TXT, embed_strata, lex_strata, summary, skipped)
    print(f"wrote {out / REPORT_TXT}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hsnn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic analysis bundle")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--clusters", type=int, required=True)
    p.add_argument("--tokens-per-cluster", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--planted-coverage", type=float, default=1.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--occurrences-per-type", type=int, default=1)
    p.add_argument("--sentence-length", type=int, default=8)
    p.add_argument("--mixing", type=float, default=0.0)
    p.add_argument("--split-fraction", type=float, default=0.0)
    p.add_argument("--marker", default="@@")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="run every stage the inputs allow")
    p.add_argument("--config", help="YAML config; flags override file values")
    p.add_argument("--vectors")
    p.add_argument("--tokens")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--embeddings")
    p.add_argument("--vocab")
    p.add_argument("--parses")
    p.add_argument("--lexicon")
    p.add_argument("--n", type=int)
    p.add_argument("--min-freq", dest="min_freq", type=int)
    p.add_argument("--max-freq", dest="max_freq", type=int)
    p.add_argument("--exclusion", choices=["same-type", "self-only"])
    p.add_argument("--embed-key", dest="embed_key", choices=["surface", "origin"])
    p.add_argument("--lex-key", dest="lex_key", choices=["origin", "surface"])
    p.add_argument("--var-mode", dest="var_mode", choices=["occurrence", "type"])
    p.add_argument("--positional-mode", dest="positional_mode", choices=["all", "present"])
    p.add_argument("--fold-case", dest="fold_case", action="store_const", const=True)
    p.add_argument("--lexicon-pos-filter", dest="lexicon_pos_filter", action="store_const", const=True)
    p.add_argument("--threads", type=int)
    p.add_argument("--marker")
    p.add_argument("--neighbors-bin", dest="neighbors_bin", action="store_const", const=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("knn", help="nearest neighbors only")
    _add_io_args(p)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--min-freq", dest="min_freq", type=int, default=10)
    p.add_argument("--max-freq", dest="max_freq", type=int, default=2000)
    p.add_argument("--exclusion", choices=["same-type", "self-only"], default="same-type")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--marker", default="@@")
    p.add_argument("--neighbors-bin", dest="neighbors_bin", action="store_true")
    p.set_defaults(func=cmd_knn)

    p = sub.add_parser("coverage", help="coverage records and strata from a neighbors file")
    _add_io_args(p)
    p.add_argument("--neighbors", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--vocab")
    p.add_argument("--lexicon")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--embed-key", dest="embed_key", choices=["surface", "origin"], default="surface")
    p.add_argument("--lex-key", dest="lex_key", choices=["origin", "surface"], default="origin")
    p.add_argument("--var-mode", dest="var_mode", choices=["occurrence", "type"], default="occurrence")
    p.add_argument("--fold-case", dest="fold_case", action="store_true")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("concentration", help="concentration records from a neighbors file")
    _add_io_args(p)
    p.add_argument("--neighbors", required=True)
    p.set_defaults(func=cmd_concentration)

    p = sub.add_parser("treesim", help="average subtree similarity from a neighbors file")
    _add_io_args(p)
    p.add_argument("--neighbors", required=True)
    p.add_argument("--parses", required=True)
    p.add_argument("--marker", default="@@")
    p.set_defaults(func=cmd_treesim)

    p = sub.add_parser("report", help="positional series, figure data, and the text report")
    _add_io_args(p)
    p.add_argument("--coverage", help="coverage.tsv (default: out-dir)")
    p.add_argument("--concentration", help="concentration.tsv (default: out-dir)")
    p.add_argument("--treesim", help="treesim.tsv (default: out-dir)")
    p.add_argument("--var-mode", dest="var_mode", choices=["occurrence", "type"], default="occurrence")
    p.add_argument("--positional-mode", dest="positional_mode", choices=["all", "present"], default="all")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except INPUT_ERRORS as exc:
        print(f"input inconsistency: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ToolkitError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
