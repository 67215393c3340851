"""Command-line entry: create toy checkpoints and export state bundles."""

from __future__ import annotations

import argparse
import sys

from .export import ExportSpec, export_states, read_corpus
from .models import CheckpointError, VocabularyMismatch, init_checkpoint


def cmd_init(args) -> int:
    tokens: set[str] = set()
    for sentence in read_corpus(args.corpus):
        tokens.update(sentence)
    vocab = sorted(tokens)
    init_checkpoint(
        args.checkpoint,
        vocab,
        model_type=args.model_type,
        emb_dim=args.emb_dim,
        hidden_dim=args.hidden_dim,
        seed=args.seed,
    )
    print(f"wrote {args.model_type} checkpoint with vocab size {len(vocab)} to {args.checkpoint}")
    return 0


def cmd_export(args) -> int:
    spec = ExportSpec(
        checkpoint=args.checkpoint,
        corpus=args.corpus,
        out_dir=args.out_dir,
        selector=args.selector,
        batch_size=args.batch_size,
        marker=args.marker,
    )
    result = export_states(spec)
    print(
        f"exported {result.token_count} states (dim {result.dim}) over "
        f"{result.sentence_count} sentences; embedding table {result.vocab_size} x rows"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hsnn-export", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create a seeded toy checkpoint covering a corpus vocabulary")
    p.add_argument("--corpus", required=True, help="tokenized text, one sentence per line")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--model-type", dest="model_type", choices=["recurrent", "transformer"], default="recurrent")
    p.add_argument("--emb-dim", dest="emb_dim", type=int, default=16)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("export", help="dump hidden states + embedding table for a corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument(
        "--selector",
        choices=["concat", "forward", "backward", "encoder-top"],
        default="concat",
        help="which representation to log per token",
    )
    p.add_argument("--batch-size", dest="batch_size", type=int, default=16)
    p.add_argument("--marker", default="@@")
    p.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CheckpointError, VocabularyMismatch, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
