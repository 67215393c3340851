import numpy as np
import pytest

from hsnn_exporter.export import ExportSpec, export_states, origin_words
from hsnn_exporter.models import (
    CheckpointError,
    VocabularyMismatch,
    init_checkpoint,
    load_checkpoint,
)

TOY_CORPUS = "the ban on de@@ regulation\nthe law passed\n"  # 2 sentences, 8 tokens
SMALL_CORPUS = "the ban on de@@ regulation\nlaw passed\n"  # 2 sentences, 7 tokens


def corpus_file(tmp_path, text=TOY_CORPUS):
    path = tmp_path / "corpus.txt"
    path.write_text(text)
    return path


def vocab_of(text):
    return sorted({t for line in text.splitlines() for t in line.split()})


def checkpoint_for(tmp_path, text=TOY_CORPUS, **kw):
    path = tmp_path / "model.pt"
    init_checkpoint(path, vocab_of(text), **kw)
    return path


def spec_for(tmp_path, out="out", **kw):
    base = dict(
        checkpoint=str(tmp_path / "model.pt"),
        corpus=str(tmp_path / "corpus.txt"),
        out_dir=str(tmp_path / out),
    )
    base.update(kw)
    return ExportSpec(**base)


class TestOriginWords:
    def test_merges_marked_segments(self):
        tokens = ["de@@", "regulation", "the", "l@@", "a@@", "w"]
        assert origin_words(tokens, "@@") == [
            "deregulation",
            "deregulation",
            "the",
            "law",
            "law",
            "law",
        ]

    def test_plain_tokens_map_to_themselves(self):
        assert origin_words(["the", "law"], "@@") == ["the", "law"]


class TestCheckpoints:
    def test_round_trip(self, tmp_path):
        path = checkpoint_for(tmp_path, emb_dim=12, hidden_dim=6, seed=3)
        model, vocab, model_type, config = load_checkpoint(path)
        assert model_type == "recurrent"
        assert config["hidden_dim"] == 6
        assert vocab == vocab_of(TOY_CORPUS)

    def test_bad_file(self, tmp_path):
        path = tmp_path / "junk.pt"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_unknown_model_type(self, tmp_path):
        with pytest.raises(CheckpointError):
            init_checkpoint(tmp_path / "m.pt", ["a"], model_type="diffusion")


class TestExport:
    def test_one_vector_per_token(self, tmp_path):
        corpus_file(tmp_path, SMALL_CORPUS)
        checkpoint_for(tmp_path, SMALL_CORPUS)
        result = export_states(spec_for(tmp_path))
        assert result.token_count == 7
        assert result.sentence_count == 2

    def test_concat_dim_is_sum_of_directions(self, tmp_path):
        corpus_file(tmp_path)
        checkpoint_for(tmp_path, hidden_dim=8)
        concat = export_states(spec_for(tmp_path, out="concat", selector="concat"))
        forward = export_states(spec_for(tmp_path, out="fwd", selector="forward"))
        backward = export_states(spec_for(tmp_path, out="bwd", selector="backward"))
        assert forward.dim == backward.dim == 8
        assert concat.dim == forward.dim + backward.dim == 16

    def test_selector_validity_per_model_type(self, tmp_path):
        corpus_file(tmp_path)
        checkpoint_for(tmp_path)
        with pytest.raises(ValueError):
            export_states(spec_for(tmp_path, selector="encoder-top"))
        init_checkpoint(tmp_path / "model.pt", vocab_of(TOY_CORPUS), model_type="transformer")
        with pytest.raises(ValueError):
            export_states(spec_for(tmp_path, selector="forward"))
        result = export_states(spec_for(tmp_path, out="tr", selector="encoder-top"))
        assert result.token_count == 8

    def test_vocabulary_mismatch(self, tmp_path):
        corpus_file(tmp_path)
        checkpoint_for(tmp_path, "the law passed\n")
        with pytest.raises(VocabularyMismatch):
            export_states(spec_for(tmp_path))

    def test_backward_states_ignore_padding(self, tmp_path):
        # batch of two unequal sentences vs one-sentence batches: identical states
        corpus_file(tmp_path)
        checkpoint_for(tmp_path)
        batched = export_states(spec_for(tmp_path, out="b2", selector="backward", batch_size=2))
        single = export_states(spec_for(tmp_path, out="b1", selector="backward", batch_size=1))
        a = np.frombuffer(batched.vectors.read_bytes()[16:], dtype="<f4")
        b = np.frombuffer(single.vectors.read_bytes()[16:], dtype="<f4")
        np.testing.assert_allclose(a, b, atol=1e-6)


def test_criterion_exporter_round_trip(tmp_path):
    """[SECONDARY] bundle passes corpusio validation, counts/dims line up, exports are stable."""
    corpus_file(tmp_path, SMALL_CORPUS)
    checkpoint_for(tmp_path, SMALL_CORPUS, emb_dim=16, hidden_dim=8, seed=11)

    first = export_states(spec_for(tmp_path, out="run1"))
    second = export_states(spec_for(tmp_path, out="run2"))

    # corpusio validation (also executed inside export_states)
    from hsnn.corpusio import load_embedding_vocab, load_token_index, load_vector_log

    vectors = load_vector_log(first.vectors)
    table = load_token_index(first.tokens, vectors)
    embeddings = load_vector_log(first.embeddings)
    vocab = load_embedding_vocab(first.vocab)

    assert vectors.count == len(table) == 7  # one vector per token
    assert embeddings.count == len(vocab) == first.vocab_size

    forward = export_states(spec_for(tmp_path, out="fwd", selector="forward"))
    backward = export_states(spec_for(tmp_path, out="bwd", selector="backward"))
    assert first.dim == forward.dim + backward.dim

    for name in ("vectors", "tokens", "embeddings", "vocab"):
        assert getattr(first, name).read_bytes() == getattr(second, name).read_bytes(), name

    # the bundle drives the primary pipeline end to end through its CLI
    from hsnn.cli import main as hsnn_main

    out = tmp_path / "analysis"
    code = hsnn_main(
        [
            "run",
            "--vectors", str(first.vectors),
            "--tokens", str(first.tokens),
            "--embeddings", str(first.embeddings),
            "--vocab", str(first.vocab),
            "--out-dir", str(out),
            "--n", "3",
            "--min-freq", "1",
            "--max-freq", "100",
            "--exclusion", "self-only",
        ]
    )
    assert code == 0
    assert (out / "neighbors.tsv").is_file()
    assert (out / "concentration.tsv").is_file()
    print("exporter round trip: 7 tokens, concat 16 = 8 + 8, byte-identical re-export")
