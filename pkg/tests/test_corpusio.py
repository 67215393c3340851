import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsnn.corpusio import (
    MAGIC,
    OccurrenceTable,
    TokenOccurrence,
    align_bpe,
    apply_frequency_band,
    load_embedding_vocab,
    load_token_index,
    load_vector_log,
    write_embedding_vocab,
    write_token_index,
    write_vector_log,
)
from hsnn.errors import (
    AlignmentFailure,
    BadMagic,
    DuplicatePosition,
    EmptyInput,
    HeaderMismatch,
    MalformedRow,
    NonFiniteValue,
    RowCountMismatch,
)


def make_table(rows):
    """rows: (row_id, sid, tid, surface, origin, pos) tuples."""
    occs = tuple(TokenOccurrence(*r) for r in rows)
    lengths = {}
    for occ in occs:
        lengths[occ.sentence_id] = max(lengths.get(occ.sentence_id, 0), occ.token_id + 1)
    return OccurrenceTable(occurrences=occs, sentence_lengths=lengths)


def write_tokens(path, rows):
    write_token_index(path, [TokenOccurrence(*r) for r in rows])


class TestVectorLog:
    def test_header_echo(self, tmp_path):
        path = tmp_path / "v.hsv"
        data = np.arange(8, dtype=np.float32).reshape(2, 4)
        write_vector_log(path, data)
        vs = load_vector_log(path)
        assert (vs.dim, vs.count) == (4, 2)
        assert np.array_equal(vs.data, data)

    def test_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        data = rng.standard_normal((17, 5)).astype(np.float32)
        path = tmp_path / "v.hsv"
        write_vector_log(path, data)
        loaded = load_vector_log(path)
        assert loaded.data.tobytes() == data.tobytes()

    def test_missing_floats(self, tmp_path):
        path = tmp_path / "v.hsv"
        payload = struct.pack("<7f", *range(7))
        path.write_bytes(MAGIC + struct.pack("<IQ", 4, 2) + payload)
        with pytest.raises(HeaderMismatch):
            load_vector_log(path)

    def test_trailing_bytes(self, tmp_path):
        path = tmp_path / "v.hsv"
        payload = struct.pack("<9f", *range(9))
        path.write_bytes(MAGIC + struct.pack("<IQ", 4, 2) + payload)
        with pytest.raises(HeaderMismatch):
            load_vector_log(path)

    def test_nan_reported_with_coordinates(self, tmp_path):
        path = tmp_path / "v.hsv"
        data = np.zeros((2, 4), dtype=np.float32)
        data[1, 3] = np.nan
        write_vector_log(path, data)
        with pytest.raises(NonFiniteValue) as err:
            load_vector_log(path)
        assert (err.value.row, err.value.col) == (1, 3)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "v.hsv"
        path.write_bytes(b"XXXX" + struct.pack("<IQ", 1, 0))
        with pytest.raises(BadMagic):
            load_vector_log(path)

    def test_empty_vector_set(self, tmp_path):
        path = tmp_path / "v.hsv"
        write_vector_log(path, np.zeros((0, 3), dtype=np.float32))
        vs = load_vector_log(path)
        assert vs.count == 0 and vs.dim == 3


class TestTokenIndex:
    def rows2(self):
        return [
            (0, 0, 0, "the", "the", "_"),
            (1, 0, 1, "law", "law", "NOUN"),
        ]

    def vectors(self, tmp_path, count, dim=3):
        path = tmp_path / "v.hsv"
        write_vector_log(path, np.ones((count, dim), dtype=np.float32))
        return load_vector_log(path)

    def test_echo(self, tmp_path):
        write_tokens(tmp_path / "t.tsv", self.rows2())
        table = load_token_index(tmp_path / "t.tsv", self.vectors(tmp_path, 2))
        assert len(table) == 2
        assert table.occurrence(1).surface == "law"
        assert table.sentence_lengths == {0: 2}

    def test_duplicate_position(self, tmp_path):
        rows = [(0, 0, 1, "a", "a", "_"), (1, 0, 1, "b", "b", "_")]
        write_tokens(tmp_path / "t.tsv", rows)
        with pytest.raises(DuplicatePosition):
            load_token_index(tmp_path / "t.tsv", self.vectors(tmp_path, 2))

    def test_row_count_mismatch(self, tmp_path):
        rows = self.rows2() + [(2, 1, 0, "x", "x", "_")]
        write_tokens(tmp_path / "t.tsv", rows)
        with pytest.raises(RowCountMismatch):
            load_token_index(tmp_path / "t.tsv", self.vectors(tmp_path, 2))

    def test_malformed_row_reports_line(self, tmp_path):
        path = tmp_path / "t.tsv"
        path.write_text(
            "row_id\tsentence_id\ttoken_id\tsurface\torigin_word\tpos\n0\t0\t0\tthe\tthe\n"
        )
        with pytest.raises(MalformedRow) as err:
            load_token_index(path, self.vectors(tmp_path, 1))
        assert err.value.line_no == 2

    def test_duplicate_row_id(self, tmp_path):
        rows = [(0, 0, 0, "a", "a", "_"), (0, 0, 1, "b", "b", "_")]
        write_tokens(tmp_path / "t.tsv", rows)
        with pytest.raises(MalformedRow):
            load_token_index(tmp_path / "t.tsv", self.vectors(tmp_path, 2))

    def test_support_counts(self, tmp_path):
        rows = [
            (0, 0, 0, "a", "a", "_"),
            (1, 0, 1, "b", "b", "_"),
            (2, 0, 2, "c", "c", "_"),
            (3, 1, 0, "d", "d", "_"),
        ]
        write_tokens(tmp_path / "t.tsv", rows)
        table = load_token_index(tmp_path / "t.tsv", self.vectors(tmp_path, 4))
        support = table.support_counts()
        assert support.tolist() == [2, 1, 1]
        assert support.sum() == len(table)

    def test_support_nonincreasing_random(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            lengths = rng.integers(1, 12, size=rng.integers(1, 30))
            rows = []
            rid = 0
            for sid, length in enumerate(lengths):
                for tid in range(length):
                    rows.append((rid, sid, tid, f"w{rid}", f"w{rid}", "_"))
                    rid += 1
            table = make_table(rows)
            support = table.support_counts()
            assert (np.diff(support) <= 0).all()
            assert support.sum() == rid


class TestAlignBpe:
    def test_split_word(self):
        assert align_bpe(["deregulation"], ["de@@", "regulation"]).segment_to_word == (0, 0)

    def test_identity(self):
        assert align_bpe(["the", "law"], ["the", "law"]).segment_to_word == (0, 1)

    def test_boundary_crossing(self):
        # char-count oracle: "a"+"bc" puts the second segment across ab|cd
        with pytest.raises(AlignmentFailure):
            align_bpe(["ab", "cd"], ["a@@", "bc@@", "d"])

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            align_bpe([], ["a"])
        with pytest.raises(EmptyInput):
            align_bpe(["a"], [])

    def test_marker_at_word_end_rejected(self):
        with pytest.raises(AlignmentFailure):
            align_bpe(["ab"], ["ab@@"])

    def test_unmarked_mid_word_rejected(self):
        with pytest.raises(AlignmentFailure):
            align_bpe(["ab"], ["a", "b"])

    def test_wrong_characters_rejected(self):
        with pytest.raises(AlignmentFailure):
            align_bpe(["ab"], ["ax@@", "b"])

    def test_leftover_words_rejected(self):
        with pytest.raises(AlignmentFailure):
            align_bpe(["ab", "cd"], ["ab"])

    @given(
        st.lists(st.text(alphabet="abcdef", min_size=1, max_size=6), min_size=1, max_size=8),
        st.randoms(use_true_random=False),
    )
    @settings(max_examples=100, deadline=None)
    def test_random_segmentations_round_trip(self, words, rnd):
        segments = []
        for word in words:
            cuts = sorted(rnd.sample(range(1, len(word)), rnd.randint(0, len(word) - 1))) if len(word) > 1 else []
            bounds = [0, *cuts, len(word)]
            pieces = [word[a:b] for a, b in zip(bounds, bounds[1:])]
            segments.extend(p + "@@" for p in pieces[:-1])
            segments.append(pieces[-1])
        mapping = align_bpe(words, segments).segment_to_word
        assert list(mapping) == sorted(mapping)  # monotone
        assert set(mapping) == set(range(len(words)))  # surjective
        rebuilt = ["" for _ in words]
        for seg, w in zip(segments, mapping):
            rebuilt[w] += seg[:-2] if seg.endswith("@@") else seg
        assert rebuilt == list(words)


class TestFrequencyBand:
    def table_with_freqs(self, spec):
        """spec: dict surface -> count."""
        rows = []
        rid = 0
        for surface, freq in spec.items():
            for _ in range(freq):
                rows.append((rid, rid, 0, surface, surface, "_"))
                rid += 1
        return make_table(rows)

    def test_inclusive_lower_edge(self):
        table = self.table_with_freqs({"x": 10})
        assert len(apply_frequency_band(table, 10, 2000)) == 10

    def test_below_band_excluded(self):
        table = self.table_with_freqs({"x": 9})
        assert len(apply_frequency_band(table, 10, 2000)) == 0

    def test_hand_counted_band(self):
        # oracle: a occurs 3x (inside [2,5]), b once (outside)
        table = self.table_with_freqs({"a": 3, "b": 1})
        selected = apply_frequency_band(table, 2, 5)
        assert {table.occurrence(r).surface for r in selected.rows} == {"a"}
        assert len(selected) == 3

    def test_full_band_selects_everything(self):
        table = self.table_with_freqs({"a": 3, "b": 1})
        assert len(apply_frequency_band(table, 0, 10**9)) == 4

    def test_empty_band_selects_nothing(self):
        table = self.table_with_freqs({"a": 3, "b": 1})
        assert len(apply_frequency_band(table, 100, 200)) == 0

    def test_inverted_band_rejected(self):
        table = self.table_with_freqs({"a": 1})
        with pytest.raises(ValueError):
            apply_frequency_band(table, 5, 4)


class TestVocab:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "vocab.tsv"
        write_embedding_vocab(path, ["a", "b", "c"])
        assert load_embedding_vocab(path) == ["a", "b", "c"]

    def test_non_sequential_ids(self, tmp_path):
        path = tmp_path / "vocab.tsv"
        path.write_text("0\ta\n2\tb\n")
        with pytest.raises(MalformedRow):
            load_embedding_vocab(path)

    def test_duplicate_type(self, tmp_path):
        path = tmp_path / "vocab.tsv"
        path.write_text("0\ta\n1\ta\n")
        with pytest.raises(MalformedRow):
            load_embedding_vocab(path)
