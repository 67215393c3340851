import pytest

from hsnn.errors import MalformedRow, UnknownRelationTag
from hsnn.lexicon import load_relations, related_set, write_relations


def lexicon_from(tmp_path, rows):
    path = tmp_path / "lex.tsv"
    write_relations(path, rows)
    return load_relations(path)


class TestLoad:
    def test_union_across_relations(self, tmp_path):
        lex = lexicon_from(tmp_path, [("law", "SYN", "statute"), ("law", "HYPER", "rule")])
        assert related_set(lex, "law") >= {"statute", "rule"}

    def test_duplicate_rows_idempotent(self, tmp_path):
        once = lexicon_from(tmp_path, [("law", "SYN", "statute")])
        twice = lexicon_from(tmp_path, [("law", "SYN", "statute")] * 2)
        assert related_set(once, "law") == related_set(twice, "law")

    def test_unknown_relation_tag(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("law\tMERONYM\tcourt\n")
        with pytest.raises(UnknownRelationTag) as err:
            load_relations(path)
        assert err.value.line_no == 1

    def test_malformed_row(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("law\tSYN\n")
        with pytest.raises(MalformedRow):
            load_relations(path)

    def test_optional_pos_column(self, tmp_path):
        lex = lexicon_from(tmp_path, [("law", "SYN", "statute", "NOUN")])
        assert related_set(lex, "law") == {"statute"}


class TestRelatedSet:
    def test_absent_word_empty(self, tmp_path):
        lex = lexicon_from(tmp_path, [("law", "SYN", "statute")])
        assert related_set(lex, "zebra") == frozenset()

    def test_manual_union_fixture(self, tmp_path):
        # oracle: union of the four relation sets written below
        lex = lexicon_from(
            tmp_path,
            [
                ("law", "SYN", "statute"),
                ("law", "HYPO", "bylaw"),
                ("law", "HYPER", "rule"),
            ],
        )
        assert related_set(lex, "law") == {"statute", "bylaw", "rule"}

    def test_case_folding(self, tmp_path):
        lex = lexicon_from(tmp_path, [("Law", "SYN", "Statute")])
        assert related_set(lex, "law") == frozenset()
        assert related_set(lex, "law", fold_case=True) == {"statute"}

    def test_pos_filter_keeps_untagged(self, tmp_path):
        lex = lexicon_from(
            tmp_path,
            [
                ("law", "SYN", "statute", "NOUN"),
                ("law", "SYN", "legislate", "VERB"),
                ("law", "HYPER", "rule"),
            ],
        )
        assert related_set(lex, "law", pos="NOUN") == {"statute", "rule"}
        assert related_set(lex, "law", pos="VERB") == {"legislate", "rule"}

    def test_pos_filter_is_subset(self, tmp_path):
        import random

        rnd = random.Random(7)
        words = [f"w{i}" for i in range(8)]
        rows = []
        for _ in range(60):
            rel = rnd.choice(["SYN", "ANT", "HYPO", "HYPER"])
            pos = rnd.choice([None, "NOUN", "VERB"])
            row = (rnd.choice(words), rel, rnd.choice(words))
            rows.append(row if pos is None else (*row, pos))
        lex = lexicon_from(tmp_path, rows)
        for w in words:
            unfiltered = related_set(lex, w)
            for pos in ("NOUN", "VERB", "ADJ"):
                assert related_set(lex, w, pos=pos) <= unfiltered

    def test_monotone_under_added_rows(self, tmp_path):
        base = [("law", "SYN", "statute"), ("dog", "HYPER", "animal")]
        extra = base + [("law", "ANT", "chaos"), ("cat", "SYN", "feline")]
        small = lexicon_from(tmp_path, base)
        big = lexicon_from(tmp_path, extra)
        for word in ("law", "dog", "cat", "zebra"):
            assert related_set(small, word) <= related_set(big, word)

    def test_no_implicit_reflexivity(self, tmp_path):
        lex = lexicon_from(tmp_path, [("law", "SYN", "statute")])
        assert "law" not in related_set(lex, "law")
        explicit = lexicon_from(tmp_path, [("law", "SYN", "law")])
        assert "law" in related_set(explicit, "law")
