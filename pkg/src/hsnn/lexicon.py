"""Relation lexicon: per-word unions of synonyms, antonyms, hyponyms, hypernyms.

The on-disk form is a flat TSV export (``word relation related_word [pos]``)
so that any lexical database can be plugged in by dumping its direct
relations; no native database access happens here.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import MalformedRow, UnknownRelationTag

RELATIONS = ("SYN", "ANT", "HYPO", "HYPER")


@dataclass(frozen=True)
class RelationLexicon:
    """(word, relation) -> set of (related_word, pos) pairs; pos None = unrestricted."""

    entries: dict[tuple[str, str], frozenset[tuple[str, str | None]]]
    folded_keys: dict[tuple[str, str], frozenset[tuple[str, str | None]]]

    def words(self) -> set[str]:
        return {w for (w, _rel) in self.entries}


def load_relations(path) -> RelationLexicon:
    """Read the relation TSV, merging duplicate rows (set semantics)."""
    raw: dict[tuple[str, str], set[tuple[str, str | None]]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) not in (3, 4):
                raise MalformedRow(line_no, f"expected 3 or 4 fields, got {len(parts)}")
            word, relation, related = parts[0], parts[1], parts[2]
            pos = parts[3] if len(parts) == 4 and parts[3] else None
            if not word or not related:
                raise MalformedRow(line_no, "empty word field")
            if relation not in RELATIONS:
                raise UnknownRelationTag(line_no, relation)
            raw.setdefault((word, relation), set()).add((related, pos))
    entries = {key: frozenset(vals) for key, vals in raw.items()}
    folded: dict[tuple[str, str], set[tuple[str, str | None]]] = {}
    for (word, relation), vals in entries.items():
        folded.setdefault((word.casefold(), relation), set()).update(vals)
    return RelationLexicon(
        entries=entries,
        folded_keys={key: frozenset(vals) for key, vals in folded.items()},
    )


def related_set(
    lexicon: RelationLexicon,
    word: str,
    pos: str | None = None,
    fold_case: bool = False,
) -> frozenset[str]:
    """Union of the four direct relations of ``word``.

    With ``pos`` given, keeps entries carrying that pos or no pos. With
    ``fold_case``, the lookup key and the returned members are case-folded so
    membership tests stay symmetric. Absent words yield the empty set.
    """
    source = lexicon.folded_keys if fold_case else lexicon.entries
    key_word = word.casefold() if fold_case else word
    members: set[str] = set()
    for relation in RELATIONS:
        for related, entry_pos in source.get((key_word, relation), ()):
            if pos is not None and entry_pos is not None and entry_pos != pos:
                continue
            members.add(related.casefold() if fold_case else related)
    return frozenset(members)


def write_relations(path, rows) -> None:
    """Write (word, relation, related[, pos]) tuples as the TSV export."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write("\t".join(str(x) for x in row) + "\n")
