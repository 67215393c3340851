"""Exception hierarchy shared across the toolkit.

Contract errors carry the offending coordinates (row/column, line number,
positions) as attributes so callers can report them without parsing
messages.
"""


class ToolkitError(Exception):
    """Base class for every error raised by this package."""


# --- vector log / token index ------------------------------------------------

class BadMagic(ToolkitError):
    """File does not start with the expected magic bytes."""


class HeaderMismatch(ToolkitError):
    """Header-declared payload size does not match the file contents."""


class NonFiniteValue(ToolkitError):
    """A vector entry is NaN or infinite."""

    def __init__(self, row, col):
        super().__init__(f"non-finite value at row {row}, col {col}")
        self.row = row
        self.col = col


class RowCountMismatch(ToolkitError):
    """Token index row count differs from the vector count."""


class DuplicatePosition(ToolkitError):
    """Two occurrences claim the same (sentence_id, token_id)."""

    def __init__(self, sentence_id, token_id):
        super().__init__(f"duplicate position ({sentence_id}, {token_id})")
        self.sentence_id = sentence_id
        self.token_id = token_id


class MalformedRow(ToolkitError):
    """A TSV row cannot be parsed."""

    def __init__(self, line_no, reason):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


# --- BPE alignment ------------------------------------------------------------

class AlignmentFailure(ToolkitError):
    """Detokenized segments do not reproduce the word sequence."""


class EmptyInput(ToolkitError):
    """Alignment called with no words or no segments."""


# --- similarity engine ---------------------------------------------------------

class ZeroVector(ToolkitError):
    """Cosine similarity is undefined for a zero-norm vector."""


class DimensionMismatch(ToolkitError):
    """Vectors of different dimensionality were compared."""


class SizeMismatch(ToolkitError):
    """Vector count and token-index size disagree."""


class UnqueryableRow(ToolkitError):
    """The query row was flagged unqueryable (zero norm)."""

    def __init__(self, row):
        super().__init__(f"row {row} is unqueryable (zero norm)")
        self.row = row


class UnknownType(ToolkitError):
    """Query type is absent from the embedding vocabulary."""


# --- relation lexicon ----------------------------------------------------------

class UnknownRelationTag(ToolkitError):
    """Relation tag outside SYN/ANT/HYPO/HYPER."""

    def __init__(self, line_no, tag):
        super().__init__(f"line {line_no}: unknown relation tag {tag!r}")
        self.line_no = line_no
        self.tag = tag


# --- metrics -------------------------------------------------------------------

class EmptyNeighborList(ToolkitError):
    """Coverage/concentration need at least one neighbor."""


# --- bracketed trees -----------------------------------------------------------

class TreeError(ToolkitError):
    """Base class for bracketed-tree parsing errors."""


class UnbalancedParens(TreeError):
    def __init__(self, position, reason="unbalanced parentheses"):
        super().__init__(f"{reason} at position {position}")
        self.position = position


class EmptyTree(TreeError):
    """Empty line or bracket pair with no content."""


class MultipleRoots(TreeError):
    """More than one top-level tree on a line."""


class MalformedTree(TreeError):
    """Structurally invalid tree (e.g. a terminal with non-preterminal parent)."""


class LeafIndexOutOfRange(TreeError):
    def __init__(self, index, leaf_count):
        super().__init__(f"leaf index {index} out of range (leaf count {leaf_count})")
        self.index = index
        self.leaf_count = leaf_count


class EmptySubtree(TreeError):
    """PARSEVAL called on a subtree with no spans or no leaves."""


# --- driver ---------------------------------------------------------------------

class ConfigError(ToolkitError):
    """Invalid analysis configuration."""


class InputInconsistency(ToolkitError):
    """Mutually inconsistent input files (first offending record in message)."""


class SpecError(ToolkitError):
    """Invalid synthetic-fixture specification."""
