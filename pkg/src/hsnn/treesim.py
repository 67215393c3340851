"""Constituency subtrees and PARSEVAL similarity between them.

A token's local syntax is the subtree rooted at the lowest non-preterminal
ancestor of its leaf. Subtrees are reduced to labeled-span multisets with
positions renumbered from 0 and terminals discarded, so trees from different
sentences (and of different lengths) stay comparable; preterminal labels are
kept separately for tagging accuracy.

Scoring follows evalb conventions: matched brackets are the multiset
intersection of labeled spans, crossing counts candidate spans that strictly
cross some gold span extent, phrase labels are compared after cutting
functional annotations at the first "-" or "=" (labels starting with "-",
like -LRB-, stay intact), and POS labels are compared raw.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .errors import (
    EmptySubtree,
    EmptyTree,
    LeafIndexOutOfRange,
    MalformedTree,
    MultipleRoots,
    UnbalancedParens,
)

PTB_UNESCAPE = {
    "-LRB-": "(",
    "-RRB-": ")",
    "-LSB-": "[",
    "-RSB-": "]",
    "-LCB-": "{",
    "-RCB-": "}",
}


class TreeNode:
    """Internal node (label + children) or leaf (terminal text, no children)."""

    __slots__ = ("label", "children", "start", "end", "parent")

    def __init__(self, label, children=None):
        self.label = label
        self.children = children if children is not None else []
        self.start = -1
        self.end = -1
        self.parent = None

    @property
    def is_leaf(self):
        return not self.children

    @property
    def is_preterminal(self):
        return len(self.children) == 1 and self.children[0].is_leaf


@dataclass(frozen=True)
class ConstTree:
    root: TreeNode
    leaves: tuple[TreeNode, ...]
    preterminals: tuple[TreeNode, ...]

    @property
    def leaf_count(self) -> int:
        return len(self.leaves)

    def leaf_words(self, unescape: bool = False) -> list[str]:
        words = [leaf.label for leaf in self.leaves]
        if unescape:
            words = [PTB_UNESCAPE.get(w, w) for w in words]
        return words


@dataclass(frozen=True)
class SubtreeSpan:
    """Labeled-span multiset of one subtree, local 0-based positions."""

    spans: Counter  # (label, start, end) -> multiplicity
    preterminals: tuple[str, ...]
    leaf_count: int
    size: int = field(init=False)
    extents: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "size", sum(self.spans.values()))
        object.__setattr__(self, "extents", tuple({(s, e) for (_l, s, e) in self.spans}))


@dataclass(frozen=True)
class ParsevalScores:
    precision: float
    recall: float
    complete_match: float  # 1.0 iff span multisets are equal
    crossing: int
    tag_accuracy: float


@dataclass(frozen=True)
class TreesimSummary:
    precision: float
    recall: float
    matched_brackets: float  # mean complete-match indicator
    cross_brackets: float  # mean crossing count
    tag_accuracy: float
    pair_count: int
    skipped_pairs: int


def parse_bracketed(line: str) -> ConstTree:
    """Parse one Penn-style bracketed tree; -LRB-/-RRB- style atoms pass through."""
    s = line
    n = len(s)
    i = 0
    root = None
    stack: list[TreeNode] = []
    while i < n:
        ch = s[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "(":
            if root is not None and not stack:
                raise MultipleRoots(f"second tree starts at position {i}")
            i += 1
            j = i
            while j < n and not s[j].isspace() and s[j] not in "()":
                j += 1
            node = TreeNode(s[i:j])
            if stack:
                stack[-1].children.append(node)
            stack.append(node)
            i = j
        elif ch == ")":
            if not stack:
                raise UnbalancedParens(i, "unmatched ')'")
            node = stack.pop()
            if not node.children:
                if node.label:
                    raise MalformedTree(f"constituent {node.label!r} has no children (position {i})")
                raise EmptyTree("empty bracket pair")
            if not stack:
                root = node
            i += 1
        else:
            if not stack:
                raise MalformedTree(f"terminal outside any tree at position {i}")
            j = i
            while j < n and not s[j].isspace() and s[j] not in "()":
                j += 1
            stack[-1].children.append(TreeNode(s[i:j]))
            i = j
    if stack:
        raise UnbalancedParens(n, "unclosed '('")
    if root is None:
        raise EmptyTree("no tree on line")
    leaves: list[TreeNode] = []
    preterminals: list[TreeNode] = []
    _index_tree(root, None, leaves, preterminals)
    return ConstTree(root=root, leaves=tuple(leaves), preterminals=tuple(preterminals))


def _index_tree(node: TreeNode, parent, leaves, preterminals) -> None:
    """Assign spans/parents depth-first; enforce the leaf-under-preterminal shape."""
    node.parent = parent
    if node.is_leaf:
        node.start = len(leaves)
        node.end = node.start + 1
        leaves.append(node)
        return
    has_leaf_child = any(c.is_leaf for c in node.children)
    if has_leaf_child and len(node.children) != 1:
        raise MalformedTree(f"terminal with siblings under {node.label!r}")
    node.start = len(leaves)
    for child in node.children:
        _index_tree(child, node, leaves, preterminals)
    node.end = len(leaves)
    if node.is_preterminal:
        preterminals.append(node)


def _strip_annotations(label: str) -> str:
    if not label or label[0] == "-":
        return label
    for k in range(1, len(label)):
        if label[k] in "-=":
            return label[:k]
    return label


def subtree_span(node: TreeNode) -> SubtreeSpan:
    """Reduce a subtree to its local labeled-span multiset plus POS sequence."""
    base = node.start
    spans: Counter = Counter()
    tagged: list[tuple[int, str]] = []  # (absolute leaf position, POS label)
    stack = [node]
    while stack:
        cur = stack.pop()
        if cur.is_leaf:
            continue
        if cur.is_preterminal:
            tagged.append((cur.children[0].start, cur.label))
        else:
            spans[(_strip_annotations(cur.label), cur.start - base, cur.end - base)] += 1
            stack.extend(cur.children)
    if not spans:
        # bare preterminal subtree: keep its own span so the multiset is nonempty
        spans[(node.label, 0, node.end - node.start)] += 1
    tagged.sort()
    return SubtreeSpan(
        spans=spans,
        preterminals=tuple(label for _pos, label in tagged),
        leaf_count=node.end - node.start,
    )


def smallest_phrase_subtree(tree: ConstTree, leaf_index: int) -> SubtreeSpan:
    """Span multiset of the subtree at the lowest non-preterminal ancestor of a leaf."""
    if not 0 <= leaf_index < tree.leaf_count:
        raise LeafIndexOutOfRange(leaf_index, tree.leaf_count)
    leaf = tree.leaves[leaf_index]
    preterminal = leaf.parent
    if preterminal is None:
        raise MalformedTree("bare terminal has no preterminal parent")
    target = preterminal.parent if preterminal.parent is not None else preterminal
    return subtree_span(target)


def parseval(gold: SubtreeSpan, candidate: SubtreeSpan) -> ParsevalScores:
    """Labeled precision/recall, complete match, crossing count, tag accuracy."""
    if gold.leaf_count == 0 or candidate.leaf_count == 0 or not gold.spans or not candidate.spans:
        raise EmptySubtree("parseval needs nonempty subtrees on both sides")
    matched = sum((gold.spans & candidate.spans).values())
    precision = matched / candidate.size
    recall = matched / gold.size
    complete = 1.0 if gold.spans == candidate.spans else 0.0
    crossing = 0
    for (_label, s, e), mult in candidate.spans.items():
        for s2, e2 in gold.extents:
            if s < s2 < e < e2 or s2 < s < e2 < e:
                crossing += mult
                break
    k = min(len(gold.preterminals), len(candidate.preterminals))
    tag_matches = sum(1 for a, b in zip(gold.preterminals[:k], candidate.preterminals[:k]) if a == b)
    tag_accuracy = tag_matches / max(gold.leaf_count, candidate.leaf_count)
    return ParsevalScores(
        precision=precision,
        recall=recall,
        complete_match=complete,
        crossing=crossing,
        tag_accuracy=tag_accuracy,
    )


def average_treesim(neighbor_lists, subtrees) -> TreesimSummary:
    """Mean PARSEVAL fields over all (query, neighbor) pairs.

    ``subtrees`` maps occurrence row ids to SubtreeSpans; pairs with a
    missing subtree on either side are excluded and counted. The query side
    is the gold tree.
    """
    sums = [0.0, 0.0, 0.0, 0.0, 0.0]
    pair_count = 0
    skipped = 0
    for nl in neighbor_lists:
        gold = subtrees.get(nl.query)
        for row in nl.neighbor_rows:
            cand = subtrees.get(int(row))
            if gold is None or cand is None:
                skipped += 1
                continue
            scores = parseval(gold, cand)
            sums[0] += scores.precision
            sums[1] += scores.recall
            sums[2] += scores.complete_match
            sums[3] += scores.crossing
            sums[4] += scores.tag_accuracy
            pair_count += 1
    if pair_count:
        means = [x / pair_count for x in sums]
    else:
        means = [0.0] * 5
    return TreesimSummary(
        precision=means[0],
        recall=means[1],
        matched_brackets=means[2],
        cross_brackets=means[3],
        tag_accuracy=means[4],
        pair_count=pair_count,
        skipped_pairs=skipped,
    )
