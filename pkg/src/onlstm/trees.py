"""Binary parse trees, span scoring and bracketed-text serialization."""

import numpy as np

from .errors import ConfigError, ContractError, DataError, TreeError

# PTB escapes for tokens that collide with the bracket syntax
_ESCAPES = {"(": "-LRB-", ")": "-RRB-"}
_UNESCAPES = {v: k for k, v in _ESCAPES.items()}


class ParseTree:
    """Strictly binary tree over token positions 0..T-1.

    A node is either a leaf (carrying its token index) or an internal node
    with exactly two children. Internal nodes may carry a constituent label
    (gold trees from the corpus do; predicted trees do not).
    """

    __slots__ = ("index", "left", "right", "label")

    def __init__(self, index=None, left=None, right=None, label=None):
        self.index = index
        self.left = left
        self.right = right
        self.label = label

    @classmethod
    def leaf(cls, index: int) -> "ParseTree":
        return cls(index=int(index))

    @classmethod
    def node(cls, left: "ParseTree", right: "ParseTree", label: str | None = None) -> "ParseTree":
        return cls(left=left, right=right, label=label)

    @property
    def is_leaf(self) -> bool:
        return self.index is not None

    def leaves(self) -> list[int]:
        if self.is_leaf:
            return [self.index]
        return self.left.leaves() + self.right.leaves()

    @property
    def n_leaves(self) -> int:
        return 1 if self.is_leaf else self.left.n_leaves + self.right.n_leaves

    def span(self) -> tuple[int, int]:
        if self.is_leaf:
            return (self.index, self.index)
        return (self.left.span()[0], self.right.span()[1])

    def validate(self):
        """Leaves must read 0..T-1 left to right; every node binary."""
        got = self.leaves()
        if got != list(range(len(got))):
            raise TreeError(f"leaves out of order: {got}")
        stack = [self]
        while stack:
            n = stack.pop()
            if n.is_leaf:
                if n.left is not None or n.right is not None:
                    raise TreeError("leaf with children")
            else:
                if n.left is None or n.right is None:
                    raise TreeError("internal node without two children")
                stack += [n.left, n.right]
        return self

    def internal_nodes(self) -> list["ParseTree"]:
        out, stack = [], [self]
        while stack:
            n = stack.pop()
            if not n.is_leaf:
                out.append(n)
                stack += [n.left, n.right]
        return out

    def __eq__(self, other):
        if not isinstance(other, ParseTree):
            return NotImplemented
        if self.is_leaf or other.is_leaf:
            return self.index == other.index
        return self.left == other.left and self.right == other.right

    def __repr__(self):
        if self.is_leaf:
            return str(self.index)
        return f"({self.left!r} {self.right!r})"


def tree_to_spans(tree: ParseTree, include_whole: bool = True,
                  include_singles: bool = False) -> set:
    """(start, end) spans of internal nodes; optionally the leaf spans too."""
    whole = tree.span()
    spans = set()
    for n in tree.internal_nodes():
        s = n.span()
        if s == whole and not include_whole:
            continue
        spans.add(s)
    if include_singles:
        for i in tree.leaves():
            spans.add((i, i))
    return spans


def labeled_spans(tree: ParseTree) -> list[tuple[str, int, int]]:
    return [(n.label,) + n.span() for n in tree.internal_nodes() if n.label is not None]


def unlabeled_f1(pred: ParseTree, gold: ParseTree, include_whole: bool = True,
                 include_singles: bool = False) -> tuple[float, float, float]:
    """Span precision/recall/F1 between two trees over the same tokens."""
    if pred.n_leaves != gold.n_leaves:
        raise DataError(
            f"leaf count mismatch: predicted {pred.n_leaves} vs gold {gold.n_leaves}")
    ps = tree_to_spans(pred, include_whole, include_singles)
    gs = tree_to_spans(gold, include_whole, include_singles)
    hit = len(ps & gs)
    p = hit / len(ps) if ps else 0.0
    r = hit / len(gs) if gs else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


# ---------------------------------------------------------------------------
# baseline trees
# ---------------------------------------------------------------------------


def baseline_tree(kind: str, n_tokens: int, seed: int = 0) -> ParseTree:
    """Deterministic (or seeded) reference trees matching the usual baselines."""
    if n_tokens < 1:
        raise ContractError("baseline_tree: need at least one token")
    if kind == "left":
        t = ParseTree.leaf(0)
        for i in range(1, n_tokens):
            t = ParseTree.node(t, ParseTree.leaf(i))
        return t
    if kind == "right":
        t = ParseTree.leaf(n_tokens - 1)
        for i in range(n_tokens - 2, -1, -1):
            t = ParseTree.node(ParseTree.leaf(i), t)
        return t
    if kind == "balanced":
        def build(lo, hi):
            if lo == hi:
                return ParseTree.leaf(lo)
            mid = lo + (hi - lo + 1) // 2  # left half takes the extra token
            return ParseTree.node(build(lo, mid - 1), build(mid, hi))
        return build(0, n_tokens - 1)
    if kind == "random":
        rng = np.random.default_rng(seed)

        def build(lo, hi):
            if lo == hi:
                return ParseTree.leaf(lo)
            cut = lo + 1 + int(rng.integers(hi - lo))  # split in [lo+1, hi]
            return ParseTree.node(build(lo, cut - 1), build(cut, hi))
        return build(0, n_tokens - 1)
    raise ConfigError(f"unknown baseline tree kind {kind!r}")


# ---------------------------------------------------------------------------
# bracketed text
# ---------------------------------------------------------------------------


def _escape(token: str) -> str:
    return _ESCAPES.get(token, token)


def _unescape(token: str) -> str:
    return _UNESCAPES.get(token, token)


def tree_to_bracketed(tree: ParseTree, tokens: list[str], labeled: bool = False) -> str:
    def render(n):
        if n.is_leaf:
            return _escape(tokens[n.index])
        body = f"{render(n.left)} {render(n.right)}"
        if labeled and n.label:
            return f"({n.label} {body})"
        return f"( {body} )"
    return render(tree)


def write_trees(path: str, items, labeled: bool = False, header: str | None = None):
    """items: iterable of (tree, tokens). One bracketed sentence per line."""
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        for tree, tokens in items:
            fh.write(tree_to_bracketed(tree, tokens, labeled=labeled) + "\n")


def parse_bracketed(line: str, lineno: int = 0) -> tuple[ParseTree, list[str]]:
    """One bracketed sentence -> (tree, tokens).

    Accepts both the plain format `( ( the cat ) ( sat down ) )` and
    PTB-style labels `(NP (DT the) (NN cat))`. Preterminals and unary chains
    collapse onto their child; nodes with more than two children are
    right-binarized with unlabeled inner nodes.
    """
    toks = _lex(line)
    if not toks:
        raise TreeError("empty tree line", lineno)
    pos = 0
    words: list[str] = []

    def build():
        nonlocal pos
        kind, value = toks[pos]
        if kind == "token":
            pos += 1
            words.append(_unescape(value))
            return ParseTree.leaf(len(words) - 1)
        if kind == "close":
            raise TreeError("unexpected ')'", lineno)
        pos += 1  # consume open
        label = value
        children = []
        while pos < len(toks) and toks[pos][0] != "close":
            children.append(build())
        if pos >= len(toks):
            raise TreeError("unbalanced parentheses: missing ')'", lineno)
        pos += 1  # consume close
        if not children:
            raise TreeError("empty constituent '()'", lineno)
        if len(children) == 1:
            child = children[0]
            if not child.is_leaf and label is not None and child.label is None:
                child.label = label
            return child
        node = children[-1]
        for k in range(len(children) - 2, 0, -1):
            node = ParseTree.node(children[k], node)
        return ParseTree.node(children[0], node, label=label)

    tree = build()
    if pos != len(toks):
        raise TreeError("unbalanced parentheses: extra input after tree", lineno)
    tree.validate()
    return tree, words


def _lex(line: str):
    out = []
    i, n = 0, len(line)
    while i < n:
        ch = line[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "(":
            j = i + 1
            while j < n and not line[j].isspace() and line[j] not in "()":
                j += 1
            out.append(("open", line[i + 1:j] or None))
            i = j
            continue
        if ch == ")":
            out.append(("close", None))
            i += 1
            continue
        j = i
        while j < n and not line[j].isspace() and line[j] not in "()":
            j += 1
        out.append(("token", line[i:j]))
        i = j
    return out


def read_trees(path: str) -> list[tuple[ParseTree, list[str]]]:
    """Read one tree per line, skipping '#' comment lines."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            out.append(parse_bracketed(line, lineno))
    return out
