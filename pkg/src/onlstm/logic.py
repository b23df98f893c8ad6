"""Propositional-logic inference data with a truth-table labeling oracle.

Formulas range over six variables and and/or/not, written fully parenthesized
with parentheses as ordinary tokens: `( a and ( not b ) )`. A formula's
semantics is the set of satisfying assignments out of all 64, kept as a
64-bit mask; the seven relation labels are set-algebra conditions between the
two masks, checked in a fixed order.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, FormulaError

VARIABLES = ("a", "b", "c", "d", "e", "f")
OPERATORS = ("and", "or", "not")
LOGIC_TOKENS = VARIABLES + OPERATORS + ("(", ")")

LABELS = (
    "equivalence",
    "forward-entailment",
    "reverse-entailment",
    "exhaustive-contradiction",
    "non-exhaustive-contradiction",
    "cover-independence",
    "plain-independence",
)
LABEL_TO_ID = {lab: i for i, lab in enumerate(LABELS)}

_FULL = (1 << 64) - 1
# bit m of _VAR_MASK[k] says whether variable k is true in assignment m
_VAR_MASK = {
    v: sum(1 << m for m in range(64) if (m >> k) & 1)
    for k, v in enumerate(VARIABLES)
}


def parse_formula(tokens):
    """Tokens -> AST of ("var", name) / ("not", f) / (op, f, g)."""
    toks = list(tokens)
    pos = 0

    def need(what):
        raise FormulaError(f"expected {what}", pos)

    def formula():
        nonlocal pos
        if pos >= len(toks):
            need("a variable or '('")
        t = toks[pos]
        if t in VARIABLES:
            pos += 1
            return ("var", t)
        if t != "(":
            need(f"a variable or '(', got {t!r}")
        pos += 1
        if pos < len(toks) and toks[pos] == "not":
            pos += 1
            inner = formula()
            node = ("not", inner)
        else:
            left = formula()
            if pos >= len(toks) or toks[pos] not in ("and", "or"):
                need("'and' or 'or'")
            op = toks[pos]
            pos += 1
            right = formula()
            node = (op, left, right)
        if pos >= len(toks) or toks[pos] != ")":
            need("')'")
        pos += 1
        return node

    ast = formula()
    if pos != len(toks):
        raise FormulaError("trailing tokens after formula", pos)
    return ast


def render_formula(ast) -> list[str]:
    if ast[0] == "var":
        return [ast[1]]
    if ast[0] == "not":
        return ["(", "not"] + render_formula(ast[1]) + [")"]
    return ["("] + render_formula(ast[1]) + [ast[0]] + render_formula(ast[2]) + [")"]


def count_ops(tokens) -> int:
    return sum(1 for t in tokens if t in OPERATORS)


def sat_mask(ast) -> int:
    """64-bit mask of satisfying assignments."""
    kind = ast[0]
    if kind == "var":
        return _VAR_MASK[ast[1]]
    if kind == "not":
        return _FULL ^ sat_mask(ast[1])
    if kind == "and":
        return sat_mask(ast[1]) & sat_mask(ast[2])
    return sat_mask(ast[1]) | sat_mask(ast[2])


def relation_from_masks(s1: int, s2: int) -> str:
    """The seven-way label, decided by the first matching set condition."""
    if s1 == s2:
        return "equivalence"
    if s1 & ~s2 == 0:
        return "forward-entailment"
    if s2 & ~s1 == 0:
        return "reverse-entailment"
    if s1 & s2 == 0 and (s1 | s2) == _FULL:
        return "exhaustive-contradiction"
    if s1 & s2 == 0:
        return "non-exhaustive-contradiction"
    if (s1 | s2) == _FULL:
        return "cover-independence"
    return "plain-independence"


def logic_relation_oracle(s1_tokens, s2_tokens) -> str:
    return relation_from_masks(sat_mask(parse_formula(s1_tokens)),
                               sat_mask(parse_formula(s2_tokens)))


@dataclass
class LogicSample:
    s1: tuple
    s2: tuple
    label: str
    ops1: int
    ops2: int

    @property
    def bucket(self) -> int:
        """The pair's operation count: the larger of the two sides."""
        return max(self.ops1, self.ops2)

    @property
    def label_id(self) -> int:
        return LABEL_TO_ID[self.label]


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------


def random_formula(n_ops: int, rng: np.random.Generator, variables=VARIABLES):
    """AST with exactly n_ops operators over the given variables."""
    if n_ops == 0:
        return ("var", variables[int(rng.integers(len(variables)))])
    r = rng.random()
    if r < 0.28:
        return ("not", random_formula(n_ops - 1, rng, variables))
    op = "and" if r < 0.64 else "or"
    k = int(rng.integers(n_ops))  # ops on the left subtree
    return (op, random_formula(k, rng, variables),
            random_formula(n_ops - 1 - k, rng, variables))


def _subformulas(ast):
    out = [ast]
    if ast[0] == "not":
        out += _subformulas(ast[1])
    elif ast[0] != "var":
        out += _subformulas(ast[1]) + _subformulas(ast[2])
    return out


def _ops_in(ast) -> int:
    if ast[0] == "var":
        return 0
    if ast[0] == "not":
        return 1 + _ops_in(ast[1])
    return 1 + _ops_in(ast[1]) + _ops_in(ast[2])


def _related_pair(bucket: int, rng: np.random.Generator, variables):
    """One candidate (ast1, ast2) whose larger side has `bucket` operators."""
    if bucket == 0:
        return (random_formula(0, rng, variables), random_formula(0, rng, variables))
    lo = int(rng.integers(bucket + 1))
    strategy = rng.random()
    if strategy < 0.40:
        # unrelated formulas over a shared variable pool
        a, b = random_formula(bucket, rng, variables), random_formula(lo, rng, variables)
    elif strategy < 0.60 and bucket >= 1:
        # negation of a shared core
        a = random_formula(bucket - 1, rng, variables)
        b = ("not", a)
    else:
        # one side embeds the other under a fresh conjunct/disjunct
        lo = min(lo, bucket - 1)
        a = random_formula(lo, rng, variables)
        top = "and" if rng.random() < 0.5 else "or"
        filler = random_formula(bucket - lo - 1, rng, variables)
        b = (top, a, filler) if rng.random() < 0.5 else (top, filler, a)
    if rng.random() < 0.5:
        a, b = b, a
    return a, b


def _make_sample(bucket, rng, variables) -> LogicSample:
    a, b = _related_pair(bucket, rng, variables)
    s1, s2 = tuple(render_formula(a)), tuple(render_formula(b))
    label = relation_from_masks(sat_mask(a), sat_mask(b))
    return LogicSample(s1, s2, label, _ops_in(a), _ops_in(b))


def logic_generate(n: int, max_ops_train: int = 6, max_ops_test: int = 12,
                   seed: int = 0, n_test_per_bucket: int = 120,
                   balance_cap: float = 0.40):
    """Seeded train/valid/test pair sets labeled by the truth-table oracle.

    Train pairs have at most max_ops_train operations per side; 10% are split
    off as validation. Test pairs are stratified with one stratum per
    operation count from 1 to max_ops_test. Rejection keeps any single label
    from exceeding balance_cap of the train set, relaxing only if the
    requested settings make the cap unreachable.
    """
    if n < 1:
        raise ConfigError("logic_generate: n must be >= 1")
    rng = np.random.default_rng(seed)
    variables = VARIABLES

    counts = {lab: 0 for lab in LABELS}
    train: list[LogicSample] = []
    stall = 0
    cap_active = True
    while len(train) < n:
        bucket = int(rng.integers(0, max_ops_train + 1)) if max_ops_train > 0 else 0
        sample = _make_sample(bucket, rng, variables)
        if cap_active and counts[sample.label] >= balance_cap * max(n, 25):
            stall += 1
            if stall > 200 * n:
                cap_active = False  # settings leave too few labels reachable
            continue
        stall = 0
        counts[sample.label] += 1
        train.append(sample)

    n_valid = max(1, n // 10) if n >= 10 else 0
    order = rng.permutation(len(train))
    valid = [train[i] for i in order[:n_valid]]
    train = [train[i] for i in order[n_valid:]]

    test: list[LogicSample] = []
    for bucket in range(1, max_ops_test + 1):
        for _ in range(n_test_per_bucket):
            test.append(_make_sample(bucket, rng, variables))
    return train, valid, test


# ---------------------------------------------------------------------------
# files
# ---------------------------------------------------------------------------


def write_logic(path: str, samples, header: str | None = None):
    """label<TAB>s1<TAB>s2 per line."""
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(header + "\n")
        for s in samples:
            fh.write(f"{s.label}\t{' '.join(s.s1)}\t{' '.join(s.s2)}\n")


def read_logic(path: str, validate: bool = False) -> list[LogicSample]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 tab-separated fields")
            label, s1, s2 = parts[0], tuple(parts[1].split()), tuple(parts[2].split())
            if label not in LABEL_TO_ID:
                raise DataError(f"{path}:{lineno}: unknown label {label!r}")
            if validate and logic_relation_oracle(s1, s2) != label:
                raise DataError(f"{path}:{lineno}: label disagrees with the oracle")
            out.append(LogicSample(s1, s2, label, count_ops(s1), count_ops(s2)))
    if not out:
        raise DataError(f"{path}: no samples")
    return out


def logic_vocab() -> "Vocab":
    from .datagen import RESERVED, Vocab
    return Vocab(list(RESERVED) + sorted(LOGIC_TOKENS))
