"""Synthetic corpora with known structure: a seeded PCFG sentence generator,
subject-verb agreement minimal pairs, and vocabulary handling."""

import json
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .trees import ParseTree

BOS, EOS, UNK = "<bos>", "<eos>", "<unk>"
RESERVED = (BOS, EOS, UNK)


# ---------------------------------------------------------------------------
# vocabulary
# ---------------------------------------------------------------------------


@dataclass
class Vocab:
    itos: list

    def __post_init__(self):
        if list(self.itos[:3]) != list(RESERVED):
            raise ConfigError("vocab must start with the reserved markers")
        self.stoi = {tok: i for i, tok in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ConfigError("vocab contains duplicate tokens")

    @property
    def size(self) -> int:
        return len(self.itos)

    @property
    def bos_id(self) -> int:
        return 0

    @property
    def eos_id(self) -> int:
        return 1

    @property
    def unk_id(self) -> int:
        return 2

    def encode(self, tokens) -> list[int]:
        unk = self.unk_id
        return [self.stoi.get(t, unk) for t in tokens]

    def decode(self, ids) -> list[str]:
        return [self.itos[i] for i in ids]


def build_vocab(corpus, min_count: int = 1) -> Vocab:
    """Tokens with frequency >= min_count, ordered by (-frequency, token)."""
    corpus = list(corpus)
    if not corpus:
        raise ConfigError("build_vocab: empty corpus")
    counts = Counter(tok for sent in corpus for tok in sent)
    kept = sorted((t for t, c in counts.items() if c >= min_count),
                  key=lambda t: (-counts[t], t))
    return Vocab(list(RESERVED) + kept)


# ---------------------------------------------------------------------------
# probabilistic context-free grammar
# ---------------------------------------------------------------------------


class Grammar:
    """Weighted productions over nonterminals; anything without a rule is a
    terminal. Right-hand sides may mix terminals and nonterminals."""

    def __init__(self, productions: dict, start: str = "S"):
        self.start = start
        self.productions = {
            nt: [(tuple(rhs), float(p)) for rhs, p in rules]
            for nt, rules in productions.items()
        }
        if start not in self.productions:
            raise ConfigError(f"start symbol {start!r} has no productions")
        for nt, rules in self.productions.items():
            if not rules:
                raise ConfigError(f"nonterminal {nt!r} has no productions")
            total = sum(p for _, p in rules)
            if abs(total - 1.0) > 1e-9:
                raise ConfigError(f"probabilities for {nt!r} sum to {total}, not 1")
            for rhs, p in rules:
                if p <= 0:
                    raise ConfigError(f"non-positive probability in {nt!r}")
                if not rhs:
                    raise ConfigError(f"empty right-hand side in {nt!r}")
        self.nonterminals = set(self.productions)
        self.terminals = {
            sym for rules in self.productions.values()
            for rhs, _ in rules for sym in rhs if sym not in self.productions
        }
        self._min_depth = self._compute_min_depths()

    def _compute_min_depths(self) -> dict:
        """Fixpoint of min derivation depth per nonterminal; also proves the
        grammar proper (every nonterminal derives a terminal string)."""
        depth = {nt: np.inf for nt in self.nonterminals}
        for _ in range(len(self.nonterminals) + 1):
            changed = False
            for nt, rules in self.productions.items():
                best = depth[nt]
                for rhs, _ in rules:
                    d = 1 + max((depth[s] for s in rhs if s in self.nonterminals),
                                default=0)
                    best = min(best, d)
                if best < depth[nt]:
                    depth[nt] = best
                    changed = True
            if not changed:
                break
        bad = [nt for nt, d in depth.items() if not np.isfinite(d)]
        if bad:
            raise ConfigError(f"grammar is not proper; {bad} never reach terminals")
        return depth

    def _choose(self, nt: str, recursion_hit: bool, rng) -> tuple:
        rules = self.productions[nt]
        if recursion_hit:
            # recursion budget spent: fastest routes to terminals only
            floor = min(
                max((self._min_depth[s] for s in rhs if s in self.nonterminals),
                    default=0) for rhs, _ in rules)
            rules = [(rhs, p) for rhs, p in rules
                     if max((self._min_depth[s] for s in rhs if s in self.nonterminals),
                            default=0) == floor]
        probs = np.array([p for _, p in rules])
        probs /= probs.sum()
        return rules[int(rng.choice(len(rules), p=probs))][0]

    def sample(self, rng: np.random.Generator, max_depth: int | None = None):
        """One derivation; returns (tokens, gold ParseTree, production tally).

        max_depth caps how many times any single nonterminal may be nested
        inside itself along one path; at the cap its expansion falls back to
        minimum-depth productions. The tally maps (nt, rhs) -> count.
        """
        tokens: list[str] = []
        tally: Counter = Counter()
        on_path: Counter = Counter()

        def expand(nt: str):
            hit = max_depth is not None and on_path[nt] >= max_depth
            rhs = self._choose(nt, hit, rng)
            tally[(nt, rhs)] += 1
            on_path[nt] += 1
            children = []
            for sym in rhs:
                if sym in self.nonterminals:
                    children.append(expand(sym))
                else:
                    tokens.append(sym)
                    children.append(ParseTree.leaf(len(tokens) - 1))
            on_path[nt] -= 1
            if len(children) == 1:
                child = children[0]
                if not child.is_leaf and child.label is None:
                    child.label = nt
                return child
            node = children[-1]
            for k in range(len(children) - 2, 0, -1):
                node = ParseTree.node(children[k], node)
            return ParseTree.node(children[0], node, label=nt)

        tree = expand(self.start)
        return tokens, tree, tally

    def to_json(self) -> str:
        return json.dumps({
            "start": self.start,
            "productions": {nt: [[list(rhs), p] for rhs, p in rules]
                            for nt, rules in self.productions.items()},
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Grammar":
        try:
            d = json.loads(text)
            return cls({nt: [(rhs, p) for rhs, p in rules]
                        for nt, rules in d["productions"].items()}, d["start"])
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"bad grammar file: {e}") from e


_N_S = ["dog", "cat", "bird", "horse", "child", "teacher", "robot", "farmer", "poet", "doctor"]
_N_P = ["dogs", "cats", "birds", "horses", "children", "teachers", "robots", "farmers",
        "poets", "doctors"]
_V_S = ["runs", "sees", "chases", "likes", "waits", "smiles"]
_V_P = ["run", "see", "chase", "like", "wait", "smile"]
_ADJ = ["big", "small", "old", "young", "happy", "clever"]
_ADV = ["quickly", "quietly", "happily", "eagerly"]
_PREP = ["near", "behind", "above", "beside"]
_DET_S = ["the", "a", "every", "this"]
_DET_P = ["the", "some", "these", "most"]

AGREEMENT_VERBS = list(zip(_V_S, _V_P))


def _lex(name, words):
    return {name: [((w,), 1.0 / len(words)) for w in words]}


def default_grammar() -> Grammar:
    """Number-agreeing grammar with recursive NP/PP structure.

    20 phrasal productions plus flat lexical entries; sentences come out
    between 4 and ~20 tokens with multiword subjects, which keeps the
    right-branching baseline honest.
    """
    prods: dict = {
        "S": [(("NP_S", "VP_S"), 0.5), (("NP_P", "VP_P"), 0.5)],
        "NP_S": [(("DET_S", "N_S"), 0.50), (("DET_S", "ADJ", "N_S"), 0.30),
                 (("NP_S", "PP"), 0.20)],
        "NP_P": [(("DET_P", "N_P"), 0.50), (("DET_P", "ADJ", "N_P"), 0.30),
                 (("NP_P", "PP"), 0.20)],
        "PP": [(("P", "NP_S"), 0.5), (("P", "NP_P"), 0.5)],
        "VP_S": [(("V_S", "ADV"), 0.20), (("V_S", "NP_S"), 0.275), (("V_S", "NP_P"), 0.275),
                 (("V_S", "NP_S", "PP"), 0.125), (("V_S", "NP_P", "PP"), 0.125)],
        "VP_P": [(("V_P", "ADV"), 0.20), (("V_P", "NP_S"), 0.275), (("V_P", "NP_P"), 0.275),
                 (("V_P", "NP_S", "PP"), 0.125), (("V_P", "NP_P", "PP"), 0.125)],
    }
    for name, words in (("N_S", _N_S), ("N_P", _N_P), ("V_S", _V_S), ("V_P", _V_P),
                        ("ADJ", _ADJ), ("ADV", _ADV), ("P", _PREP),
                        ("DET_S", _DET_S), ("DET_P", _DET_P)):
        prods.update(_lex(name, words))
    return Grammar(prods, "S")


DEFAULT_MAX_DEPTH = 5


def generate_cfg_corpus(grammar: Grammar, n: int, max_len: int = 20, seed: int = 0,
                        max_depth: int | None = DEFAULT_MAX_DEPTH,
                        collect_tally: Counter | None = None):
    """n sentences of at most max_len tokens with binarized gold trees."""
    if n < 1:
        raise ConfigError("generate_cfg_corpus: n must be >= 1")
    rng = np.random.default_rng(seed)
    out = []
    rejects = 0
    while len(out) < n:
        tokens, tree, tally = grammar.sample(rng, max_depth=max_depth)
        if len(tokens) > max_len:
            rejects += 1
            if rejects > 10 ** 6:
                raise DataError(
                    f"rejected {rejects} consecutive samples over max_len={max_len}; "
                    "grammar and length budget are incompatible")
            continue
        rejects = 0
        if collect_tally is not None:
            collect_tally.update(tally)
        out.append((tokens, tree))
    return out


# ---------------------------------------------------------------------------
# subject-verb agreement minimal pairs
# ---------------------------------------------------------------------------

AGREEMENT_CATEGORIES = ("simple", "short_attractor", "long_attractor")


def generate_agreement_pairs(n: int, seed: int = 0):
    """Minimal pairs differing only in the verb's number.

    Returns (grammatical tokens, ungrammatical tokens, category) triples;
    attractor categories interpose one or two prepositional phrases headed by
    nouns of the opposite number between subject and verb.
    """
    if n < 1:
        raise ConfigError("generate_agreement_pairs: n must be >= 1")
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n):
        plural = bool(rng.integers(2))
        category = AGREEMENT_CATEGORIES[int(rng.integers(3))]
        n_pps = AGREEMENT_CATEGORIES.index(category)

        def noun_phrase(is_plural):
            det = _DET_P if is_plural else _DET_S
            nouns = _N_P if is_plural else _N_S
            words = [det[rng.integers(len(det))]]
            if rng.random() < 0.3:
                words.append(_ADJ[rng.integers(len(_ADJ))])
            words.append(nouns[rng.integers(len(nouns))])
            return words

        subject = noun_phrase(plural)
        for _ in range(n_pps):
            subject += [_PREP[rng.integers(len(_PREP))]] + noun_phrase(not plural)

        v_s, v_p = AGREEMENT_VERBS[rng.integers(len(AGREEMENT_VERBS))]
        good_verb, bad_verb = (v_p, v_s) if plural else (v_s, v_p)
        tail = noun_phrase(bool(rng.integers(2))) if rng.random() < 0.5 else \
            [_ADV[rng.integers(len(_ADV))]]
        good = subject + [good_verb] + tail
        bad = subject + [bad_verb] + tail
        pairs.append((good, bad, category))
    return pairs


# ---------------------------------------------------------------------------
# corpus files
# ---------------------------------------------------------------------------


def manifest_line(**fields) -> str:
    return "# " + " ".join(f"{k}={v}" for k, v in fields.items())


def write_corpus(path: str, sentences, header: str | None = None):
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(header + "\n")
        for sent in sentences:
            fh.write(" ".join(sent) + "\n")


def read_corpus(path: str) -> list[list[str]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            out.append(line.split())
    if not out:
        raise DataError(f"{path}: no sentences")
    return out


def write_pairs(path: str, pairs, header: str | None = None):
    """category<TAB>grammatical<TAB>ungrammatical, one pair per line."""
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(header + "\n")
        for good, bad, category in pairs:
            fh.write(f"{category}\t{' '.join(good)}\t{' '.join(bad)}\n")


def read_pairs(path: str) -> list[tuple[list[str], list[str], str]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 tab-separated fields")
            category, good, bad = parts
            out.append((good.split(), bad.split(), category))
    if not out:
        raise DataError(f"{path}: no pairs")
    return out
