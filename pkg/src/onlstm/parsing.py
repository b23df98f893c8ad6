"""From master-gate traces to trees, and grammaticality pair scoring."""

from collections import defaultdict

import numpy as np

from .errors import ConfigError, ContractError, DataError
from .models import LanguageModel, sentence_logprob
from .tensor import no_grad
from .trees import ParseTree, labeled_spans, tree_to_spans, unlabeled_f1


def default_parse_layer(n_layers: int) -> int:
    """The middle layer, 0-indexed: L//2 (the 2nd of 3 layers)."""
    return n_layers // 2


def estimate_distances(model: LanguageModel, tokens, layer: int) -> list[float]:
    """Split-point estimates, one per token, from the chosen layer.

    The sentence is fed behind a begin marker from zero states in evaluation
    mode; the estimate at position t comes from the step that consumes token
    t, so it measures how much structure closed right before that token.
    """
    toks = list(tokens)
    if not toks:
        raise ContractError("estimate_distances: empty sentence")
    (dists,) = corpus_distances(model, [toks], layer)
    return dists


def corpus_distances(model: LanguageModel, sentences, layer: int,
                     workers: int = 1) -> list[list[float]]:
    """Batched estimate_distances over many sentences (bucketed by length).

    Evaluation only (frozen model, no tape), so bucket chunks may run on a
    small thread pool; results keep the input order regardless.
    """
    if model.config.cell != "onlstm":
        raise ConfigError("distance estimation needs an ordered-neurons model")
    if not 0 <= layer < len(model.cells):
        raise ContractError(f"layer {layer} outside 0..{len(model.cells) - 1}")
    sentences = [list(s) for s in sentences]
    buckets: dict[int, list[int]] = defaultdict(list)
    for idx, s in enumerate(sentences):
        if not s:
            raise ContractError("estimate_distances: empty sentence")
        buckets[len(s)].append(idx)
    out: list[list[float]] = [None] * len(sentences)
    bos = model.config.bos_id
    chunks = []
    for length in sorted(buckets):
        idxs = buckets[length]
        for lo in range(0, len(idxs), 128):
            chunks.append(idxs[lo:lo + 128])

    def run(chunk):
        arr = np.array([sentences[i] for i in chunk], dtype=np.int64)
        inputs = np.concatenate(
            [np.full((len(chunk), 1), bos, dtype=np.int64), arr], axis=1)
        with no_grad():
            _, _, traces = model.forward_batch(inputs, collect_traces=True)
        # skip the begin-marker step; keep the steps consuming tokens
        per_step = traces[layer][1:]
        mat = np.stack([tr.split_estimate for tr in per_step], axis=1)  # [B, T]
        for row, i in enumerate(chunk):
            out[i] = [float(v) for v in mat[row]]

    if workers > 1 and len(chunks) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, chunks))
    else:
        for chunk in chunks:
            run(chunk)
    return out


def greedy_parse(distances) -> ParseTree:
    """Top-down greedy binary tree over the split-point estimates.

    Within a span the split lands on the largest estimate among all positions
    except the first (leftmost on ties), producing ((left) (split (rest))).
    """
    d = np.asarray(list(distances), dtype=np.float64)
    if d.size == 0:
        raise ContractError("greedy_parse: empty input")

    def build(lo: int, hi: int) -> ParseTree:
        if lo == hi:
            return ParseTree.leaf(lo)
        i = lo + 1 + int(np.argmax(d[lo + 1:hi + 1]))
        rest = ParseTree.leaf(i) if i == hi else ParseTree.node(
            ParseTree.leaf(i), build(i + 1, hi))
        return ParseTree.node(build(lo, i - 1), rest)

    return build(0, d.size - 1)


def tree_to_distances(tree: ParseTree) -> list[float]:
    """Distances whose greedy parse reproduces the tree (inverse oracle).

    Only trees the greedy schema can emit are invertible: every right child
    is a leaf or leads with one (the split token anchors as ((left) (x_i
    (rest)))), so arbitrary binary trees may have no generating distances.
    Shallower split points get strictly larger values; position 0 is unused
    by the parser and set to 0.
    """
    n = tree.n_leaves
    out = [0.0] * n

    def walk(node: ParseTree, depth: int):
        if node.is_leaf:
            return
        split = node.right.span()[0]
        out[split] = -float(depth)
        walk(node.left, depth + 1)
        walk(node.right, depth + 1)

    walk(tree, 1)
    return out


def parse_sentence(model: LanguageModel, tokens, layer: int) -> ParseTree:
    return greedy_parse(estimate_distances(model, tokens, layer))


def corpus_f1_from_trees(pred_trees, gold_trees, include_whole: bool = True,
                         include_singles: bool = False):
    """Macro-averaged (precision, recall, F1) plus per-label span accuracy."""
    if len(pred_trees) != len(gold_trees):
        raise DataError("predictions/gold length mismatch")
    if not gold_trees:
        raise DataError("empty evaluation corpus")
    ps, rs, f1s = [], [], []
    label_hits: dict[str, list[int]] = defaultdict(lambda: [0, 0])
    for pred, gold in zip(pred_trees, gold_trees):
        if gold is None:
            raise DataError("missing gold tree")
        p, r, f1 = unlabeled_f1(pred, gold, include_whole, include_singles)
        ps.append(p)
        rs.append(r)
        f1s.append(f1)
        pred_spans = tree_to_spans(pred, include_whole=True, include_singles=False)
        for label, s, e in labeled_spans(gold):
            if s == e:
                continue
            hit = label_hits[label]
            hit[1] += 1
            hit[0] += int((s, e) in pred_spans)
    acc = {lab: hits / total for lab, (hits, total) in sorted(label_hits.items())}
    return float(np.mean(ps)), float(np.mean(rs)), float(np.mean(f1s)), acc


def corpus_f1_from_distances(distances_per_sentence, gold_trees,
                             include_whole: bool = True, include_singles: bool = False):
    """Macro-averaged unlabeled F1 plus per-label span accuracy."""
    if len(distances_per_sentence) != len(gold_trees):
        raise DataError("distances/gold length mismatch")
    preds = [greedy_parse(d) for d in distances_per_sentence]
    _, _, f1, acc = corpus_f1_from_trees(preds, gold_trees, include_whole, include_singles)
    return f1, acc


def corpus_f1(model: LanguageModel, layer: int, corpus,
              include_whole: bool = True, include_singles: bool = False):
    """corpus: list of (token ids, gold ParseTree)."""
    sents = [ids for ids, _ in corpus]
    golds = [g for _, g in corpus]
    dists = corpus_distances(model, sents, layer)
    return corpus_f1_from_distances(dists, golds, include_whole, include_singles)


def score_pairs(model: LanguageModel, pairs) -> float:
    """Fraction of pairs where the grammatical side scores strictly higher."""
    pairs = list(pairs)
    if not pairs:
        raise ContractError("score_pairs: no pairs")
    wins = 0
    for good, bad in pairs:
        wins += int(sentence_logprob(model, good) > sentence_logprob(model, bad))
    return wins / len(pairs)
