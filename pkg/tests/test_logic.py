import itertools

import numpy as np
import pytest

from onlstm.errors import DataError, FormulaError
from onlstm.logic import (LABELS, VARIABLES, LogicSample, count_ops, logic_generate,
                          logic_relation_oracle, logic_vocab, parse_formula,
                          random_formula, read_logic, relation_from_masks,
                          render_formula, sat_mask, write_logic, _FULL)


# --- independent brute-force oracle: evaluate over all 64 assignments


def brute_sat_set(tokens) -> frozenset:
    ast = parse_formula(tokens)

    def ev(node, assignment):
        if node[0] == "var":
            return assignment[node[1]]
        if node[0] == "not":
            return not ev(node[1], assignment)
        if node[0] == "and":
            return ev(node[1], assignment) and ev(node[2], assignment)
        return ev(node[1], assignment) or ev(node[2], assignment)

    sats = []
    for bits in itertools.product([False, True], repeat=6):
        assignment = dict(zip(VARIABLES, bits))
        if ev(ast, assignment):
            sats.append(bits)
    return frozenset(sats)


def brute_relation(tokens1, tokens2) -> str:
    s1, s2 = brute_sat_set(tokens1), brute_sat_set(tokens2)
    universe = set(itertools.product([False, True], repeat=6))
    if s1 == s2:
        return "equivalence"
    if s1 < s2:
        return "forward-entailment"
    if s2 < s1:
        return "reverse-entailment"
    if not (s1 & s2) and (s1 | s2) == universe:
        return "exhaustive-contradiction"
    if not (s1 & s2):
        return "non-exhaustive-contradiction"
    if (s1 | s2) == universe:
        return "cover-independence"
    return "plain-independence"


# --- parsing and rendering


def test_parse_simple_forms():
    assert parse_formula(["a"]) == ("var", "a")
    assert parse_formula("( not b )".split()) == ("not", ("var", "b"))
    assert parse_formula("( a and ( not b ) )".split()) == \
        ("and", ("var", "a"), ("not", ("var", "b")))


def test_parse_errors_carry_position():
    with pytest.raises(FormulaError) as e:
        parse_formula("( a and )".split())
    assert e.value.position == 3
    with pytest.raises(FormulaError):
        parse_formula("( a or b".split())
    with pytest.raises(FormulaError):
        parse_formula("a b".split())
    with pytest.raises(FormulaError):
        parse_formula([])


def test_render_roundtrip_random(rng):
    for _ in range(200):
        ast = random_formula(int(rng.integers(0, 9)), rng)
        toks = render_formula(ast)
        assert parse_formula(toks) == ast


def test_count_ops_counts_operators():
    assert count_ops("( a and ( not b ) )".split()) == 2
    assert count_ops(["c"]) == 0


# --- oracle examples


def test_oracle_identity_is_equivalence():
    assert logic_relation_oracle(["a"], ["a"]) == "equivalence"


def test_oracle_negation_is_exhaustive_contradiction():
    assert logic_relation_oracle(["a"], "( not a )".split()) == "exhaustive-contradiction"


def test_oracle_weakening_is_forward_entailment():
    toks1, toks2 = ["a"], "( a or b )".split()
    assert brute_relation(toks1, toks2) == "forward-entailment"
    assert logic_relation_oracle(toks1, toks2) == "forward-entailment"


def test_oracle_distinct_vars_plain_independence():
    assert brute_relation(["a"], ["b"]) == "plain-independence"
    assert logic_relation_oracle(["a"], ["b"]) == "plain-independence"


def test_oracle_cover_independence_example():
    s1, s2 = "( a or b )".split(), "( not a )".split()
    assert brute_relation(s1, s2) == "cover-independence"
    assert logic_relation_oracle(s1, s2) == "cover-independence"


def test_oracle_non_exhaustive_contradiction_example():
    s1, s2 = "( a and b )".split(), "( a and ( not b ) )".split()
    assert brute_relation(s1, s2) == "non-exhaustive-contradiction"
    assert logic_relation_oracle(s1, s2) == "non-exhaustive-contradiction"


def test_oracle_matches_brute_force_on_random_pairs(rng):
    for _ in range(300):
        a = render_formula(random_formula(int(rng.integers(0, 6)), rng))
        b = render_formula(random_formula(int(rng.integers(0, 6)), rng))
        assert logic_relation_oracle(a, b) == brute_relation(a, b)


# --- relation algebra properties


def _nondegenerate(rng, ops):
    while True:
        ast = random_formula(ops, rng)
        m = sat_mask(ast)
        if m not in (0, _FULL):
            return ast


def test_converse_and_symmetry_properties(rng):
    for _ in range(300):
        a = random_formula(int(rng.integers(0, 6)), rng)
        b = random_formula(int(rng.integers(0, 6)), rng)
        ab = relation_from_masks(sat_mask(a), sat_mask(b))
        ba = relation_from_masks(sat_mask(b), sat_mask(a))
        if ab == "forward-entailment":
            assert ba == "reverse-entailment"
        elif ab == "reverse-entailment":
            assert ba == "forward-entailment"
        else:
            assert ba == ab  # the other five labels are symmetric


def test_negation_property_nondegenerate(rng):
    # for satisfiable, non-tautological s: (s, not s) is exhaustive contradiction
    for _ in range(200):
        ast = _nondegenerate(rng, int(rng.integers(0, 5)))
        toks = render_formula(ast)
        assert logic_relation_oracle(toks, ["(", "not"] + toks + [")"]) == \
            "exhaustive-contradiction"


def test_degenerate_negation_is_entailment_by_the_if_chain():
    # unsatisfiable s: the subset test fires before the contradiction test
    s = "( a and ( not a ) )".split()
    assert logic_relation_oracle(s, ["(", "not"] + s + [")"]) == "forward-entailment"


def test_double_negation_is_equivalence(rng):
    for _ in range(200):
        toks = render_formula(random_formula(int(rng.integers(0, 5)), rng))
        nn = ["(", "not", "(", "not"] + toks + [")", ")"]
        assert logic_relation_oracle(toks, nn) == "equivalence"


# --- generation


def test_zero_ops_setting_exhaustive_pairs():
    train, valid, test = logic_generate(36, max_ops_train=0, max_ops_test=1,
                                        seed=0, n_test_per_bucket=5)
    for s in train + valid:
        assert len(s.s1) == 1 and len(s.s2) == 1
        assert s.label in ("equivalence", "plain-independence")
    # exhaustively verify the only achievable labels over single variables
    for v1 in VARIABLES:
        for v2 in VARIABLES:
            want = "equivalence" if v1 == v2 else "plain-independence"
            assert logic_relation_oracle([v1], [v2]) == want


def test_same_seed_identical_dataset():
    a = logic_generate(200, seed=5)
    b = logic_generate(200, seed=5)
    assert a == b


def test_generated_samples_agree_with_oracle_and_caps():
    train, valid, test = logic_generate(400, max_ops_train=6, max_ops_test=12,
                                        seed=1, n_test_per_bucket=20)
    for s in train + valid + test:
        assert logic_relation_oracle(s.s1, s.s2) == s.label
        assert count_ops(s.s1) == s.ops1 and count_ops(s.s2) == s.ops2
    for s in train + valid:
        assert s.bucket <= 6
    buckets = {b: 0 for b in range(1, 13)}
    for s in test:
        assert 1 <= s.bucket <= 12
        buckets[s.bucket] += 1
    assert all(v == 20 for v in buckets.values())


def test_label_balance_cap_on_train():
    train, valid, _ = logic_generate(500, seed=2, n_test_per_bucket=1)
    from collections import Counter
    counts = Counter(s.label for s in train + valid)
    assert max(counts.values()) <= 0.4 * 500 + 1
    assert len(counts) >= 5  # generation reaches most labels


def test_validation_split_is_ten_percent():
    train, valid, _ = logic_generate(300, seed=3, n_test_per_bucket=1)
    assert len(valid) == 30 and len(train) == 270


def test_logic_file_roundtrip(tmp_path):
    train, _, _ = logic_generate(50, seed=4, n_test_per_bucket=1)
    path = str(tmp_path / "logic.tsv")
    write_logic(path, train, header="# count=50")
    back = read_logic(path, validate=True)
    assert back == train
    bad = tmp_path / "bad.tsv"
    bad.write_text("equivalence\ta\tb\n")  # wrong label for (a, b)
    with pytest.raises(DataError, match="oracle"):
        read_logic(str(bad), validate=True)


def test_logic_vocab_covers_tokens():
    v = logic_vocab()
    train, _, _ = logic_generate(50, seed=6, n_test_per_bucket=1)
    for s in train:
        ids = v.encode(s.s1 + s.s2)
        assert v.unk_id not in ids
