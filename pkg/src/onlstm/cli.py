"""Command-line entry point wiring generation, training, parsing and evaluation.

Subcommands: gen-corpus, gen-pairs, gen-logic, train-lm, parse, eval-f1,
score-pairs, train-logic, eval-logic, grad-check.

Config precedence is defaults < config file (key = value lines) < flags; the
merged result is echoed into the run manifest together with the seed and
library versions, which is enough to reproduce a run bit-exactly on the same
machine. Exit codes: 0 ok, 1 unexpected error, 2 missing file, 3 non-finite
loss, 4 cell-kind mismatch, 5 line-count/alignment mismatch, 6 bad usage or
config, 7 gradient check failed.
"""

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__, backend
from . import tensor
from .checkpoint import load_checkpoint, restore_parameters, save_checkpoint
from .datagen import (Grammar, Vocab, build_vocab, default_grammar,
                      generate_agreement_pairs, generate_cfg_corpus, manifest_line,
                      read_corpus, read_pairs, write_corpus, write_pairs)
from .errors import (CheckpointError, ConfigError, ContractError, DataError,
                     FormulaError, NumericsError, OnlstmError, TreeError,
                     VocabularyError)
from .gradcheck import check_gradients
from .logic import LogicSample, logic_generate, logic_vocab, read_logic, write_logic
from .models import (ClassifierConfig, InferenceClassifier, LanguageModel,
                     LanguageModelConfig, sentence_logprob)
from .parsing import (corpus_distances, corpus_f1_from_trees, default_parse_layer,
                      greedy_parse)
from .training import (MetricsLog, TrainConfig, classifier_accuracy,
                       train_classifier, train_lm)
from .trees import baseline_tree, read_trees, tree_to_bracketed, write_trees

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MISSING_FILE = 2
EXIT_NON_FINITE = 3
EXIT_CELL_MISMATCH = 4
EXIT_ALIGNMENT = 5
EXIT_BAD_CONFIG = 6
EXIT_CHECK_FAILED = 7

GENERATOR_VERSION = f"onlstm/{__version__}"


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------


def read_config_file(path: str) -> dict:
    """key = value lines; '#' starts a comment."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _coerce(value, template):
    if isinstance(template, bool):
        if isinstance(value, bool):
            return value
        if str(value).lower() in ("1", "true", "yes", "on"):
            return True
        if str(value).lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected boolean, got {value!r}")
    if isinstance(template, int) and not isinstance(template, bool):
        return int(value)
    if isinstance(template, float):
        return float(value)
    return str(value)


def merge_config(defaults: dict, args: argparse.Namespace) -> dict:
    """defaults < config file < explicitly passed flags."""
    merged = dict(defaults)
    path = getattr(args, "config", None)
    if path:
        if not os.path.exists(path):
            raise FileNotFoundError(path)
        for key, value in read_config_file(path).items():
            if key in merged:
                merged[key] = _coerce(value, defaults[key])
    for key in merged:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = _coerce(flag, defaults[key]) if defaults[key] is not None else flag
    return merged


def atomic_write_text(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_manifest(out_dir: str, subcommand: str, config: dict):
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "versions": {
            "onlstm": __version__,
            "numpy": np.__version__,
            "backend": backend.ACTIVE,
        },
    }
    atomic_write_text(os.path.join(out_dir, "manifest.json"),
                      json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _ensure_out(cfg_out: str) -> str:
    os.makedirs(cfg_out, exist_ok=True)
    return cfg_out


def _model_config_from(cfg: dict, vocab: Vocab) -> LanguageModelConfig:
    return LanguageModelConfig(
        vocab_size=vocab.size,
        embed_size=cfg["embed"],
        hidden_sizes=(cfg["hidden"],) * cfg["layers"],
        chunk_factor=cfg["chunk"],
        cell=cfg["cell"],
        tie_weights=cfg["tie"],
        dropout_input=cfg["dropout_input"],
        dropout_hidden=cfg["dropout_hidden"],
        dropout_output=cfg["dropout_output"],
        weight_drop=cfg["weight_drop"],
        bos_id=vocab.bos_id,
        eos_id=vocab.eos_id,
    )


def _train_config_from(cfg: dict) -> TrainConfig:
    return TrainConfig(epochs=cfg["epochs"], lr=cfg["lr"], clip=cfg["clip"],
                       batch_size=cfg["batch_size"], seed=cfg["seed"],
                       patience=cfg["patience"])


def _load_lm(path: str) -> tuple[LanguageModel, Vocab, dict]:
    config, arrays = load_checkpoint(path)
    if config.get("kind") != "lm":
        raise CheckpointError(f"{path}: not a language-model checkpoint")
    vocab = Vocab(config["vocab"])
    model = LanguageModel(LanguageModelConfig.from_dict(config["model"]),
                          np.random.default_rng(0))
    restore_parameters(model.parameters(), arrays, path)
    return model, vocab, config


def _load_classifier(path: str) -> tuple[InferenceClassifier, Vocab, dict]:
    config, arrays = load_checkpoint(path)
    if config.get("kind") != "classifier":
        raise CheckpointError(f"{path}: not a classifier checkpoint")
    vocab = Vocab(config["vocab"])
    clf = InferenceClassifier(ClassifierConfig.from_dict(config["model"]),
                              np.random.default_rng(0))
    restore_parameters(clf.parameters(), arrays, path)
    return clf, vocab, config


# ---------------------------------------------------------------------------
# generation subcommands
# ---------------------------------------------------------------------------

GEN_CORPUS_DEFAULTS = dict(n=5000, heldout=500, max_len=20, seed=0, grammar="", out="")


def cmd_gen_corpus(args) -> int:
    cfg = merge_config(GEN_CORPUS_DEFAULTS, args)
    if not cfg["out"]:
        raise ConfigError("gen-corpus needs --out")
    out = _ensure_out(cfg["out"])
    grammar = default_grammar()
    if cfg["grammar"]:
        with open(cfg["grammar"], "r", encoding="utf-8") as fh:
            grammar = Grammar.from_json(fh.read())
    total = cfg["n"] + cfg["heldout"]
    corpus = generate_cfg_corpus(grammar, total, max_len=cfg["max_len"], seed=cfg["seed"])
    splits = {"train": corpus[:cfg["n"]], "heldout": corpus[cfg["n"]:]}
    for name, part in splits.items():
        if not part:
            continue
        head = manifest_line(count=len(part), seed=cfg["seed"], generator=GENERATOR_VERSION)
        write_corpus(os.path.join(out, f"{name}.txt"), [t for t, _ in part], header=head)
        write_trees(os.path.join(out, f"{name}_trees.txt"),
                    [(tree, toks) for toks, tree in part], labeled=True,
                    header=head[2:])
    write_manifest(out, "gen-corpus", cfg)
    print(f"wrote {cfg['n']} train and {cfg['heldout']} heldout sentences to {out}")
    return EXIT_OK


GEN_PAIRS_DEFAULTS = dict(n=500, seed=0, out="")


def cmd_gen_pairs(args) -> int:
    cfg = merge_config(GEN_PAIRS_DEFAULTS, args)
    if not cfg["out"]:
        raise ConfigError("gen-pairs needs --out")
    out = _ensure_out(cfg["out"])
    pairs = generate_agreement_pairs(cfg["n"], seed=cfg["seed"])
    write_pairs(os.path.join(out, "pairs.tsv"), pairs,
                header=manifest_line(count=cfg["n"], seed=cfg["seed"],
                                     generator=GENERATOR_VERSION))
    write_manifest(out, "gen-pairs", cfg)
    print(f"wrote {cfg['n']} agreement pairs to {out}")
    return EXIT_OK


GEN_LOGIC_DEFAULTS = dict(n=8000, max_ops_train=6, max_ops_test=12,
                          test_per_bucket=120, seed=0, out="")


def cmd_gen_logic(args) -> int:
    cfg = merge_config(GEN_LOGIC_DEFAULTS, args)
    if not cfg["out"]:
        raise ConfigError("gen-logic needs --out")
    out = _ensure_out(cfg["out"])
    train, valid, test = logic_generate(
        cfg["n"], max_ops_train=cfg["max_ops_train"], max_ops_test=cfg["max_ops_test"],
        seed=cfg["seed"], n_test_per_bucket=cfg["test_per_bucket"])
    for name, part in (("train", train), ("valid", valid), ("test", test)):
        write_logic(os.path.join(out, f"logic_{name}.tsv"), part,
                    header=manifest_line(count=len(part), seed=cfg["seed"],
                                         generator=GENERATOR_VERSION))
    write_manifest(out, "gen-logic", cfg)
    print(f"wrote {len(train)}/{len(valid)}/{len(test)} logic samples to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# language model training / parsing / evaluation
# ---------------------------------------------------------------------------

TRAIN_LM_DEFAULTS = dict(
    corpus="", valid="", valid_frac=0.1, min_count=1, out="",
    layers=2, hidden=64, embed=64, chunk=8, cell="onlstm", tie=True,
    dropout_input=0.0, dropout_hidden=0.0, dropout_output=0.0, weight_drop=0.0,
    epochs=20, lr=2e-3, clip=0.25, batch_size=64, patience=10, seed=0, quiet=False)


def cmd_train_lm(args) -> int:
    cfg = merge_config(TRAIN_LM_DEFAULTS, args)
    if not cfg["corpus"] or not cfg["out"]:
        raise ConfigError("train-lm needs --corpus and --out")
    out = _ensure_out(cfg["out"])
    sents_tokens = read_corpus(cfg["corpus"])
    if cfg["valid"]:
        valid_tokens = read_corpus(cfg["valid"])
        train_tokens = sents_tokens
    else:
        rng = np.random.default_rng(cfg["seed"])
        order = rng.permutation(len(sents_tokens))
        n_valid = max(1, int(len(sents_tokens) * cfg["valid_frac"]))
        valid_tokens = [sents_tokens[i] for i in order[:n_valid]]
        train_tokens = [sents_tokens[i] for i in order[n_valid:]]

    vocab = build_vocab(train_tokens, min_count=cfg["min_count"])
    model_cfg = _model_config_from(cfg, vocab)
    model = LanguageModel(model_cfg, np.random.default_rng(cfg["seed"]))
    train_ids = [vocab.encode(s) for s in train_tokens]
    valid_ids = [vocab.encode(s) for s in valid_tokens]

    log = MetricsLog(path=os.path.join(out, "metrics.log"), quiet=cfg["quiet"])
    train_cfg = _train_config_from(cfg)
    train_lm(model, train_ids, valid_ids, train_cfg, log)

    ckpt_cfg = {"kind": "lm", "model": model_cfg.to_dict(), "vocab": vocab.itos,
                "train": {k: cfg[k] for k in ("epochs", "lr", "clip", "batch_size",
                                              "patience", "seed")}}
    save_checkpoint(os.path.join(out, "lm.ckpt"), ckpt_cfg, model.parameters())
    write_manifest(out, "train-lm", cfg)
    return EXIT_OK


PARSE_DEFAULTS = dict(checkpoint="", corpus="", layer="default", out="", workers=2)


def cmd_parse(args) -> int:
    cfg = merge_config(PARSE_DEFAULTS, args)
    if not cfg["checkpoint"] or not cfg["corpus"] or not cfg["out"]:
        raise ConfigError("parse needs --checkpoint, --corpus and --out")
    out = _ensure_out(cfg["out"])
    model, vocab, _ = _load_lm(cfg["checkpoint"])
    if model.config.cell != "onlstm":
        print("error: checkpoint holds a baseline lstm; parsing needs ordered neurons",
              file=sys.stderr)
        return EXIT_CELL_MISMATCH
    sentences = read_corpus(cfg["corpus"])
    ids = [vocab.encode(s) for s in sentences]
    n_layers = len(model.cells)
    if cfg["layer"] == "all":
        layers = list(range(n_layers))
    elif cfg["layer"] == "default":
        layers = [default_parse_layer(n_layers)]
    else:
        layers = [int(cfg["layer"])]
    single = len(layers) == 1 and cfg["layer"] != "all"
    for layer in layers:
        dists = corpus_distances(model, ids, layer, workers=cfg["workers"])
        trees = [greedy_parse(d) for d in dists]
        name = "trees.txt" if single else f"trees_layer{layer}.txt"
        lines = [tree_to_bracketed(t, toks) for t, toks in zip(trees, sentences)]
        atomic_write_text(os.path.join(out, name), "\n".join(lines) + "\n")
    write_manifest(out, "parse", cfg)
    print(f"parsed {len(sentences)} sentences at layer(s) {layers}")
    return EXIT_OK


EVAL_F1_DEFAULTS = dict(pred="", gold="", baseline="", seed=0, exclude_whole=False,
                        include_singles=False, out="")


def cmd_eval_f1(args) -> int:
    cfg = merge_config(EVAL_F1_DEFAULTS, args)
    if not cfg["gold"] or (not cfg["pred"] and not cfg["baseline"]):
        raise ConfigError("eval-f1 needs --gold plus --pred or --baseline")
    gold = read_trees(cfg["gold"])
    if cfg["baseline"]:
        preds = [
            (baseline_tree(cfg["baseline"], len(toks), seed=cfg["seed"] + i), toks)
            for i, (_, toks) in enumerate(gold)
        ]
    else:
        preds = read_trees(cfg["pred"])
        if len(preds) != len(gold):
            print(f"error: {len(preds)} predicted trees vs {len(gold)} gold trees",
                  file=sys.stderr)
            return EXIT_ALIGNMENT
    include_whole = not cfg["exclude_whole"]
    golds = [t for t, _ in gold]
    try:
        precision, recall, mean_f1, per_label = corpus_f1_from_trees(
            [t for t, _ in preds], golds, include_whole=include_whole,
            include_singles=cfg["include_singles"])
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ALIGNMENT
    print(f"sentences={len(gold)}")
    print(f"precision={precision:.4f}")
    print(f"recall={recall:.4f}")
    print(f"f1={mean_f1:.4f}")
    for label, acc in per_label.items():
        print(f"type_{label}={acc:.4f}")
    if cfg["out"]:
        write_manifest(_ensure_out(cfg["out"]), "eval-f1", cfg)
    return EXIT_OK


SCORE_PAIRS_DEFAULTS = dict(checkpoint="", pairs="", out="")


def cmd_score_pairs(args) -> int:
    cfg = merge_config(SCORE_PAIRS_DEFAULTS, args)
    if not cfg["checkpoint"] or not cfg["pairs"]:
        raise ConfigError("score-pairs needs --checkpoint and --pairs")
    model, vocab, _ = _load_lm(cfg["checkpoint"])
    pairs = read_pairs(cfg["pairs"])
    by_cat: dict[str, list[int]] = {}
    wins_all = 0
    for good, bad, category in pairs:
        win = int(sentence_logprob(model, vocab.encode(good)) >
                  sentence_logprob(model, vocab.encode(bad)))
        wins_all += win
        by_cat.setdefault(category, []).append(win)
    print(f"pairs={len(pairs)}")
    print(f"overall={wins_all / len(pairs):.4f}")
    for category in sorted(by_cat):
        wins = by_cat[category]
        print(f"category_{category}={np.mean(wins):.4f} (n={len(wins)})")
    if cfg["out"]:
        write_manifest(_ensure_out(cfg["out"]), "score-pairs", cfg)
    return EXIT_OK


# ---------------------------------------------------------------------------
# logic subcommands
# ---------------------------------------------------------------------------

TRAIN_LOGIC_DEFAULTS = dict(
    train="", valid="", test="", out="",
    layers=1, hidden=64, embed=32, chunk=8, cell="onlstm", head_hidden=128,
    dropout_input=0.0, dropout_hidden=0.0, dropout_output=0.1, weight_drop=0.0,
    epochs=12, lr=2e-3, clip=0.25, batch_size=64, patience=10, seed=0, quiet=False)


def _classifier_config_from(cfg: dict, vocab: Vocab) -> ClassifierConfig:
    return ClassifierConfig(
        vocab_size=vocab.size, embed_size=cfg["embed"],
        hidden_sizes=(cfg["hidden"],) * cfg["layers"], chunk_factor=cfg["chunk"],
        cell=cfg["cell"], head_hidden=cfg["head_hidden"],
        dropout_input=cfg["dropout_input"], dropout_hidden=cfg["dropout_hidden"],
        dropout_output=cfg["dropout_output"], weight_drop=cfg["weight_drop"])


def _logic_samples_to_ids(samples: list[LogicSample], vocab: Vocab):
    return [(vocab.encode(s.s1), vocab.encode(s.s2), s.label_id) for s in samples]


def accuracy_by_bucket(clf: InferenceClassifier, vocab: Vocab,
                       samples: list[LogicSample]) -> dict[int, tuple[float, int]]:
    buckets: dict[int, list[LogicSample]] = {}
    for s in samples:
        buckets.setdefault(s.bucket, []).append(s)
    out = {}
    for b in sorted(buckets):
        ids = _logic_samples_to_ids(buckets[b], vocab)
        out[b] = (classifier_accuracy(clf, ids), len(ids))
    return out


def _print_bucket_table(cell: str, table: dict[int, tuple[float, int]]):
    for b, (acc, n) in table.items():
        print(f"cell={cell} bucket={b} n={n} accuracy={acc:.4f}")


def cmd_train_logic(args) -> int:
    cfg = merge_config(TRAIN_LOGIC_DEFAULTS, args)
    if not cfg["train"] or not cfg["valid"] or not cfg["out"]:
        raise ConfigError("train-logic needs --train, --valid and --out")
    out = _ensure_out(cfg["out"])
    vocab = logic_vocab()
    train = read_logic(cfg["train"])
    valid = read_logic(cfg["valid"])
    cells = [c.strip() for c in cfg["cell"].split(",") if c.strip()]
    for cell in cells:
        cell_cfg = dict(cfg, cell=cell)
        clf_cfg = _classifier_config_from(cell_cfg, vocab)
        clf = InferenceClassifier(clf_cfg, np.random.default_rng(cfg["seed"]))
        log = MetricsLog(path=os.path.join(out, f"metrics_{cell}.log"), quiet=cfg["quiet"])
        train_classifier(clf, _logic_samples_to_ids(train, vocab),
                         _logic_samples_to_ids(valid, vocab),
                         _train_config_from(cfg), log)
        ckpt_cfg = {"kind": "classifier", "model": clf_cfg.to_dict(), "vocab": vocab.itos}
        name = "classifier.ckpt" if len(cells) == 1 else f"classifier_{cell}.ckpt"
        save_checkpoint(os.path.join(out, name), ckpt_cfg, clf.parameters())
        if cfg["test"]:
            _print_bucket_table(cell, accuracy_by_bucket(clf, vocab, read_logic(cfg["test"])))
    write_manifest(out, "train-logic", cfg)
    return EXIT_OK


EVAL_LOGIC_DEFAULTS = dict(
    checkpoint="", test="", untrained=False, out="",
    layers=1, hidden=64, embed=32, chunk=8, cell="onlstm", head_hidden=128, seed=0)


def cmd_eval_logic(args) -> int:
    cfg = merge_config(EVAL_LOGIC_DEFAULTS, args)
    if not cfg["test"] or (not cfg["checkpoint"] and not cfg["untrained"]):
        raise ConfigError("eval-logic needs --test plus --checkpoint or --untrained")
    if cfg["untrained"]:
        vocab = logic_vocab()
        clf = InferenceClassifier(
            _classifier_config_from(dict(cfg, dropout_input=0.0, dropout_hidden=0.0,
                                         dropout_output=0.0, weight_drop=0.0), vocab),
            np.random.default_rng(cfg["seed"]))
        cell = cfg["cell"]
    else:
        clf, vocab, config = _load_classifier(cfg["checkpoint"])
        cell = clf.config.cell
    _print_bucket_table(cell, accuracy_by_bucket(clf, vocab, read_logic(cfg["test"])))
    if cfg["out"]:
        write_manifest(_ensure_out(cfg["out"]), "eval-logic", cfg)
    return EXIT_OK


# ---------------------------------------------------------------------------
# gradient check
# ---------------------------------------------------------------------------

GRAD_CHECK_DEFAULTS = dict(seed=0, epsilon=1e-5, tolerance=1e-4, steps=5,
                           fault_op="", fault_scale=1.0, out="")


def cmd_grad_check(args) -> int:
    from . import kernels
    cfg = merge_config(GRAD_CHECK_DEFAULTS, args)
    kernels.warmup()
    rng = np.random.default_rng(cfg["seed"])
    model_cfg = LanguageModelConfig(vocab_size=11, embed_size=16, hidden_sizes=(16, 16),
                                    chunk_factor=4, cell="onlstm", tie_weights=True)
    model = LanguageModel(model_cfg, rng)
    ids = rng.integers(0, 11, size=(1, cfg["steps"] + 1))
    inputs, targets = ids[:, :-1], ids[:, 1:]

    def loss_tensor():
        logits, _, _ = model.forward_batch(inputs)
        return tensor.mean_all(tensor.cross_entropy(logits, targets.T.reshape(-1)))

    if cfg["fault_op"]:
        tensor.set_derivative_fault(cfg["fault_op"], cfg["fault_scale"])
    try:
        model.zero_grad()
        tensor.backward(loss_tensor())
        report = check_gradients(lambda: loss_tensor().item(), model.parameters(),
                                 epsilon=cfg["epsilon"], tolerance=cfg["tolerance"])
    finally:
        if cfg["fault_op"]:
            tensor.set_derivative_fault(cfg["fault_op"], None)
    failed = [name for name, _, ok in report if not ok]
    for name, err, ok in report:
        print(f"block={name} rel_err={err:.3e} {'pass' if ok else 'FAIL'}")
    print(f"checked={len(report)} failed={len(failed)}")
    if cfg["out"]:
        write_manifest(_ensure_out(cfg["out"]), "grad-check", cfg)
    return EXIT_OK if not failed else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------


def _add_common(sp):
    sp.add_argument("--config", default=None, help="key = value config file")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default=None, help="output directory")


def _add_model_flags(sp):
    sp.add_argument("--layers", type=int, default=None)
    sp.add_argument("--hidden", type=int, default=None)
    sp.add_argument("--embed", type=int, default=None)
    sp.add_argument("--chunk", type=int, default=None)
    sp.add_argument("--cell", default=None, help="onlstm or lstm")
    sp.add_argument("--dropout-input", dest="dropout_input", type=float, default=None)
    sp.add_argument("--dropout-hidden", dest="dropout_hidden", type=float, default=None)
    sp.add_argument("--dropout-output", dest="dropout_output", type=float, default=None)
    sp.add_argument("--weight-drop", dest="weight_drop", type=float, default=None)


def _add_train_flags(sp):
    sp.add_argument("--epochs", type=int, default=None)
    sp.add_argument("--lr", type=float, default=None)
    sp.add_argument("--clip", type=float, default=None)
    sp.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    sp.add_argument("--patience", type=int, default=None)
    sp.add_argument("--quiet", action="store_const", const=True, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="onlstm", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=GENERATOR_VERSION)
    sub = ap.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("gen-corpus", help="sample a corpus with gold trees")
    _add_common(sp)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--heldout", type=int, default=None)
    sp.add_argument("--max-len", dest="max_len", type=int, default=None)
    sp.add_argument("--grammar", default=None, help="JSON grammar file")
    sp.set_defaults(fn=cmd_gen_corpus)

    sp = sub.add_parser("gen-pairs", help="agreement minimal pairs")
    _add_common(sp)
    sp.add_argument("--n", type=int, default=None)
    sp.set_defaults(fn=cmd_gen_pairs)

    sp = sub.add_parser("gen-logic", help="logic inference dataset")
    _add_common(sp)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--max-ops-train", dest="max_ops_train", type=int, default=None)
    sp.add_argument("--max-ops-test", dest="max_ops_test", type=int, default=None)
    sp.add_argument("--test-per-bucket", dest="test_per_bucket", type=int, default=None)
    sp.set_defaults(fn=cmd_gen_logic)

    sp = sub.add_parser("train-lm", help="train a language model")
    _add_common(sp)
    _add_model_flags(sp)
    _add_train_flags(sp)
    sp.add_argument("--corpus", default=None)
    sp.add_argument("--valid", default=None)
    sp.add_argument("--valid-frac", dest="valid_frac", type=float, default=None)
    sp.add_argument("--min-count", dest="min_count", type=int, default=None)
    sp.add_argument("--tie", dest="tie", action="store_const", const=True, default=None)
    sp.add_argument("--no-tie", dest="tie", action="store_const", const=False)
    sp.set_defaults(fn=cmd_train_lm)

    sp = sub.add_parser("parse", help="induce trees from a trained model")
    _add_common(sp)
    sp.add_argument("--checkpoint", default=None)
    sp.add_argument("--corpus", default=None)
    sp.add_argument("--layer", default=None, help="layer index, 'all' or 'default'")
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(fn=cmd_parse)

    sp = sub.add_parser("eval-f1", help="unlabeled span F1 against gold trees")
    _add_common(sp)
    sp.add_argument("--pred", default=None)
    sp.add_argument("--gold", default=None)
    sp.add_argument("--baseline", default=None,
                    choices=["left", "right", "random", "balanced"])
    sp.add_argument("--exclude-whole", dest="exclude_whole", action="store_const",
                    const=True, default=None)
    sp.add_argument("--include-singles", dest="include_singles", action="store_const",
                    const=True, default=None)
    sp.set_defaults(fn=cmd_eval_f1)

    sp = sub.add_parser("score-pairs", help="grammaticality pair accuracy")
    _add_common(sp)
    sp.add_argument("--checkpoint", default=None)
    sp.add_argument("--pairs", default=None)
    sp.set_defaults(fn=cmd_score_pairs)

    sp = sub.add_parser("train-logic", help="train the pair classifier")
    _add_common(sp)
    _add_model_flags(sp)
    _add_train_flags(sp)
    sp.add_argument("--train", default=None)
    sp.add_argument("--valid", default=None)
    sp.add_argument("--test", default=None)
    sp.add_argument("--head-hidden", dest="head_hidden", type=int, default=None)
    sp.set_defaults(fn=cmd_train_logic)

    sp = sub.add_parser("eval-logic", help="accuracy by operation-count bucket")
    _add_common(sp)
    sp.add_argument("--checkpoint", default=None)
    sp.add_argument("--test", default=None)
    sp.add_argument("--untrained", action="store_const", const=True, default=None)
    sp.add_argument("--layers", type=int, default=None)
    sp.add_argument("--hidden", type=int, default=None)
    sp.add_argument("--embed", type=int, default=None)
    sp.add_argument("--chunk", type=int, default=None)
    sp.add_argument("--cell", default=None)
    sp.add_argument("--head-hidden", dest="head_hidden", type=int, default=None)
    sp.set_defaults(fn=cmd_eval_logic)

    sp = sub.add_parser("grad-check", help="finite-difference check of every block")
    _add_common(sp)
    sp.add_argument("--epsilon", type=float, default=None)
    sp.add_argument("--tolerance", type=float, default=None)
    sp.add_argument("--steps", type=int, default=None)
    sp.add_argument("--fault-op", dest="fault_op", default=None,
                    help="test hook: corrupt this op's backward rule")
    sp.add_argument("--fault-scale", dest="fault_scale", type=float, default=None)
    sp.set_defaults(fn=cmd_grad_check)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except FileNotFoundError as e:
        print(f"error: missing file: {e}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except NumericsError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NON_FINITE
    except (ConfigError, ContractError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except (DataError, TreeError, FormulaError, VocabularyError, CheckpointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ALIGNMENT if "mismatch" in str(e) else EXIT_ERROR
    except OnlstmError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


def entrypoint():
    sys.exit(main())
