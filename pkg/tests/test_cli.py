import json
import os

import numpy as np
import pytest

from onlstm.cli import main
from onlstm.checkpoint import load_checkpoint
from onlstm.datagen import read_corpus
from onlstm.models import LanguageModel, LanguageModelConfig


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Shared tiny end-to-end artifacts: corpus, LM checkpoint, parses."""
    root = tmp_path_factory.mktemp("cli")
    data = str(root / "data")
    assert main(["gen-corpus", "--n", "40", "--heldout", "12", "--out", data,
                 "--seed", "7"]) == 0
    lm = str(root / "lm")
    assert main(["train-lm", "--corpus", f"{data}/train.txt", "--out", lm,
                 "--epochs", "2", "--hidden", "16", "--embed", "16", "--chunk", "4",
                 "--batch-size", "8", "--quiet", "--seed", "3"]) == 0
    parse = str(root / "parse")
    assert main(["parse", "--checkpoint", f"{lm}/lm.ckpt",
                 "--corpus", f"{data}/heldout.txt", "--out", parse]) == 0
    return {"root": root, "data": data, "lm": lm, "parse": parse}


def test_gen_corpus_outputs_and_manifest(workdir):
    data = workdir["data"]
    assert len(read_corpus(f"{data}/train.txt")) == 40
    assert len(read_corpus(f"{data}/heldout.txt")) == 12
    manifest = json.load(open(f"{data}/manifest.json"))
    assert manifest["subcommand"] == "gen-corpus"
    assert manifest["config"]["n"] == 40 and manifest["config"]["seed"] == 7
    assert "numpy" in manifest["versions"] and "backend" in manifest["versions"]
    first = open(f"{data}/train.txt").readline()
    assert first.startswith("# count=40 seed=7 generator=")


def test_gen_corpus_deterministic(tmp_path):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    for out in (a, b):
        assert main(["gen-corpus", "--n", "15", "--heldout", "0", "--out", out,
                     "--seed", "9"]) == 0
    assert open(f"{a}/train.txt").read() == open(f"{b}/train.txt").read()
    assert open(f"{a}/train_trees.txt").read() == open(f"{b}/train_trees.txt").read()


def test_train_lm_lr_zero_checkpoint_equals_init(tmp_path, workdir):
    data = workdir["data"]
    out = str(tmp_path / "lm0")
    assert main(["train-lm", "--corpus", f"{data}/train.txt", "--out", out,
                 "--epochs", "1", "--lr", "0", "--hidden", "16", "--embed", "16",
                 "--chunk", "4", "--quiet", "--seed", "5"]) == 0
    config, arrays = load_checkpoint(f"{out}/lm.ckpt")
    fresh = LanguageModel(LanguageModelConfig.from_dict(config["model"]),
                          np.random.default_rng(5))
    for p in fresh.parameters():
        assert np.array_equal(arrays[p.name], p.data), p.name


def test_train_lm_same_seed_byte_identical_checkpoints(tmp_path, workdir):
    data = workdir["data"]
    blobs = []
    for sub in ("r1", "r2"):
        out = str(tmp_path / sub)
        assert main(["train-lm", "--corpus", f"{data}/train.txt", "--out", out,
                     "--epochs", "2", "--hidden", "16", "--embed", "16", "--chunk", "4",
                     "--batch-size", "8", "--quiet", "--seed", "11"]) == 0
        blobs.append(open(f"{out}/lm.ckpt", "rb").read())
    assert blobs[0] == blobs[1]


def test_parse_line_counts_and_determinism(tmp_path, workdir):
    parse, data, lm = workdir["parse"], workdir["data"], workdir["lm"]
    n_in = len(read_corpus(f"{data}/heldout.txt"))
    lines = open(f"{parse}/trees.txt").read().splitlines()
    assert len(lines) == n_in
    out2 = str(tmp_path / "parse2")
    assert main(["parse", "--checkpoint", f"{lm}/lm.ckpt",
                 "--corpus", f"{data}/heldout.txt", "--out", out2]) == 0
    assert open(f"{parse}/trees.txt").read() == open(f"{out2}/trees.txt").read()


def test_parse_single_token_lines_bare(tmp_path, workdir):
    lm = workdir["lm"]
    corpus = tmp_path / "one.txt"
    corpus.write_text("the\ndog\n")
    out = str(tmp_path / "parse1")
    assert main(["parse", "--checkpoint", f"{lm}/lm.ckpt", "--corpus", str(corpus),
                 "--out", out]) == 0
    assert open(f"{out}/trees.txt").read().splitlines() == ["the", "dog"]


def test_parse_layer_all_writes_per_layer(tmp_path, workdir):
    data, lm = workdir["data"], workdir["lm"]
    out = str(tmp_path / "parseall")
    assert main(["parse", "--checkpoint", f"{lm}/lm.ckpt",
                 "--corpus", f"{data}/heldout.txt", "--out", out, "--layer", "all"]) == 0
    assert os.path.exists(f"{out}/trees_layer0.txt")
    assert os.path.exists(f"{out}/trees_layer1.txt")


def test_parse_rejects_lstm_checkpoint(tmp_path, workdir, capsys):
    data = workdir["data"]
    lstm_dir = str(tmp_path / "lstm")
    assert main(["train-lm", "--corpus", f"{data}/train.txt", "--out", lstm_dir,
                 "--cell", "lstm", "--epochs", "1", "--hidden", "16", "--embed", "16",
                 "--quiet", "--seed", "2"]) == 0
    rc = main(["parse", "--checkpoint", f"{lstm_dir}/lm.ckpt",
               "--corpus", f"{data}/heldout.txt", "--out", str(tmp_path / "p")])
    assert rc == 4


def test_eval_f1_pred_equals_gold(workdir, capsys, tmp_path):
    data = workdir["data"]
    rc = main(["eval-f1", "--pred", f"{data}/heldout_trees.txt",
               "--gold", f"{data}/heldout_trees.txt"])
    assert rc == 0
    out = capsys.readouterr().out
    fields = dict(line.split("=", 1) for line in out.splitlines() if "=" in line)
    assert float(fields["f1"]) == 1.0
    assert float(fields["precision"]) == 1.0


def test_eval_f1_left_baseline_on_right_branching_golds(tmp_path, capsys):
    gold = tmp_path / "gold.trees"
    gold.write_text("( a ( b c ) )\n( d ( e f ) )\n")
    rc = main(["eval-f1", "--baseline", "left", "--gold", str(gold)])
    assert rc == 0
    fields = dict(line.split("=", 1) for line in
                  capsys.readouterr().out.splitlines() if "=" in line)
    assert float(fields["f1"]) == pytest.approx(0.5)  # only the whole span shared


def test_eval_f1_line_count_mismatch_exit_5(tmp_path, workdir):
    data = workdir["data"]
    short = tmp_path / "short.trees"
    lines = open(f"{workdir['parse']}/trees.txt").read().splitlines()
    short.write_text("\n".join(lines[:-2]) + "\n")
    rc = main(["eval-f1", "--pred", str(short), "--gold", f"{data}/heldout_trees.txt"])
    assert rc == 5


def test_score_pairs_cli_matches_api(tmp_path, workdir, capsys):
    lm = workdir["lm"]
    pairs_dir = str(tmp_path / "pairs")
    assert main(["gen-pairs", "--n", "30", "--out", pairs_dir, "--seed", "1"]) == 0
    rc = main(["score-pairs", "--checkpoint", f"{lm}/lm.ckpt",
               "--pairs", f"{pairs_dir}/pairs.tsv"])
    assert rc == 0
    out = capsys.readouterr().out
    fields = dict(line.split("=", 1) for line in out.splitlines() if "=" in line)
    overall = float(fields["overall"])
    assert 0.0 <= overall <= 1.0

    from onlstm.cli import _load_lm
    from onlstm.datagen import read_pairs
    from onlstm.parsing import score_pairs
    model, vocab, _ = _load_lm(f"{lm}/lm.ckpt")
    pairs = [(vocab.encode(g), vocab.encode(b)) for g, b, _ in
             read_pairs(f"{pairs_dir}/pairs.tsv")]
    assert abs(score_pairs(model, pairs) - overall) < 1e-4
    categories = [k for k in fields if k.startswith("category_")]
    assert categories and all(0.0 <= float(fields[c].split()[0]) <= 1.0
                              for c in categories)


def test_logic_train_eval_cycle(tmp_path, capsys):
    data = str(tmp_path / "logic")
    assert main(["gen-logic", "--n", "120", "--max-ops-test", "4",
                 "--test-per-bucket", "10", "--out", data, "--seed", "2"]) == 0
    clf_dir = str(tmp_path / "clf")
    rc = main(["train-logic", "--train", f"{data}/logic_train.tsv",
               "--valid", f"{data}/logic_valid.tsv", "--test", f"{data}/logic_test.tsv",
               "--out", clf_dir, "--epochs", "1", "--hidden", "8", "--embed", "8",
               "--chunk", "4", "--head-hidden", "8", "--quiet", "--seed", "3"])
    assert rc == 0
    out = capsys.readouterr().out
    rows = [l for l in out.splitlines() if l.startswith("cell=onlstm bucket=")]
    assert len(rows) == 4  # one row per populated bucket up to max_ops_test
    rc = main(["eval-logic", "--checkpoint", f"{clf_dir}/classifier.ckpt",
               "--test", f"{data}/logic_test.tsv"])
    assert rc == 0
    rows2 = [l for l in capsys.readouterr().out.splitlines() if "bucket=" in l]
    assert rows2 == rows  # same model, same table


def test_eval_logic_same_seed_identical_untrained_table(tmp_path, capsys):
    data = str(tmp_path / "logic")
    assert main(["gen-logic", "--n", "60", "--max-ops-test", "3",
                 "--test-per-bucket", "8", "--out", data, "--seed", "4"]) == 0
    capsys.readouterr()  # drop the generator's status line
    tables = []
    for _ in range(2):
        assert main(["eval-logic", "--untrained", "--hidden", "8", "--embed", "8",
                     "--chunk", "4", "--head-hidden", "8", "--seed", "6",
                     "--test", f"{data}/logic_test.tsv"]) == 0
        tables.append(capsys.readouterr().out)
    assert tables[0] == tables[1]


def test_grad_check_passes_and_fault_fails(capsys):
    assert main(["grad-check", "--steps", "3"]) == 0
    out = capsys.readouterr().out
    assert "failed=0" in out
    rc = main(["grad-check", "--steps", "3", "--fault-op", "sigmoid",
               "--fault-scale", "1.05"])
    assert rc == 7
    out = capsys.readouterr().out
    assert "FAIL" in out and "block=" in out


def test_grad_check_absurd_tolerance_fails():
    assert main(["grad-check", "--steps", "3", "--tolerance", "1e-12"]) == 7


def test_missing_file_exit_2(tmp_path):
    rc = main(["train-lm", "--corpus", str(tmp_path / "nope.txt"),
               "--out", str(tmp_path / "o")])
    assert rc == 2
    rc = main(["parse", "--checkpoint", str(tmp_path / "nope.ckpt"),
               "--corpus", str(tmp_path / "nope.txt"), "--out", str(tmp_path / "o")])
    assert rc == 2


def test_config_file_precedence(tmp_path, workdir):
    data = workdir["data"]
    cfg = tmp_path / "run.cfg"
    cfg.write_text("epochs = 1\nhidden = 16\nembed = 16\nchunk = 4\nseed = 21\n")
    out = str(tmp_path / "cfglm")
    assert main(["train-lm", "--config", str(cfg), "--corpus", f"{data}/train.txt",
                 "--out", out, "--quiet", "--seed", "22"]) == 0
    manifest = json.load(open(f"{out}/manifest.json"))
    assert manifest["config"]["epochs"] == 1      # from file
    assert manifest["config"]["hidden"] == 16     # from file
    assert manifest["config"]["seed"] == 22       # flag beats file
    assert manifest["config"]["lr"] == 2e-3       # default survives


def test_success_keeps_stderr_clean(tmp_path, capsys):
    assert main(["gen-pairs", "--n", "5", "--out", str(tmp_path / "p"), "--seed", "0"]) == 0
    captured = capsys.readouterr()
    assert captured.err == ""
