"""Adam, gradient clipping and the epoch loops for both objectives."""

import sys
import time
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError, NumericsError
from .models import InferenceClassifier, LanguageModel, corpus_nll
from .tensor import Parameter, backward, no_grad


@dataclass
class TrainConfig:
    epochs: int = 20
    lr: float = 1e-3
    clip: float = 0.25
    batch_size: int = 64
    seed: int = 0
    patience: int = 10
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.clip <= 0:
            raise ConfigError("clip threshold must be > 0")
        if self.batch_size < 1:
            raise ConfigError("batch size must be >= 1")


class Adam:
    """Standard Adam with bias correction; gradients are left untouched."""

    def __init__(self, params: list[Parameter], lr: float = 1e-3,
                 betas: tuple = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        for k, p in enumerate(self.params):
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise NumericsError(f"non-finite gradient in {p.name}")
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g * g
            m_hat = self.m[k] / (1.0 - self.b1 ** self.t)
            v_hat = self.v[k] / (1.0 - self.b2 ** self.t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam_step(opt: Adam, params=None):
    opt.step()


def clip_gradients(params: list[Parameter], max_norm: float) -> float:
    """Scale all gradients so the global L2 norm is at most max_norm."""
    if max_norm <= 0:
        raise ConfigError("max_norm must be > 0")
    total = 0.0
    for p in params:
        total += float(np.sum(p.grad * p.grad))
    norm = float(np.sqrt(total))
    if norm > max_norm:
        factor = max_norm / norm
        for p in params:
            p.grad *= factor
    return norm


# ---------------------------------------------------------------------------
# batching
# ---------------------------------------------------------------------------


def _length_batches(keys, batch_size, rng):
    """Group item indices by key (no padding), cut to batch_size, shuffle order."""
    buckets: dict = {}
    for idx, key in enumerate(keys):
        buckets.setdefault(key, []).append(idx)
    batches = []
    for key in sorted(buckets):
        idxs = buckets[key]
        if rng is not None:
            idxs = [idxs[j] for j in rng.permutation(len(idxs))]
        for lo in range(0, len(idxs), batch_size):
            batches.append(idxs[lo:lo + batch_size])
    if rng is not None:
        batches = [batches[j] for j in rng.permutation(len(batches))]
    return batches


def _lm_batch_arrays(sents, idxs, bos, eos):
    arr = np.array([sents[i] for i in idxs], dtype=np.int64)
    inputs = np.concatenate([np.full((len(idxs), 1), bos, dtype=np.int64), arr], axis=1)
    targets = np.concatenate([arr, np.full((len(idxs), 1), eos, dtype=np.int64)], axis=1)
    return inputs, targets


# ---------------------------------------------------------------------------
# language model training
# ---------------------------------------------------------------------------


def train_lm_epoch(model: LanguageModel, train_sents, valid_sents, cfg: TrainConfig,
                   opt: Adam, rng: np.random.Generator,
                   full_batch: bool = False) -> tuple[float, float]:
    """One pass over the training sentences; returns (mean loss/token, valid ppl).

    Updates are per minibatch (full backpropagation through every sentence,
    no state carry between sentences). With full_batch=True the gradients of
    the whole corpus are accumulated before a single optimizer step.
    """
    cfg_m = model.config
    batches = _length_batches([len(s) for s in train_sents], cfg.batch_size,
                              None if full_batch else rng)
    total_nll, total_tokens = 0.0, 0
    if not full_batch:
        model.zero_grad()
    for batch in batches:
        inputs, targets = _lm_batch_arrays(train_sents, batch, cfg_m.bos_id, cfg_m.eos_id)
        try:
            logits, _, _ = model.forward_batch(inputs, train=True, rng=rng)
            nll = T.cross_entropy(logits, targets.T.reshape(-1))
            loss = T.mean_all(nll)
            if not np.isfinite(loss.data):
                raise NumericsError("non-finite loss")
        except NumericsError as e:
            raise NumericsError(f"{e} at sentence index {batch[0]}") from e
        if full_batch:
            backward(T.sum_all(nll))
        else:
            model.zero_grad()
            backward(loss)
            clip_gradients(model.parameters(), cfg.clip)
            opt.step()
        total_nll += float(nll.data.sum())
        total_tokens += targets.size
    if full_batch:
        for p in model.parameters():
            p.grad /= total_tokens
        clip_gradients(model.parameters(), cfg.clip)
        opt.step()
        model.zero_grad()
    mean_loss = total_nll / total_tokens
    val_nll, val_tokens = corpus_nll(model, valid_sents)
    return mean_loss, float(np.exp(val_nll / val_tokens))


def evaluation_loss(model: LanguageModel, sents) -> float:
    nll, tokens = corpus_nll(model, sents)
    return nll / tokens


# ---------------------------------------------------------------------------
# classifier training
# ---------------------------------------------------------------------------


def classifier_accuracy(clf: InferenceClassifier, samples) -> float:
    """Fraction of samples whose argmax label matches, batched by pair lengths."""
    if not samples:
        raise ConfigError("classifier_accuracy: no samples")
    correct = 0
    batches = _length_batches([(len(s1), len(s2)) for s1, s2, _ in samples], 128, None)
    with no_grad():
        for batch in batches:
            ids1 = np.array([samples[i][0] for i in batch], dtype=np.int64)
            ids2 = np.array([samples[i][1] for i in batch], dtype=np.int64)
            logits = clf.logits_batch(ids1, ids2)
            pred = np.argmax(logits.data, axis=1)
            correct += int(np.sum(pred == np.array([samples[i][2] for i in batch])))
    return correct / len(samples)


def train_classifier_epoch(clf: InferenceClassifier, samples, valid_samples,
                           cfg: TrainConfig, opt: Adam,
                           rng: np.random.Generator) -> tuple[float, float]:
    """One epoch of 7-way cross-entropy; returns (mean loss, valid accuracy)."""
    batches = _length_batches([(len(s1), len(s2)) for s1, s2, _ in samples],
                              cfg.batch_size, rng)
    total, count = 0.0, 0
    for batch in batches:
        ids1 = np.array([samples[i][0] for i in batch], dtype=np.int64)
        ids2 = np.array([samples[i][1] for i in batch], dtype=np.int64)
        labels = np.array([samples[i][2] for i in batch], dtype=np.int64)
        try:
            logits = clf.logits_batch(ids1, ids2, train=True, rng=rng)
            nll = T.cross_entropy(logits, labels)
            loss = T.mean_all(nll)
            if not np.isfinite(loss.data):
                raise NumericsError("non-finite loss")
        except NumericsError as e:
            raise NumericsError(f"{e} at sample index {batch[0]}") from e
        clf.zero_grad()
        backward(loss)
        clip_gradients(clf.parameters(), cfg.clip)
        opt.step()
        total += float(nll.data.sum())
        count += len(batch)
    acc = classifier_accuracy(clf, valid_samples) if valid_samples else float("nan")
    return total / count, acc


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------


class MetricsLog:
    """One plain-text line per epoch per split, mirrored to stdout."""

    def __init__(self, path: str | None = None, quiet: bool = False):
        self.path = path
        self.quiet = quiet

    def emit(self, **fields):
        line = " ".join(f"{k}={_fmt(v)}" for k, v in fields.items())
        if not self.quiet:
            print(line)
            sys.stdout.flush()
        if self.path:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")


def _fmt(v):
    return f"{v:.6g}" if isinstance(v, float) else v


def train_lm(model: LanguageModel, train_sents, valid_sents, cfg: TrainConfig,
             log: MetricsLog | None = None) -> list[dict]:
    """Epoch loop with early stopping on validation perplexity."""
    log = log or MetricsLog(quiet=True)
    opt = Adam(model.parameters(), lr=cfg.lr, betas=cfg.betas, eps=cfg.eps)
    rng = np.random.default_rng(cfg.seed)
    history, best, since_best = [], float("inf"), 0
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        loss, ppl = train_lm_epoch(model, train_sents, valid_sents, cfg, opt, rng)
        dt = time.perf_counter() - t0
        log.emit(epoch=epoch, split="train", loss=loss, ppl=float(np.exp(loss)), seconds=dt)
        log.emit(epoch=epoch, split="valid", loss=float(np.log(ppl)), ppl=ppl, seconds=dt)
        history.append({"epoch": epoch, "train_loss": loss, "valid_ppl": ppl})
        if ppl < best - 1e-9:
            best, since_best = ppl, 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    return history


def train_classifier(clf: InferenceClassifier, samples, valid_samples, cfg: TrainConfig,
                     log: MetricsLog | None = None) -> list[dict]:
    """Epoch loop with early stopping on validation accuracy."""
    log = log or MetricsLog(quiet=True)
    opt = Adam(clf.parameters(), lr=cfg.lr, betas=cfg.betas, eps=cfg.eps)
    rng = np.random.default_rng(cfg.seed)
    history, best, since_best = [], -1.0, 0
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        loss, acc = train_classifier_epoch(clf, samples, valid_samples, cfg, opt, rng)
        dt = time.perf_counter() - t0
        log.emit(epoch=epoch, split="train", loss=loss, seconds=dt)
        log.emit(epoch=epoch, split="valid", accuracy=acc, seconds=dt)
        history.append({"epoch": epoch, "train_loss": loss, "valid_acc": acc})
        if acc > best + 1e-9:
            best, since_best = acc, 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    return history
