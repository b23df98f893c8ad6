"""Stacked recurrent language model and the sentence-pair classifier.

The language model is embedding -> L recurrent layers -> decoder, with the
decoder weight optionally tied to the embedding. All forward paths run
batched over [batch, time] id arrays; the public single-sentence operations
wrap a batch of one. Evaluation-mode forwards record no tape and are
deterministic; training-mode forwards draw dropout masks from the generator
handed in by the caller.
"""

from dataclasses import dataclass, field, asdict

import numpy as np

from . import tensor as T
from .cell import CellParams, CellState, StepTrace
from .errors import ConfigError, ContractError, VocabularyError
from .tensor import Parameter, Tensor, no_grad


@dataclass
class LanguageModelConfig:
    vocab_size: int
    embed_size: int = 64
    hidden_sizes: tuple = (64, 64)
    chunk_factor: int = 8
    cell: str = "onlstm"
    tie_weights: bool = True
    dropout_input: float = 0.0
    dropout_hidden: float = 0.0
    dropout_output: float = 0.0
    weight_drop: float = 0.0
    bos_id: int = 0
    eos_id: int = 1
    has_decoder: bool = True

    def __post_init__(self):
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        if self.vocab_size < 1:
            raise ConfigError("vocab_size must be >= 1")
        if self.cell not in ("onlstm", "lstm"):
            raise ConfigError(f"unknown cell kind {self.cell!r}")
        if not self.hidden_sizes:
            raise ConfigError("need at least one recurrent layer")
        if self.cell == "onlstm":
            for h in self.hidden_sizes:
                if h % self.chunk_factor != 0:
                    raise ConfigError(
                        f"hidden size {h} not divisible by chunk factor {self.chunk_factor}")
        if self.tie_weights and self.has_decoder and self.hidden_sizes[-1] != self.embed_size:
            raise ConfigError("weight tying needs last hidden size == embed size")
        for r in (self.dropout_input, self.dropout_hidden, self.dropout_output,
                  self.weight_drop):
            if not 0.0 <= r < 1.0:
                raise ConfigError(f"dropout rate {r} outside [0, 1)")
        if not (0 <= self.bos_id < self.vocab_size and 0 <= self.eos_id < self.vocab_size):
            raise ConfigError("bos/eos ids must be valid token ids")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LanguageModelConfig":
        d = dict(d)
        d["hidden_sizes"] = tuple(d["hidden_sizes"])
        return cls(**d)


def _dropout_mask(rng, shape, rate):
    return (rng.random(shape) >= rate) / (1.0 - rate)


class LanguageModel:
    """Embedding, recurrent stack and (optionally tied) decoder."""

    def __init__(self, config: LanguageModelConfig, rng: np.random.Generator):
        self.config = config
        bound = 1.0 / np.sqrt(config.embed_size)
        self.embedding = Parameter(
            rng.uniform(-bound, bound, size=(config.vocab_size, config.embed_size)),
            "embedding")
        self.cells = []
        in_size = config.embed_size
        for k, h in enumerate(config.hidden_sizes):
            self.cells.append(CellParams(config.cell, in_size, h, config.chunk_factor,
                                         rng, prefix=f"layers.{k}"))
            in_size = h
        self.decoder_w = None
        self.decoder_b = None
        if config.has_decoder:
            if not config.tie_weights:
                b = 1.0 / np.sqrt(config.hidden_sizes[-1])
                self.decoder_w = Parameter(
                    rng.uniform(-b, b, size=(config.hidden_sizes[-1], config.vocab_size)),
                    "decoder.w")
            self.decoder_b = Parameter(np.zeros(config.vocab_size), "decoder.b")

    def parameters(self) -> list[Parameter]:
        out = [self.embedding]
        for c in self.cells:
            out += c.parameters()
        if self.decoder_w is not None:
            out.append(self.decoder_w)
        if self.decoder_b is not None:
            out.append(self.decoder_b)
        return out

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def zero_states(self, batch: int) -> list[CellState]:
        return [CellState(Tensor(np.zeros((batch, c.hidden_size))),
                          Tensor(np.zeros((batch, c.hidden_size))))
                for c in self.cells]

    def _check_ids(self, ids: np.ndarray):
        if ids.size and (ids.min() < 0 or ids.max() >= self.config.vocab_size):
            raise VocabularyError(
                f"token id outside vocabulary of size {self.config.vocab_size}")

    def decode(self, h: Tensor) -> Tensor:
        if not self.config.has_decoder:
            raise ConfigError("model has no decoder")
        w = T.transpose(self.embedding) if self.config.tie_weights else self.decoder_w
        return T.add(T.matmul(h, w), self.decoder_b)

    def forward_batch(self, ids: np.ndarray, initial=None, train: bool = False,
                      rng: np.random.Generator | None = None, collect_traces: bool = False):
        """Teacher-forced pass over ids [B, T].

        Returns (logits Tensor [(T*B), V] in time-major row order or None when
        the model has no decoder, top hidden per step as the last CellState
        list entry, per-layer traces). Dropout is applied only when train=True.
        """
        cfg = self.config
        ids = np.asarray(ids, dtype=np.int64)
        if ids.ndim != 2:
            raise ContractError(f"forward_batch: ids must be [batch, time], got {ids.shape}")
        self._check_ids(ids)
        B, steps = ids.shape
        states = initial if initial is not None else self.zero_states(B)
        traces: list[list[StepTrace]] = [[] for _ in self.cells]
        if steps == 0:
            return None, states, traces

        if train and rng is None:
            raise ContractError("training forward needs a generator for dropout masks")
        drop = train and rng is not None

        combined = []
        for c in self.cells:
            u_mask = None
            if drop and cfg.weight_drop > 0.0:
                rows_u = sum(c.hidden_size if g in ("f", "i", "o", "c") else c.d_m
                             for g in c._gates)
                u_mask = _dropout_mask(rng, (c.hidden_size, rows_u), cfg.weight_drop)
            combined.append(c.combined(u_mask=u_mask))

        tops = []
        new_states = list(states)
        for t in range(steps):
            x = T.rows(self.embedding, ids[:, t])
            if drop and cfg.dropout_input > 0.0:
                x = T.scale(x, _dropout_mask(rng, x.shape, cfg.dropout_input))
            for k, c in enumerate(self.cells):
                if c.kind == "onlstm":
                    from .cell import onlstm_step
                    st, tr = onlstm_step(c, x, new_states[k], combined=combined[k])
                    if collect_traces:
                        traces[k].append(tr)
                else:
                    from .cell import lstm_step
                    st = lstm_step(c, x, new_states[k], combined=combined[k])
                new_states[k] = st
                x = st.h
                if drop and k + 1 < len(self.cells) and cfg.dropout_hidden > 0.0:
                    x = T.scale(x, _dropout_mask(rng, x.shape, cfg.dropout_hidden))
            tops.append(x)

        logits = None
        if cfg.has_decoder:
            flat = tops[0] if steps == 1 else T.concat(tops, axis=0)
            if drop and cfg.dropout_output > 0.0:
                flat = T.scale(flat, _dropout_mask(rng, flat.shape, cfg.dropout_output))
            logits = self.decode(flat)
        return logits, new_states, traces


def lm_forward(model: LanguageModel, tokens, initial=None):
    """Next-token logits for one sentence; evaluation mode.

    Returns (logits [T, vocab] array, final states, traces[layer][step]) with
    batch dimensions squeezed out of the traces.
    """
    ids = np.asarray(list(tokens), dtype=np.int64).reshape(1, -1)
    with no_grad():
        logits, states, traces = model.forward_batch(
            ids, initial=initial, collect_traces=True)
    out = (np.zeros((0, model.config.vocab_size)) if logits is None
           else logits.data.copy())
    flat_traces = [
        [StepTrace(tr.master_forget[0], tr.master_input[0], float(tr.split_estimate[0]))
         for tr in layer]
        for layer in traces
    ]
    return out, states, flat_traces


def sequence_nll(model: LanguageModel, inputs: np.ndarray, targets: np.ndarray) -> float:
    """Sum of next-token negative log-probs over one [1, T] input/target pair."""
    model._check_ids(targets)
    with no_grad():
        logits, _, _ = model.forward_batch(inputs)
        nll = T.cross_entropy(logits, targets.reshape(-1))
    return float(nll.data.sum())


def sentence_logprob(model: LanguageModel, tokens) -> float:
    """log p(sentence) with an implicit begin marker; excludes the end marker."""
    toks = list(tokens)
    if not toks:
        raise ContractError("sentence_logprob: empty sentence")
    inputs = np.array([[model.config.bos_id] + toks[:-1]], dtype=np.int64)
    targets = np.array([toks], dtype=np.int64)
    return -sequence_nll(model, inputs, targets)


def perplexity(model: LanguageModel, corpus) -> float:
    """exp of per-token NLL over the corpus, counting end-of-sentence tokens."""
    corpus = list(corpus)
    if not corpus:
        raise ContractError("perplexity: empty corpus")
    total_nll, total_tokens = corpus_nll(model, corpus)
    return float(np.exp(total_nll / total_tokens))


def corpus_nll(model: LanguageModel, corpus) -> tuple[float, int]:
    """Total NLL and token count (with eos) over a list of id sequences."""
    cfg = model.config
    buckets: dict[int, list[list[int]]] = {}
    for sent in corpus:
        sent = list(sent)
        if not sent:
            raise ContractError("corpus contains an empty sentence")
        buckets.setdefault(len(sent), []).append(sent)
    total, count = 0.0, 0
    with no_grad():
        for length, group in sorted(buckets.items()):
            for lo in range(0, len(group), 128):
                chunk = group[lo:lo + 128]
                arr = np.array(chunk, dtype=np.int64)
                inputs = np.concatenate(
                    [np.full((len(chunk), 1), cfg.bos_id, dtype=np.int64), arr], axis=1)
                targets = np.concatenate(
                    [arr, np.full((len(chunk), 1), cfg.eos_id, dtype=np.int64)], axis=1)
                logits, _, _ = model.forward_batch(inputs)
                nll = T.cross_entropy(logits, targets.T.reshape(-1))
                total += float(nll.data.sum())
                count += targets.size
    return total, count


# ---------------------------------------------------------------------------
# sentence-pair classifier
# ---------------------------------------------------------------------------

N_RELATIONS = 7


@dataclass
class ClassifierConfig:
    vocab_size: int
    embed_size: int = 32
    hidden_sizes: tuple = (64,)
    chunk_factor: int = 8
    cell: str = "onlstm"
    head_hidden: int = 128
    dropout_input: float = 0.0
    dropout_hidden: float = 0.0
    dropout_output: float = 0.0
    weight_drop: float = 0.0
    n_labels: int = N_RELATIONS

    def encoder_config(self) -> LanguageModelConfig:
        return LanguageModelConfig(
            vocab_size=self.vocab_size, embed_size=self.embed_size,
            hidden_sizes=self.hidden_sizes, chunk_factor=self.chunk_factor,
            cell=self.cell, tie_weights=False, dropout_input=self.dropout_input,
            dropout_hidden=self.dropout_hidden, dropout_output=0.0,
            weight_drop=self.weight_drop, has_decoder=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierConfig":
        d = dict(d)
        d["hidden_sizes"] = tuple(d["hidden_sizes"])
        return cls(**d)


class InferenceClassifier:
    """Shared sentence encoder plus a one-hidden-layer head over pair features.

    The feature vector for a pair is (h1, h2, h1*h2, |h1-h2|), four times the
    encoder's top hidden size.
    """

    def __init__(self, config: ClassifierConfig, rng: np.random.Generator):
        self.config = config
        self.encoder = LanguageModel(config.encoder_config(), rng)
        d = config.hidden_sizes[-1]
        feat = 4 * d
        b1 = 1.0 / np.sqrt(feat)
        b2 = 1.0 / np.sqrt(config.head_hidden)
        self.head_w1 = Parameter(rng.uniform(-b1, b1, (feat, config.head_hidden)), "head.w1")
        self.head_b1 = Parameter(np.zeros(config.head_hidden), "head.b1")
        self.head_w2 = Parameter(rng.uniform(-b2, b2, (config.head_hidden, config.n_labels)),
                                 "head.w2")
        self.head_b2 = Parameter(np.zeros(config.n_labels), "head.b2")

    def parameters(self) -> list[Parameter]:
        return self.encoder.parameters() + [self.head_w1, self.head_b1,
                                            self.head_w2, self.head_b2]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def encode_batch(self, ids: np.ndarray, train: bool = False, rng=None) -> Tensor:
        """Top-layer final hidden state for ids [B, T] (no begin marker)."""
        if ids.shape[1] == 0:
            raise ContractError("encode: empty sentence")
        _, states, _ = self.encoder.forward_batch(ids, train=train, rng=rng)
        return states[-1].h

    def logits_batch(self, ids1: np.ndarray, ids2: np.ndarray,
                     train: bool = False, rng=None) -> Tensor:
        h1 = self.encode_batch(ids1, train=train, rng=rng)
        h2 = self.encode_batch(ids2, train=train, rng=rng)
        feats = T.concat([h1, h2, T.mul(h1, h2), T.abs_(T.sub(h1, h2))], axis=-1)
        hid = T.tanh(T.add(T.matmul(feats, self.head_w1), self.head_b1))
        if train and rng is not None and self.config.dropout_output > 0.0:
            hid = T.scale(hid, _dropout_mask(rng, hid.shape, self.config.dropout_output))
        return T.add(T.matmul(hid, self.head_w2), self.head_b2)


def encode_sentence(classifier: InferenceClassifier, tokens) -> np.ndarray:
    """Sentence embedding: the encoder's last top-layer hidden state."""
    toks = list(tokens)
    if not toks:
        raise ContractError("encode_sentence: empty sentence")
    ids = np.asarray(toks, dtype=np.int64).reshape(1, -1)
    with no_grad():
        return classifier.encode_batch(ids).data[0].copy()


def classify_pair(classifier: InferenceClassifier, s1, s2) -> np.ndarray:
    """Distribution over the relation labels for a sentence pair."""
    t1, t2 = list(s1), list(s2)
    if not t1 or not t2:
        raise ContractError("classify_pair: empty sentence")
    with no_grad():
        logits = classifier.logits_batch(np.array([t1], dtype=np.int64),
                                         np.array([t2], dtype=np.int64))
        probs = T.softmax_stable(logits)
    return probs.data[0].copy()
