"""Paragraph-vector document embeddings (distributed memory, negative sampling).

The hidden vector for a center word is the mean of the document vector and
the word vectors within ``window`` positions on either side (truncated at
the document edges).  Training is single-threaded so runs are reproducible.
"""

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .vocab import Vocabulary, build_vocab, flatten

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
_TABLE_SIZE = 1_000_000


@dataclass
class ParagraphVectorConfig:
    vector_size: int = 300
    window: int = 2
    min_count: int = 20
    min_doc_len: int = 10
    epochs: int = 20
    negative: int = 5
    initial_lr: float = 0.025
    final_lr: float = 0.0001
    ns_exponent: float = 0.75
    seed: int = 0

    def __post_init__(self):
        if self.vector_size < 1 or self.window < 1 or self.epochs < 1 or self.negative < 1:
            raise ValueError("vector_size, window, epochs and negative must be >= 1")
        if not 0 < self.final_lr <= self.initial_lr:
            raise ValueError("need 0 < final_lr <= initial_lr")


@dataclass
class ParagraphVectorModel:
    config: ParagraphVectorConfig
    vocabulary: Vocabulary
    word_vectors: np.ndarray
    doc_vectors: np.ndarray
    output_vectors: np.ndarray
    doc_index: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    loss_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    last_lr: float = float("nan")


# ---------------------------------------------------------------------------
# numba kernels


@njit(cache=True)
def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit(cache=True)
def _log_sigmoid(x):
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


@njit(cache=True)
def _ns_gradient(hidden, output_vectors, targets, labels, grad_hidden, grad_out):
    """Negative-sampling loss and gradients for one hidden vector.

    loss = -sum_j [labels_j log s(o_j.h) + (1 - labels_j) log s(-o_j.h)]
    Fills ``grad_hidden`` (dL/dh) and ``grad_out[j]`` (dL/do_j).
    """
    D = hidden.shape[0]
    grad_hidden[:] = 0.0
    loss = 0.0
    for j in range(targets.shape[0]):
        o = output_vectors[targets[j]]
        dot = 0.0
        for i in range(D):
            dot += o[i] * hidden[i]
        if labels[j] == 1:
            loss -= _log_sigmoid(dot)
            g = _sigmoid(dot) - 1.0
        else:
            loss -= _log_sigmoid(-dot)
            g = _sigmoid(dot)
        for i in range(D):
            grad_hidden[i] += g * o[i]
            grad_out[j, i] = g * hidden[i]
    return loss


@njit(cache=True)
def _context(ids, start, end, t, window, out):
    lo = max(start, t - window)
    hi = min(end, t + window + 1)
    n = 0
    for p in range(lo, hi):
        if p != t:
            out[n] = ids[p]
            n += 1
    return n


@njit(cache=True)
def _sample_targets(center, table, negative, vocab_size, targets, labels):
    targets[0] = center
    labels[0] = 1
    n = 1
    misses = 0
    while n < negative + 1:
        if misses < 64:
            cand = table[np.random.randint(0, table.shape[0])]
        else:
            # table dominated by the center word
            cand = np.random.randint(0, vocab_size)
        if cand == center:
            misses += 1
            continue
        targets[n] = cand
        labels[n] = 0
        n += 1


@njit(cache=True)
def _dm_pass(ids, offsets, doc_rows, word_vecs, doc_vecs, out_vecs, table, window,
             negative, lr_start, lr_step, step0, learn_words, losses):
    """One epoch of PV-DM updates; returns the number of steps taken.

    ``lr`` at global step s is ``lr_start - lr_step * s``.  With
    ``learn_words`` false only document vectors move (inference).
    """
    D = word_vecs.shape[1]
    hidden = np.empty(D)
    grad_hidden = np.empty(D)
    grad_out = np.empty((negative + 1, D))
    targets = np.empty(negative + 1, dtype=np.int64)
    labels = np.empty(negative + 1, dtype=np.int64)
    ctx = np.empty(2 * window, dtype=np.int64)
    step = step0
    for doc in range(offsets.shape[0] - 1):
        start = offsets[doc]
        end = offsets[doc + 1]
        row = doc_rows[doc]
        for t in range(start, end):
            lr = lr_start - lr_step * step
            n_ctx = _context(ids, start, end, t, window, ctx)
            inv = 1.0 / (n_ctx + 1)
            for i in range(D):
                hidden[i] = doc_vecs[row, i]
            for c in range(n_ctx):
                wv = word_vecs[ctx[c]]
                for i in range(D):
                    hidden[i] += wv[i]
            for i in range(D):
                hidden[i] *= inv
            _sample_targets(ids[t], table, negative, out_vecs.shape[0], targets, labels)
            losses[doc] += _ns_gradient(hidden, out_vecs, targets, labels, grad_hidden, grad_out)
            if learn_words:
                for j in range(negative + 1):
                    o = out_vecs[targets[j]]
                    for i in range(D):
                        o[i] -= lr * grad_out[j, i]
                for c in range(n_ctx):
                    wv = word_vecs[ctx[c]]
                    for i in range(D):
                        wv[i] -= lr * inv * grad_hidden[i]
            for i in range(D):
                doc_vecs[row, i] -= lr * inv * grad_hidden[i]
            step += 1
    return step


@njit(cache=True)
def _train_epochs(ids, offsets, doc_rows, word_vecs, doc_vecs, out_vecs, table, window,
                  negative, lr0, lr1, epochs, seed, learn_words, loss_trace):
    np.random.seed(seed)
    n_tokens = ids.shape[0]
    total = epochs * n_tokens
    lr_step = (lr0 - lr1) / (total - 1) if total > 1 else 0.0
    losses = np.zeros(offsets.shape[0] - 1)
    step = 0
    for e in range(epochs):
        losses[:] = 0.0
        step = _dm_pass(ids, offsets, doc_rows, word_vecs, doc_vecs, out_vecs, table, window,
                        negative, lr0, lr_step, step, learn_words, losses)
        loss_trace[e] = losses.sum() / max(n_tokens, 1)
    return lr0 - lr_step * (step - 1)


@njit(cache=True)
def _infer_many(ids, offsets, word_vecs, out_vecs, table, window, negative, lr0, lr1,
                epochs, seeds, out):
    D = word_vecs.shape[1]
    trace = np.zeros(epochs)
    rows = np.zeros(1, dtype=np.int64)
    for doc in range(offsets.shape[0] - 1):
        start = offsets[doc]
        end = offsets[doc + 1]
        if end == start:
            out[doc, :] = 0.0
            continue
        np.random.seed(seeds[doc])
        vec = np.empty((1, D))
        for i in range(D):
            vec[0, i] = (np.random.random() - 0.5) / D
        sub_offsets = np.array([0, end - start], dtype=np.int64)
        _train_epochs(ids[start:end], sub_offsets, rows, word_vecs, vec, out_vecs, table,
                      window, negative, lr0, lr1, epochs, seeds[doc], False, trace)
        out[doc, :] = vec[0]


# ---------------------------------------------------------------------------


def _unigram_table(counts, exponent, size=_TABLE_SIZE):
    weights = counts.astype(np.float64) ** exponent
    cdf = np.cumsum(weights) / weights.sum()
    positions = (np.arange(size) + 0.5) / size
    return np.searchsorted(cdf, positions).astype(np.int64).clip(0, len(counts) - 1)


def _init_vectors(rng, rows, dim):
    return (rng.random((rows, dim)) - 0.5) / dim


def train_pv(token_docs, config=None, vocabulary=None):
    """Train word, output and document vectors on ``token_docs``.

    Documents shorter than ``config.min_doc_len`` are skipped;
    ``model.doc_index`` maps rows of ``doc_vectors`` back to input positions.
    """
    config = config or ParagraphVectorConfig()
    token_docs = list(token_docs)
    vocabulary = vocabulary or build_vocab(token_docs, config.min_count, config.min_doc_len)
    keep = np.array([i for i, t in enumerate(token_docs) if len(t) >= config.min_doc_len],
                    dtype=np.int64)
    ids, offsets = flatten(vocabulary, [token_docs[i] for i in keep])
    if ids.shape[0] == 0:
        raise ValueError("no in-vocabulary tokens to train on")
    if len(vocabulary) < 2:
        raise ValueError("negative sampling needs at least two vocabulary terms")
    rng = np.random.default_rng(config.seed)
    D = config.vector_size
    word_vecs = _init_vectors(rng, len(vocabulary), D)
    doc_vecs = _init_vectors(rng, len(keep), D)
    out_vecs = np.zeros((len(vocabulary), D))
    table = _unigram_table(vocabulary.corpus_freq, config.ns_exponent)
    trace = np.zeros(config.epochs)
    last_lr = _train_epochs(
        ids, offsets, np.arange(len(keep), dtype=np.int64), word_vecs, doc_vecs, out_vecs,
        table, config.window, config.negative, config.initial_lr, config.final_lr,
        config.epochs, config.seed % 2**32, True, trace,
    )
    for name, arr in (("word", word_vecs), ("doc", doc_vecs), ("output", out_vecs)):
        if not np.isfinite(arr).all():
            raise FloatingPointError(f"non-finite {name} vectors after training")
    return ParagraphVectorModel(
        config=config, vocabulary=vocabulary, word_vectors=word_vecs, doc_vectors=doc_vecs,
        output_vectors=out_vecs, doc_index=keep, loss_trace=trace, last_lr=float(last_lr),
    )


def infer_vectors(model, token_docs, epochs=None, seed=0):
    """Fit fresh document vectors against frozen word/output vectors.

    Returns ``(vectors, flagged)``; documents without in-vocabulary tokens
    get the zero vector and are flagged.
    """
    cfg = model.config
    epochs = cfg.epochs if epochs is None else epochs
    ids, offsets = flatten(model.vocabulary, token_docs)
    n = len(offsets) - 1
    out = np.zeros((n, cfg.vector_size))
    seeds = ((int(seed) * 1_000_003 + np.arange(n, dtype=np.int64)) % 2**32).astype(np.int64)
    table = _unigram_table(model.vocabulary.corpus_freq, cfg.ns_exponent)
    _infer_many(ids, offsets, model.word_vectors, model.output_vectors, table, cfg.window,
                cfg.negative, cfg.initial_lr, cfg.final_lr, epochs, seeds, out)
    return out, np.diff(offsets) == 0


def infer_vector(model, tokens, epochs=None, seed=0):
    vectors, flagged = infer_vectors(model, [tokens], epochs, seed)
    return vectors[0], bool(flagged[0])


# ---------------------------------------------------------------------------
# gradient check


def _reference_loss(doc_vec, word_vecs, ctx, out_vecs, targets, labels):
    hidden = (doc_vec + word_vecs[ctx].sum(axis=0)) / (len(ctx) + 1)
    dots = out_vecs[targets] @ hidden
    signs = np.where(labels == 1, 1.0, -1.0)
    return float(np.sum(np.logaddexp(0.0, -signs * dots)))


def _example_gradients(doc_vec, word_vecs, ctx, out_vecs, targets, labels):
    """Gradients of one training example, computed by the training kernel."""
    D = doc_vec.shape[0]
    inv = 1.0 / (len(ctx) + 1)
    hidden = (doc_vec + word_vecs[ctx].sum(axis=0)) * inv
    grad_hidden = np.empty(D)
    grad_out_rows = np.empty((len(targets), D))
    loss = _ns_gradient(hidden, out_vecs, targets, labels, grad_hidden, grad_out_rows)
    g_doc = grad_hidden * inv
    g_words = np.zeros_like(word_vecs)
    for c in ctx:
        g_words[c] += grad_hidden * inv
    g_out = np.zeros_like(out_vecs)
    for j, t in enumerate(targets):
        g_out[t] += grad_out_rows[j]
    return loss, g_doc, g_words, g_out


@dataclass
class GradientCheckReport:
    max_relative_error: float
    n_checked: int
    offending: list
    tolerance: float

    @property
    def passed(self):
        return not self.offending


def gradient_check(config=None, vocab_size=10, n_params=100, tolerance=1e-4, eps=1e-5,
                   seed=0, zero_init=False):
    """Compare analytic gradients with central finite differences.

    A tiny model (``vocab_size`` words, ``config.vector_size`` dims) and one
    training example with a full context window are drawn at random.
    """
    config = config or ParagraphVectorConfig(vector_size=10, window=2, min_count=1)
    rng = np.random.default_rng(seed)
    D = config.vector_size
    scale = 0.0 if zero_init else 0.5
    params = {
        "doc": rng.normal(0, scale, D),
        "word": rng.normal(0, scale, (vocab_size, D)),
        "output": rng.normal(0, scale, (vocab_size, D)),
    }
    ctx = rng.choice(vocab_size, size=min(2 * config.window, vocab_size - 1), replace=False)
    rest = np.setdiff1d(np.arange(vocab_size), ctx)
    targets = rng.choice(rest, size=min(config.negative + 1, len(rest)), replace=False)
    labels = np.zeros(len(targets), dtype=np.int64)
    labels[0] = 1
    targets = targets.astype(np.int64)

    def loss_of(p):
        return _reference_loss(p["doc"], p["word"], ctx, p["output"], targets, labels)

    _, g_doc, g_words, g_out = _example_gradients(
        params["doc"], params["word"], ctx, params["output"], targets, labels
    )
    analytic = {"doc": g_doc, "word": g_words, "output": g_out}
    # parameters that influence the loss
    candidates = [("doc", (i,)) for i in range(D)]
    candidates += [("word", (int(c), i)) for c in ctx for i in range(D)]
    candidates += [("output", (int(t), i)) for t in targets for i in range(D)]
    picks = rng.choice(len(candidates), size=min(n_params, len(candidates)), replace=False)
    offending = []
    worst = 0.0
    for p in picks:
        name, index = candidates[p]
        saved = params[name][index]
        params[name][index] = saved + eps
        up = loss_of(params)
        params[name][index] = saved - eps
        down = loss_of(params)
        params[name][index] = saved
        numeric = (up - down) / (2 * eps)
        a = analytic[name][index]
        if not (np.isfinite(a) and np.isfinite(numeric)):
            offending.append((name, index, a, numeric))
            continue
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, rel)
        if rel >= tolerance:
            offending.append((name, index, a, numeric))
    return GradientCheckReport(worst, len(picks), offending, tolerance)


# ---------------------------------------------------------------------------
# estimator


class ParagraphVectors(TransformerMixin, BaseEstimator):
    """Distributed-memory paragraph vectors as a transformer.

    ``fit`` trains on the given token lists; ``transform`` infers a vector
    per document with the word and output vectors frozen.
    """

    def __init__(self, vector_size=300, window=2, min_count=20, min_doc_len=10, epochs=20,
                 negative=5, initial_lr=0.025, final_lr=0.0001, infer_epochs=None,
                 random_state=0):
        self.vector_size = vector_size
        self.window = window
        self.min_count = min_count
        self.min_doc_len = min_doc_len
        self.epochs = epochs
        self.negative = negative
        self.initial_lr = initial_lr
        self.final_lr = final_lr
        self.infer_epochs = infer_epochs
        self.random_state = random_state

    def _config(self):
        return ParagraphVectorConfig(
            vector_size=self.vector_size, window=self.window, min_count=self.min_count,
            min_doc_len=self.min_doc_len, epochs=self.epochs, negative=self.negative,
            initial_lr=self.initial_lr, final_lr=self.final_lr, seed=self.random_state,
        )

    def fit(self, X, y=None, vocabulary=None):
        self.model_ = train_pv(list(X), self._config(), vocabulary)
        self.vocabulary_ = self.model_.vocabulary
        self.loss_trace_ = self.model_.loss_trace
        return self

    def infer(self, X):
        check_is_fitted(self, "model_")
        return infer_vectors(self.model_, list(X), self.infer_epochs, self.random_state)

    def transform(self, X):
        vectors, flagged = self.infer(X)
        if flagged.any():
            logger.warning("%d documents had no in-vocabulary tokens", int(flagged.sum()))
        return vectors

    def get_feature_names_out(self, input_features=None):
        return np.array([f"emb_{i:03d}" for i in range(self.vector_size)], dtype=object)

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.input_tags.two_d_array = False
        tags.input_tags.string = True
        return tags


# ---------------------------------------------------------------------------
# serialization


def save_pv_model(model, path):
    voc = model.vocabulary
    cfg = asdict(model.config)
    np.savez(
        path,
        format_version=np.array(FORMAT_VERSION, dtype="<i8"),
        kind=np.array("paragraph_vectors"),
        config_keys=np.array(list(cfg), dtype=str),
        config_values=np.array([float(v) for v in cfg.values()], dtype="<f8"),
        terms=np.array(voc.terms, dtype=str),
        corpus_freq=voc.corpus_freq.astype("<i8"),
        doc_freq=voc.doc_freq.astype("<i8"),
        min_count=np.array(voc.min_count, dtype="<i8"),
        min_doc_len=np.array(voc.min_doc_len, dtype="<i8"),
        word_vectors=model.word_vectors.astype("<f8"),
        doc_vectors=model.doc_vectors.astype("<f8"),
        output_vectors=model.output_vectors.astype("<f8"),
        doc_index=model.doc_index.astype("<i8"),
        loss_trace=model.loss_trace.astype("<f8"),
        last_lr=np.array(model.last_lr, dtype="<f8"),
    )


def load_pv_model(path):
    with np.load(path, allow_pickle=False) as data:
        if str(data["kind"]) != "paragraph_vectors" or int(data["format_version"]) != FORMAT_VERSION:
            raise ValueError(f"{path} is not a version-{FORMAT_VERSION} paragraph-vector model")
        raw = dict(zip((str(k) for k in data["config_keys"]), data["config_values"]))
        types = {f: type(v) for f, v in asdict(ParagraphVectorConfig()).items()}
        config = ParagraphVectorConfig(**{k: types[k](v) for k, v in raw.items()})
        voc = Vocabulary(
            terms=[str(t) for t in data["terms"]],
            corpus_freq=data["corpus_freq"].astype(np.int64),
            doc_freq=data["doc_freq"].astype(np.int64),
            min_count=int(data["min_count"]),
            min_doc_len=int(data["min_doc_len"]),
        )
        return ParagraphVectorModel(
            config=config, vocabulary=voc,
            word_vectors=data["word_vectors"].astype(np.float64),
            doc_vectors=data["doc_vectors"].astype(np.float64),
            output_vectors=data["output_vectors"].astype(np.float64),
            doc_index=data["doc_index"].astype(np.int64),
            loss_trace=data["loss_trace"].astype(np.float64),
            last_lr=float(data["last_lr"]),
        )
