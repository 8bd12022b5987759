"""LDA topic model trained by collapsed Gibbs sampling.

Count layout inside the sampler is term-major (``n_wk[w, k]``) so the inner
loop over topics reads contiguous memory; ``phi`` is exposed topic-major.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .vocab import Vocabulary, build_vocab

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# numba kernels


@njit(cache=True)
def _seed(seed):
    np.random.seed(seed)


@njit(cache=True)
def _conditional(w, d, n_wk, n_dk, n_k, alpha, beta, out):
    """Unnormalized p(z = k | rest) with the current token already removed.

    Writes cumulative sums into ``out`` and returns the total mass.
    """
    K = n_k.shape[0]
    vbeta = n_wk.shape[0] * beta
    total = 0.0
    for k in range(K):
        total += (n_dk[d, k] + alpha) * (n_wk[w, k] + beta) / (n_k[k] + vbeta)
        out[k] = total
    return total


@njit(cache=True)
def _draw(cumulative, total):
    u = np.random.random() * total
    K = cumulative.shape[0]
    for k in range(K - 1):
        if u < cumulative[k]:
            return k
    return K - 1


@njit(cache=True)
def _sweep(words, docs, z, n_wk, n_dk, n_k, alpha, beta, buf):
    for i in range(words.shape[0]):
        w = words[i]
        d = docs[i]
        k = z[i]
        n_wk[w, k] -= 1
        n_dk[d, k] -= 1
        n_k[k] -= 1
        total = _conditional(w, d, n_wk, n_dk, n_k, alpha, beta, buf)
        k = _draw(buf, total)
        z[i] = k
        n_wk[w, k] += 1
        n_dk[d, k] += 1
        n_k[k] += 1


@njit(cache=True)
def _lgamma_table(offset, size):
    out = np.empty(size + 1)
    for n in range(size + 1):
        out[n] = math.lgamma(n + offset)
    return out


@njit(cache=True)
def _log_joint(n_wk, n_dk, n_k, n_d, alpha, beta, lg_beta, lg_alpha):
    """log p(w, z) with theta and phi integrated out."""
    V, K = n_wk.shape
    D = n_dk.shape[0]
    ll = K * (math.lgamma(V * beta) - V * math.lgamma(beta))
    for k in range(K):
        ll -= math.lgamma(n_k[k] + V * beta)
    for w in range(V):
        for k in range(K):
            ll += lg_beta[n_wk[w, k]]
    ll += D * (math.lgamma(K * alpha) - K * math.lgamma(alpha))
    for d in range(D):
        ll -= math.lgamma(n_d[d] + K * alpha)
        for k in range(K):
            ll += lg_alpha[n_dk[d, k]]
    return ll


@njit(cache=True)
def _train(words, docs, n_docs, V, K, alpha, beta, iterations, seed, ll):
    np.random.seed(seed)
    N = words.shape[0]
    z = np.empty(N, dtype=np.int32)
    n_wk = np.zeros((V, K), dtype=np.int64)
    n_dk = np.zeros((n_docs, K), dtype=np.int64)
    n_k = np.zeros(K, dtype=np.int64)
    n_d = np.zeros(n_docs, dtype=np.int64)
    for i in range(N):
        k = np.random.randint(0, K)
        z[i] = k
        n_wk[words[i], k] += 1
        n_dk[docs[i], k] += 1
        n_k[k] += 1
        n_d[docs[i]] += 1
    max_w = 0
    for w in range(V):
        s = 0
        for k in range(K):
            s += n_wk[w, k]
        max_w = max(max_w, s)
    max_d = 0
    for d in range(n_docs):
        max_d = max(max_d, n_d[d])
    lg_beta = _lgamma_table(beta, max_w)
    lg_alpha = _lgamma_table(alpha, max_d)
    buf = np.empty(K)
    for it in range(iterations):
        _sweep(words, docs, z, n_wk, n_dk, n_k, alpha, beta, buf)
        ll[it] = _log_joint(n_wk, n_dk, n_k, n_d, alpha, beta, lg_beta, lg_alpha)
    return z, n_wk, n_dk, n_k


@njit(cache=True)
def _infer_many(ids, offsets, phi_t, alpha, iterations, burn_in, seeds, out):
    V, K = phi_t.shape
    cumulative = np.empty(K)
    for doc in range(offsets.shape[0] - 1):
        start = offsets[doc]
        n = offsets[doc + 1] - start
        if n == 0:
            for k in range(K):
                out[doc, k] = 1.0 / K
            continue
        np.random.seed(seeds[doc])
        z = np.empty(n, dtype=np.int32)
        n_k = np.zeros(K)
        acc = np.zeros(K)
        for i in range(n):
            k = np.random.randint(0, K)
            z[i] = k
            n_k[k] += 1
        for it in range(iterations):
            for i in range(n):
                w = ids[start + i]
                n_k[z[i]] -= 1
                total = 0.0
                for k in range(K):
                    total += (n_k[k] + alpha) * phi_t[w, k]
                    cumulative[k] = total
                k = _draw(cumulative, total)
                z[i] = k
                n_k[k] += 1
            if it >= burn_in:
                for k in range(K):
                    acc[k] += n_k[k]
        kept = iterations - burn_in
        for k in range(K):
            out[doc, k] = (acc[k] / kept + alpha) / (n + K * alpha)


@njit(cache=True)
def _window_counts(mapped, offsets, window, M):
    """Boolean sliding-window occurrence and co-occurrence counts.

    ``mapped`` holds the index of each token in the word set of interest, or
    -1.  Documents shorter than the window count as one window.
    """
    occ = np.zeros(M, dtype=np.int64)
    cooc = np.zeros((M, M), dtype=np.int64)
    cnt = np.zeros(M, dtype=np.int64)
    present = np.empty(M, dtype=np.int64)
    n_windows = 0
    for doc in range(offsets.shape[0] - 1):
        start = offsets[doc]
        L = offsets[doc + 1] - start
        if L == 0:
            continue
        width = min(window, L)
        cnt[:] = 0
        for i in range(width):
            m = mapped[start + i]
            if m >= 0:
                cnt[m] += 1
        for s in range(L - width + 1):
            if s > 0:
                out_m = mapped[start + s - 1]
                if out_m >= 0:
                    cnt[out_m] -= 1
                in_m = mapped[start + s + width - 1]
                if in_m >= 0:
                    cnt[in_m] += 1
            n_windows += 1
            n_present = 0
            for m in range(M):
                if cnt[m] > 0:
                    present[n_present] = m
                    n_present += 1
            for a in range(n_present):
                ma = present[a]
                occ[ma] += 1
                for b in range(n_present):
                    cooc[ma, present[b]] += 1
    return n_windows, occ, cooc


# ---------------------------------------------------------------------------
# data types


@dataclass
class TopicModel:
    """Trained LDA model: topic-term distributions plus the priors used."""

    n_topics: int
    phi: np.ndarray
    alpha: float
    beta: float
    vocabulary: Vocabulary
    log_likelihood: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0
    seed: int = 0

    def top_terms(self, topic, n=10):
        order = np.argsort(-self.phi[topic], kind="stable")[:n]
        return [self.vocabulary.terms[i] for i in order]


@dataclass
class CoherenceScore:
    per_topic: np.ndarray
    mean: float
    top_n: int
    window_size: int


def _as_token_ids(doc):
    """Accept either an id array or BoW ``(term_id, count)`` pairs."""
    if isinstance(doc, np.ndarray):
        return doc.astype(np.int32)
    doc = list(doc)
    if doc and isinstance(doc[0], tuple):
        return np.repeat(
            np.array([t for t, _ in doc], dtype=np.int32),
            np.array([c for _, c in doc], dtype=np.int64),
        )
    return np.asarray(doc, dtype=np.int32)


def _flatten_ids(docs):
    arrays = [_as_token_ids(d) for d in docs]
    offsets = np.zeros(len(arrays) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([a.shape[0] for a in arrays])
    ids = np.concatenate(arrays).astype(np.int32) if arrays else np.zeros(0, np.int32)
    return ids, offsets


def default_alpha(n_topics):
    return 5.0 / n_topics


def train_lda(bow_docs, vocabulary, n_topics, alpha=None, beta=0.01, iterations=1000, seed=0):
    """Fit LDA by collapsed Gibbs sampling.

    ``bow_docs`` are BoW pair lists or token-id arrays over ``vocabulary``.
    The result is a deterministic function of ``seed``.
    """
    if n_topics < 1:
        raise ValueError("n_topics must be >= 1")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    alpha = default_alpha(n_topics) if alpha is None else float(alpha)
    ids, offsets = _flatten_ids(bow_docs)
    if ids.shape[0] == 0:
        raise ValueError("corpus has no in-vocabulary tokens")
    if n_topics > ids.shape[0]:
        raise ValueError(f"n_topics={n_topics} exceeds the {ids.shape[0]} corpus tokens")
    docs = np.repeat(np.arange(len(offsets) - 1, dtype=np.int32), np.diff(offsets))
    ll = np.zeros(iterations)
    _, n_wk, _, n_k = _train(
        ids, docs, len(offsets) - 1, len(vocabulary), n_topics, alpha, float(beta),
        iterations, int(seed) % 2**32, ll,
    )
    V = len(vocabulary)
    phi = (n_wk.T + beta) / (n_k[:, None] + V * beta)
    return TopicModel(
        n_topics=n_topics, phi=phi, alpha=alpha, beta=float(beta), vocabulary=vocabulary,
        log_likelihood=ll, iterations=iterations, seed=int(seed),
    )


def _doc_seeds(seed, n):
    return ((int(seed) * 1_000_003 + np.arange(n, dtype=np.int64)) % 2**32).astype(np.int64)


def infer_topics_many(model, docs, iterations=100, burn_in=20, seed=0):
    """Topic vectors for many documents with ``phi`` held fixed.

    Returns ``(weights, flagged)`` where ``flagged`` marks documents without
    any in-vocabulary token (those get the uniform vector).
    """
    if not 0 <= burn_in < iterations:
        raise ValueError("need 0 <= burn_in < iterations")
    ids, offsets = _flatten_ids(docs)
    out = np.empty((len(offsets) - 1, model.n_topics))
    _infer_many(
        ids, offsets, np.ascontiguousarray(model.phi.T), model.alpha, iterations, burn_in,
        _doc_seeds(seed, len(offsets) - 1), out,
    )
    return out, np.diff(offsets) == 0


def infer_topics(model, bow_doc, iterations=100, burn_in=20, seed=0):
    weights, flagged = infer_topics_many(model, [bow_doc], iterations, burn_in, seed)
    return weights[0], bool(flagged[0])


def _npmi(joint, p_a, p_b, eps=1e-12):
    if p_a == 0.0 or p_b == 0.0:
        return -1.0
    return math.log((joint + eps) / (p_a * p_b)) / -math.log(joint + eps)


def coherence_cv(model, token_docs, top_n=10, window_size=110, top_terms=None):
    """C_v coherence of each topic against a reference corpus.

    Top words of a topic are compared one-vs-set: each word's NPMI context
    vector is cosine-compared with the summed vector of the whole set, and
    the similarities are averaged.  Terms absent from the reference corpus
    have NPMI -1 with every word.
    """
    if top_terms is None:
        top_terms = [model.top_terms(k, top_n) for k in range(model.n_topics)]
    words = sorted({w for terms in top_terms for w in terms})
    position = {w: i for i, w in enumerate(words)}
    mapped = [np.array([position.get(t, -1) for t in doc], dtype=np.int64) for doc in token_docs]
    offsets = np.zeros(len(mapped) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([m.shape[0] for m in mapped])
    flat = np.concatenate(mapped) if mapped else np.zeros(0, np.int64)
    n_windows, occ, cooc = _window_counts(flat, offsets, int(window_size), len(words))
    n_windows = max(n_windows, 1)
    per_topic = np.empty(len(top_terms))
    for k, terms in enumerate(top_terms):
        idx = [position[t] for t in terms]
        p = occ[idx] / n_windows
        n = len(idx)
        vectors = np.empty((n, n))
        for a in range(n):
            for b in range(n):
                vectors[a, b] = _npmi(cooc[idx[a], idx[b]] / n_windows, p[a], p[b])
        total = vectors.sum(axis=0)
        sims = []
        for a in range(n):
            denom = np.linalg.norm(vectors[a]) * np.linalg.norm(total)
            sims.append(float(vectors[a] @ total / denom) if denom > 0 else 0.0)
        per_topic[k] = np.mean(sims)
    return CoherenceScore(
        per_topic=per_topic, mean=float(per_topic.mean()), top_n=top_n, window_size=window_size
    )


def select_topic_count(bow_docs, token_docs, candidates, vocabulary, top_n=10,
                       window_size=110, **train_kwargs):
    """Train one model per candidate K and pick the most coherent.

    Returns ``(best_k, {k: mean coherence})``; ties go to the smaller K.
    """
    candidates = sorted(set(int(k) for k in candidates))
    if not candidates:
        raise ValueError("no candidate topic counts")
    scores = {}
    for k in candidates:
        model = train_lda(bow_docs, vocabulary, k, **train_kwargs)
        scores[k] = coherence_cv(model, token_docs, top_n=top_n, window_size=window_size).mean
        logger.info("K=%d coherence=%.4f", k, scores[k])
    best = max(candidates, key=lambda k: (scores[k], -k))
    return best, scores


# ---------------------------------------------------------------------------
# estimator


class LdaTopicModel(TransformerMixin, BaseEstimator):
    """LDA topic vectors for tokenized documents.

    ``fit`` builds the vocabulary (docs shorter than ``min_doc_len`` and
    terms rarer than ``min_count`` are ignored) and runs the Gibbs sampler;
    ``transform`` re-infers a topic vector for each document.

    Parameters
    ----------
    n_topics : int
    alpha : float or None
        Symmetric document-topic prior; ``None`` means ``5 / n_topics``.
    beta : float
    iterations : int
        Gibbs sweeps during training.
    infer_iterations, infer_burn_in : int
        Sweeps per document at inference, and how many are discarded.
    min_count, min_doc_len : int
    random_state : int
    """

    def __init__(self, n_topics=25, alpha=None, beta=0.01, iterations=1000,
                 infer_iterations=100, infer_burn_in=20, min_count=20, min_doc_len=10,
                 random_state=0):
        self.n_topics = n_topics
        self.alpha = alpha
        self.beta = beta
        self.iterations = iterations
        self.infer_iterations = infer_iterations
        self.infer_burn_in = infer_burn_in
        self.min_count = min_count
        self.min_doc_len = min_doc_len
        self.random_state = random_state

    def fit(self, X, y=None, vocabulary=None):
        X = list(X)
        self.vocabulary_ = vocabulary or build_vocab(X, self.min_count, self.min_doc_len)
        docs = [self.vocabulary_.encode(t) for t in X if len(t) >= self.min_doc_len]
        self.model_ = train_lda(
            docs, self.vocabulary_, self.n_topics, self.alpha, self.beta, self.iterations,
            self.random_state,
        )
        self.phi_ = self.model_.phi
        self.log_likelihood_ = self.model_.log_likelihood
        return self

    def infer(self, X):
        check_is_fitted(self, "model_")
        docs = [self.vocabulary_.encode(t) for t in X]
        return infer_topics_many(
            self.model_, docs, self.infer_iterations, self.infer_burn_in, self.random_state
        )

    def transform(self, X):
        weights, flagged = self.infer(X)
        if flagged.any():
            logger.warning("%d documents had no in-vocabulary tokens", int(flagged.sum()))
        return weights

    def get_feature_names_out(self, input_features=None):
        return np.array([f"topic_{k:02d}" for k in range(self.n_topics)], dtype=object)

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.input_tags.two_d_array = False
        tags.input_tags.string = True
        tags.non_deterministic = False
        return tags


# ---------------------------------------------------------------------------
# serialization


def save_topic_model(model, path):
    """Write ``model`` as an ``.npz`` archive with little-endian arrays."""
    voc = model.vocabulary
    np.savez(
        path,
        format_version=np.array(FORMAT_VERSION, dtype="<i8"),
        kind=np.array("lda"),
        n_topics=np.array(model.n_topics, dtype="<i8"),
        alpha=np.array(model.alpha, dtype="<f8"),
        beta=np.array(model.beta, dtype="<f8"),
        iterations=np.array(model.iterations, dtype="<i8"),
        seed=np.array(model.seed, dtype="<i8"),
        terms=np.array(voc.terms, dtype=str),
        corpus_freq=voc.corpus_freq.astype("<i8"),
        doc_freq=voc.doc_freq.astype("<i8"),
        min_count=np.array(voc.min_count, dtype="<i8"),
        min_doc_len=np.array(voc.min_doc_len, dtype="<i8"),
        phi=model.phi.astype("<f8"),
        log_likelihood=model.log_likelihood.astype("<f8"),
    )


def load_topic_model(path):
    with np.load(path, allow_pickle=False) as data:
        if str(data["kind"]) != "lda" or int(data["format_version"]) != FORMAT_VERSION:
            raise ValueError(f"{path} is not a version-{FORMAT_VERSION} LDA model")
        voc = Vocabulary(
            terms=[str(t) for t in data["terms"]],
            corpus_freq=data["corpus_freq"].astype(np.int64),
            doc_freq=data["doc_freq"].astype(np.int64),
            min_count=int(data["min_count"]),
            min_doc_len=int(data["min_doc_len"]),
        )
        return TopicModel(
            n_topics=int(data["n_topics"]), phi=data["phi"].astype(np.float64),
            alpha=float(data["alpha"]), beta=float(data["beta"]), vocabulary=voc,
            log_likelihood=data["log_likelihood"].astype(np.float64),
            iterations=int(data["iterations"]), seed=int(data["seed"]),
        )
