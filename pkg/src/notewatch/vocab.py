"""Vocabulary shared by the topic model and the paragraph-vector model."""

from collections import Counter
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Vocabulary:
    """Dense id <-> term bijection with frequency statistics.

    Ids are ordered by descending corpus frequency, ties broken by the term
    itself, so the same corpus always produces the same ids.
    """

    terms: list
    corpus_freq: np.ndarray
    doc_freq: np.ndarray
    min_count: int = 1
    min_doc_len: int = 0
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.terms)}
        if len(self.index) != len(self.terms):
            raise ValueError("vocabulary terms must be unique")

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term):
        return term in self.index

    def encode(self, tokens):
        """Token ids in document order, out-of-vocabulary tokens dropped."""
        index = self.index
        return np.array([index[t] for t in tokens if t in index], dtype=np.int32)

    def doc2bow(self, tokens):
        """Sorted ``(term_id, count)`` pairs."""
        counts = Counter(self.index[t] for t in tokens if t in self.index)
        return sorted(counts.items())


def build_vocab(token_docs, min_count=20, min_doc_len=10):
    """Count terms over documents with at least ``min_doc_len`` tokens.

    Terms whose corpus frequency is below ``min_count`` are dropped.
    Raises ``ValueError`` when nothing survives.
    """
    freq = Counter()
    dfreq = Counter()
    for tokens in token_docs:
        if len(tokens) < min_doc_len:
            continue
        freq.update(tokens)
        dfreq.update(set(tokens))
    kept = sorted((t for t, c in freq.items() if c >= min_count), key=lambda t: (-freq[t], t))
    if not kept:
        raise ValueError(
            f"empty vocabulary (min_count={min_count}, min_doc_len={min_doc_len})"
        )
    return Vocabulary(
        terms=kept,
        corpus_freq=np.array([freq[t] for t in kept], dtype=np.int64),
        doc_freq=np.array([dfreq[t] for t in kept], dtype=np.int64),
        min_count=min_count,
        min_doc_len=min_doc_len,
    )


def flatten(vocab, token_docs):
    """Encode documents as one id array plus ``offsets`` (length n_docs + 1)."""
    encoded = [vocab.encode(tokens) for tokens in token_docs]
    offsets = np.zeros(len(encoded) + 1, dtype=np.int64)
    if encoded:
        offsets[1:] = np.cumsum([len(e) for e in encoded])
    ids = np.concatenate(encoded).astype(np.int32) if encoded else np.zeros(0, np.int32)
    return ids, offsets
