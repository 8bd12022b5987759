"""Text normalization for Dutch clinical notes.

The pipeline is fixed: lowercase, fold diacritics, replace non-alphanumeric
characters by spaces, split on whitespace, drop stopwords, stem, drop "."
tokens.  The last step cannot fire after the non-alphanumeric replacement; it
is kept so the step list stays complete.
"""

import hashlib
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from sklearn.base import BaseEstimator, TransformerMixin

from .snowball import stem

_NON_ALNUM = re.compile(r"[^a-z0-9]+")


def _read_resource(name):
    return resources.files("notewatch.resources").joinpath(name).read_text(encoding="utf-8")


def _load_diacritic_table():
    table = {}
    for line in _read_resource("diacritics.tsv").splitlines():
        if not line or line.startswith("#"):
            continue
        code, _, base = line.split("\t")
        table[int(code, 16)] = base
    return table


_DIACRITICS = _load_diacritic_table()


def fold_diacritics(text):
    """Map accented Latin-1/Latin Extended-A letters to their base letter.

    >>> fold_diacritics("Patiënt")
    'Patient'
    """
    return text.translate(_DIACRITICS)


@dataclass(frozen=True)
class NormalizationResources:
    stopwords: frozenset
    source: str = "builtin:dutch_stopwords.txt"
    checksum: str = ""

    def __post_init__(self):
        if not self.stopwords:
            raise ValueError("stopword set is empty")
        bad = [w for w in self.stopwords if w != fold_diacritics(w.lower())]
        if bad:
            raise ValueError(f"stopwords must be lowercase and diacritic-free: {sorted(bad)[:5]}")

    @classmethod
    def load(cls, stopwords_path=None):
        """Load the stopword list; the packaged snapshot is used by default."""
        if stopwords_path is None:
            raw = _read_resource("dutch_stopwords.txt")
            source = "builtin:dutch_stopwords.txt"
        else:
            raw = Path(stopwords_path).read_text(encoding="utf-8")
            source = str(stopwords_path)
        words = frozenset(
            fold_diacritics(line.strip().lower()) for line in raw.splitlines() if line.strip()
        )
        checksum = hashlib.sha256(raw.encode("utf-8")).hexdigest()
        return cls(stopwords=words, source=source, checksum=checksum)


@dataclass
class TokenDoc:
    doc_id: str
    tokens: list = field(default_factory=list)


_DEFAULT_RESOURCES = None


def default_resources():
    global _DEFAULT_RESOURCES
    if _DEFAULT_RESOURCES is None:
        _DEFAULT_RESOURCES = NormalizationResources.load()
    return _DEFAULT_RESOURCES


def tokenize(text):
    """Steps up to and including whitespace tokenization."""
    text = fold_diacritics(text.lower())
    return _NON_ALNUM.sub(" ", text).split()


def normalize_tokens(text, resources=None):
    resources = resources or default_resources()
    stop = resources.stopwords
    tokens = [stem(tok) for tok in tokenize(text) if tok not in stop]
    return [tok for tok in tokens if tok != "."]


def normalize(text, resources=None, doc_id=""):
    """Normalize raw note text into a :class:`TokenDoc`."""
    return TokenDoc(doc_id=doc_id, tokens=normalize_tokens(text, resources))


class TextNormalizer(TransformerMixin, BaseEstimator):
    """Stateless transformer turning raw strings into token lists.

    Parameters
    ----------
    stopwords_path : str or None
        Stopword file (one word per line).  ``None`` uses the packaged list.
    """

    def __init__(self, stopwords_path=None):
        self.stopwords_path = stopwords_path

    def fit(self, X, y=None):
        self.resources_ = NormalizationResources.load(self.stopwords_path)
        return self

    def transform(self, X):
        resources = getattr(self, "resources_", None) or NormalizationResources.load(
            self.stopwords_path
        )
        return [normalize_tokens(text, resources) for text in X]

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.input_tags.string = True
        tags.input_tags.two_d_array = False
        tags.requires_fit = False
        return tags
