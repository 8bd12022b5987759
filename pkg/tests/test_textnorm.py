import json
import unicodedata
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from notewatch.snowball import stem
from notewatch.textnorm import (NormalizationResources, TextNormalizer, default_resources,
                                fold_diacritics, normalize, normalize_tokens, tokenize)

DATA = Path(__file__).parent / "data"
STEM_PAIRS = [line.split("\t") for line in
              (DATA / "dutch_stems.tsv").read_text(encoding="utf-8").splitlines()]
GOLDEN = [json.loads(line) for line in
          (DATA / "normalize_golden.jsonl").read_text(encoding="utf-8").splitlines()]

dutchish = st.text(alphabet="abcdeëfghijklmnoöpqrstuüvwxyzéè .,!?;:-'()0123456789\t\n",
                   max_size=200)


# --- stemmer -------------------------------------------------------------------


def test_stem_examples():
    assert stem("de") == "de"
    assert stem("") == ""
    assert stem("patient") == "patient"


def test_stem_golden_file():
    assert len(STEM_PAIRS) == 1000
    mismatches = [(w, s, stem(w)) for w, s in STEM_PAIRS if stem(w) != s]
    assert mismatches == []


def test_stem_matches_reference_implementation_live():
    snowballstemmer = pytest.importorskip("snowballstemmer")
    ref = snowballstemmer.stemmer("dutch_porter")
    words = [w for w, _ in STEM_PAIRS]
    assert [stem(w) for w in words] == ref.stemWords(words)


def test_stem_matches_nltk_on_golden_words():
    nltk_snowball = pytest.importorskip("nltk.stem.snowball")
    ref = nltk_snowball.DutchStemmer()
    assert [stem(w) for w, _ in STEM_PAIRS] == [ref.stem(w) for w, _ in STEM_PAIRS]


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet="abcdefghijklmnopqrstuvwxyzèéëïöü", max_size=20))
def test_stem_agrees_with_reference_on_arbitrary_strings(word):
    snowballstemmer = pytest.importorskip("snowballstemmer")
    assert stem(word) == snowballstemmer.stemmer("dutch_porter").stemWord(word)


# --- diacritics ----------------------------------------------------------------


def test_fold_examples():
    assert fold_diacritics("ë") == "e"
    assert fold_diacritics("abc123") == "abc123"


def test_diacritic_table_matches_unicode_decomposition():
    table = (Path(__file__).resolve().parents[1] / "src" / "notewatch" / "resources" /
             "diacritics.tsv").read_text(encoding="utf-8").splitlines()
    rows = [line.split("\t") for line in table if line and not line.startswith("#")]
    assert rows
    for code, letter, base in rows:
        assert chr(int(code, 16)) == letter
        decomposed = unicodedata.normalize("NFD", letter)
        expected = "".join(c for c in decomposed if not unicodedata.combining(c))
        assert base == expected, letter
        assert fold_diacritics(letter) == base


def test_every_decomposable_latin_letter_is_folded():
    for cp in range(0xC0, 0x180):
        ch = chr(cp)
        decomposed = unicodedata.normalize("NFD", ch)
        if len(decomposed) > 1 and unicodedata.combining(decomposed[1]):
            assert fold_diacritics(ch) == decomposed[0], hex(cp)


# --- pipeline ------------------------------------------------------------------


def test_normalize_examples():
    assert normalize("").tokens == []
    assert normalize("Patiënt!!").tokens == [stem("patient")]
    doc = normalize("boos,verward", doc_id="n1")
    assert doc.doc_id == "n1" and len(doc.tokens) == 2


def test_golden_sentences():
    assert len(GOLDEN) == 20
    for row in GOLDEN:
        assert normalize_tokens(row["text"]) == row["tokens"], row["text"]


def test_golden_sentences_against_live_reference():
    snowballstemmer = pytest.importorskip("snowballstemmer")
    from reference_pipeline import load_stopwords, reference_normalize
    ref, stop = snowballstemmer.stemmer("dutch_porter"), load_stopwords()
    for row in GOLDEN:
        assert normalize_tokens(row["text"]) == reference_normalize(row["text"], ref, stop)


def test_stopwords_are_removed_before_stemming():
    # "hebben" is a stopword; its stem "hebb" is not, so the swapped order would keep it
    stop = default_resources().stopwords
    assert "hebben" in stop and stem("hebben") not in stop
    assert normalize_tokens("hebben") == []
    swapped = [t for t in (stem(w) for w in tokenize("hebben")) if t not in stop]
    assert swapped == ["hebb"]


@settings(max_examples=300, deadline=None)
@given(dutchish)
def test_output_has_no_stopwords_or_symbols(text):
    stop = default_resources().stopwords
    for tok in normalize_tokens(text):
        assert tok not in stop
        assert tok.isalnum() and tok.isascii()


@settings(max_examples=300, deadline=None)
@given(dutchish)
def test_second_pass_only_restems(text):
    # Snowball stemming is not idempotent, so a second pass can shorten tokens
    # further; every other step is a no-op on the pipeline's own output.
    stop = default_resources().stopwords
    first = normalize_tokens(text)
    again = normalize_tokens(" ".join(first))
    assert again == [stem(t) for t in first if t not in stop]
    assert tokenize(" ".join(first)) == first


def test_full_pipeline_is_not_idempotent():
    once = normalize_tokens("aanbiedenelijk")
    assert once == ["aanbieden"]
    assert normalize_tokens(" ".join(once)) == ["aanbied"]


def test_resources_load_and_checksum(tmp_path):
    res = NormalizationResources.load()
    assert len(res.stopwords) == 101 and len(res.checksum) == 64
    custom = tmp_path / "stop.txt"
    custom.write_text("Één\nde\n", encoding="utf-8")
    loaded = NormalizationResources.load(custom)
    assert loaded.stopwords == {"een", "de"} and loaded.source == str(custom)
    assert normalize_tokens("een de kat", loaded) == [stem("kat")]
    with pytest.raises(ValueError):
        NormalizationResources(stopwords=frozenset())


def test_transformer_interface():
    norm = TextNormalizer().fit(["x"])
    assert norm.transform(["Patiënt!!", ""]) == [[stem("patient")], []]
    assert TextNormalizer().get_params() == {"stopwords_path": None}
