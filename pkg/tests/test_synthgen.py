import filecmp

import numpy as np
import pytest
from scipy import stats

from notewatch import synthgen
from notewatch.corpus import assemble_periods, filter_short, ingest
from notewatch.synthgen import SynthConfig, describe


@pytest.fixture(scope="module")
def default_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    data = synthgen.generate(SynthConfig(seed=0), out)
    result = ingest(out / "notes.jsonl", out / "admissions.jsonl", out / "incidents.jsonl",
                    out / "structured.jsonl")
    records = assemble_periods(result.notes, result.admissions, result.incidents,
                               result.structured).records
    return data, result, records


def test_same_seed_gives_identical_files(tmp_path):
    cfg = SynthConfig(scale=0.02, seed=5)
    synthgen.generate(cfg, tmp_path / "a")
    synthgen.generate(cfg, tmp_path / "b")
    names = [f"{n}.jsonl" for n in synthgen.CORPUS_FILES] + ["manifest.json"]
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", names,
                                               shallow=False)
    assert sorted(match) == sorted(names) and not mismatch and not errors


def test_different_seeds_differ():
    a = synthgen.generate(SynthConfig(scale=0.02, seed=1))
    b = synthgen.generate(SynthConfig(scale=0.02, seed=2))
    assert a["notes"][0]["text"] != b["notes"][0]["text"]


def test_default_size_and_prevalence(default_corpus):
    data, _, records = default_corpus
    assert data["manifest"]["n_periods"] == 1070
    prevalence = np.mean([r.label for r in records])
    assert abs(prevalence - 0.0993) <= 0.01
    assert [r.label for r in records] == [t["label"] for t in data["truth"]]


def test_generated_data_ingests_without_warnings(default_corpus):
    _, result, _ = default_corpus
    assert result.warning_count == 0


def test_most_periods_survive_the_length_filter(default_corpus):
    _, _, records = default_corpus
    kept, _ = filter_short(records)
    assert len(kept) / len(records) >= 0.95


def test_planted_skews(default_corpus):
    _, _, records = default_corpus
    report = describe(records)
    assert report.mean_age["positive"] < report.mean_age["negative"]
    assert report.mean_words["positive"] > report.mean_words["negative"]


def test_planted_topic_correlates_with_label(default_corpus):
    data, _, _ = default_corpus
    labels = [t["label"] for t in data["truth"]]
    weight = [t["planted_topic_weight"] for t in data["truth"]]
    r, p = stats.pointbiserialr(labels, weight)
    assert r > 0 and p < 0.01


def test_null_association_removes_the_skews():
    data = synthgen.generate(SynthConfig(scale=0.25, seed=0, association=0.0))
    labels = [t["label"] for t in data["truth"]]
    weight = [t["planted_topic_weight"] for t in data["truth"]]
    assert stats.pointbiserialr(labels, weight)[1] > 0.01


def test_positive_incidents_fall_in_the_label_window():
    data = synthgen.generate(SynthConfig(scale=0.05, seed=4))
    assert sum(t["label"] for t in data["truth"]) == data["manifest"]["n_positive"]
    assert data["manifest"]["n_incidents"] >= data["manifest"]["n_positive"]


def test_describe_histograms(default_corpus):
    _, _, records = default_corpus
    report = describe(records)
    assert report.n_periods == len(records)
    assert report.n_positive + sum(report.age_hist["negative"].counts) == len(records)
    assert sum(report.words_hist["positive"].counts) == report.n_positive
    assert len(report.age_hist["positive"].edges) == 21


def test_describe_empty_dataset():
    report = describe([])
    assert report.n_periods == 0 and report.prevalence == 0.0
    assert report.mean_age == {"positive": 0.0, "negative": 0.0}


@pytest.mark.parametrize("kwargs", [
    {"positive_fraction": 0.0}, {"positive_fraction": 1.0}, {"association": 1.5},
    {"vocab_size": 30, "n_true_topics": 10}, {"n_true_topics": 0},
])
def test_infeasible_configs_are_rejected(kwargs):
    with pytest.raises(ValueError):
        synthgen.generate(SynthConfig(scale=0.01, **kwargs))


def test_sizes_scale():
    assert SynthConfig(scale=1.0).sizes() == (4280, 2892)
    assert SynthConfig(n_periods=10, n_patients=50).sizes() == (10, 10)
