import csv
import json

import numpy as np
import pytest

from notewatch import __version__
from notewatch.classifiers import load_classifier
from notewatch.cli import ValidationError, main, read_config

SMOKE_CONFIG = """\
# two small runs so a kappa comparison is produced
data_dir = {data}
representation = lda, embeddings
use_structured = true
classifier = forest
n_estimators = 20
n_topics = 4
lda_iterations = 40
vector_size = 8
pv_epochs = 2
grid.min_samples_leaf = 5, 10
"""


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["synth", "--seed", "7", "--n-periods", "200", "--n-patients", "120",
                 "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def evaluated(synth_dir, tmp_path_factory):
    root = tmp_path_factory.mktemp("eval")
    cfg = root / "run.cfg"
    cfg.write_text(SMOKE_CONFIG.format(data=synth_dir))
    out = root / "results"
    assert main(["evaluate", "--config", str(cfg), "--out", str(out)]) == 0
    return out


def test_no_arguments_is_usage_error(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--out", "x", "--bogus"])
    assert exc.value.code == 1
    assert "usage" in capsys.readouterr().err


def test_synth_manifest(synth_dir):
    manifest = json.loads((synth_dir / "manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["command"] == "synth"
    assert manifest["versions"]["notewatch"] == __version__
    assert manifest["realized"]["n_periods"] == 200
    assert manifest["wall_time_s"] >= 0
    assert (synth_dir / "notes.jsonl").exists()


def test_evaluate_writes_summary(evaluated):
    rows = read_csv(evaluated / "summary.csv")
    lda = [r for r in rows[1:] if r[0] == "lda+struct/forest"]
    assert [r[1] for r in lda] == ["0", "1", "2", "3", "4", "mean"]
    per_run = read_csv(evaluated / "lda_struct-forest" / "summary.csv")
    assert len(per_run) == 1 + 5 + 1
    assert (evaluated / "kappa_sweep.csv").exists()
    assert len(read_csv(evaluated / "kappa_sweep.csv")) == 201


def test_evaluate_manifest_is_complete(evaluated, synth_dir):
    manifest = json.loads((evaluated / "manifest.json").read_text())
    assert manifest["seed"] == 0
    assert manifest["config"]["representation"] == "lda, embeddings"
    assert len(manifest["resources"]["stopwords_sha256"]) == 64
    assert str(synth_dir / "notes.jsonl") in manifest["inputs"]
    assert manifest["runs"] == ["lda+struct/forest", "embeddings+struct/forest"]


def test_report_renders_svgs(evaluated, tmp_path):
    assert main(["report", "--in", str(evaluated), "--out", str(tmp_path)]) == 0
    names = {p.name for p in tmp_path.glob("*.svg")}
    assert {"kappa_sweep.svg", "hist_num_words.svg", "hist_age.svg"} <= names
    assert sum(n.startswith("pr_curve_") for n in names) == 2
    assert (tmp_path / "manifest.json").exists()


def test_compare_runs(evaluated, tmp_path):
    a = evaluated / "lda_struct-forest"
    assert main(["compare", "--a", str(a), "--b", str(a), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "kappa_folds.csv")
    assert [float(r[3]) for r in rows[1:6]] == [1.0] * 5


def test_seed_environment_override(synth_dir, tmp_path, monkeypatch):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(f"data_dir = {synth_dir}\nrepresentation = none\nseed = 3\n"
                   "n_estimators = 5\ngrid.min_samples_leaf = 10\n")
    monkeypatch.setenv("NOTEWATCH_SEED", "11")
    assert main(["evaluate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert json.loads((tmp_path / "o" / "manifest.json").read_text())["seed"] == 11
    monkeypatch.setenv("NOTEWATCH_SEED", "eleven")
    assert main(["evaluate", "--config", str(cfg), "--out", str(tmp_path / "p")]) == 1


def test_same_config_reproduces_bit_exactly(synth_dir, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(f"data_dir = {synth_dir}\nrepresentation = none\nn_estimators = 10\n"
                   "grid.min_samples_leaf = 5, 10\n")
    for name in ("a", "b"):
        assert main(["evaluate", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
    run = "none_struct-forest"
    for f in ("summary.csv", "fold_scores.csv", "selected_params.csv"):
        assert (tmp_path / "a" / run / f).read_bytes() == (tmp_path / "b" / run / f).read_bytes()


def test_ingest_normalize_and_train(synth_dir, tmp_path):
    assert main(["ingest", "--data", str(synth_dir), "--out", str(tmp_path / "ds")]) == 0
    dataset = tmp_path / "ds" / "dataset.jsonl"
    describe = json.loads((tmp_path / "ds" / "describe.json").read_text())
    assert describe["n_periods"] == sum(1 for _ in dataset.open())

    assert main(["normalize", "--in", str(dataset), "--out", str(tmp_path / "tok")]) == 0
    tokens = tmp_path / "tok" / "tokens.jsonl"
    first = json.loads(tokens.open().readline())
    assert first["doc_id"].startswith("A") and first["tokens"]

    assert main(["train-lda", "--corpus", str(tokens), "--k-candidates", "3,5", "--iters", "30",
                 "--out", str(tmp_path / "lda")]) == 0
    assert len(read_csv(tmp_path / "lda" / "coherence.csv")) == 3
    k = json.loads((tmp_path / "lda" / "manifest.json").read_text())["selected_k"]
    assert len(read_csv(tmp_path / "lda" / "topics.csv")) == k + 1

    assert main(["train-embeddings", "--corpus", str(tokens), "--dim", "8", "--epochs", "2",
                 "--out", str(tmp_path / "pv")]) == 0
    assert len(read_csv(tmp_path / "pv" / "loss_trace.csv")) == 3

    assert main(["train-classifier", "--dataset", str(dataset), "--kind", "forest",
                 "--features", "lda+struct", "--lda-model", str(tmp_path / "lda" / "lda.npz"),
                 "--param", "n_estimators=15", "--out", str(tmp_path / "clf")]) == 0
    model, names = load_classifier(tmp_path / "clf" / "classifier.npz")
    assert names[0] == "topic_00" and "age_admission" in names
    importance = read_csv(tmp_path / "clf" / "importance.csv")
    assert abs(sum(float(r[2]) for r in importance[1:]) - 1.0) < 1e-9

    assert main(["train-classifier", "--dataset", str(dataset), "--kind", "svm",
                 "--features", "emb+struct", "--pv-model", str(tmp_path / "pv" / "pv.npz"),
                 "--param", "svc__C=1", "--out", str(tmp_path / "svm")]) == 0
    svm, _ = load_classifier(tmp_path / "svm" / "classifier.npz")
    assert not (tmp_path / "svm" / "importance.csv").exists()
    assert np.isfinite(svm.steps[-1][1].dual_coef_).all()


def test_validation_errors_exit_1(tmp_path, synth_dir):
    assert main(["evaluate", "--config", str(tmp_path / "missing.cfg")]) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text(f"data_dir = {synth_dir}\nflavour = vanilla\n")
    assert main(["evaluate", "--config", str(bad)]) == 1
    bad.write_text(f"data_dir = {synth_dir}\nrepresentation = bert\n")
    assert main(["evaluate", "--config", str(bad)]) == 1
    assert main(["synth", "--association", "2", "--out", str(tmp_path / "s")]) == 1
    assert main(["train-classifier", "--dataset", str(tmp_path / "none.jsonl"), "--kind",
                 "forest", "--features", "lda", "--out", str(tmp_path / "c")]) == 1


def test_runtime_failure_exits_2(tmp_path):
    tokens = tmp_path / "t.jsonl"
    tokens.write_text('{"doc_id": "a", "tokens": ["x"]}\n')
    # a one-token corpus passes argument checks but cannot be trained on
    assert main(["train-embeddings", "--corpus", str(tokens), "--min-count", "1",
                 "--out", str(tmp_path / "pv")]) == 2


def test_read_config(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("# comment\na = 1  # trailing\ngrid.C = 0.1, 1\n\n")
    assert read_config(path) == {"a": "1", "grid": {"C": [0.1, 1]}}
    path.write_text("no equals sign\n")
    with pytest.raises(ValidationError):
        read_config(path)
