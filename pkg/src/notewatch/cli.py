"""``notewatch`` command line.

Exit status: 0 on success, 1 for usage or validation errors, 2 when a run
fails after its inputs were accepted.
"""

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
import time
from dataclasses import asdict, fields

import numpy as np

from . import __version__, harness, metrics, plots, synthgen
from .corpus import assemble_periods, filter_short, ingest, read_dataset, write_dataset
from .embeddings import ParagraphVectorConfig, load_pv_model, save_pv_model, train_pv
from .classifiers.forest import feature_importances
from .classifiers.serialize import save_classifier
from .textnorm import NormalizationResources, normalize_tokens
from .topics import (coherence_cv, load_topic_model, save_topic_model, select_topic_count,
                     train_lda)
from .vocab import build_vocab

logger = logging.getLogger("notewatch")

SEED_ENV = "NOTEWATCH_SEED"
FEATURE_SETS = {
    "lda": ("lda", False),
    "emb": ("embeddings", False),
    "emb+struct": ("embeddings", True),
    "lda+struct": ("lda", True),
    "all": ("both", True),
}


class ValidationError(Exception):
    """Bad arguments, configuration or input paths."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# helpers


def _env_seed(default):
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _require_file(path, what):
    if not path or not os.path.isfile(path):
        raise ValidationError(f"{what} not found: {path}")
    return path


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions():
    import numba
    import sklearn
    return {"notewatch": __version__, "python": platform.python_version(),
            "numpy": np.__version__,
            "scikit-learn": sklearn.__version__, "numba": numba.__version__}


def write_manifest(out_dir, command, config, seed, started, inputs=(), resources=None,
                   extra=None):
    """Config echo, seed, library versions, input/resource checksums and wall time."""
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "versions": _versions(),
        "inputs": {p: _sha256(p) for p in inputs if p and os.path.isfile(p)},
        "wall_time_s": round(time.time() - started, 3),
    }
    if resources is not None:
        manifest["resources"] = {"stopwords": resources.source,
                                 "stopwords_sha256": resources.checksum}
    if extra:
        manifest.update(extra)
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _coerce(value):
    low = value.strip().lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null"):
        return None
    for cast in (int, float):
        try:
            return cast(value.strip())
        except ValueError:
            pass
    return value.strip()


def read_config(path):
    """Flat ``key = value`` file; ``#`` starts a comment.

    ``grid.<param> = a, b, c`` keys build the hyperparameter grid.
    """
    _require_file(path, "config file")
    cfg = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key.startswith("grid."):
                cfg.setdefault("grid", {})[key[5:]] = [_coerce(v) for v in value.split(",")]
            else:
                cfg[key] = value
    return cfg


_RUN_KEYS = {f.name for f in fields(harness.PipelineConfig)}
_EVAL_KEYS = {"data_dir", "dataset", "representation_corpus", "stopwords", "out"}


def pipeline_configs(cfg, seed, jobs):
    """One :class:`PipelineConfig` per entry of the (comma-separated) ``representation`` key."""
    unknown = set(cfg) - _RUN_KEYS - _EVAL_KEYS
    if unknown:
        raise ValidationError(f"unknown config key(s): {sorted(unknown)}")
    base = {k: (_coerce(v) if isinstance(v, str) else v) for k, v in cfg.items()
            if k in _RUN_KEYS and k != "representation"}
    base["seed"] = seed
    base["n_jobs"] = jobs
    reps = [r.strip() for r in str(cfg.get("representation", "embeddings")).split(",")]
    out = []
    for rep in reps:
        try:
            pc = harness.PipelineConfig(representation=rep, **base)
            pc.validate()
        except (TypeError, ValueError) as exc:
            raise ValidationError(str(exc)) from None
        out.append(pc)
    return out


def _load_records(data_dir=None, dataset=None):
    """Period records plus the note texts usable as representation corpus."""
    if dataset:
        return read_dataset(_require_file(dataset, "dataset")), None, [dataset]
    paths = [os.path.join(data_dir, f"{n}.jsonl")
             for n in ("notes", "admissions", "incidents", "structured")]
    for p in paths[:3]:
        _require_file(p, "input file")
    structured = paths[3] if os.path.isfile(paths[3]) else None
    ing = ingest(paths[0], paths[1], paths[2], structured)
    if ing.warning_count:
        logger.warning("ingest skipped %d malformed line(s)", ing.warning_count)
    assembled = assemble_periods(ing.notes, ing.admissions, ing.incidents, ing.structured)
    kept, dropped = filter_short(assembled.records)
    logger.info("%d periods kept, %d dropped by the word filter", len(kept), dropped)
    return kept, [n.text for n in ing.notes], [p for p in paths if os.path.isfile(p)]


def _read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _read_token_docs(path):
    _require_file(path, "token corpus")
    return [row["tokens"] for row in _read_jsonl(path)]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args, started):
    seed = args.seed if args.seed is not None else _env_seed(0)
    cfg = synthgen.SynthConfig(scale=args.scale, association=args.association, seed=seed)
    if args.n_periods:
        cfg.n_periods = args.n_periods
    if args.n_patients:
        cfg.n_patients = args.n_patients
    try:
        cfg.validate()
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    os.makedirs(args.out, exist_ok=True)
    data = synthgen.generate(cfg, args.out)
    # the generator's own manifest carries the realized statistics; keep it and add run info
    write_manifest(args.out, "synth", asdict(cfg), seed, started,
                   extra={"realized": data["manifest"]})


def cmd_ingest(args, started):
    os.makedirs(args.out, exist_ok=True)
    records, _, inputs = _load_records(data_dir=args.data)
    write_dataset(os.path.join(args.out, "dataset.jsonl"), records)
    report = synthgen.describe(records)
    with open(os.path.join(args.out, "describe.json"), "w", encoding="utf-8") as fh:
        json.dump(asdict(report), fh, indent=2, sort_keys=True)
    write_manifest(args.out, "ingest", {"data": args.data}, None, started, inputs,
                   extra={"n_records": len(records)})


def cmd_normalize(args, started):
    res = NormalizationResources.load(args.stopwords)
    rows = _read_jsonl(_require_file(args.input, "input"))
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "tokens.jsonl"), "w", encoding="utf-8") as fh:
        for i, row in enumerate(rows):
            doc_id = row.get("period_id") or row.get("note_id") or row.get("doc_id") or str(i)
            text = row.get("period_note", row.get("text", ""))
            fh.write(json.dumps({"doc_id": doc_id, "tokens": normalize_tokens(text, res)},
                                ensure_ascii=False) + "\n")
    write_manifest(args.out, "normalize", {"input": args.input}, None, started, [args.input],
                   resources=res)


def cmd_train_lda(args, started):
    seed = args.seed if args.seed is not None else _env_seed(0)
    docs = _read_token_docs(args.corpus)
    try:
        vocab = build_vocab(docs, args.min_count, args.min_doc_len)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    os.makedirs(args.out, exist_ok=True)
    kept = [d for d in docs if len(d) >= args.min_doc_len]
    bows = [vocab.encode(d) for d in kept]
    k = args.k
    extra = {}
    if args.k_candidates:
        candidates = [int(x) for x in args.k_candidates.split(",")]
        k, scores = select_topic_count(bows, kept, candidates, vocab, iterations=args.iters,
                                       seed=seed)
        _write_csv(os.path.join(args.out, "coherence.csv"), ("k", "coherence"),
                   [(c, repr(float(s))) for c, s in sorted(scores.items())])
        extra["selected_k"] = k
    model = train_lda(bows, vocab, k, iterations=args.iters, seed=seed)
    save_topic_model(model, os.path.join(args.out, "lda.npz"))
    coh = coherence_cv(model, kept)
    _write_csv(os.path.join(args.out, "topics.csv"), ("topic", "coherence", "top_terms"),
               [(t, repr(float(coh.per_topic[t])), " ".join(model.top_terms(t, 10)))
                for t in range(k)])
    write_manifest(args.out, "train-lda", {"k": k, "iters": args.iters, "corpus": args.corpus,
                                           "min_count": args.min_count}, seed, started,
                   [args.corpus], extra={**extra, "coherence_mean": coh.mean})


def cmd_train_embeddings(args, started):
    seed = args.seed if args.seed is not None else _env_seed(0)
    docs = _read_token_docs(args.corpus)
    try:
        cfg = ParagraphVectorConfig(vector_size=args.dim, window=args.window,
                                    min_count=args.min_count, epochs=args.epochs, seed=seed)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    os.makedirs(args.out, exist_ok=True)
    model = train_pv(docs, cfg)
    save_pv_model(model, os.path.join(args.out, "pv.npz"))
    _write_csv(os.path.join(args.out, "loss_trace.csv"), ("epoch", "mean_loss"),
               [(i + 1, repr(float(v))) for i, v in enumerate(model.loss_trace)])
    write_manifest(args.out, "train-embeddings", asdict(cfg), seed, started, [args.corpus])


def cmd_train_classifier(args, started):
    seed = args.seed if args.seed is not None else _env_seed(0)
    representation, use_struct = FEATURE_SETS[args.features]
    records = read_dataset(_require_file(args.dataset, "dataset"))
    params = {}
    for item in args.param or []:
        if "=" not in item:
            raise ValidationError(f"--param expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        params[key.strip()] = _coerce(value)
    config = harness.PipelineConfig(representation=representation, use_structured=use_struct,
                                    classifier=args.kind, seed=seed)
    reps = None
    if representation != "none" and (args.lda_model or args.pv_model):
        lda = load_topic_model(args.lda_model) if args.lda_model else None
        pv = load_pv_model(args.pv_model) if args.pv_model else None
        vocab = (lda or pv).vocabulary
        reps = harness.Representations(vocabulary=vocab, lda=lda, pv=pv)
    model = config.estimator()
    try:
        model.set_params(**params)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    fm = harness.featurize(records, config, reps=reps)
    os.makedirs(args.out, exist_ok=True)
    model.fit(fm.X, fm.labels)
    save_classifier(model, os.path.join(args.out, "classifier.npz"), fm.names)
    if args.kind == "forest":
        report = feature_importances(model, fm.names)
        _write_csv(os.path.join(args.out, "importance.csv"), ("rank", "feature", "importance"),
                   [(i, n, repr(v)) for i, (n, v) in enumerate(report.ranked(), 1)])
    write_manifest(args.out, "train-classifier",
                   {"kind": args.kind, "features": args.features, "params": params}, seed,
                   started, [args.dataset, args.lda_model, args.pv_model])


def cmd_evaluate(args, started):
    cfg = read_config(args.config)
    seed = _env_seed(int(_coerce(cfg.get("seed", "0"))))
    configs = pipeline_configs(cfg, seed, args.jobs)
    if not cfg.get("data_dir") and not cfg.get("dataset"):
        raise ValidationError("config needs data_dir or dataset")
    res = NormalizationResources.load(cfg.get("stopwords"))
    records, note_texts, inputs = _load_records(cfg.get("data_dir"), cfg.get("dataset"))
    if not records:
        raise ValidationError("no admission periods left after filtering")
    args.out = args.out or cfg.get("out") or "results"
    os.makedirs(args.out, exist_ok=True)

    row_tokens = harness.normalize_documents([r.period_note for r in records], res)
    corpus_choice = cfg.get("representation_corpus", "notes")
    if corpus_choice not in ("notes", "periods"):
        raise ValidationError("representation_corpus must be 'notes' or 'periods'")
    corpus_tokens = (harness.normalize_documents(note_texts, res)
                     if corpus_choice == "notes" and note_texts is not None else row_tokens)

    report = synthgen.describe(records)
    with open(os.path.join(args.out, "describe.json"), "w", encoding="utf-8") as fh:
        json.dump(asdict(report), fh, indent=2, sort_keys=True)

    runs, rows = [], []
    for pc in configs:
        label = harness.config_label(pc)
        if pc.representation_per_fold:
            run = harness.nested_cv(records, pc)
        else:
            fm = harness.featurize(records, pc, corpus_tokens, row_tokens)
            run = harness.nested_cv_features(fm, pc)
        harness.assert_grouping(run)
        harness.write_run(run, os.path.join(args.out, _dirname(label)), label)
        rows += run.summary.rows(label)
        runs.append((label, run))
    metrics.write_summary_csv(os.path.join(args.out, "summary.csv"), rows)
    extra = {"runs": [lbl for lbl, _ in runs]}
    if len(runs) >= 2:
        kap = harness.compare_classifiers(runs[0][1], runs[1][1])
        harness.write_kappa(kap, args.out)
        extra["kappa"] = {"a": runs[0][0], "b": runs[1][0], "mean": kap.mean, "std": kap.std}
    write_manifest(args.out, "evaluate", {k: v for k, v in cfg.items()}, seed, started,
                   inputs + [args.config], resources=res, extra=extra)


def _dirname(label):
    return label.replace("/", "-").replace("+", "_")


def cmd_compare(args, started):
    for d in (args.a, args.b):
        _require_file(os.path.join(d, "fold_scores.csv"), "fold scores")
    run_a = harness.load_scored_run(args.a)
    run_b = harness.load_scored_run(args.b)
    try:
        rep = harness.compare_classifiers(run_a, run_b)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    os.makedirs(args.out, exist_ok=True)
    harness.write_kappa(rep, args.out)
    write_manifest(args.out, "compare", {"a": args.a, "b": args.b}, None, started,
                   [os.path.join(args.a, "fold_scores.csv"),
                    os.path.join(args.b, "fold_scores.csv")],
                   extra={"kappa_mean": rep.mean, "kappa_std": rep.std})


def _read_curve(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [float(r["x"]) for r in rows], [float(r["y"]) for r in rows]


def _find_run_dirs(root):
    found = []
    for dirpath, _, files in sorted(os.walk(root)):
        if "pr_curve_fold0.csv" in files:
            found.append(dirpath)
    return found


def cmd_report(args, started):
    if not os.path.isdir(args.input):
        raise ValidationError(f"not a directory: {args.input}")
    run_dirs = _find_run_dirs(args.input)
    if not run_dirs:
        raise ValidationError(f"no evaluate output under {args.input}")
    os.makedirs(args.out, exist_ok=True)
    written = []
    for rd in run_dirs:
        series = []
        k = 0
        while os.path.isfile(os.path.join(rd, f"pr_curve_fold{k}.csv")):
            xs, ys = _read_curve(os.path.join(rd, f"pr_curve_fold{k}.csv"))
            series.append((f"fold {k}", xs, ys))
            k += 1
        name = os.path.relpath(rd, args.input).replace(os.sep, "_")
        name = "run" if name == "." else name
        path = os.path.join(args.out, f"pr_curve_{name}.svg")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(plots.line_plot(series, f"Precision-recall ({name})", "Recall", "Precision",
                                     xlim=(0.0, 1.0), ylim=(0.0, 1.0), step=True))
        written.append(path)
    kappa_dir = args.kappa or args.input
    kpath = os.path.join(kappa_dir, "kappa_sweep.csv")
    if os.path.isfile(kpath):
        with open(kpath, newline="") as fh:
            rows = list(csv.DictReader(fh))
        xs = [float(r["threshold"]) for r in rows]
        ys = [float(r["kappa"]) for r in rows]
        path = os.path.join(args.out, "kappa_sweep.svg")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(plots.line_plot([("kappa", xs, ys)], "Inter-classifier agreement",
                                     "Threshold", "Cohen's kappa", xlim=(0.0, 1.0)))
        written.append(path)
    else:
        logger.warning("no kappa_sweep.csv found; kappa plot skipped")
    dpath = os.path.join(args.input, "describe.json")
    if os.path.isfile(dpath):
        with open(dpath, encoding="utf-8") as fh:
            desc = json.load(fh)
        for key, title, xlabel, fname in (
                ("words_hist", "Words per period note", "num_words", "hist_num_words.svg"),
                ("age_hist", "Age at admission", "age_admission", "hist_age.svg")):
            panels = [(cls, desc[key][cls]["edges"], desc[key][cls]["counts"])
                      for cls in ("positive", "negative") if cls in desc[key]]
            path = os.path.join(args.out, fname)
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(plots.histogram_plot(panels, title, xlabel))
            written.append(path)
    else:
        logger.warning("no describe.json found; histograms skipped")
    write_manifest(args.out, "report", {"input": args.input, "kappa": args.kappa}, None,
                   started, extra={"files": [os.path.basename(p) for p in written]})


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    p = _Parser(prog="notewatch", description="Violence-risk note classification pipeline.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a synthetic corpus")
    s.add_argument("--scale", type=float, default=0.25)
    s.add_argument("--association", type=float, default=1.0)
    s.add_argument("--n-periods", type=int)
    s.add_argument("--n-patients", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("ingest", help="assemble and filter admission periods")
    s.add_argument("--data", required=True, help="directory with the corpus JSONL files")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("normalize", help="normalize texts into token documents")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--stopwords")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_normalize)

    s = sub.add_parser("train-lda", help="train an LDA topic model")
    s.add_argument("--corpus", required=True, help="tokens.jsonl from 'normalize'")
    s.add_argument("--k", type=int, default=25)
    s.add_argument("--k-candidates", help="comma-separated K values; best coherence wins")
    s.add_argument("--iters", type=int, default=1000)
    s.add_argument("--min-count", type=int, default=20)
    s.add_argument("--min-doc-len", type=int, default=10)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_lda)

    s = sub.add_parser("train-embeddings", help="train paragraph vectors")
    s.add_argument("--corpus", required=True)
    s.add_argument("--dim", type=int, default=300)
    s.add_argument("--window", type=int, default=2)
    s.add_argument("--epochs", type=int, default=20)
    s.add_argument("--min-count", type=int, default=20)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_embeddings)

    s = sub.add_parser("train-classifier", help="fit one classifier on a dataset")
    s.add_argument("--dataset", required=True)
    s.add_argument("--kind", choices=("forest", "svm"), required=True)
    s.add_argument("--features", choices=sorted(FEATURE_SETS), required=True)
    s.add_argument("--lda-model")
    s.add_argument("--pv-model")
    s.add_argument("--param", action="append", help="hyperparameter as key=value")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_classifier)

    s = sub.add_parser("evaluate", help="nested cross-validation from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--jobs", type=int, default=1, help="worker cap for grid search")
    s.add_argument("--out", help="output directory (default: config 'out', else results/)")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("compare", help="kappa agreement between two evaluate runs")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("report", help="render SVG plots from evaluate output")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--kappa", help="directory holding kappa_sweep.csv (default: --in)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.time()
    try:
        args.func(args, started)
    except ValidationError as exc:
        print(f"notewatch {args.command}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - every failure maps to exit 2
        logger.debug("run failed", exc_info=True)
        print(f"notewatch {args.command}: failed: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
