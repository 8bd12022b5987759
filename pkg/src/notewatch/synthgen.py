"""Seeded synthetic clinical-note corpus with planted outcome signal.

Notes are drawn from an LDA generative process over a pronounceable
gibberish vocabulary.  Topic 0 plays the role of the violence topic: its
weight is raised in positive periods.  Positive periods also get younger
patients and longer notes.  ``association`` scales all three planted
signals at once, so ``association=0`` yields a dataset where nothing
predicts the label.
"""

import json
import math
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .corpus import format_timestamp
from .snowball import stem
from .textnorm import default_resources

COHORT_PERIODS = 4280
COHORT_PATIENTS = 2892
COHORT_PREVALENCE = 425 / 4280

_ONSETS = ("b", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z",
           "br", "dr", "gr", "kl", "kr", "pr", "sl", "sp", "st", "tr", "vl", "zw")
_VOWELS = ("a", "e", "i", "o", "u", "aa", "ee", "oo", "oe", "ie", "ij", "ui", "ou", "eu")
_CODAS = ("k", "l", "m", "n", "p", "r", "s", "t", "ft", "ld", "nd", "nk", "rm", "rp", "rt", "st")
_SUFFIXES = ("en", "heid", "ing", "lijk", "s", "je", "baar", "ig")
_ACCENTS = {"e": "ë", "i": "ï", "o": "ö", "u": "ü", "a": "á"}
_EPOCH = datetime(2014, 1, 1, tzinfo=timezone.utc)


@dataclass
class SynthConfig:
    """Shape of the synthetic dataset.

    ``scale`` multiplies the reference sizes (4280 periods, 2892 patients)
    unless ``n_periods``/``n_patients`` are given explicitly.
    """

    scale: float = 0.25
    n_periods: int | None = None
    n_patients: int | None = None
    positive_fraction: float = COHORT_PREVALENCE
    vocab_size: int = 1500
    n_true_topics: int = 10
    doc_topic_alpha: float = 0.2
    topic_boost: float = 0.35
    association: float = 1.0
    age_mean_negative: float = 42.0
    age_mean_positive: float = 33.0
    age_sd: float = 13.0
    words_mean_negative: float = 330.0
    words_mean_positive: float = 450.0
    words_sigma: float = 0.45
    stopword_rate: float = 0.3
    suffix_rate: float = 0.15
    diacritic_rate: float = 0.03
    missing_age_rate: float = 0.01
    background_notes: int = 1
    seed: int = 0

    def sizes(self):
        n_periods = self.n_periods or max(1, round(COHORT_PERIODS * self.scale))
        n_patients = self.n_patients or max(1, round(COHORT_PATIENTS * self.scale))
        return n_periods, min(n_patients, n_periods)

    def validate(self):
        if not 0.0 < self.positive_fraction < 1.0:
            raise ValueError("positive_fraction must be in (0, 1)")
        if not 0.0 <= self.association <= 1.0:
            raise ValueError("association must be in [0, 1]")
        if self.n_true_topics < 1:
            raise ValueError("n_true_topics must be >= 1")
        if self.vocab_size < 4 * self.n_true_topics:
            raise ValueError("vocab_size too small for the number of topics (need >= 4 per topic)")
        n_periods, n_patients = self.sizes()
        if n_patients < 1 or n_periods < 1:
            raise ValueError("need at least one patient and period")


def _make_vocabulary(rng, size, stopwords):
    """Distinct gibberish stems; no stem collides with another after stemming."""
    words = []
    seen = set()
    stems = set()
    attempts = 0
    while len(words) < size:
        attempts += 1
        if attempts > 200 * size:
            raise ValueError("could not build a vocabulary of the requested size")
        n_syl = rng.integers(2, 4)
        w = "".join(_ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))]
                    for _ in range(n_syl))
        w += _CODAS[rng.integers(len(_CODAS))]
        s = stem(w)
        if w in seen or w in stopwords or s in stems or len(s) < 4:
            continue
        seen.add(w)
        stems.add(s)
        words.append(w)
    return words


def _topic_term_matrix(rng, V, K):
    """Each topic puts 85% of its mass on its own block of terms, 15% on shared ones."""
    shared = max(1, V // 5)
    block = (V - shared) // K
    phi = np.zeros((K, V))
    ranks = np.arange(1, V + 1, dtype=np.float64)
    for k in range(K):
        own = np.arange(shared + k * block, shared + (k + 1) * block)
        own_w = 1.0 / ranks[: own.size] ** 0.9
        phi[k, own] = 0.85 * rng.permutation(own_w / own_w.sum())
        bg = 1.0 / ranks[:shared] ** 1.1
        phi[k, :shared] = 0.15 * bg / bg.sum()
    return phi


class _Writer:
    def __init__(self, rng, cfg, vocab, phi, stopwords):
        self.rng = rng
        self.cfg = cfg
        self.vocab = vocab
        self.phi = phi
        self.stopwords = stopwords

    def surface(self, w):
        rng = self.rng
        if rng.random() < self.cfg.suffix_rate:
            w = w + _SUFFIXES[rng.integers(len(_SUFFIXES))]
        if rng.random() < self.cfg.diacritic_rate:
            pos = [i for i, c in enumerate(w) if c in _ACCENTS]
            if pos:
                i = pos[rng.integers(len(pos))]
                w = w[:i] + _ACCENTS[w[i]] + w[i + 1:]
        return w

    def text(self, theta, n_words):
        rng = self.rng
        K, V = self.phi.shape
        n_stop = rng.binomial(n_words, self.cfg.stopword_rate)
        n_content = n_words - n_stop
        per_topic = rng.multinomial(n_content, theta)
        ids = np.concatenate([rng.choice(V, size=c, p=self.phi[k])
                              for k, c in enumerate(per_topic) if c] or [np.zeros(0, int)])
        content = [self.surface(self.vocab[i]) for i in ids]
        stops = [self.stopwords[i] for i in rng.integers(len(self.stopwords), size=n_stop)]
        words = content + stops
        order = rng.permutation(len(words))
        out = []
        sentence_left = 0
        for i in order:
            w = words[i]
            if sentence_left == 0:
                w = w.capitalize()
                sentence_left = int(rng.integers(6, 16))
            sentence_left -= 1
            if sentence_left == 0:
                w += "."
            elif rng.random() < 0.04:
                w += ","
            out.append(w)
        return " ".join(out)


def _split_words(rng, total, n_notes):
    if n_notes == 1:
        return [total]
    cuts = np.sort(rng.choice(np.arange(1, total), size=n_notes - 1, replace=False))
    return list(np.diff(np.r_[0, cuts, total]).astype(int))


def _minute(dt):
    return dt.replace(second=0, microsecond=0)


def generate(config, out_dir=None):
    """Draw the corpus; optionally write the four input files plus truth and manifest.

    Returns a dict with ``notes``, ``admissions``, ``incidents``, ``structured``
    and ``truth`` lists (JSON-ready rows) and the ``manifest`` dict.
    """
    config.validate()
    cfg = config
    n_periods, n_patients = cfg.sizes()
    root = np.random.SeedSequence(cfg.seed)
    global_seq, vocab_seq, patient_root = root.spawn(3)
    g = np.random.default_rng(global_seq)

    stop_list = sorted(default_resources().stopwords)
    vocab = _make_vocabulary(np.random.default_rng(vocab_seq), cfg.vocab_size, set(stop_list))
    phi = _topic_term_matrix(np.random.default_rng(vocab_seq.spawn(1)[0]), cfg.vocab_size,
                             cfg.n_true_topics)

    # every patient gets one period, the rest are spread at random
    per_patient = np.ones(n_patients, dtype=int)
    np.add.at(per_patient, g.integers(0, n_patients, size=n_periods - n_patients), 1)
    n_pos = int(round(n_periods * cfg.positive_fraction))
    labels = np.zeros(n_periods, dtype=bool)
    labels[g.choice(n_periods, size=n_pos, replace=False)] = True

    a = cfg.association
    K = cfg.n_true_topics
    notes, admissions, incidents, structured, truth = [], [], [], [], []
    period_idx = 0
    note_idx = 0
    patient_seqs = patient_root.spawn(n_patients)
    for p in range(n_patients):
        rng = np.random.default_rng(patient_seqs[p])
        writer = _Writer(rng, cfg, vocab, phi, stop_list)
        pid = f"P{p:05d}"
        t = _minute(_EPOCH + timedelta(days=float(rng.uniform(0, 365)),
                                       minutes=int(rng.integers(0, 1440))))
        gender = "F" if rng.random() < 0.45 else "M"
        for _ in range(per_patient[p]):
            label = bool(labels[period_idx])
            period_id = f"A{period_idx:06d}"
            period_idx += 1
            start = t
            t = start + timedelta(days=float(90 + rng.uniform(0, 120)))

            theta = rng.dirichlet(np.full(K, cfg.doc_topic_alpha))
            if label and a > 0:
                theta[0] += a * cfg.topic_boost
                theta /= theta.sum()
            mean_words = cfg.words_mean_negative + (
                a * (cfg.words_mean_positive - cfg.words_mean_negative) if label else 0.0)
            mu = math.log(mean_words) - cfg.words_sigma ** 2 / 2
            n_words = max(20, int(rng.lognormal(mu, cfg.words_sigma)))
            n_notes = int(min(n_words // 10, rng.integers(1, 7)))
            for words in _split_words(rng, n_words, max(1, n_notes)):
                ts = _minute(start - timedelta(days=28) + timedelta(
                    minutes=int(rng.integers(0, 29 * 1440 + 1))))
                notes.append({"note_id": f"N{note_idx:07d}", "patient_id": pid,
                              "timestamp": format_timestamp(ts),
                              "text": writer.text(theta, int(words))})
                note_idx += 1
            for _ in range(cfg.background_notes):
                ts = _minute(start + timedelta(days=float(rng.uniform(30, 50))))
                bg = rng.dirichlet(np.full(K, cfg.doc_topic_alpha))
                notes.append({"note_id": f"N{note_idx:07d}", "patient_id": pid,
                              "timestamp": format_timestamp(ts),
                              "text": writer.text(bg, int(rng.integers(40, 120)))})
                note_idx += 1

            if label:
                ts = start + timedelta(days=1, minutes=int(rng.integers(1, 27 * 1440 + 1)))
                incidents.append({"patient_id": pid, "timestamp": format_timestamp(ts)})
            elif rng.random() < 0.05:
                ts = _minute(start + timedelta(days=float(rng.uniform(40, 55))))
                incidents.append({"patient_id": pid, "timestamp": format_timestamp(ts)})

            age_mean = cfg.age_mean_negative + (
                a * (cfg.age_mean_positive - cfg.age_mean_negative) if label else 0.0)
            age = float(np.clip(rng.normal(age_mean, cfg.age_sd), 16.0, 95.0))
            row = {"period_id": period_id, "gender": gender,
                   "n_meds_prescribed": int(rng.poisson(3)),
                   "n_meds_administered": int(rng.poisson(5)),
                   "has_diagnosis": bool(rng.random() < 0.7)}
            if rng.random() >= cfg.missing_age_rate:
                row["age_admission"] = round(age, 2)
            structured.append(row)
            admissions.append({"period_id": period_id, "patient_id": pid,
                               "start": format_timestamp(start), "end": None,
                               "sub_department": f"unit-{int(rng.integers(1, 6))}"})
            truth.append({"period_id": period_id, "label": label,
                          "planted_topic_weight": float(theta[0])})

    n_words = [len(n["text"].split()) for n in notes]
    manifest = {
        "config": asdict(cfg),
        "n_patients": n_patients,
        "n_periods": n_periods,
        "n_positive": n_pos,
        "prevalence": n_pos / n_periods,
        "n_notes": len(notes),
        "n_incidents": len(incidents),
        "mean_note_words": float(np.mean(n_words)) if n_words else 0.0,
    }
    data = {"notes": notes, "admissions": admissions, "incidents": incidents,
            "structured": structured, "truth": truth, "manifest": manifest}
    if out_dir is not None:
        write_corpus(data, out_dir)
    return data


CORPUS_FILES = ("notes", "admissions", "incidents", "structured", "truth")


def write_corpus(data, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    for name in CORPUS_FILES:
        with open(os.path.join(out_dir, f"{name}.jsonl"), "w", encoding="utf-8") as fh:
            for row in data[name]:
                fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(data["manifest"], fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass
class Histogram:
    edges: list
    counts: list


@dataclass
class DatasetReport:
    n_periods: int = 0
    n_patients: int = 0
    n_positive: int = 0
    prevalence: float = 0.0
    mean_age: dict = field(default_factory=lambda: {"positive": 0.0, "negative": 0.0})
    mean_words: dict = field(default_factory=lambda: {"positive": 0.0, "negative": 0.0})
    age_hist: dict = field(default_factory=dict)
    words_hist: dict = field(default_factory=dict)


def _hist(values, edges):
    counts, _ = np.histogram(values, bins=edges)
    return Histogram(edges=[float(e) for e in edges], counts=[int(c) for c in counts])


def describe(records, age_bins=20, word_bins=20):
    """Prevalence, counts and per-class age / note-length histograms of period records."""
    if not records:
        return DatasetReport()
    labels = np.array([r.label for r in records])
    ages = np.array([r.structured.age_admission for r in records])
    words = np.array([r.word_count for r in records], dtype=float)
    age_edges = np.linspace(ages.min(), ages.max() + 1e-9, age_bins + 1)
    word_edges = np.linspace(words.min(), words.max() + 1e-9, word_bins + 1)
    rep = DatasetReport(
        n_periods=len(records),
        n_patients=len({r.patient_id for r in records}),
        n_positive=int(labels.sum()),
        prevalence=float(labels.mean()),
    )
    for name, mask in (("positive", labels), ("negative", ~labels)):
        rep.mean_age[name] = float(ages[mask].mean()) if mask.any() else 0.0
        rep.mean_words[name] = float(words[mask].mean()) if mask.any() else 0.0
        rep.age_hist[name] = _hist(ages[mask], age_edges)
        rep.words_hist[name] = _hist(words[mask], word_edges)
    return rep
