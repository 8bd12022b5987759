"""Clinical-note ingestion and admission-period assembly.

All inputs are JSON-lines files.  Schemas (one object per line):

``notes``       note_id, patient_id, timestamp, text
``admissions``  period_id, patient_id, start, sub_department, end (optional)
``incidents``   patient_id, timestamp
``structured``  period_id plus any of age_admission, gender, n_meds_prescribed,
                n_meds_administered, has_diagnosis (other keys are ignored)

Timestamps are ISO-8601; naive values are read as UTC.
"""

import bisect
import json
import logging
import re
import statistics
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone

logger = logging.getLogger(__name__)

NOTE_LOOKBACK = timedelta(days=28)
NOTE_LOOKAHEAD = timedelta(days=1)
INCIDENT_OPEN = timedelta(days=1)
INCIDENT_CLOSE = timedelta(days=28)
MIN_WORDS = 100

_EARLIEST = datetime(1990, 1, 1, tzinfo=timezone.utc)
_LATEST = datetime(2100, 1, 1, tzinfo=timezone.utc)
_WORD = re.compile(r"\S+")


class DataIntegrityError(ValueError):
    """Input violates a whole-file constraint (e.g. duplicate ids)."""


def parse_timestamp(value):
    if not isinstance(value, str):
        raise ValueError(f"timestamp must be a string, got {type(value).__name__}")
    ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    ts = ts.replace(tzinfo=timezone.utc) if ts.tzinfo is None else ts.astimezone(timezone.utc)
    if not _EARLIEST <= ts < _LATEST:
        raise ValueError(f"timestamp {value} outside [1990, 2100)")
    return ts


def format_timestamp(ts):
    return None if ts is None else ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def count_words(text):
    """Number of maximal non-whitespace runs.

    >>> count_words("a  b\\tc")
    3
    """
    return sum(1 for _ in _WORD.finditer(text))


@dataclass(frozen=True)
class NoteRecord:
    note_id: str
    patient_id: str
    timestamp: datetime
    text: str


@dataclass(frozen=True)
class AdmissionPeriod:
    period_id: str
    patient_id: str
    start: datetime
    sub_department: str
    end: datetime | None = None


@dataclass(frozen=True)
class IncidentRecord:
    patient_id: str
    timestamp: datetime


@dataclass
class StructuredFeatures:
    age_admission: float
    gender: str
    num_words: int
    first_note_ts: datetime | None
    last_note_ts: datetime | None
    n_meds_prescribed: int
    n_meds_administered: int
    has_diagnosis: bool
    admission_start_hour: int


@dataclass
class PeriodRecord:
    period_id: str
    patient_id: str
    period_note: str
    label: bool
    structured: StructuredFeatures
    note_count: int
    word_count: int
    start: datetime | None = None

    def to_json(self):
        d = asdict(self)
        d["start"] = format_timestamp(self.start)
        s = d["structured"]
        s["first_note_ts"] = format_timestamp(self.structured.first_note_ts)
        s["last_note_ts"] = format_timestamp(self.structured.last_note_ts)
        return d

    @classmethod
    def from_json(cls, d):
        s = dict(d["structured"])
        for key in ("first_note_ts", "last_note_ts"):
            s[key] = parse_timestamp(s[key]) if s.get(key) else None
        d = dict(d)
        d["structured"] = StructuredFeatures(**s)
        d["start"] = parse_timestamp(d["start"]) if d.get("start") else None
        return cls(**d)


def _text_field(obj, key):
    v = obj[key]
    if not isinstance(v, str) or not v.strip():
        raise ValueError(f"{key} must be a non-empty string")
    return v


def _parse_note(obj):
    return NoteRecord(
        note_id=_text_field(obj, "note_id"),
        patient_id=_text_field(obj, "patient_id"),
        timestamp=parse_timestamp(obj["timestamp"]),
        text=_text_field(obj, "text"),
    )


def _parse_admission(obj):
    start = parse_timestamp(obj["start"])
    end = parse_timestamp(obj["end"]) if obj.get("end") else None
    if end is not None and end < start:
        raise ValueError("admission ends before it starts")
    return AdmissionPeriod(
        period_id=_text_field(obj, "period_id"),
        patient_id=_text_field(obj, "patient_id"),
        start=start,
        sub_department=str(obj.get("sub_department", "")),
        end=end,
    )


def _parse_incident(obj):
    return IncidentRecord(patient_id=_text_field(obj, "patient_id"),
                          timestamp=parse_timestamp(obj["timestamp"]))


def _parse_structured(obj):
    row = {"period_id": _text_field(obj, "period_id")}
    if obj.get("age_admission") is not None:
        age = float(obj["age_admission"])
        if not 0.0 <= age <= 120.0:
            raise ValueError(f"age {age} outside [0, 120]")
        row["age_admission"] = age
    if obj.get("gender") is not None:
        row["gender"] = str(obj["gender"])
    for key in ("n_meds_prescribed", "n_meds_administered"):
        if obj.get(key) is not None:
            v = int(obj[key])
            if v < 0 or v != obj[key]:
                raise ValueError(f"{key} must be a non-negative integer")
            row[key] = v
    if obj.get("has_diagnosis") is not None:
        if not isinstance(obj["has_diagnosis"], bool):
            raise ValueError("has_diagnosis must be boolean")
        row["has_diagnosis"] = obj["has_diagnosis"]
    return row


def read_jsonl(path, parse):
    """Parse every line of ``path``; returns ``(records, n_malformed)``."""
    records = []
    bad = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("not an object")
                records.append(parse(obj))
            except (ValueError, KeyError, TypeError) as exc:
                bad += 1
                logger.warning("%s:%d skipped: %s", path, lineno, exc)
    return records, bad


@dataclass
class IngestResult:
    notes: list
    admissions: list
    incidents: list
    structured: dict
    warnings: dict = field(default_factory=dict)

    @property
    def warning_count(self):
        return sum(self.warnings.values())


def ingest(notes_path, admissions_path, incidents_path, structured_path=None):
    """Read and validate the four input files.

    Malformed lines are skipped and counted per file; duplicate note or
    period ids raise :class:`DataIntegrityError`.
    """
    notes, bad_notes = read_jsonl(notes_path, _parse_note)
    admissions, bad_adm = read_jsonl(admissions_path, _parse_admission)
    incidents, bad_inc = read_jsonl(incidents_path, _parse_incident)
    rows, bad_struct = ([], 0) if structured_path is None else read_jsonl(
        structured_path, _parse_structured)
    for what, ids in (("note_id", [n.note_id for n in notes]),
                      ("period_id", [a.period_id for a in admissions])):
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})[:5]
            raise DataIntegrityError(f"duplicate {what}: {dup}")
    structured = {}
    for row in rows:
        structured.setdefault(row["period_id"], {}).update(row)
    return IngestResult(
        notes=notes, admissions=admissions, incidents=incidents, structured=structured,
        warnings={"notes": bad_notes, "admissions": bad_adm, "incidents": bad_inc,
                  "structured": bad_struct},
    )


@dataclass
class AssemblyResult:
    records: list
    n_empty_windows: int


def assemble_periods(notes, admissions, incidents, structured=None):
    """One labeled record per admission period, sorted by ``period_id``.

    The period note joins (with one space, ordered by timestamp then note id)
    every note of the patient timed in ``[start - 28d, start + 1d]``.  The
    label is true when the patient has an incident in ``(start + 1d, start + 28d]``.
    Missing ages are imputed with the median of the known ones.
    """
    structured = structured or {}
    by_patient = defaultdict(list)
    for n in notes:
        by_patient[n.patient_id].append(n)
    for lst in by_patient.values():
        lst.sort(key=lambda n: (n.timestamp, n.note_id))
    note_ts = {p: [n.timestamp for n in lst] for p, lst in by_patient.items()}
    incident_ts = defaultdict(list)
    for inc in incidents:
        incident_ts[inc.patient_id].append(inc.timestamp)
    for lst in incident_ts.values():
        lst.sort()

    known_ages = [r["age_admission"] for r in structured.values() if "age_admission" in r]
    median_age = float(statistics.median(known_ages)) if known_ages else 0.0

    records = []
    n_empty = 0
    for adm in sorted(admissions, key=lambda a: a.period_id):
        lst = by_patient.get(adm.patient_id, [])
        ts = note_ts.get(adm.patient_id, [])
        lo = bisect.bisect_left(ts, adm.start - NOTE_LOOKBACK)
        hi = bisect.bisect_right(ts, adm.start + NOTE_LOOKAHEAD)
        window = lst[lo:hi]
        if not window:
            n_empty += 1
        text = " ".join(n.text for n in window)
        inc = incident_ts.get(adm.patient_id, [])
        i = bisect.bisect_right(inc, adm.start + INCIDENT_OPEN)
        label = i < len(inc) and inc[i] <= adm.start + INCIDENT_CLOSE
        extra = structured.get(adm.period_id, {})
        words = count_words(text)
        features = StructuredFeatures(
            age_admission=float(extra.get("age_admission", median_age)),
            gender=str(extra.get("gender", "unknown")),
            num_words=words,
            first_note_ts=window[0].timestamp if window else None,
            last_note_ts=window[-1].timestamp if window else None,
            n_meds_prescribed=int(extra.get("n_meds_prescribed", 0)),
            n_meds_administered=int(extra.get("n_meds_administered", 0)),
            has_diagnosis=bool(extra.get("has_diagnosis", False)),
            admission_start_hour=adm.start.hour,
        )
        records.append(PeriodRecord(
            period_id=adm.period_id, patient_id=adm.patient_id, period_note=text,
            label=bool(label), structured=features, note_count=len(window), word_count=words,
            start=adm.start,
        ))
    if n_empty:
        logger.warning("%d admission period(s) have no notes in their window", n_empty)
    return AssemblyResult(records=records, n_empty_windows=n_empty)


def filter_short(records, min_words=MIN_WORDS):
    """Keep records with more than ``min_words`` words; returns ``(kept, n_dropped)``."""
    kept = [r for r in records if r.word_count > min_words]
    return kept, len(records) - len(kept)


def write_dataset(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def read_dataset(path):
    with open(path, encoding="utf-8") as fh:
        return [PeriodRecord.from_json(json.loads(line)) for line in fh if line.strip()]
