"""Trial registry records: ingest, validate, segment criteria, filter.

The corpus file format is one trial per line, each line a flat JSON object
with exactly the TrialRecord field names (lists are arrays of strings). A
corpus is immutable after load and safe to share across threads.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, fields as dataclass_fields
from enum import Enum
from pathlib import Path

from .errors import ValidationError
from .jsonl import read_jsonl, write_jsonl


class Phase(str, Enum):
    EarlyPhase1 = "EarlyPhase1"
    Phase1 = "Phase1"
    Phase1_2 = "Phase1_2"
    Phase2 = "Phase2"
    Phase2_3 = "Phase2_3"
    Phase3 = "Phase3"
    Phase4 = "Phase4"
    NotApplicable = "NotApplicable"
    Unknown = "Unknown"


class RecruitingStatus(str, Enum):
    Recruiting = "Recruiting"
    Other = "Other"


class StudyType(str, Enum):
    Interventional = "Interventional"
    Observational = "Observational"


class CriterionKind(str, Enum):
    Inclusion = "Inclusion"
    Exclusion = "Exclusion"


# Record ids become file names downstream (candidate lists, verdict caches),
# so they are restricted to a filesystem-safe alphabet.
_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")


@dataclass(frozen=True)
class TrialRecord:
    trial_id: str
    brief_title: str
    phase: Phase
    drugs: str
    drugs_list: tuple[str, ...]
    diseases: str
    diseases_list: tuple[str, ...]
    enrollment: int
    inclusion_criteria_text: str
    exclusion_criteria_text: str
    brief_summary: str
    recruiting_status: RecruitingStatus
    locations: tuple[str, ...]
    study_type: StudyType


@dataclass(frozen=True)
class Criterion:
    trial_id: str
    kind: CriterionKind
    ordinal: int
    text: str


@dataclass(frozen=True)
class CorpusFilter:
    """Conjunction of optional predicates; the empty filter selects all."""

    require_recruiting: bool = False
    require_country: str | None = None
    study_types: frozenset[StudyType] | None = None

    def matches(self, record: TrialRecord) -> bool:
        if self.require_recruiting and record.recruiting_status is not RecruitingStatus.Recruiting:
            return False
        if self.require_country is not None and self.require_country not in record.locations:
            return False
        if self.study_types is not None and record.study_type not in self.study_types:
            return False
        return True


FIELD_NAMES = tuple(f.name for f in dataclass_fields(TrialRecord))

_LIST_FIELDS = ("drugs_list", "diseases_list", "locations")
_TEXT_FIELDS = (
    "brief_title",
    "drugs",
    "diseases",
    "inclusion_criteria_text",
    "exclusion_criteria_text",
    "brief_summary",
)


def _fail(context: str, field: str, reason: str) -> ValidationError:
    return ValidationError(f"{context}: field '{field}': {reason}")


def _parse_str_list(value: object, context: str, field: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise _fail(context, field, "expected an array of strings")
    trimmed = tuple(v.strip() for v in value)
    if any(not v for v in trimmed):
        raise _fail(context, field, "entries must be non-empty after trimming")
    return trimmed


def parse_trial(obj: dict, *, context: str = "record") -> TrialRecord:
    """Validate one flat key/value object into a TrialRecord.

    Errors name the offending field. Unknown phase strings map to
    Phase.Unknown; every other enum field is strict.
    """
    missing = [name for name in FIELD_NAMES if name not in obj]
    if missing:
        raise _fail(context, missing[0], "missing")
    unknown = [key for key in obj if key not in FIELD_NAMES]
    if unknown:
        raise _fail(context, unknown[0], "unknown field")

    trial_id = obj["trial_id"]
    if not isinstance(trial_id, str) or not _ID_RE.match(trial_id):
        raise _fail(context, "trial_id", "must be a non-empty id (letters, digits, '_.-')")

    for name in _TEXT_FIELDS:
        if not isinstance(obj[name], str):
            raise _fail(context, name, "expected a string")

    enrollment = obj["enrollment"]
    if isinstance(enrollment, bool) or not isinstance(enrollment, int):
        raise _fail(context, "enrollment", "expected an integer")
    if enrollment < 0:
        raise _fail(context, "enrollment", "must be >= 0")

    phase_raw = obj["phase"]
    if not isinstance(phase_raw, str):
        raise _fail(context, "phase", "expected a string")
    try:
        phase = Phase(phase_raw)
    except ValueError:
        phase = Phase.Unknown

    try:
        status = RecruitingStatus(obj["recruiting_status"])
    except ValueError:
        raise _fail(context, "recruiting_status", f"expected one of {[s.value for s in RecruitingStatus]}")
    try:
        study_type = StudyType(obj["study_type"])
    except ValueError:
        raise _fail(context, "study_type", f"expected one of {[s.value for s in StudyType]}")

    return TrialRecord(
        trial_id=trial_id,
        brief_title=obj["brief_title"],
        phase=phase,
        drugs=obj["drugs"],
        drugs_list=_parse_str_list(obj["drugs_list"], context, "drugs_list"),
        diseases=obj["diseases"],
        diseases_list=_parse_str_list(obj["diseases_list"], context, "diseases_list"),
        enrollment=enrollment,
        inclusion_criteria_text=obj["inclusion_criteria_text"],
        exclusion_criteria_text=obj["exclusion_criteria_text"],
        brief_summary=obj["brief_summary"],
        recruiting_status=status,
        locations=_parse_str_list(obj["locations"], context, "locations"),
        study_type=study_type,
    )


def trial_to_obj(record: TrialRecord) -> dict:
    return {
        "trial_id": record.trial_id,
        "brief_title": record.brief_title,
        "phase": record.phase.value,
        "drugs": record.drugs,
        "drugs_list": list(record.drugs_list),
        "diseases": record.diseases,
        "diseases_list": list(record.diseases_list),
        "enrollment": record.enrollment,
        "inclusion_criteria_text": record.inclusion_criteria_text,
        "exclusion_criteria_text": record.exclusion_criteria_text,
        "brief_summary": record.brief_summary,
        "recruiting_status": record.recruiting_status.value,
        "locations": list(record.locations),
        "study_type": record.study_type.value,
    }


def load_corpus(path: str | Path) -> list[TrialRecord]:
    """Load and validate a corpus file; duplicate trial_ids are rejected."""
    records: list[TrialRecord] = []
    seen: dict[str, int] = {}
    for line_no, obj in read_jsonl(path):
        record = parse_trial(obj, context=f"{path}:{line_no}")
        if record.trial_id in seen:
            raise ValidationError(
                f"{path}:{line_no}: duplicate trial_id '{record.trial_id}' "
                f"(first seen on line {seen[record.trial_id]})"
            )
        seen[record.trial_id] = line_no
        records.append(record)
    return records


def dump_corpus(records: list[TrialRecord], path: str | Path) -> None:
    write_jsonl(path, (trial_to_obj(r) for r in records))


# --- criteria segmentation -------------------------------------------------

_BULLET_RE = re.compile(r"^[-*•]\s*")
# Numbered prefix requires whitespace after the marker so "2.5 mg" survives.
_NUMBER_RE = re.compile(r"^\d+\s*[.)]\s+")


def _split_block(text: str) -> list[str]:
    """Split one criteria block into individual criterion strings.

    A new criterion starts at a bullet (-, *, or the bullet glyph) or a
    numbered prefix ("1.", "1)"); blank lines separate paragraph criteria;
    other lines continue the current criterion. Markers are stripped and
    empty fragments dropped.
    """
    out: list[str] = []
    current: list[str] = []

    def flush() -> None:
        if current:
            joined = " ".join(current).strip()
            if joined:
                out.append(joined)
            current.clear()

    for raw_line in text.splitlines():
        line = raw_line.strip()
        if not line:
            flush()
            continue
        bullet = _BULLET_RE.match(line)
        number = _NUMBER_RE.match(line) if bullet is None else None
        if bullet or number:
            flush()
            marker = bullet or number
            rest = line[marker.end():].strip()
            if rest:
                current.append(rest)
        else:
            current.append(line)
    flush()
    return out


def segment_criteria(record: TrialRecord) -> list[Criterion]:
    """Split the record's criteria blocks into ordered Criterion rows."""
    criteria: list[Criterion] = []
    for kind, block in (
        (CriterionKind.Inclusion, record.inclusion_criteria_text),
        (CriterionKind.Exclusion, record.exclusion_criteria_text),
    ):
        for ordinal, text in enumerate(_split_block(block)):
            criteria.append(Criterion(record.trial_id, kind, ordinal, text))
    return criteria


def filter_corpus(records: list[TrialRecord], flt: CorpusFilter) -> list[TrialRecord]:
    return [r for r in records if flt.matches(r)]


def corpus_stats(records: list[TrialRecord]) -> dict:
    """Record count, phase histogram, and mean criteria per trial."""
    phase_hist = Counter(r.phase.value for r in records)
    n_criteria = [len(segment_criteria(r)) for r in records]
    mean_criteria = sum(n_criteria) / len(n_criteria) if n_criteria else 0.0
    return {
        "records": len(records),
        "phases": dict(sorted(phase_hist.items())),
        "mean_criteria_per_trial": mean_criteria,
    }
