"""Patient cases from case reports and community posts, plus cohort stats.

Case files carry pre-extracted text (no scraping); one case per line with
the PatientCase field names.
"""

from __future__ import annotations

import re
import statistics
from dataclasses import dataclass
from datetime import date
from enum import Enum
from pathlib import Path

from .errors import ValidationError
from .jsonl import read_jsonl, write_jsonl


class CaseSource(str, Enum):
    CaseReport = "CaseReport"
    RedditAskDocs = "RedditAskDocs"
    RedditRareDiseases = "RedditRareDiseases"
    RedditCancer = "RedditCancer"


class Sex(str, Enum):
    Male = "Male"
    Female = "Female"
    Unknown = "Unknown"


_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")

FIELD_NAMES = ("case_id", "source", "sex", "age_years", "note", "posted_date")


@dataclass(frozen=True)
class PatientCase:
    case_id: str
    source: CaseSource
    sex: Sex
    age_years: float | None
    note: str
    posted_date: date | None


def word_count(note: str) -> int:
    """Number of maximal whitespace-delimited tokens."""
    return len(note.split())


def parse_case(obj: dict, *, context: str = "record") -> PatientCase:
    missing = [name for name in FIELD_NAMES if name not in obj]
    if missing:
        raise ValidationError(f"{context}: field '{missing[0]}': missing")
    unknown = [key for key in obj if key not in FIELD_NAMES]
    if unknown:
        raise ValidationError(f"{context}: field '{unknown[0]}': unknown field")

    case_id = obj["case_id"]
    if not isinstance(case_id, str) or not _ID_RE.match(case_id):
        raise ValidationError(f"{context}: field 'case_id': must be a non-empty id (letters, digits, '_.-')")

    try:
        source = CaseSource(obj["source"])
    except ValueError:
        raise ValidationError(
            f"{context}: field 'source': expected one of {[s.value for s in CaseSource]}"
        )
    try:
        sex = Sex(obj["sex"])
    except ValueError:
        raise ValidationError(f"{context}: field 'sex': expected one of {[s.value for s in Sex]}")

    age = obj["age_years"]
    if age is not None:
        if isinstance(age, bool) or not isinstance(age, (int, float)):
            raise ValidationError(f"{context}: field 'age_years': expected a number or null")
        if not 0 <= age <= 130:
            raise ValidationError(f"{context}: field 'age_years': must be in [0, 130]")
        age = float(age)

    note = obj["note"]
    if not isinstance(note, str) or word_count(note) < 1:
        raise ValidationError(f"{context}: field 'note': must contain at least one word")

    posted = obj["posted_date"]
    if posted is not None:
        if not isinstance(posted, str):
            raise ValidationError(f"{context}: field 'posted_date': expected an ISO-8601 date or null")
        try:
            posted = date.fromisoformat(posted)
        except ValueError:
            raise ValidationError(f"{context}: field 'posted_date': invalid ISO-8601 date '{posted}'")

    return PatientCase(case_id, source, sex, age, note, posted)


def case_to_obj(case: PatientCase) -> dict:
    return {
        "case_id": case.case_id,
        "source": case.source.value,
        "sex": case.sex.value,
        "age_years": case.age_years,
        "note": case.note,
        "posted_date": case.posted_date.isoformat() if case.posted_date else None,
    }


def load_cases(path: str | Path) -> list[PatientCase]:
    cases: list[PatientCase] = []
    seen: dict[str, int] = {}
    for line_no, obj in read_jsonl(path):
        case = parse_case(obj, context=f"{path}:{line_no}")
        if case.case_id in seen:
            raise ValidationError(
                f"{path}:{line_no}: duplicate case_id '{case.case_id}' "
                f"(first seen on line {seen[case.case_id]})"
            )
        seen[case.case_id] = line_no
        cases.append(case)
    return cases


def dump_cases(cases: list[PatientCase], path: str | Path) -> None:
    write_jsonl(path, (case_to_obj(c) for c in cases))


# --- dataset statistics ----------------------------------------------------


@dataclass(frozen=True)
class SourceStats:
    count: int
    males: int
    females: int
    unknown_sex: int
    age_mean: float | None
    age_sd: float | None
    length_mean: float
    length_sd: float | None


@dataclass(frozen=True)
class CaseSetStats:
    per_source: dict[CaseSource, SourceStats]

    @property
    def total(self) -> int:
        return sum(s.count for s in self.per_source.values())


def _mean_sd(values: list[float]) -> tuple[float | None, float | None]:
    """Mean and sample (n-1) standard deviation; sd absent below 2 values."""
    if not values:
        return None, None
    mean = statistics.fmean(values)
    sd = statistics.stdev(values) if len(values) >= 2 else None
    return mean, sd


def compute_stats(cases: list[PatientCase]) -> CaseSetStats:
    """Per-source counts, sex distribution, age and case-length summaries.

    Unknown sex is excluded from the male:female ratio but included in the
    counts; ages are summarized over the cases that report one.
    """
    if not cases:
        raise ValidationError("compute_stats: no cases")
    per_source: dict[CaseSource, SourceStats] = {}
    for source in CaseSource:
        group = [c for c in cases if c.source is source]
        if not group:
            continue
        ages = [c.age_years for c in group if c.age_years is not None]
        lengths = [float(word_count(c.note)) for c in group]
        age_mean, age_sd = _mean_sd(ages)
        length_mean, length_sd = _mean_sd(lengths)
        assert length_mean is not None  # group is non-empty
        per_source[source] = SourceStats(
            count=len(group),
            males=sum(1 for c in group if c.sex is Sex.Male),
            females=sum(1 for c in group if c.sex is Sex.Female),
            unknown_sex=sum(1 for c in group if c.sex is Sex.Unknown),
            age_mean=age_mean,
            age_sd=age_sd,
            length_mean=length_mean,
            length_sd=length_sd,
        )
    return CaseSetStats(per_source=per_source)
