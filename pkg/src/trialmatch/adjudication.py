"""Human review of patient-trial pairs: labels, consensus, outreach.

Persistence is an append-only event log (one JSON event per line) with
in-memory materialized views; replaying the log reconstructs identical
state. Within a pair, each rater's latest submission supersedes their
earlier ones, and a submission under the reserved rater id "consensus"
records the outcome of a disagreement discussion.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, replace
from datetime import date, datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping

from .errors import ValidationError
from .evalkit import GoldLabel
from .jsonl import canonical_json

CONSENSUS_RATER = "consensus"

FOLLOW_UP_AFTER_DAYS = 7
UNRESPONSIVE_AFTER_DAYS = 14


class ContactRole(str, Enum):
    CaseAuthor = "CaseAuthor"
    TrialOrganizer = "TrialOrganizer"


class OutreachStatus(str, Enum):
    Pending = "Pending"
    FollowUpSent = "FollowUpSent"
    Responded = "Responded"
    Unresponsive = "Unresponsive"


class Resolution(str, Enum):
    Agreed = "Agreed"
    ResolvedByDiscussion = "ResolvedByDiscussion"


@dataclass(frozen=True)
class AdjudicationRecord:
    case_id: str
    trial_id: str
    rater_id: str
    eligible: bool
    beneficial: bool | None
    overrides: tuple[tuple[str, int, str], ...]  # (kind, ordinal, verdict label)
    note: str
    timestamp: str  # ISO-8601, assigned by the store

    def __post_init__(self):
        if self.beneficial is not None and not self.eligible:
            raise ValidationError("field 'beneficial': requires eligible=true")


@dataclass(frozen=True)
class OutreachRecord:
    outreach_id: int
    case_id: str
    trial_id: str
    contact_role: ContactRole
    status: OutreachStatus
    eligibility_confirmed: bool | None
    helpfulness: int | None  # Likert 1-5
    clarity: int | None  # Likert 1-5
    first_contact_date: date
    response_date: date | None

    def __post_init__(self):
        for name in ("helpfulness", "clarity"):
            value = getattr(self, name)
            if value is not None and not 1 <= value <= 5:
                raise ValidationError(f"field '{name}': must be in 1..5")
        if self.status is OutreachStatus.Responded and self.response_date is None:
            raise ValidationError("field 'response_date': required when status is Responded")


@dataclass(frozen=True)
class ConsensusLabel:
    case_id: str
    trial_id: str
    eligible: bool
    beneficial: bool | None
    resolution: Resolution


@dataclass(frozen=True)
class Disagreement:
    case_id: str
    trial_id: str
    labels: tuple[tuple[str, bool, bool | None], ...]  # (rater, eligible, beneficial)


def outreach_tick(record: OutreachRecord, today: date) -> OutreachRecord:
    """Advance an open outreach record by date: follow-up after one week,
    unresponsive after two. Idempotent for a fixed date; never downgrades."""
    if record.status in (OutreachStatus.Responded, OutreachStatus.Unresponsive):
        raise ValidationError(f"outreach record {record.outreach_id} is already closed")
    elapsed = (today - record.first_contact_date).days
    if elapsed >= UNRESPONSIVE_AFTER_DAYS:
        return replace(record, status=OutreachStatus.Unresponsive)
    if elapsed >= FOLLOW_UP_AFTER_DAYS and record.status is OutreachStatus.Pending:
        return replace(record, status=OutreachStatus.FollowUpSent)
    return record


# --- event-log store ---------------------------------------------------------


def _utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class AdjudicationStore:
    """Append-only event log plus materialized views.

    ``pairs`` is the registry of (case_id, trial_id) pairs known from ranked
    runs, mapping each pair to the set of criterion keys ("Kind:ordinal")
    that overrides may reference. A single writer lock serializes appends.
    """

    def __init__(
        self,
        directory: str | Path,
        pairs: Mapping[tuple[str, str], set[str]],
        clock: Callable[[], str] = _utc_now_iso,
    ):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.log_path = self.directory / "events.jsonl"
        self.pairs = dict(pairs)
        self._clock = clock
        self._lock = threading.Lock()
        self.raters: set[str] = {CONSENSUS_RATER}
        self._adjudications: dict[tuple[str, str], dict[str, AdjudicationRecord]] = {}
        self._outreach: dict[int, OutreachRecord] = {}
        self._next_id = 1
        if self.log_path.exists():
            with self.log_path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        self._apply(json.loads(line))

    # --- event plumbing ---

    def _append(self, event: dict) -> None:
        with self._lock:
            self._apply(event)
            with self.log_path.open("a", encoding="utf-8") as fh:
                fh.write(canonical_json(event) + "\n")

    def _apply(self, event: dict) -> None:
        kind = event["type"]
        if kind == "rater_registered":
            self.raters.add(event["rater_id"])
        elif kind == "adjudication":
            record = AdjudicationRecord(
                case_id=event["case_id"],
                trial_id=event["trial_id"],
                rater_id=event["rater_id"],
                eligible=event["eligible"],
                beneficial=event["beneficial"],
                overrides=tuple((k, int(o), lb) for k, o, lb in event["overrides"]),
                note=event["note"],
                timestamp=event["timestamp"],
            )
            key = (record.case_id, record.trial_id)
            self._adjudications.setdefault(key, {})[record.rater_id] = record
            self._next_id = max(self._next_id, int(event["record_id"]) + 1)
        elif kind == "outreach":
            record = OutreachRecord(
                outreach_id=int(event["outreach_id"]),
                case_id=event["case_id"],
                trial_id=event["trial_id"],
                contact_role=ContactRole(event["contact_role"]),
                status=OutreachStatus(event["status"]),
                eligibility_confirmed=event["eligibility_confirmed"],
                helpfulness=event["helpfulness"],
                clarity=event["clarity"],
                first_contact_date=date.fromisoformat(event["first_contact_date"]),
                response_date=(
                    date.fromisoformat(event["response_date"]) if event["response_date"] else None
                ),
            )
            self._outreach[record.outreach_id] = record
            self._next_id = max(self._next_id, record.outreach_id + 1)
        else:
            raise ValidationError(f"unknown event type '{kind}' in {self.log_path}")

    # --- raters ---

    def register_rater(self, rater_id: str) -> None:
        if not rater_id:
            raise ValidationError("rater_id must be non-empty")
        if rater_id not in self.raters:
            self._append({"type": "rater_registered", "rater_id": rater_id})

    # --- adjudications ---

    def submit_adjudication(
        self,
        case_id: str,
        trial_id: str,
        rater_id: str,
        eligible: bool,
        beneficial: bool | None = None,
        overrides: Mapping[str, str] | None = None,
        note: str = "",
    ) -> int:
        """Store one rater's label; their latest submission per pair wins.

        ``overrides`` maps criterion keys "Inclusion:0" / "Exclusion:1" to
        verdict labels and must reference criteria the pair actually has.
        """
        key = (case_id, trial_id)
        if key not in self.pairs:
            raise ValidationError(f"unknown pair ({case_id}, {trial_id})")
        if rater_id not in self.raters:
            raise ValidationError(f"rater '{rater_id}' is not registered")
        override_rows: list[tuple[str, int, str]] = []
        for criterion_key, label in sorted((overrides or {}).items()):
            if criterion_key not in self.pairs[key]:
                raise ValidationError(
                    f"field 'overrides': pair has no criterion '{criterion_key}'"
                )
            kind, _, ordinal = criterion_key.partition(":")
            override_rows.append((kind, int(ordinal), label))
        record = AdjudicationRecord(
            case_id=case_id,
            trial_id=trial_id,
            rater_id=rater_id,
            eligible=eligible,
            beneficial=beneficial,
            overrides=tuple(override_rows),
            note=note,
            timestamp=self._clock(),
        )
        record_id = self._next_id
        self._append(
            {
                "type": "adjudication",
                "record_id": record_id,
                "case_id": record.case_id,
                "trial_id": record.trial_id,
                "rater_id": record.rater_id,
                "eligible": record.eligible,
                "beneficial": record.beneficial,
                "overrides": [list(row) for row in record.overrides],
                "note": record.note,
                "timestamp": record.timestamp,
            }
        )
        return record_id

    def latest_labels(self, case_id: str, trial_id: str) -> dict[str, AdjudicationRecord]:
        return dict(self._adjudications.get((case_id, trial_id), {}))

    def rated_pairs(self, rater_id: str) -> set[tuple[str, str]]:
        return {key for key, by_rater in self._adjudications.items() if rater_id in by_rater}

    def pending_pairs(self, rater_id: str) -> list[tuple[str, str]]:
        """Pairs the rater has not labeled yet, in deterministic order."""
        rated = self.rated_pairs(rater_id)
        return sorted(key for key in self.pairs if key not in rated)

    # --- consensus ---

    def compute_consensus(
        self, case_id: str, trial_id: str
    ) -> ConsensusLabel | Disagreement | None:
        """Agreed label, a disagreement marker, or None while < 2 raters.

        Unanimous labels from two or more raters are an Agreed consensus even
        if a discussion record exists; an explicit submission under the
        "consensus" rater id settles a disagreement as ResolvedByDiscussion.
        """
        by_rater = self._adjudications.get((case_id, trial_id), {})
        regular = {r: rec for r, rec in by_rater.items() if r != CONSENSUS_RATER}
        if len(regular) < 2:
            return None
        labels = {(rec.eligible, rec.beneficial) for rec in regular.values()}
        if len(labels) == 1:
            eligible, beneficial = labels.pop()
            return ConsensusLabel(case_id, trial_id, eligible, beneficial, Resolution.Agreed)
        resolution = by_rater.get(CONSENSUS_RATER)
        if resolution is not None:
            return ConsensusLabel(
                case_id, trial_id, resolution.eligible, resolution.beneficial,
                Resolution.ResolvedByDiscussion,
            )
        rows = tuple(
            (rater, rec.eligible, rec.beneficial) for rater, rec in sorted(regular.items())
        )
        return Disagreement(case_id, trial_id, rows)

    def disagreements(self) -> list[Disagreement]:
        out = []
        for case_id, trial_id in sorted(self._adjudications):
            result = self.compute_consensus(case_id, trial_id)
            if isinstance(result, Disagreement):
                out.append(result)
        return out

    def consensus_labels(self) -> list[GoldLabel]:
        """Settled labels for evaluation, under the shared gold-label schema."""
        out = []
        for case_id, trial_id in sorted(self._adjudications):
            result = self.compute_consensus(case_id, trial_id)
            if isinstance(result, ConsensusLabel):
                out.append(
                    GoldLabel(
                        case_id=case_id,
                        trial_id=trial_id,
                        eligible=result.eligible,
                        beneficial=result.beneficial,
                        rater_id=CONSENSUS_RATER,
                    )
                )
        return out

    # --- outreach ---

    def _store_outreach(self, record: OutreachRecord) -> None:
        self._append(
            {
                "type": "outreach",
                "outreach_id": record.outreach_id,
                "case_id": record.case_id,
                "trial_id": record.trial_id,
                "contact_role": record.contact_role.value,
                "status": record.status.value,
                "eligibility_confirmed": record.eligibility_confirmed,
                "helpfulness": record.helpfulness,
                "clarity": record.clarity,
                "first_contact_date": record.first_contact_date.isoformat(),
                "response_date": record.response_date.isoformat() if record.response_date else None,
            }
        )

    def create_outreach(
        self, case_id: str, trial_id: str, contact_role: ContactRole, first_contact_date: date
    ) -> OutreachRecord:
        if (case_id, trial_id) not in self.pairs:
            raise ValidationError(f"unknown pair ({case_id}, {trial_id})")
        record = OutreachRecord(
            outreach_id=self._next_id,
            case_id=case_id,
            trial_id=trial_id,
            contact_role=contact_role,
            status=OutreachStatus.Pending,
            eligibility_confirmed=None,
            helpfulness=None,
            clarity=None,
            first_contact_date=first_contact_date,
            response_date=None,
        )
        self._store_outreach(record)
        return record

    def update_outreach(self, outreach_id: int, **changes) -> OutreachRecord:
        current = self._outreach.get(outreach_id)
        if current is None:
            raise ValidationError(f"unknown outreach record {outreach_id}")
        record = replace(current, **changes)
        self._store_outreach(record)
        return record

    def outreach_records(self) -> list[OutreachRecord]:
        return [self._outreach[i] for i in sorted(self._outreach)]

    def get_outreach(self, outreach_id: int) -> OutreachRecord | None:
        return self._outreach.get(outreach_id)

    def tick_outreach(self, today: date) -> list[OutreachRecord]:
        """Apply the date-based transitions to every open record."""
        updated = []
        for record in self.outreach_records():
            if record.status in (OutreachStatus.Responded, OutreachStatus.Unresponsive):
                continue
            advanced = outreach_tick(record, today)
            if advanced.status is not record.status:
                self._store_outreach(advanced)
            updated.append(advanced)
        return updated
