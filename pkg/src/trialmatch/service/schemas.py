"""Pydantic request/response models for the review API.

These mirror the store-side invariants (benefit requires eligible, Likert
scores in 1..5) so a payload the server would reject is already invalid at
the schema layer; the browser client enforces the same rules.
"""

from __future__ import annotations

from datetime import date

from pydantic import BaseModel, Field, model_validator


class TrialOut(BaseModel):
    trial_id: str
    brief_title: str
    phase: str
    drugs: str
    drugs_list: list[str]
    diseases: str
    diseases_list: list[str]
    enrollment: int
    inclusion_criteria_text: str
    exclusion_criteria_text: str
    brief_summary: str
    recruiting_status: str
    locations: list[str]
    study_type: str


class VerdictOut(BaseModel):
    kind: str
    ordinal: int
    criterion: str
    label: str
    relevant_sentences: list[int]
    explanation: str


class PendingPairOut(BaseModel):
    case_id: str
    trial_id: str
    methods: list[str]
    rank: int | None
    note: str
    note_sentences: list[str]
    trial: TrialOut
    verdicts: list[VerdictOut]
    relevance_score: float | None
    eligibility_score: float | None


class RaterIn(BaseModel):
    rater_id: str = Field(min_length=1)


class AdjudicationIn(BaseModel):
    case_id: str
    trial_id: str
    eligible: bool
    beneficial: bool | None = None
    overrides: dict[str, str] = Field(default_factory=dict)
    note: str = ""

    @model_validator(mode="after")
    def _benefit_requires_eligible(self):
        if self.beneficial is not None and not self.eligible:
            raise ValueError("beneficial may only be set when eligible is true")
        return self


class AdjudicationOut(BaseModel):
    record_id: int


class ConsensusIn(BaseModel):
    case_id: str
    trial_id: str
    eligible: bool
    beneficial: bool | None = None
    note: str = ""

    @model_validator(mode="after")
    def _benefit_requires_eligible(self):
        if self.beneficial is not None and not self.eligible:
            raise ValueError("beneficial may only be set when eligible is true")
        return self


class DisagreementOut(BaseModel):
    case_id: str
    trial_id: str
    labels: list[RaterLabelOut]


class RaterLabelOut(BaseModel):
    rater_id: str
    eligible: bool
    beneficial: bool | None


class ConsensusOut(BaseModel):
    case_id: str
    trial_id: str
    eligible: bool
    beneficial: bool | None
    resolution: str


class OutreachCreateIn(BaseModel):
    case_id: str
    trial_id: str
    contact_role: str
    first_contact_date: date


class OutreachUpdateIn(BaseModel):
    status: str | None = None
    eligibility_confirmed: bool | None = None
    helpfulness: int | None = Field(default=None, ge=1, le=5)
    clarity: int | None = Field(default=None, ge=1, le=5)
    response_date: date | None = None


class OutreachOut(BaseModel):
    outreach_id: int
    case_id: str
    trial_id: str
    contact_role: str
    status: str
    eligibility_confirmed: bool | None
    helpfulness: int | None
    clarity: int | None
    first_contact_date: date
    response_date: date | None


class TickIn(BaseModel):
    today: date


class MetricsRowOut(BaseModel):
    method: str
    stratum: str
    n_cases: int
    p_at: dict[int, float]
    mrr: float
    hit_rate: dict[int, float]


class MetricsOut(BaseModel):
    n_labels: int
    rows: list[MetricsRowOut]


DisagreementOut.model_rebuild()
