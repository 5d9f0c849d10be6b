"""Criterion-by-criterion judging of a patient against candidate trials.

judge_criterion calls are independent and may run concurrently; the on-disk
verdict cache is the only shared mutable state and serializes its writes.
Malformed adapter replies are retried once and then degraded to
InsufficientInformation with the raw reply preserved, so a flaky model can
never abort a run.
"""

from __future__ import annotations

import hashlib
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .cases import PatientCase
from .corpus import Criterion, CriterionKind, TrialRecord, segment_criteria
from .errors import AdapterError, ReplyFormatError, ValidationError
from .inference import (
    LABEL_INSUFFICIENT,
    LABEL_MET,
    LABEL_NOT_APPLICABLE,
    LABEL_NOT_MET,
    InferenceAdapter,
    criterion_verdict_prompt,
    parse_scores_reply,
    parse_verdict_reply,
    trial_scores_prompt,
)
from .jsonl import canonical_json, read_jsonl
from .textproc import split_sentences

RELEVANCE_BOUNDS = (0.0, 100.0)
ELIGIBILITY_BOUNDS = (-100.0, 100.0)


class VerdictLabel(str, Enum):
    Met = "Met"
    NotMet = "NotMet"
    InsufficientInformation = "InsufficientInformation"
    NotApplicable = "NotApplicable"


_TOKEN_TO_LABEL = {
    LABEL_MET: VerdictLabel.Met,
    LABEL_NOT_MET: VerdictLabel.NotMet,
    LABEL_INSUFFICIENT: VerdictLabel.InsufficientInformation,
    LABEL_NOT_APPLICABLE: VerdictLabel.NotApplicable,
}


class Eligibility(str, Enum):
    Eligible = "Eligible"
    Ineligible = "Ineligible"
    Indeterminate = "Indeterminate"


@dataclass(frozen=True)
class CriterionVerdict:
    case_id: str
    trial_id: str
    kind: CriterionKind
    ordinal: int
    label: VerdictLabel
    relevant_sentences: tuple[int, ...]
    explanation: str


@dataclass(frozen=True)
class TrialMatchReport:
    case_id: str
    trial_id: str
    verdicts: tuple[CriterionVerdict, ...]
    relevance_score: float  # [0, 100]
    eligibility_score: float  # [-100, 100]


def _clamp(value: float, bounds: tuple[float, float]) -> float:
    low, high = bounds
    return min(max(value, low), high)


# --- verdict cache -----------------------------------------------------------


class VerdictCache:
    """Append-only per-case verdict files keyed by criterion and adapter.

    Entries also carry a digest of the (note, criterion text) pair so edits
    to fixture content under an unchanged id are treated as cache misses.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._entries: dict[tuple, CriterionVerdict] = {}
        for path in sorted(self.directory.glob("*.jsonl")):
            for _line_no, obj in read_jsonl(path):
                self._entries[self._key_from_obj(obj)] = _verdict_from_obj(obj["verdict"])

    @staticmethod
    def _key_from_obj(obj: dict) -> tuple:
        return (
            obj["case_id"],
            obj["trial_id"],
            obj["kind"],
            obj["ordinal"],
            obj["adapter"],
            obj["content_digest"],
        )

    @staticmethod
    def key(case: PatientCase, criterion: Criterion, adapter_name: str) -> tuple:
        digest = hashlib.sha256(
            f"{case.note}\x00{criterion.text}".encode("utf-8")
        ).hexdigest()[:16]
        return (case.case_id, criterion.trial_id, criterion.kind.value, criterion.ordinal, adapter_name, digest)

    def get(self, key: tuple) -> CriterionVerdict | None:
        return self._entries.get(key)

    def put(self, key: tuple, verdict: CriterionVerdict) -> None:
        case_id = key[0]
        line = canonical_json(
            {
                "case_id": key[0],
                "trial_id": key[1],
                "kind": key[2],
                "ordinal": key[3],
                "adapter": key[4],
                "content_digest": key[5],
                "verdict": _verdict_to_obj(verdict),
            }
        )
        with self._lock:
            self._entries[key] = verdict
            with (self.directory / f"{case_id}.jsonl").open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")


# --- judging -----------------------------------------------------------------


def _complete_once_retried(adapter: InferenceAdapter, system: str, user: str) -> str:
    """One idempotent transport retry; adapters are called at temperature 0."""
    try:
        return adapter.complete(system, user, temperature=0.0)
    except AdapterError:
        return adapter.complete(system, user, temperature=0.0)


def judge_criterion(
    case: PatientCase,
    criterion: Criterion,
    adapter: InferenceAdapter,
    *,
    sentences: list[str] | None = None,
    cache: VerdictCache | None = None,
) -> CriterionVerdict:
    """Judge a single criterion against a patient note.

    The adapter reply is parsed into a CriterionVerdict; a malformed reply is
    retried once and then mapped to InsufficientInformation with the raw
    reply preserved in the explanation. Transport failures (after one retry)
    raise AdapterError naming the case, trial, and criterion.
    """
    cache_key = VerdictCache.key(case, criterion, adapter.name) if cache else None
    if cache is not None and cache_key is not None:
        hit = cache.get(cache_key)
        if hit is not None:
            return hit

    if sentences is None:
        sentences = split_sentences(case.note)
    system, user = criterion_verdict_prompt(
        sentences, criterion.kind.value, criterion.text, case.age_years, case.sex.value
    )

    try:
        reply = _complete_once_retried(adapter, system, user)
        try:
            token, sentence_idx, explanation = parse_verdict_reply(reply, len(sentences))
            label = _TOKEN_TO_LABEL[token]
        except ReplyFormatError:
            reply = _complete_once_retried(adapter, system, user)
            try:
                token, sentence_idx, explanation = parse_verdict_reply(reply, len(sentences))
                label = _TOKEN_TO_LABEL[token]
            except ReplyFormatError:
                label = VerdictLabel.InsufficientInformation
                sentence_idx = ()
                explanation = reply if reply.strip() else "(empty adapter reply)"
    except AdapterError as exc:
        raise AdapterError(
            f"criterion judgment failed for case '{case.case_id}', trial "
            f"'{criterion.trial_id}', {criterion.kind.value.lower()} criterion "
            f"{criterion.ordinal}: {exc}"
        ) from exc

    verdict = CriterionVerdict(
        case_id=case.case_id,
        trial_id=criterion.trial_id,
        kind=criterion.kind,
        ordinal=criterion.ordinal,
        label=label,
        relevant_sentences=tuple(sentence_idx),
        explanation=explanation,
    )
    if cache is not None and cache_key is not None:
        cache.put(cache_key, verdict)
    return verdict


def judge_trial(
    case: PatientCase,
    trial: TrialRecord,
    adapter: InferenceAdapter,
    *,
    criteria: list[Criterion] | None = None,
    cache: VerdictCache | None = None,
    max_workers: int = 1,
) -> TrialMatchReport:
    """Judge every criterion of a trial and attach aggregate scores.

    Criterion calls run concurrently up to ``max_workers``; verdict order in
    the report follows criterion order regardless of completion order. The
    relevance/eligibility scores come from one aggregate adapter call and are
    clamped to their bounds; if that reply is malformed twice the scores
    degrade to neutral (0, 0).
    """
    if criteria is None:
        criteria = segment_criteria(trial)
    if not criteria:
        raise ValidationError(f"trial '{trial.trial_id}' has no criteria to judge")

    sentences = split_sentences(case.note)

    def judge(criterion: Criterion) -> CriterionVerdict:
        return judge_criterion(case, criterion, adapter, sentences=sentences, cache=cache)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            verdicts = tuple(pool.map(judge, criteria))
    else:
        verdicts = tuple(judge(c) for c in criteria)

    verdict_summary = [
        {"kind": c.kind.value, "criterion": c.text, "label": v.label.value}
        for c, v in zip(criteria, verdicts)
    ]
    system, user = trial_scores_prompt(case.note, verdict_summary)
    try:
        reply = _complete_once_retried(adapter, system, user)
        try:
            relevance, eligibility = parse_scores_reply(reply)
        except ReplyFormatError:
            reply = _complete_once_retried(adapter, system, user)
            try:
                relevance, eligibility = parse_scores_reply(reply)
            except ReplyFormatError:
                relevance, eligibility = 0.0, 0.0
    except AdapterError as exc:
        raise AdapterError(
            f"trial scoring failed for case '{case.case_id}', trial '{trial.trial_id}': {exc}"
        ) from exc

    return TrialMatchReport(
        case_id=case.case_id,
        trial_id=trial.trial_id,
        verdicts=verdicts,
        relevance_score=_clamp(relevance, RELEVANCE_BOUNDS),
        eligibility_score=_clamp(eligibility, ELIGIBILITY_BOUNDS),
    )


def classify_eligibility(report: TrialMatchReport) -> Eligibility:
    """Strict eligibility: all inclusions satisfied, no exclusion confirmed.

    An unverifiable exclusion never makes a patient ineligible on its own;
    it blocks eligibility only when some inclusion is also unconfirmed.
    """
    inclusion = [v.label for v in report.verdicts if v.kind is CriterionKind.Inclusion]
    exclusion = [v.label for v in report.verdicts if v.kind is CriterionKind.Exclusion]

    if VerdictLabel.NotMet in inclusion or VerdictLabel.Met in exclusion:
        return Eligibility.Ineligible
    inclusions_ok = all(v in (VerdictLabel.Met, VerdictLabel.NotApplicable) for v in inclusion)
    exclusions_ok = all(
        v in (VerdictLabel.NotMet, VerdictLabel.NotApplicable, VerdictLabel.InsufficientInformation)
        for v in exclusion
    )
    if inclusions_ok and exclusions_ok:
        return Eligibility.Eligible
    return Eligibility.Indeterminate


# --- report persistence --------------------------------------------------------


def _verdict_to_obj(verdict: CriterionVerdict) -> dict:
    return {
        "case_id": verdict.case_id,
        "trial_id": verdict.trial_id,
        "kind": verdict.kind.value,
        "ordinal": verdict.ordinal,
        "label": verdict.label.value,
        "relevant_sentences": list(verdict.relevant_sentences),
        "explanation": verdict.explanation,
    }


def _verdict_from_obj(obj: dict) -> CriterionVerdict:
    return CriterionVerdict(
        case_id=obj["case_id"],
        trial_id=obj["trial_id"],
        kind=CriterionKind(obj["kind"]),
        ordinal=int(obj["ordinal"]),
        label=VerdictLabel(obj["label"]),
        relevant_sentences=tuple(int(i) for i in obj["relevant_sentences"]),
        explanation=obj["explanation"],
    )


def report_to_obj(report: TrialMatchReport) -> dict:
    return {
        "case_id": report.case_id,
        "trial_id": report.trial_id,
        "relevance_score": report.relevance_score,
        "eligibility_score": report.eligibility_score,
        "verdicts": [_verdict_to_obj(v) for v in report.verdicts],
    }


def report_from_obj(obj: dict) -> TrialMatchReport:
    return TrialMatchReport(
        case_id=obj["case_id"],
        trial_id=obj["trial_id"],
        verdicts=tuple(_verdict_from_obj(v) for v in obj["verdicts"]),
        relevance_score=float(obj["relevance_score"]),
        eligibility_score=float(obj["eligibility_score"]),
    )


def save_reports(reports: list[TrialMatchReport], directory: str | Path, case_id: str) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{case_id}.jsonl"
    with path.open("w", encoding="utf-8") as fh:
        for report in reports:
            fh.write(canonical_json(report_to_obj(report)) + "\n")
    return path


def load_reports(path: str | Path) -> list[TrialMatchReport]:
    return [report_from_obj(obj) for _line_no, obj in read_jsonl(path)]
