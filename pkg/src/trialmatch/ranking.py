"""Aggregate match reports into a final per-case ranking.

Final score is a convex combination of the criterion-level evidence and the
adapter's normalized relevance/eligibility scores. A confirmed exclusion
zeroes the criterion component outright: such trials are categorically wrong
answers, not merely weak ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .corpus import CriterionKind
from .errors import ConfigError, ValidationError
from .jsonl import canonical_json, read_jsonl
from .matching import TrialMatchReport, VerdictLabel

DEFAULT_WEIGHTS = (0.5, 0.25, 0.25)
DEFAULT_TOP_K = 10
UNVERIFIED_EXCLUSION_DISCOUNT = 0.5


@dataclass(frozen=True)
class RankingConfig:
    weights: tuple[float, float, float] = DEFAULT_WEIGHTS  # (criteria, relevance, eligibility)
    top_k: int = DEFAULT_TOP_K
    exclusion_hard_penalty: bool = True

    def __post_init__(self):
        if len(self.weights) != 3 or any(w < 0 for w in self.weights):
            raise ConfigError("ranking weights must be three non-negative numbers")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ConfigError(f"ranking weights must sum to 1, got {sum(self.weights)!r}")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")


@dataclass(frozen=True)
class RankedMatch:
    case_id: str
    trial_id: str
    criterion_score: float
    relevance_norm: float
    eligibility_norm: float
    final_score: float
    rank: int  # 1-based, dense per case


def criterion_score_from_counts(
    n_inclusion: int,
    n_inclusion_satisfied: int,
    n_exclusion: int,
    n_exclusion_insufficient: int,
    any_exclusion_met: bool,
    *,
    hard_penalty: bool = True,
) -> float:
    """Criterion evidence in [0, 1] from verdict counts.

    base = satisfied inclusions / inclusions (1.0 when the trial has none);
    a confirmed exclusion zeroes it under the hard penalty, and every
    unverifiable exclusion discounts it by half its corpus share.
    """
    base = n_inclusion_satisfied / n_inclusion if n_inclusion else 1.0
    if hard_penalty and any_exclusion_met:
        return 0.0
    insufficient_fraction = n_exclusion_insufficient / n_exclusion if n_exclusion else 0.0
    return base * (1.0 - UNVERIFIED_EXCLUSION_DISCOUNT * insufficient_fraction)


def criterion_score(report: TrialMatchReport, *, hard_penalty: bool = True) -> float:
    inclusion = [v.label for v in report.verdicts if v.kind is CriterionKind.Inclusion]
    exclusion = [v.label for v in report.verdicts if v.kind is CriterionKind.Exclusion]
    return criterion_score_from_counts(
        n_inclusion=len(inclusion),
        n_inclusion_satisfied=sum(
            1 for v in inclusion if v in (VerdictLabel.Met, VerdictLabel.NotApplicable)
        ),
        n_exclusion=len(exclusion),
        n_exclusion_insufficient=sum(
            1 for v in exclusion if v is VerdictLabel.InsufficientInformation
        ),
        any_exclusion_met=VerdictLabel.Met in exclusion,
        hard_penalty=hard_penalty,
    )


def rank_trials(reports: list[TrialMatchReport], config: RankingConfig = RankingConfig()) -> list[RankedMatch]:
    """Score, sort (ties: ascending trial_id), truncate, and assign ranks."""
    if not reports:
        raise ValidationError("rank_trials requires at least one report")
    if abs(sum(config.weights) - 1.0) > 1e-9:
        raise ConfigError("ranking weights must sum to 1")
    w_c, w_r, w_e = config.weights

    scored = []
    for report in reports:
        c_score = criterion_score(report, hard_penalty=config.exclusion_hard_penalty)
        relevance_norm = report.relevance_score / 100.0
        eligibility_norm = (report.eligibility_score + 100.0) / 200.0
        final = w_c * c_score + w_r * relevance_norm + w_e * eligibility_norm
        scored.append((report.trial_id, c_score, relevance_norm, eligibility_norm, final, report.case_id))

    scored.sort(key=lambda row: (-row[4], row[0]))
    return [
        RankedMatch(
            case_id=case_id,
            trial_id=trial_id,
            criterion_score=c_score,
            relevance_norm=relevance_norm,
            eligibility_norm=eligibility_norm,
            final_score=final,
            rank=position,
        )
        for position, (trial_id, c_score, relevance_norm, eligibility_norm, final, case_id) in enumerate(
            scored[: config.top_k], start=1
        )
    ]


# --- ranked list persistence ---------------------------------------------------


def ranked_match_to_obj(match: RankedMatch) -> dict:
    return {
        "case_id": match.case_id,
        "trial_id": match.trial_id,
        "criterion_score": match.criterion_score,
        "relevance_norm": match.relevance_norm,
        "eligibility_norm": match.eligibility_norm,
        "final_score": match.final_score,
        "rank": match.rank,
    }


def save_ranking(matches: list[RankedMatch], directory: str | Path, case_id: str) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{case_id}.jsonl"
    with path.open("w", encoding="utf-8") as fh:
        for match in matches:
            fh.write(canonical_json(ranked_match_to_obj(match)) + "\n")
    return path


def load_ranking(path: str | Path) -> list[RankedMatch]:
    matches = []
    for _line_no, obj in read_jsonl(path):
        matches.append(
            RankedMatch(
                case_id=obj["case_id"],
                trial_id=obj["trial_id"],
                criterion_score=float(obj["criterion_score"]),
                relevance_norm=float(obj["relevance_norm"]),
                eligibility_norm=float(obj["eligibility_norm"]),
                final_score=float(obj["final_score"]),
                rank=int(obj["rank"]),
            )
        )
    return matches
