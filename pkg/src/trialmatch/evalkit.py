"""Eligibility/benefit metrics over gold labels, stratified by case source.

Conventions that matter for comparability: P@k keeps denominator k even when
a method returned fewer than k trials, and a case whose list contains no
eligible trial contributes reciprocal rank 0. Both penalize the short or
empty result lists the keyword baseline can produce. The overall stratum is
reported both macro (mean of source means) and micro (pooled over cases)
because the two disagree whenever sources differ in size.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

from .cases import CaseSource
from .errors import ValidationError
from .jsonl import read_jsonl, write_jsonl

logger = logging.getLogger(__name__)

PRECISION_KS = (1, 3, 5, 10)
HIT_RATE_TS = tuple(range(1, 11))

OVERALL_MACRO = "Overall (macro)"
OVERALL_MICRO = "Overall (micro)"


@dataclass(frozen=True)
class GoldLabel:
    case_id: str
    trial_id: str
    eligible: bool
    beneficial: bool | None  # present only when eligible
    rater_id: str

    def __post_init__(self):
        if self.beneficial is not None and not self.eligible:
            raise ValidationError(
                f"label ({self.case_id}, {self.trial_id}): beneficial requires eligible"
            )


def load_labels(path: str | Path) -> list[GoldLabel]:
    labels = []
    for line_no, obj in read_jsonl(path):
        try:
            labels.append(
                GoldLabel(
                    case_id=str(obj["case_id"]),
                    trial_id=str(obj["trial_id"]),
                    eligible=bool(obj["eligible"]),
                    beneficial=None if obj.get("beneficial") is None else bool(obj["beneficial"]),
                    rater_id=str(obj.get("rater_id", "")),
                )
            )
        except KeyError as exc:
            raise ValidationError(f"{path}:{line_no}: label missing field {exc}") from exc
    return labels


def dump_labels(labels: Iterable[GoldLabel], path: str | Path) -> None:
    write_jsonl(
        path,
        (
            {
                "case_id": lb.case_id,
                "trial_id": lb.trial_id,
                "eligible": lb.eligible,
                "beneficial": lb.beneficial,
                "rater_id": lb.rater_id,
            }
            for lb in labels
        ),
    )


def _pair_maps(labels: Iterable[GoldLabel]) -> tuple[dict, dict]:
    """Pair-keyed eligible/beneficial lookups; conflicting duplicates rejected."""
    eligible: dict[tuple[str, str], bool] = {}
    beneficial: dict[tuple[str, str], bool | None] = {}
    for label in labels:
        key = (label.case_id, label.trial_id)
        if key in eligible and (eligible[key], beneficial[key]) != (label.eligible, label.beneficial):
            raise ValidationError(f"conflicting labels for pair {key}")
        eligible[key] = label.eligible
        beneficial[key] = label.beneficial
    return eligible, beneficial


# --- core metrics -------------------------------------------------------------


def precision_at_k(ranked: Sequence[str], eligible: Mapping[str, bool], k: int) -> float:
    """Share of the top k that is eligible; denominator stays k for short lists."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    hits = 0
    for trial_id in ranked[:k]:
        if trial_id not in eligible:
            logger.warning("no gold label for trial '%s'; counting as not eligible", trial_id)
        if eligible.get(trial_id, False):
            hits += 1
    return hits / k


def mrr(
    rankings: Mapping[str, Sequence[str]],
    eligible: Mapping[tuple[str, str], bool],
) -> float:
    """Mean reciprocal rank of the first eligible trial; 0 when none appears."""
    if not rankings:
        raise ValidationError("mrr requires at least one case")
    total = 0.0
    for case_id, ranked in rankings.items():
        for position, trial_id in enumerate(ranked, start=1):
            if eligible.get((case_id, trial_id), False):
                total += 1.0 / position
                break
    return total / len(rankings)


def hit_rate(
    rankings: Mapping[str, Sequence[str]],
    beneficial: Mapping[tuple[str, str], bool | None],
    t: int,
) -> float:
    """Fraction of cases with a beneficial trial at rank <= t."""
    if not 1 <= t <= 10:
        raise ValidationError("t must be in [1, 10]")
    if not rankings:
        raise ValidationError("hit_rate requires at least one case")
    hits = 0
    for case_id, ranked in rankings.items():
        if any(beneficial.get((case_id, trial_id)) for trial_id in ranked[:t]):
            hits += 1
    return hits / len(rankings)


def agreement(labels_rater1: Iterable[GoldLabel], labels_rater2: Iterable[GoldLabel]) -> float:
    """Fraction of pairs with identical (eligible, beneficial) labels."""
    a = {(lb.case_id, lb.trial_id): (lb.eligible, lb.beneficial) for lb in labels_rater1}
    b = {(lb.case_id, lb.trial_id): (lb.eligible, lb.beneficial) for lb in labels_rater2}
    if a.keys() != b.keys():
        differing = sorted(a.keys() ^ b.keys())
        raise ValidationError(f"label key sets differ on pairs: {differing}")
    if not a:
        raise ValidationError("agreement requires at least one pair")
    same = sum(1 for key, value in a.items() if b[key] == value)
    return same / len(a)


# --- stratified report -----------------------------------------------------------


@dataclass(frozen=True)
class MetricsRow:
    method: str
    stratum: str
    n_cases: int
    p_at: dict[int, float]
    mrr: float
    hit_rate: dict[int, float]


@dataclass(frozen=True)
class MetricsReport:
    rows: list[MetricsRow]

    def to_csv_rows(self) -> list[list[str]]:
        header = (
            ["method", "stratum", "n_cases"]
            + [f"p_at_{k}" for k in PRECISION_KS]
            + ["mrr"]
            + [f"hit_rate_{t}" for t in HIT_RATE_TS]
        )
        out = [header]
        for row in self.rows:
            out.append(
                [row.method, row.stratum, str(row.n_cases)]
                + [f"{row.p_at[k]:.6f}" for k in PRECISION_KS]
                + [f"{row.mrr:.6f}"]
                + [f"{row.hit_rate[t]:.6f}" for t in HIT_RATE_TS]
            )
        return out

    def hit_rate_csv_rows(self) -> list[list[str]]:
        out = [["method", "stratum", "t", "hit_rate"]]
        for row in self.rows:
            for t in HIT_RATE_TS:
                out.append([row.method, row.stratum, str(t), f"{row.hit_rate[t]:.6f}"])
        return out

    def to_text(self) -> str:
        columns = ["method", "stratum", "N"] + [f"P@{k}" for k in PRECISION_KS] + ["MRR", "HR@10"]
        table = [columns]
        for row in self.rows:
            table.append(
                [row.method, row.stratum, str(row.n_cases)]
                + [f"{row.p_at[k]:.3f}" for k in PRECISION_KS]
                + [f"{row.mrr:.3f}", f"{row.hit_rate[10]:.3f}"]
            )
        widths = [max(len(line[i]) for line in table) for i in range(len(columns))]
        lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(line)) for line in table]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines)


def _metrics_for(
    rankings: Mapping[str, Sequence[str]],
    eligible: Mapping[tuple[str, str], bool],
    beneficial: Mapping[tuple[str, str], bool | None],
) -> tuple[dict[int, float], float, dict[int, float]]:
    if not rankings:
        raise ValidationError("metrics require at least one case")
    p_at = {}
    for k in PRECISION_KS:
        per_case = [
            precision_at_k(ranked, {t: eligible.get((case_id, t), False) for t in ranked}, k)
            for case_id, ranked in rankings.items()
        ]
        p_at[k] = sum(per_case) / len(per_case)
    rate = {t: hit_rate(rankings, beneficial, t) for t in HIT_RATE_TS}
    return p_at, mrr(rankings, eligible), rate


def stratify_and_report(
    runs: Mapping[str, Mapping[str, Sequence[str]]],
    labels: Iterable[GoldLabel],
    sources: Mapping[str, CaseSource],
    *,
    by_source: bool = True,
) -> MetricsReport:
    """Per-source metrics for each method plus macro and micro overall rows.

    ``runs`` maps method name to per-case ranked trial lists; every case must
    be mapped to a source.
    """
    eligible, beneficial = _pair_maps(labels)
    rows: list[MetricsRow] = []
    for method in sorted(runs):
        rankings = runs[method]
        missing = [case_id for case_id in rankings if case_id not in sources]
        if missing:
            raise ValidationError(f"cases without a source: {sorted(missing)}")

        source_rows: list[MetricsRow] = []
        for source in CaseSource:
            subset = {c: r for c, r in rankings.items() if sources[c] is source}
            if not subset:
                continue
            p_at, mrr_value, rate = _metrics_for(subset, eligible, beneficial)
            source_rows.append(MetricsRow(method, source.value, len(subset), p_at, mrr_value, rate))

        if by_source:
            rows.extend(source_rows)
        if source_rows:
            macro_p = {
                k: sum(r.p_at[k] for r in source_rows) / len(source_rows) for k in PRECISION_KS
            }
            macro_rate = {
                t: sum(r.hit_rate[t] for r in source_rows) / len(source_rows) for t in HIT_RATE_TS
            }
            macro_mrr = sum(r.mrr for r in source_rows) / len(source_rows)
            rows.append(
                MetricsRow(method, OVERALL_MACRO, len(rankings), macro_p, macro_mrr, macro_rate)
            )
        p_at, mrr_value, rate = _metrics_for(rankings, eligible, beneficial)
        rows.append(MetricsRow(method, OVERALL_MICRO, len(rankings), p_at, mrr_value, rate))
    return MetricsReport(rows)
