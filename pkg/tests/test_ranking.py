import random

import pytest

from trialmatch.corpus import CriterionKind
from trialmatch.errors import ConfigError, ValidationError
from trialmatch.matching import CriterionVerdict, TrialMatchReport, VerdictLabel
from trialmatch.ranking import (
    RankingConfig,
    criterion_score,
    load_ranking,
    rank_trials,
    save_ranking,
)


def build_report(
    trial_id,
    inclusion_labels=(),
    exclusion_labels=(),
    relevance=50.0,
    eligibility=0.0,
    case_id="c",
):
    verdicts = [
        CriterionVerdict(case_id, trial_id, CriterionKind.Inclusion, i, label, (), "e")
        for i, label in enumerate(inclusion_labels)
    ] + [
        CriterionVerdict(case_id, trial_id, CriterionKind.Exclusion, i, label, (), "e")
        for i, label in enumerate(exclusion_labels)
    ]
    return TrialMatchReport(case_id, trial_id, tuple(verdicts), relevance, eligibility)


M, N, I, A = (
    VerdictLabel.Met,
    VerdictLabel.NotMet,
    VerdictLabel.InsufficientInformation,
    VerdictLabel.NotApplicable,
)


class TestCriterionScore:
    def test_perfect_match(self):
        report = build_report("T1", [M, M, M, M], [N, N])
        assert criterion_score(report) == pytest.approx(1.0)

    def test_exclusion_met_zeroes(self):
        report = build_report("T1", [M, M], [M])
        assert criterion_score(report) == 0.0

    def test_hand_formula_with_insufficient_exclusion(self):
        # 3 of 4 inclusions satisfied, 1 of 2 exclusions unverifiable:
        # 0.75 * (1 - 0.5 * 0.5) = 0.5625.
        report = build_report("T1", [M, M, M, N], [I, N])
        assert criterion_score(report) == pytest.approx(0.5625, abs=1e-12)

    def test_not_applicable_counts_as_satisfied(self):
        report = build_report("T1", [M, A], [])
        assert criterion_score(report) == pytest.approx(1.0)

    def test_no_inclusions_base_one(self):
        report = build_report("T1", [], [N])
        assert criterion_score(report) == pytest.approx(1.0)

    def test_soft_penalty_mode(self):
        report = build_report("T1", [M], [M])
        assert criterion_score(report, hard_penalty=False) == pytest.approx(1.0)


class TestRankTrials:
    def test_two_trials_ordered(self):
        reports = [
            build_report("T1", [M, M], [], relevance=80, eligibility=60),
            build_report("T2", [M, N], [], relevance=20, eligibility=-40),
        ]
        ranked = rank_trials(reports, RankingConfig())
        assert [(m.trial_id, m.rank) for m in ranked] == [("T1", 1), ("T2", 2)]

    def test_exact_tie_breaks_on_trial_id(self):
        reports = [
            build_report("T9", [M], [], relevance=50, eligibility=0),
            build_report("T1", [M], [], relevance=50, eligibility=0),
        ]
        ranked = rank_trials(reports, RankingConfig())
        assert [m.trial_id for m in ranked] == ["T1", "T9"]

    def test_truncates_to_top_k(self):
        reports = [
            build_report(f"T{i:02d}", [M], [], relevance=i * 5, eligibility=0) for i in range(15)
        ]
        ranked = rank_trials(reports, RankingConfig(top_k=10))
        assert len(ranked) == 10
        assert [m.rank for m in ranked] == list(range(1, 11))

    def test_normalization(self):
        report = build_report("T1", [M], [], relevance=100, eligibility=100)
        match = rank_trials([report], RankingConfig())[0]
        assert match.relevance_norm == pytest.approx(1.0)
        assert match.eligibility_norm == pytest.approx(1.0)
        assert match.final_score == pytest.approx(1.0)
        assert 0.0 <= match.final_score <= 1.0

    def test_bad_weights_rejected(self):
        with pytest.raises(ConfigError):
            RankingConfig(weights=(0.5, 0.5, 0.5))
        with pytest.raises(ConfigError):
            RankingConfig(weights=(-0.5, 1.0, 0.5))
        with pytest.raises(ConfigError):
            RankingConfig(top_k=0)

    def test_empty_reports_rejected(self):
        with pytest.raises(ValidationError):
            rank_trials([], RankingConfig())

    def test_weights_one_zero_zero_sorts_by_criterion_score(self):
        rng = random.Random(2)
        reports = []
        for i in range(12):
            labels = [rng.choice([M, N, I, A]) for _ in range(4)]
            reports.append(
                build_report(
                    f"T{i:02d}",
                    labels,
                    [rng.choice([N, I])],
                    relevance=rng.uniform(0, 100),
                    eligibility=rng.uniform(-100, 100),
                )
            )
        ranked = rank_trials(reports, RankingConfig(weights=(1.0, 0.0, 0.0), top_k=12))
        scores = [m.criterion_score for m in ranked]
        assert scores == sorted(scores, reverse=True)

    def test_permutation_invariance(self):
        rng = random.Random(4)
        reports = [
            build_report(f"T{i}", [rng.choice([M, N])], [], relevance=rng.uniform(0, 100))
            for i in range(8)
        ]
        base = rank_trials(reports, RankingConfig(top_k=8))
        shuffled = list(reports)
        rng.shuffle(shuffled)
        assert rank_trials(shuffled, RankingConfig(top_k=8)) == base

    def test_round_trip_files(self, tmp_path):
        reports = [build_report("T1", [M], []), build_report("T2", [N], [])]
        ranked = rank_trials(reports, RankingConfig())
        save_ranking(ranked, tmp_path, "c")
        assert load_ranking(tmp_path / "c.jsonl") == ranked
