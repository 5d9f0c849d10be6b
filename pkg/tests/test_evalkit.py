from fractions import Fraction

import pytest

from trialmatch.cases import CaseSource
from trialmatch.errors import ValidationError
from trialmatch.evalkit import (
    GoldLabel,
    OVERALL_MACRO,
    OVERALL_MICRO,
    agreement,
    dump_labels,
    hit_rate,
    load_labels,
    mrr,
    precision_at_k,
    stratify_and_report,
)


def label(case_id, trial_id, eligible, beneficial=None, rater="r1"):
    return GoldLabel(case_id, trial_id, eligible, beneficial, rater)


class TestGoldLabel:
    def test_benefit_requires_eligible(self):
        with pytest.raises(ValidationError):
            label("c", "t", eligible=False, beneficial=True)

    def test_round_trip(self, tmp_path):
        labels = [
            label("c1", "t1", True, True),
            label("c1", "t2", True, False),
            label("c1", "t3", False),
        ]
        path = tmp_path / "labels.jsonl"
        dump_labels(labels, path)
        assert load_labels(path) == labels


class TestPrecisionAtK:
    def test_eq1_direct(self):
        ranked = [f"t{i}" for i in range(1, 11)]
        eligible = {"t1": True, "t2": True, "t4": True}
        assert precision_at_k(ranked, eligible, 5) == pytest.approx(0.6)

    def test_empty_list(self):
        assert precision_at_k([], {}, 5) == 0.0

    def test_short_list_keeps_denominator(self):
        ranked = [f"t{i}" for i in range(5)]
        eligible = {t: True for t in ranked}
        assert precision_at_k(ranked, eligible, 10) == pytest.approx(0.5)

    def test_missing_label_counts_not_eligible(self, caplog):
        with caplog.at_level("WARNING"):
            value = precision_at_k(["t1", "t2"], {"t1": True}, 2)
        assert value == pytest.approx(0.5)
        assert "t2" in caplog.text

    def test_k_validation(self):
        with pytest.raises(ValidationError):
            precision_at_k(["t1"], {}, 0)


class TestMrr:
    def test_single_case_rank_four(self):
        rankings = {"c1": ["t1", "t2", "t3", "t4"]}
        eligible = {("c1", "t4"): True}
        assert mrr(rankings, eligible) == pytest.approx(0.25)

    def test_two_cases_hand_computed(self):
        rankings = {"c1": ["a", "b", "c"], "c2": ["d", "e", "f"]}
        eligible = {("c1", "a"): True, ("c2", "f"): True}
        assert mrr(rankings, eligible) == pytest.approx(float(Fraction(2, 3)), abs=1e-12)

    def test_no_eligible_contributes_zero(self):
        rankings = {"c1": ["a"], "c2": ["b"]}
        eligible = {("c1", "a"): True}
        assert mrr(rankings, eligible) == pytest.approx(0.5)


class TestHitRate:
    def test_indicator_steps(self):
        rankings = {"A": [f"a{i}" for i in range(1, 11)], "B": [f"b{i}" for i in range(1, 11)]}
        beneficial = {("A", "a3"): True}
        assert hit_rate(rankings, beneficial, 2) == 0.0
        assert hit_rate(rankings, beneficial, 3) == pytest.approx(0.5)
        assert hit_rate(rankings, beneficial, 10) == pytest.approx(0.5)

    def test_all_rank_one(self):
        rankings = {"A": ["a1"], "B": ["b1"]}
        beneficial = {("A", "a1"): True, ("B", "b1"): True}
        assert hit_rate(rankings, beneficial, 1) == 1.0

    def test_t_bounds(self):
        with pytest.raises(ValidationError):
            hit_rate({"A": []}, {}, 0)
        with pytest.raises(ValidationError):
            hit_rate({"A": []}, {}, 11)


class TestAgreement:
    def test_nine_of_ten(self):
        r1 = [label("c", f"t{i}", True, None, "r1") for i in range(10)]
        r2 = [label("c", f"t{i}", i != 0, None, "r2") for i in range(10)]
        assert agreement(r1, r2) == pytest.approx(0.9)

    def test_identical_sets(self):
        r1 = [label("c", "t1", True, True), label("c", "t2", False)]
        r2 = [label("c", "t1", True, True, "r2"), label("c", "t2", False, None, "r2")]
        assert agreement(r1, r2) == 1.0

    def test_disjoint_keys_error_lists_pairs(self):
        r1 = [label("c", "t1", True)]
        r2 = [label("c", "t2", True)]
        with pytest.raises(ValidationError) as err:
            agreement(r1, r2)
        assert "t1" in str(err.value) and "t2" in str(err.value)

    def test_benefit_distinguishes(self):
        r1 = [label("c", "t1", True, True)]
        r2 = [label("c", "t1", True, False)]
        assert agreement(r1, r2) == 0.0


class TestStratify:
    def make_inputs(self):
        rankings = {
            "c1": ["t1", "t2"],
            "c2": ["t3", "t4"],
        }
        labels = [
            label("c1", "t1", True, True),
            label("c1", "t2", False),
            label("c2", "t3", False),
            label("c2", "t4", True, None),
        ]
        sources = {"c1": CaseSource.CaseReport, "c2": CaseSource.CaseReport}
        return {"m": rankings}, labels, sources

    def test_single_source_overall_equals_source_row(self):
        runs, labels, sources = self.make_inputs()
        report = stratify_and_report(runs, labels, sources)
        by_stratum = {row.stratum: row for row in report.rows}
        source_row = by_stratum["CaseReport"]
        for overall in (OVERALL_MACRO, OVERALL_MICRO):
            assert by_stratum[overall].p_at == source_row.p_at
            assert by_stratum[overall].mrr == source_row.mrr
            assert by_stratum[overall].hit_rate == source_row.hit_rate

    def test_hand_computed_fixture(self):
        # Two cases: c1 eligible at rank 1 (beneficial), c2 at rank 2.
        # P@1 = (1+0)/2; MRR = (1 + 1/2)/2 = 0.75; HitRate@1 = 0.5.
        runs, labels, sources = self.make_inputs()
        report = stratify_and_report(runs, labels, sources)
        row = next(r for r in report.rows if r.stratum == OVERALL_MICRO)
        assert row.p_at[1] == pytest.approx(0.5, abs=1e-12)
        assert row.mrr == pytest.approx(0.75, abs=1e-12)
        assert row.hit_rate[1] == pytest.approx(0.5, abs=1e-12)
        assert row.hit_rate[10] == pytest.approx(0.5, abs=1e-12)

    def test_macro_differs_from_micro_on_unbalanced_sources(self):
        runs = {
            "m": {
                "c1": ["t1"],
                "c2": ["t2"],
                "c3": ["t3"],
            }
        }
        labels = [
            label("c1", "t1", True),
            label("c2", "t2", False),
            label("c3", "t3", False),
        ]
        sources = {
            "c1": CaseSource.CaseReport,
            "c2": CaseSource.RedditAskDocs,
            "c3": CaseSource.RedditAskDocs,
        }
        report = stratify_and_report(runs, labels, sources)
        rows = {row.stratum: row for row in report.rows}
        assert rows[OVERALL_MACRO].p_at[1] == pytest.approx(0.5)  # (1 + 0)/2 sources
        assert rows[OVERALL_MICRO].p_at[1] == pytest.approx(1 / 3)  # pooled over 3 cases

    def test_missing_source_rejected(self):
        runs, labels, _ = self.make_inputs()
        with pytest.raises(ValidationError):
            stratify_and_report(runs, labels, {"c1": CaseSource.CaseReport})

    def test_conflicting_labels_rejected(self):
        runs, labels, sources = self.make_inputs()
        labels.append(label("c1", "t1", False, None, "r9"))
        with pytest.raises(ValidationError):
            stratify_and_report(runs, labels, sources)

    def test_csv_shape(self):
        runs, labels, sources = self.make_inputs()
        report = stratify_and_report(runs, labels, sources)
        rows = report.to_csv_rows()
        assert rows[0][:3] == ["method", "stratum", "n_cases"]
        assert all(len(row) == len(rows[0]) for row in rows)
        curve = report.hit_rate_csv_rows()
        assert curve[0] == ["method", "stratum", "t", "hit_rate"]
        assert len(curve) == 1 + 10 * len(report.rows)
