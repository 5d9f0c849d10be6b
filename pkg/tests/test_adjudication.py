from datetime import date, timedelta

import pytest

from trialmatch.adjudication import (
    AdjudicationStore,
    ConsensusLabel,
    ContactRole,
    Disagreement,
    OutreachRecord,
    OutreachStatus,
    Resolution,
    outreach_tick,
)
from trialmatch.errors import ValidationError

PAIRS = {
    ("c1", "t1"): {"Inclusion:0", "Inclusion:1", "Exclusion:0"},
    ("c1", "t2"): set(),
    ("c2", "t1"): {"Inclusion:0"},
}


def fixed_clock():
    counter = iter(range(100000))
    return lambda: f"2024-09-01T00:00:{next(counter):02d}+00:00"


@pytest.fixture
def store(tmp_path):
    store = AdjudicationStore(tmp_path / "store", PAIRS, clock=fixed_clock())
    for rater in ("alice", "bob"):
        store.register_rater(rater)
    return store


class TestSubmission:
    def test_round_trip(self, store):
        record_id = store.submit_adjudication("c1", "t1", "alice", True, True, note="fits")
        assert record_id >= 1
        stored = store.latest_labels("c1", "t1")["alice"]
        assert (stored.eligible, stored.beneficial, stored.note) == (True, True, "fits")

    def test_benefit_requires_eligible(self, store):
        with pytest.raises(ValidationError, match="beneficial"):
            store.submit_adjudication("c1", "t1", "alice", False, True)

    def test_unknown_pair(self, store):
        with pytest.raises(ValidationError, match="unknown pair"):
            store.submit_adjudication("c9", "t9", "alice", True)

    def test_unregistered_rater(self, store):
        with pytest.raises(ValidationError, match="not registered"):
            store.submit_adjudication("c1", "t1", "mallory", True)

    def test_latest_wins_per_rater(self, store):
        store.submit_adjudication("c1", "t1", "alice", True)
        store.submit_adjudication("c1", "t1", "alice", False)
        assert store.latest_labels("c1", "t1")["alice"].eligible is False

    def test_override_must_reference_existing_criterion(self, store):
        store.submit_adjudication("c1", "t1", "alice", True, overrides={"Inclusion:1": "NotMet"})
        with pytest.raises(ValidationError, match="overrides"):
            store.submit_adjudication("c1", "t1", "bob", True, overrides={"Exclusion:9": "Met"})
        with pytest.raises(ValidationError, match="overrides"):
            store.submit_adjudication("c1", "t2", "bob", True, overrides={"Inclusion:0": "Met"})

    def test_pending_pairs_shrink(self, store):
        assert store.pending_pairs("alice") == sorted(PAIRS)
        store.submit_adjudication("c1", "t1", "alice", True)
        assert ("c1", "t1") not in store.pending_pairs("alice")
        assert ("c1", "t1") in store.pending_pairs("bob")


class TestConsensus:
    def test_fewer_than_two_is_pending(self, store):
        assert store.compute_consensus("c1", "t1") is None
        store.submit_adjudication("c1", "t1", "alice", True)
        assert store.compute_consensus("c1", "t1") is None

    def test_identical_labels_agree(self, store):
        store.submit_adjudication("c1", "t1", "alice", True, True)
        store.submit_adjudication("c1", "t1", "bob", True, True)
        result = store.compute_consensus("c1", "t1")
        assert isinstance(result, ConsensusLabel)
        assert result.resolution is Resolution.Agreed

    def test_differing_labels_marked(self, store):
        store.submit_adjudication("c1", "t1", "alice", True)
        store.submit_adjudication("c1", "t1", "bob", False)
        result = store.compute_consensus("c1", "t1")
        assert isinstance(result, Disagreement)
        assert {r for r, _, _ in result.labels} == {"alice", "bob"}
        assert store.disagreements() == [result]

    def test_discussion_resolution(self, store):
        store.submit_adjudication("c1", "t1", "alice", True)
        store.submit_adjudication("c1", "t1", "bob", False)
        store.submit_adjudication("c1", "t1", "consensus", True, True)
        result = store.compute_consensus("c1", "t1")
        assert isinstance(result, ConsensusLabel)
        assert result.resolution is Resolution.ResolvedByDiscussion
        assert result.beneficial is True

    def test_agreement_never_resolved_by_discussion(self, store):
        store.submit_adjudication("c1", "t1", "consensus", False)
        store.submit_adjudication("c1", "t1", "alice", True)
        store.submit_adjudication("c1", "t1", "bob", True)
        result = store.compute_consensus("c1", "t1")
        assert result.resolution is Resolution.Agreed
        assert result.eligible is True

    def test_consensus_labels_export(self, store):
        store.submit_adjudication("c1", "t1", "alice", True, True)
        store.submit_adjudication("c1", "t1", "bob", True, True)
        store.submit_adjudication("c2", "t1", "alice", False)
        labels = store.consensus_labels()
        assert len(labels) == 1
        assert labels[0].case_id == "c1" and labels[0].eligible


class TestEventLogReplay:
    def test_replay_reconstructs_state(self, tmp_path):
        directory = tmp_path / "store"
        store = AdjudicationStore(directory, PAIRS, clock=fixed_clock())
        store.register_rater("alice")
        store.register_rater("bob")
        store.submit_adjudication("c1", "t1", "alice", True, True)
        store.submit_adjudication("c1", "t1", "bob", False)
        record = store.create_outreach("c1", "t1", ContactRole.TrialOrganizer, date(2024, 9, 2))
        store.update_outreach(record.outreach_id, helpfulness=2, clarity=5)

        replayed = AdjudicationStore(directory, PAIRS, clock=fixed_clock())
        assert replayed.raters == store.raters
        assert replayed.latest_labels("c1", "t1") == store.latest_labels("c1", "t1")
        assert replayed.outreach_records() == store.outreach_records()

    def test_log_is_append_only(self, tmp_path):
        directory = tmp_path / "store"
        store = AdjudicationStore(directory, PAIRS, clock=fixed_clock())
        store.register_rater("alice")
        lines_before = (directory / "events.jsonl").read_text().count("\n")
        store.submit_adjudication("c1", "t1", "alice", True)
        lines_after = (directory / "events.jsonl").read_text().count("\n")
        assert lines_after == lines_before + 1


class TestOutreach:
    def make(self, status=OutreachStatus.Pending, first=date(2024, 9, 1)):
        return OutreachRecord(
            outreach_id=1,
            case_id="c1",
            trial_id="t1",
            contact_role=ContactRole.CaseAuthor,
            status=status,
            eligibility_confirmed=None,
            helpfulness=None,
            clarity=None,
            first_contact_date=first,
            response_date=None,
        )

    def test_day_six_unchanged(self):
        record = self.make()
        ticked = outreach_tick(record, record.first_contact_date + timedelta(days=6))
        assert ticked.status is OutreachStatus.Pending

    def test_day_seven_follow_up(self):
        record = self.make()
        ticked = outreach_tick(record, record.first_contact_date + timedelta(days=7))
        assert ticked.status is OutreachStatus.FollowUpSent

    def test_day_fourteen_unresponsive(self):
        record = self.make(status=OutreachStatus.FollowUpSent)
        ticked = outreach_tick(record, record.first_contact_date + timedelta(days=14))
        assert ticked.status is OutreachStatus.Unresponsive

    def test_idempotent_per_date(self):
        record = self.make()
        day7 = record.first_contact_date + timedelta(days=7)
        once = outreach_tick(record, day7)
        assert outreach_tick(once, day7) == once

    def test_closed_records_rejected(self):
        record = self.make(status=OutreachStatus.Unresponsive)
        with pytest.raises(ValidationError):
            outreach_tick(record, record.first_contact_date)

    def test_likert_bounds(self):
        with pytest.raises(ValidationError, match="helpfulness"):
            OutreachRecord(
                1, "c", "t", ContactRole.CaseAuthor, OutreachStatus.Pending,
                None, 6, None, date(2024, 9, 1), None,
            )

    def test_responded_requires_date(self):
        with pytest.raises(ValidationError, match="response_date"):
            OutreachRecord(
                1, "c", "t", ContactRole.CaseAuthor, OutreachStatus.Responded,
                None, None, None, date(2024, 9, 1), None,
            )

    def test_store_tick_applies_to_open_records(self, store):
        early = store.create_outreach("c1", "t1", ContactRole.CaseAuthor, date(2024, 9, 1))
        responded = store.create_outreach("c1", "t2", ContactRole.TrialOrganizer, date(2024, 9, 1))
        store.update_outreach(
            responded.outreach_id,
            status=OutreachStatus.Responded,
            response_date=date(2024, 9, 3),
        )
        store.tick_outreach(date(2024, 9, 8))
        assert store.get_outreach(early.outreach_id).status is OutreachStatus.FollowUpSent
        assert store.get_outreach(responded.outreach_id).status is OutreachStatus.Responded
        store.tick_outreach(date(2024, 9, 16))
        assert store.get_outreach(early.outreach_id).status is OutreachStatus.Unresponsive
