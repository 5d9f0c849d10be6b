from __future__ import annotations

from pathlib import Path

import pytest

from trialmatch.cases import PatientCase, parse_case
from trialmatch.corpus import TrialRecord, parse_trial

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS_PATH = FIXTURES / "corpus_20.jsonl"
CASES_PATH = FIXTURES / "cases_5.jsonl"
LABELS_PATH = FIXTURES / "labels.jsonl"


def make_trial(
    trial_id: str = "NCT00000001",
    brief_title: str = "A Study",
    phase: str = "Phase2",
    drugs_list: list[str] | None = None,
    diseases_list: list[str] | None = None,
    enrollment: int = 10,
    inclusion: str = "",
    exclusion: str = "",
    brief_summary: str = "",
    recruiting_status: str = "Recruiting",
    locations: list[str] | None = None,
    study_type: str = "Interventional",
    diseases: str | None = None,
) -> TrialRecord:
    diseases_list = diseases_list if diseases_list is not None else ["Condition"]
    return parse_trial(
        {
            "trial_id": trial_id,
            "brief_title": brief_title,
            "phase": phase,
            "drugs": ", ".join(drugs_list or []),
            "drugs_list": drugs_list or [],
            "diseases": diseases if diseases is not None else ", ".join(diseases_list),
            "diseases_list": diseases_list,
            "enrollment": enrollment,
            "inclusion_criteria_text": inclusion,
            "exclusion_criteria_text": exclusion,
            "brief_summary": brief_summary,
            "recruiting_status": recruiting_status,
            "locations": locations if locations is not None else ["US"],
            "study_type": study_type,
        }
    )


def make_case(
    case_id: str = "case_x",
    source: str = "CaseReport",
    sex: str = "Female",
    age_years: float | None = 40,
    note: str = "A patient with a documented condition. Symptoms persist.",
    posted_date: str | None = None,
) -> PatientCase:
    return parse_case(
        {
            "case_id": case_id,
            "source": source,
            "sex": sex,
            "age_years": age_years,
            "note": note,
            "posted_date": posted_date,
        }
    )


@pytest.fixture(scope="session")
def fixture_run(tmp_path_factory) -> Path:
    """One pipeline run over the committed fixtures, shared by read-only tests."""
    from trialmatch.pipeline import PipelineConfig, pipeline_run

    out = tmp_path_factory.mktemp("fixture_run") / "run"
    return pipeline_run(
        PipelineConfig(
            corpus_path=CORPUS_PATH,
            cases_path=CASES_PATH,
            labels_path=LABELS_PATH,
            out_dir=out,
        )
    )
