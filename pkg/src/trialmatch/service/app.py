"""Review API: pending pairs, adjudications, consensus, outreach, metrics.

The app wraps a finished pipeline run (for notes, trial records, and machine
verdicts) plus an adjudication store. Machine explanations are served
verbatim, and note sentences are pre-split server-side so the browser client
never re-segments text it highlights.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Header, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from ..adjudication import AdjudicationStore, ContactRole, OutreachStatus
from ..corpus import trial_to_obj, segment_criteria
from ..errors import ValidationError
from ..evalkit import stratify_and_report
from ..pipeline import RunData, load_run
from ..textproc import split_sentences
from . import schemas

API_PREFIX = "/v1"


def build_pair_registry(run: RunData) -> dict[tuple[str, str], set[str]]:
    """All reviewable pairs with the criterion keys overrides may reference."""
    pairs: dict[tuple[str, str], set[str]] = {}
    for case_id, ranked in run.rankings.items():
        for match in ranked:
            keys = set()
            report = run.reports.get(case_id, {}).get(match.trial_id)
            if report is not None:
                keys = {f"{v.kind.value}:{v.ordinal}" for v in report.verdicts}
            pairs[(case_id, match.trial_id)] = keys
    for case_id, result in run.baseline.items():
        for trial_id in result.matched:
            pairs.setdefault((case_id, trial_id), set())
    return pairs


def create_app(
    run_dir: str | Path,
    store_dir: str | Path,
    raters: tuple[str, ...] = (),
) -> FastAPI:
    run = load_run(run_dir)
    store = AdjudicationStore(store_dir, build_pair_registry(run))
    for rater in raters:
        store.register_rater(rater)

    app = FastAPI(title="trialmatch review API", version="1")
    app.state.run = run
    app.state.store = store

    @app.exception_handler(RequestValidationError)
    async def validation_handler(_request: Request, exc: RequestValidationError):
        details = [
            {"field": ".".join(str(part) for part in err["loc"]), "message": err["msg"]}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"detail": details})

    def require_pair(case_id: str, trial_id: str) -> None:
        if (case_id, trial_id) not in store.pairs:
            raise HTTPException(status_code=404, detail=f"unknown pair ({case_id}, {trial_id})")

    def pair_payload(case_id: str, trial_id: str) -> schemas.PendingPairOut:
        case = run.cases_by_id[case_id]
        trial = run.corpus_by_id[trial_id]
        report = run.reports.get(case_id, {}).get(trial_id)
        methods = []
        rank = None
        for match in run.rankings.get(case_id, []):
            if match.trial_id == trial_id:
                methods.append("pipeline")
                rank = match.rank
                break
        baseline_result = run.baseline.get(case_id)
        if baseline_result is not None and trial_id in baseline_result.matched:
            methods.append("baseline")
        criterion_texts = {
            (c.kind.value, c.ordinal): c.text for c in segment_criteria(trial)
        }
        verdicts = []
        if report is not None:
            verdicts = [
                schemas.VerdictOut(
                    kind=v.kind.value,
                    ordinal=v.ordinal,
                    criterion=criterion_texts.get((v.kind.value, v.ordinal), ""),
                    label=v.label.value,
                    relevant_sentences=list(v.relevant_sentences),
                    explanation=v.explanation,
                )
                for v in report.verdicts
            ]
        return schemas.PendingPairOut(
            case_id=case_id,
            trial_id=trial_id,
            methods=methods,
            rank=rank,
            note=case.note,
            note_sentences=split_sentences(case.note),
            trial=schemas.TrialOut(**trial_to_obj(trial)),
            verdicts=verdicts,
            relevance_score=report.relevance_score if report else None,
            eligibility_score=report.eligibility_score if report else None,
        )

    # --- raters ---

    @app.post(f"{API_PREFIX}/raters", status_code=201)
    def register_rater(body: schemas.RaterIn):
        store.register_rater(body.rater_id)
        return {"rater_id": body.rater_id}

    @app.get(f"{API_PREFIX}/raters/{{rater_id}}/pending", response_model=list[schemas.PendingPairOut])
    def pending(rater_id: str):
        if rater_id not in store.raters:
            raise HTTPException(status_code=404, detail=f"unknown rater '{rater_id}'")
        return [pair_payload(case_id, trial_id) for case_id, trial_id in store.pending_pairs(rater_id)]

    # --- adjudications ---

    @app.post(f"{API_PREFIX}/adjudications", response_model=schemas.AdjudicationOut, status_code=201)
    def submit_adjudication(body: schemas.AdjudicationIn, x_rater_id: str = Header()):
        require_pair(body.case_id, body.trial_id)
        if x_rater_id not in store.raters:
            raise HTTPException(status_code=404, detail=f"unknown rater '{x_rater_id}'")
        try:
            record_id = store.submit_adjudication(
                case_id=body.case_id,
                trial_id=body.trial_id,
                rater_id=x_rater_id,
                eligible=body.eligible,
                beneficial=body.beneficial,
                overrides=body.overrides,
                note=body.note,
            )
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return schemas.AdjudicationOut(record_id=record_id)

    @app.get(f"{API_PREFIX}/disagreements", response_model=list[schemas.DisagreementOut])
    def disagreements():
        return [
            schemas.DisagreementOut(
                case_id=d.case_id,
                trial_id=d.trial_id,
                labels=[
                    schemas.RaterLabelOut(rater_id=r, eligible=e, beneficial=b)
                    for r, e, b in d.labels
                ],
            )
            for d in store.disagreements()
        ]

    @app.post(f"{API_PREFIX}/consensus", response_model=schemas.ConsensusOut, status_code=201)
    def submit_consensus(body: schemas.ConsensusIn):
        require_pair(body.case_id, body.trial_id)
        try:
            store.submit_adjudication(
                case_id=body.case_id,
                trial_id=body.trial_id,
                rater_id="consensus",
                eligible=body.eligible,
                beneficial=body.beneficial,
                note=body.note,
            )
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        result = store.compute_consensus(body.case_id, body.trial_id)
        if not hasattr(result, "resolution"):
            # Fewer than two raters so far; echo the submitted resolution.
            return schemas.ConsensusOut(
                case_id=body.case_id, trial_id=body.trial_id,
                eligible=body.eligible, beneficial=body.beneficial,
                resolution="ResolvedByDiscussion",
            )
        return schemas.ConsensusOut(
            case_id=result.case_id,
            trial_id=result.trial_id,
            eligible=result.eligible,
            beneficial=result.beneficial,
            resolution=result.resolution.value,
        )

    # --- outreach ---

    def outreach_out(record) -> schemas.OutreachOut:
        return schemas.OutreachOut(
            outreach_id=record.outreach_id,
            case_id=record.case_id,
            trial_id=record.trial_id,
            contact_role=record.contact_role.value,
            status=record.status.value,
            eligibility_confirmed=record.eligibility_confirmed,
            helpfulness=record.helpfulness,
            clarity=record.clarity,
            first_contact_date=record.first_contact_date,
            response_date=record.response_date,
        )

    @app.get(f"{API_PREFIX}/outreach", response_model=list[schemas.OutreachOut])
    def list_outreach():
        return [outreach_out(r) for r in store.outreach_records()]

    @app.post(f"{API_PREFIX}/outreach", response_model=schemas.OutreachOut, status_code=201)
    def create_outreach(body: schemas.OutreachCreateIn):
        require_pair(body.case_id, body.trial_id)
        try:
            role = ContactRole(body.contact_role)
        except ValueError:
            raise HTTPException(
                status_code=400,
                detail=f"contact_role must be one of {[r.value for r in ContactRole]}",
            )
        record = store.create_outreach(body.case_id, body.trial_id, role, body.first_contact_date)
        return outreach_out(record)

    @app.post(f"{API_PREFIX}/outreach/tick", response_model=list[schemas.OutreachOut])
    def tick(body: schemas.TickIn):
        return [outreach_out(r) for r in store.tick_outreach(body.today)]

    @app.post(f"{API_PREFIX}/outreach/{{outreach_id}}", response_model=schemas.OutreachOut)
    def update_outreach(outreach_id: int, body: schemas.OutreachUpdateIn):
        if store.get_outreach(outreach_id) is None:
            raise HTTPException(status_code=404, detail=f"unknown outreach record {outreach_id}")
        changes: dict = {}
        if body.status is not None:
            try:
                changes["status"] = OutreachStatus(body.status)
            except ValueError:
                raise HTTPException(
                    status_code=400,
                    detail=f"status must be one of {[s.value for s in OutreachStatus]}",
                )
        for name in ("eligibility_confirmed", "helpfulness", "clarity", "response_date"):
            value = getattr(body, name)
            if value is not None:
                changes[name] = value
        try:
            record = store.update_outreach(outreach_id, **changes)
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return outreach_out(record)

    # --- live metrics ---

    @app.get(f"{API_PREFIX}/metrics", response_model=schemas.MetricsOut)
    def metrics():
        labels = store.consensus_labels()
        runs = {
            "pipeline": {
                case_id: [m.trial_id for m in ranked] for case_id, ranked in run.rankings.items()
            },
            "baseline": {
                case_id: list(result.matched) for case_id, result in run.baseline.items()
            },
        }
        sources = {case_id: case.source for case_id, case in run.cases_by_id.items()}
        report = stratify_and_report(runs, labels, sources)
        return schemas.MetricsOut(
            n_labels=len(labels),
            rows=[
                schemas.MetricsRowOut(
                    method=row.method,
                    stratum=row.stratum,
                    n_cases=row.n_cases,
                    p_at=row.p_at,
                    mrr=row.mrr,
                    hit_rate=row.hit_rate,
                )
                for row in report.rows
            ],
        )

    return app
