"""One-shot study pipeline: corpus -> retrieval -> matching -> ranking ->
baseline -> eval, with a manifest of input and per-stage output digests.

Under stub adapters every stage is a pure function of (inputs, config), so
reruns on identical inputs reproduce identical digests; the acceptance suite
relies on this. Stage outputs live in per-stage subdirectories of the run
directory and are retained on failure so expensive work (the verdict cache
in particular) survives a resume.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .baseline import BaselineResult, load_baseline_result, run_baseline, save_baseline_result
from .cases import PatientCase, load_cases
from .corpus import CorpusFilter, TrialRecord, filter_corpus, load_corpus, segment_criteria
from .errors import ConfigError, StageError, TrialMatchError
from .evalkit import load_labels, stratify_and_report
from .inference import HttpInferenceAdapter, InferenceAdapter
from .jsonl import canonical_json
from .matching import (
    TrialMatchReport,
    VerdictCache,
    judge_trial,
    load_reports,
    save_reports,
)
from .ranking import RankedMatch, RankingConfig, load_ranking, rank_trials, save_ranking
from .retrieval import (
    DEFAULT_CUTOFF,
    DEFAULT_INDEX_FIELDS,
    CandidateList,
    EmbeddingProvider,
    HashingEmbedder,
    HttpEmbeddingProvider,
    build_lexical_index,
    retrieve_case,
    save_candidates,
)
from .stub import StubInferenceAdapter

logger = logging.getLogger(__name__)

STAGES = ("corpus", "retrieval", "matching", "ranking", "baseline", "eval")


@dataclass(frozen=True)
class PipelineConfig:
    corpus_path: Path
    cases_path: Path
    out_dir: Path
    labels_path: Path | None = None
    cutoff: int = DEFAULT_CUTOFF
    top_k: int = 10
    weights: tuple[float, float, float] = (0.5, 0.25, 0.25)
    exclusion_hard_penalty: bool = True
    retrieval_adapter: str = "stub"
    matching_adapter: str = "stub"
    baseline_adapter: str = "stub"
    embedder: str = "stub"
    embedding_dim: int = 64
    index_fields: tuple[str, ...] = DEFAULT_INDEX_FIELDS
    require_recruiting: bool = True
    require_country: str | None = "US"
    parallel: int = 1

    def validate(self) -> None:
        for name in ("corpus_path", "cases_path"):
            path = getattr(self, name)
            if not Path(path).is_file():
                raise ConfigError(f"{name} does not exist: {path}")
        if self.labels_path is not None and not Path(self.labels_path).is_file():
            raise ConfigError(f"labels_path does not exist: {self.labels_path}")
        if self.cutoff < self.top_k:
            raise ConfigError(f"cutoff ({self.cutoff}) must be >= top_k ({self.top_k})")
        for name in ("retrieval_adapter", "matching_adapter", "baseline_adapter", "embedder"):
            if getattr(self, name) not in ("stub", "service"):
                raise ConfigError(f"{name} must be 'stub' or 'service'")
        if self.parallel < 1:
            raise ConfigError("parallel must be >= 1")
        RankingConfig(self.weights, self.top_k, self.exclusion_hard_penalty)

    def to_obj(self) -> dict:
        return {
            "corpus_path": str(Path(self.corpus_path).resolve()),
            "cases_path": str(Path(self.cases_path).resolve()),
            "out_dir": str(Path(self.out_dir).resolve()),
            "labels_path": str(Path(self.labels_path).resolve()) if self.labels_path else None,
            "cutoff": self.cutoff,
            "top_k": self.top_k,
            "weights": list(self.weights),
            "exclusion_hard_penalty": self.exclusion_hard_penalty,
            "retrieval_adapter": self.retrieval_adapter,
            "matching_adapter": self.matching_adapter,
            "baseline_adapter": self.baseline_adapter,
            "embedder": self.embedder,
            "embedding_dim": self.embedding_dim,
            "index_fields": list(self.index_fields),
            "require_recruiting": self.require_recruiting,
            "require_country": self.require_country,
        }

    @staticmethod
    def from_file(path: str | Path, **overrides) -> "PipelineConfig":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        obj.update(overrides)
        return PipelineConfig(
            corpus_path=Path(obj["corpus_path"]),
            cases_path=Path(obj["cases_path"]),
            out_dir=Path(obj["out_dir"]),
            labels_path=Path(obj["labels_path"]) if obj.get("labels_path") else None,
            cutoff=int(obj.get("cutoff", DEFAULT_CUTOFF)),
            top_k=int(obj.get("top_k", 10)),
            weights=tuple(obj.get("weights", (0.5, 0.25, 0.25))),
            exclusion_hard_penalty=bool(obj.get("exclusion_hard_penalty", True)),
            retrieval_adapter=obj.get("retrieval_adapter", "stub"),
            matching_adapter=obj.get("matching_adapter", "stub"),
            baseline_adapter=obj.get("baseline_adapter", "stub"),
            embedder=obj.get("embedder", "stub"),
            embedding_dim=int(obj.get("embedding_dim", 64)),
            index_fields=tuple(obj.get("index_fields", DEFAULT_INDEX_FIELDS)),
            require_recruiting=bool(obj.get("require_recruiting", True)),
            require_country=obj.get("require_country", "US"),
            parallel=int(obj.get("parallel", 1)),
        )

    def corpus_filter(self) -> CorpusFilter:
        return CorpusFilter(
            require_recruiting=self.require_recruiting,
            require_country=self.require_country,
        )


def make_adapter(kind: str, corpus: list[TrialRecord]) -> InferenceAdapter:
    if kind == "stub":
        return StubInferenceAdapter(corpus)
    return HttpInferenceAdapter()


def make_embedder(kind: str, dimension: int) -> EmbeddingProvider:
    if kind == "stub":
        return HashingEmbedder(dimension)
    return HttpEmbeddingProvider(dimension=dimension)


# --- digests -------------------------------------------------------------------


def digest_file(path: str | Path) -> str:
    hasher = hashlib.sha256()
    hasher.update(Path(path).read_bytes())
    return hasher.hexdigest()


def digest_directory(directory: str | Path) -> str:
    """Order-independent content digest: sorted relative names and bytes."""
    directory = Path(directory)
    hasher = hashlib.sha256()
    for path in sorted(p for p in directory.rglob("*") if p.is_file()):
        hasher.update(str(path.relative_to(directory)).encode("utf-8"))
        hasher.update(b"\x00")
        hasher.update(path.read_bytes())
        hasher.update(b"\x00")
    return hasher.hexdigest()


# --- stages --------------------------------------------------------------------


def stage_retrieve(
    cases: list[PatientCase],
    corpus: list[TrialRecord],
    adapter: InferenceAdapter,
    provider: EmbeddingProvider,
    out_dir: str | Path,
    *,
    cutoff: int = DEFAULT_CUTOFF,
    fields: tuple[str, ...] = DEFAULT_INDEX_FIELDS,
) -> dict[str, CandidateList]:
    index = build_lexical_index(corpus, fields)
    results: dict[str, CandidateList] = {}
    for case in sorted(cases, key=lambda c: c.case_id):
        candidates = retrieve_case(case, index, corpus, adapter, provider, cutoff=cutoff)
        save_candidates(candidates, out_dir)
        results[case.case_id] = candidates
    return results


def stage_match(
    cases: list[PatientCase],
    corpus_by_id: dict[str, TrialRecord],
    candidates: dict[str, CandidateList],
    adapter: InferenceAdapter,
    out_dir: str | Path,
    *,
    cache: VerdictCache | None = None,
    parallel: int = 1,
) -> dict[str, list[TrialMatchReport]]:
    reports_by_case: dict[str, list[TrialMatchReport]] = {}
    for case in sorted(cases, key=lambda c: c.case_id):
        reports: list[TrialMatchReport] = []
        for trial_id, _score in candidates[case.case_id].entries:
            trial = corpus_by_id[trial_id]
            criteria = segment_criteria(trial)
            if not criteria:
                logger.warning("trial '%s' has no criteria; skipped in matching", trial_id)
                continue
            reports.append(
                judge_trial(
                    case, trial, adapter, criteria=criteria, cache=cache, max_workers=parallel
                )
            )
        save_reports(reports, out_dir, case.case_id)
        reports_by_case[case.case_id] = reports
    return reports_by_case


def stage_rank(
    reports_by_case: dict[str, list[TrialMatchReport]],
    ranking_config: RankingConfig,
    out_dir: str | Path,
) -> dict[str, list[RankedMatch]]:
    rankings: dict[str, list[RankedMatch]] = {}
    for case_id in sorted(reports_by_case):
        ranked = rank_trials(reports_by_case[case_id], ranking_config)
        save_ranking(ranked, out_dir, case_id)
        rankings[case_id] = ranked
    return rankings


def stage_baseline(
    cases: list[PatientCase],
    corpus: list[TrialRecord],
    adapter: InferenceAdapter,
    out_dir: str | Path,
) -> dict[str, BaselineResult]:
    results: dict[str, BaselineResult] = {}
    for case in sorted(cases, key=lambda c: c.case_id):
        result = run_baseline(case, corpus, adapter)
        save_baseline_result(result, out_dir)
        results[case.case_id] = result
    return results


def stage_eval(
    rankings: dict[str, list[RankedMatch]],
    baseline_results: dict[str, BaselineResult],
    labels_path: str | Path,
    cases: list[PatientCase],
    out_dir: str | Path,
) -> None:
    labels = load_labels(labels_path)
    sources = {case.case_id: case.source for case in cases}
    runs = {
        "pipeline": {case_id: [m.trial_id for m in ranked] for case_id, ranked in rankings.items()},
        "baseline": {case_id: list(res.matched) for case_id, res in baseline_results.items()},
    }
    report = stratify_and_report(runs, labels, sources)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.csv").write_text(
        "\n".join(",".join(row) for row in report.to_csv_rows()) + "\n", encoding="utf-8"
    )
    (out_dir / "hitrate.csv").write_text(
        "\n".join(",".join(row) for row in report.hit_rate_csv_rows()) + "\n", encoding="utf-8"
    )
    (out_dir / "report.txt").write_text(report.to_text() + "\n", encoding="utf-8")


# --- the one-shot run ------------------------------------------------------------


def pipeline_run(config: PipelineConfig, *, progress=None) -> Path:
    """Execute every stage, writing outputs and a manifest under out_dir.

    Any stage failure aborts with the stage name; outputs of completed
    stages (and the verdict cache) are retained for resume.
    """
    config.validate()
    run_dir = Path(config.out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    manifest: dict = {
        "tool_version": __version__,
        "config": config.to_obj(),
        "inputs": {
            "corpus": digest_file(config.corpus_path),
            "cases": digest_file(config.cases_path),
            "labels": digest_file(config.labels_path) if config.labels_path else None,
        },
        "stages": {},
    }

    def checkpoint(stage: str, directory: Path | None) -> None:
        if directory is not None:
            manifest["stages"][stage] = {
                "digest": digest_directory(directory),
                "files": sum(1 for p in directory.rglob("*") if p.is_file()),
            }
        (run_dir / "manifest.json").write_text(
            canonical_json(manifest) + "\n", encoding="utf-8"
        )
        if progress:
            progress(stage)

    def run_stage(stage: str, fn):
        try:
            return fn()
        except TrialMatchError:
            raise
        except Exception as exc:  # pragma: no cover - defensive
            raise StageError(stage, str(exc)) from exc

    corpus = run_stage("corpus", lambda: load_corpus(config.corpus_path))
    working = filter_corpus(corpus, config.corpus_filter())
    if not working:
        raise StageError("corpus", "no records remain after filtering")
    cases = run_stage("corpus", lambda: load_cases(config.cases_path))
    checkpoint("corpus", None)

    adapter_retrieval = make_adapter(config.retrieval_adapter, working)
    adapter_matching = make_adapter(config.matching_adapter, working)
    adapter_baseline = make_adapter(config.baseline_adapter, working)
    embedder = make_embedder(config.embedder, config.embedding_dim)

    retrieval_dir = run_dir / "retrieval"
    candidates = run_stage(
        "retrieval",
        lambda: stage_retrieve(
            cases, working, adapter_retrieval, embedder, retrieval_dir,
            cutoff=config.cutoff, fields=config.index_fields,
        ),
    )
    checkpoint("retrieval", retrieval_dir)

    matching_dir = run_dir / "matching"
    cache = VerdictCache(run_dir / "cache" / "verdicts")
    corpus_by_id = {record.trial_id: record for record in working}
    reports = run_stage(
        "matching",
        lambda: stage_match(
            cases, corpus_by_id, candidates, adapter_matching, matching_dir,
            cache=cache, parallel=config.parallel,
        ),
    )
    checkpoint("matching", matching_dir)

    ranking_dir = run_dir / "ranking"
    ranking_config = RankingConfig(config.weights, config.top_k, config.exclusion_hard_penalty)
    rankings = run_stage("ranking", lambda: stage_rank(reports, ranking_config, ranking_dir))
    checkpoint("ranking", ranking_dir)

    baseline_dir = run_dir / "baseline"
    baseline_results = run_stage(
        "baseline", lambda: stage_baseline(cases, working, adapter_baseline, baseline_dir)
    )
    checkpoint("baseline", baseline_dir)

    if config.labels_path is not None:
        eval_dir = run_dir / "eval"
        run_stage(
            "eval",
            lambda: stage_eval(rankings, baseline_results, config.labels_path, cases, eval_dir),
        )
        checkpoint("eval", eval_dir)

    return run_dir


# --- loading a finished run --------------------------------------------------------


@dataclass
class RunData:
    run_dir: Path
    config: dict
    corpus_by_id: dict[str, TrialRecord]
    cases_by_id: dict[str, PatientCase]
    reports: dict[str, dict[str, TrialMatchReport]] = field(default_factory=dict)
    rankings: dict[str, list[RankedMatch]] = field(default_factory=dict)
    baseline: dict[str, BaselineResult] = field(default_factory=dict)


def load_run(run_dir: str | Path) -> RunData:
    """Load a run directory back into memory (for eval and the review API)."""
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.is_file():
        raise ConfigError(f"no manifest.json in {run_dir}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    config = manifest["config"]

    corpus = load_corpus(config["corpus_path"])
    cases = load_cases(config["cases_path"])
    data = RunData(
        run_dir=run_dir,
        config=config,
        corpus_by_id={r.trial_id: r for r in corpus},
        cases_by_id={c.case_id: c for c in cases},
    )
    matching_dir = run_dir / "matching"
    if matching_dir.is_dir():
        for path in sorted(matching_dir.glob("*.jsonl")):
            reports = load_reports(path)
            data.reports[path.stem] = {report.trial_id: report for report in reports}
    ranking_dir = run_dir / "ranking"
    if ranking_dir.is_dir():
        for path in sorted(ranking_dir.glob("*.jsonl")):
            data.rankings[path.stem] = load_ranking(path)
    baseline_dir = run_dir / "baseline"
    if baseline_dir.is_dir():
        for path in sorted(baseline_dir.glob("*.json")):
            data.baseline[path.stem] = load_baseline_result(path)
    return data
