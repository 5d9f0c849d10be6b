"""Candidate retrieval: keywords, lexical BM25, semantic cosine, rank fusion.

The corpus is small enough (~23k trials) that both searches are exact scans;
fusion is reciprocal-rank based so the incomparable BM25 and cosine scales
never need calibrating against each other. Ties break on ascending trial_id
everywhere for reproducibility.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import httpx
import numpy as np

from .cases import PatientCase
from .corpus import TrialRecord
from .errors import AdapterError, ConfigError, ValidationError
from .inference import (
    InferenceAdapter,
    keywords_prompt,
    parse_keyword_reply,
    summary_prompt,
)
from .textproc import tokenize

BM25_K1 = 1.2
BM25_B = 0.75

INDEXABLE_FIELDS = (
    "brief_title",
    "diseases",
    "diseases_list",
    "drugs_list",
    "brief_summary",
    "inclusion_criteria_text",
    "exclusion_criteria_text",
)
DEFAULT_INDEX_FIELDS = ("brief_title", "diseases_list", "brief_summary", "inclusion_criteria_text")

MAX_KEYWORDS = 32
RRF_K = 60
DEFAULT_CUTOFF = 1000


def document_text(record: TrialRecord, fields: Sequence[str] = DEFAULT_INDEX_FIELDS) -> str:
    """Concatenate the selected record fields into one searchable text."""
    parts: list[str] = []
    for field in fields:
        if field not in INDEXABLE_FIELDS:
            raise ConfigError(f"'{field}' is not an indexable field (choose from {INDEXABLE_FIELDS})")
        value = getattr(record, field)
        parts.append(" ".join(value) if isinstance(value, tuple) else value)
    return " ".join(parts)


# --- lexical (BM25) ---------------------------------------------------------


@dataclass(frozen=True)
class LexicalIndex:
    postings: dict[str, tuple[tuple[str, int], ...]]  # term -> ((trial_id, tf), ...)
    doc_lengths: dict[str, int]
    avgdl: float
    n_docs: int
    fields: tuple[str, ...]


def build_lexical_index(
    records: Sequence[TrialRecord], fields: Sequence[str] = DEFAULT_INDEX_FIELDS
) -> LexicalIndex:
    if not fields:
        raise ConfigError("field selection for the lexical index must be non-empty")
    if not records:
        raise ValidationError("cannot index an empty corpus")
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for record in sorted(records, key=lambda r: r.trial_id):
        tokens = tokenize(document_text(record, fields))
        doc_lengths[record.trial_id] = len(tokens)
        for term, tf in sorted(Counter(tokens).items()):
            postings.setdefault(term, []).append((record.trial_id, tf))
    avgdl = sum(doc_lengths.values()) / len(doc_lengths)
    frozen = {term: tuple(entries) for term, entries in postings.items()}
    return LexicalIndex(frozen, doc_lengths, avgdl, len(doc_lengths), tuple(fields))


def bm25_idf(index: LexicalIndex, term: str) -> float:
    df = len(index.postings.get(term, ()))
    return math.log(1.0 + (index.n_docs - df + 0.5) / (df + 0.5))


def bm25_score(
    index: LexicalIndex,
    terms: Sequence[str],
    trial_id: str,
    k1: float = BM25_K1,
    b: float = BM25_B,
) -> float:
    """Okapi BM25 score of one document against a bag of query terms.

    Terms absent from the document contribute 0; the trial must be indexed.
    """
    if trial_id not in index.doc_lengths:
        raise ValidationError(f"trial '{trial_id}' is not in the lexical index")
    dl = index.doc_lengths[trial_id]
    norm = k1 * (1.0 - b + b * dl / index.avgdl)
    score = 0.0
    for term in terms:
        tf = 0
        for doc_id, doc_tf in index.postings.get(term, ()):
            if doc_id == trial_id:
                tf = doc_tf
                break
        if tf == 0:
            continue
        score += bm25_idf(index, term) * tf * (k1 + 1.0) / (tf + norm)
    return score


def bm25_rank(index: LexicalIndex, terms: Sequence[str]) -> list[tuple[str, float]]:
    """All documents containing at least one query term, best first."""
    seen: set[str] = set()
    unique_terms: list[str] = []
    for term in terms:
        if term not in seen:
            seen.add(term)
            unique_terms.append(term)
    candidates: set[str] = set()
    for term in unique_terms:
        candidates.update(doc_id for doc_id, _ in index.postings.get(term, ()))
    scored = [(doc_id, bm25_score(index, unique_terms, doc_id)) for doc_id in candidates]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored


# --- semantic (embedding cosine) ---------------------------------------------


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Deterministic text-to-vector contract: same text, same vector."""

    dimension: int

    def embed(self, text: str) -> np.ndarray:
        ...


class HashingEmbedder:
    """Deterministic test embedder: tokens hashed into signed buckets.

    Uses sha256 so vectors are stable across processes and platforms.
    """

    def __init__(self, dimension: int = 64):
        if dimension <= 0:
            raise ConfigError("embedding dimension must be positive")
        self.dimension = dimension
        self.name = f"hashing:{dimension}"

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float64)
        for token, tf in Counter(tokenize(text)).items():
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:4], "big") % self.dimension
            sign = 1.0 if digest[4] & 1 else -1.0
            vec[bucket] += sign * tf
        return vec


ENV_EMBEDDING_URL = "TRIALMATCH_EMBEDDING_URL"
ENV_EMBEDDING_TOKEN = "TRIALMATCH_EMBEDDING_TOKEN"


class HttpEmbeddingProvider:
    """Embedding service client: POST {"texts": [...]} -> {"vectors": [[...]]}."""

    def __init__(self, url: str | None = None, token: str | None = None, dimension: int = 768, timeout: float = 60.0):
        self.url = url or os.environ.get(ENV_EMBEDDING_URL)
        if not self.url:
            raise AdapterError(f"no embedding endpoint configured (set {ENV_EMBEDDING_URL})")
        self.token = token if token is not None else os.environ.get(ENV_EMBEDDING_TOKEN)
        self.dimension = dimension
        self.timeout = timeout
        self.name = f"service:{self.url}"

    def embed(self, text: str) -> np.ndarray:
        headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
        try:
            response = httpx.post(self.url, json={"texts": [text]}, headers=headers, timeout=self.timeout)
            response.raise_for_status()
            vectors = response.json()["vectors"]
        except (httpx.HTTPError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise AdapterError(f"embedding service call failed: {exc}") from exc
        return np.asarray(vectors[0], dtype=np.float64)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; defined as 0 when either vector has zero norm."""
    norm = float(np.linalg.norm(a)) * float(np.linalg.norm(b))
    if norm == 0.0:
        return 0.0
    return float(np.dot(a, b)) / norm


def semantic_search(
    provider: EmbeddingProvider,
    text: str,
    records: Sequence[TrialRecord],
    top_m: int,
    fields: Sequence[str] = DEFAULT_INDEX_FIELDS,
) -> list[tuple[str, float]]:
    """Exact cosine scan of the case text against every record's field text."""
    if provider.dimension <= 0:
        raise ConfigError("embedding provider dimension must be positive")
    query_vec = provider.embed(text)
    scored = [
        (record.trial_id, cosine(query_vec, provider.embed(document_text(record, fields))))
        for record in records
    ]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:top_m]


# --- keyword generation -------------------------------------------------------


class KeywordOrigin(str, Enum):
    InferenceService = "InferenceService"
    Stub = "Stub"


@dataclass(frozen=True)
class KeywordSet:
    case_id: str
    keywords: tuple[str, ...]
    origin: KeywordOrigin


def _dedupe_casefold(words: Sequence[str]) -> list[str]:
    seen: set[str] = set()
    out: list[str] = []
    for word in words:
        folded = word.casefold()
        if folded not in seen:
            seen.add(folded)
            out.append(word)
    return out


def generate_keywords(
    case: PatientCase,
    adapter: InferenceAdapter,
    *,
    fallback: InferenceAdapter | None = None,
    include_summary: bool = False,
) -> KeywordSet:
    """Ask the adapter for up to 32 search keywords for a patient note.

    With ``include_summary`` the adapter is first asked to summarize the note
    and keywords are drawn from both texts. If the adapter fails and a
    fallback is supplied, the fallback's output is used and tagged Stub.
    """

    def run(active: InferenceAdapter) -> list[str]:
        words = parse_keyword_reply(active.complete(*keywords_prompt(case.note)))
        if include_summary:
            summary = active.complete(*summary_prompt(case.note))
            words += parse_keyword_reply(active.complete(*keywords_prompt(summary)))
        return words

    used = adapter
    try:
        words = run(adapter)
    except AdapterError as exc:
        if fallback is None:
            raise AdapterError(f"keyword generation failed for case '{case.case_id}': {exc}") from exc
        used = fallback
        words = run(fallback)

    keywords = _dedupe_casefold([w for w in words if w.strip()])[:MAX_KEYWORDS]
    if not keywords:
        raise ValidationError(f"no keywords could be derived for case '{case.case_id}'")
    origin = KeywordOrigin.Stub if used.kind == "stub" else KeywordOrigin.InferenceService
    return KeywordSet(case.case_id, tuple(keywords), origin)


# --- fusion -------------------------------------------------------------------


@dataclass(frozen=True)
class CandidateList:
    case_id: str
    entries: tuple[tuple[str, float], ...]  # (trial_id, fused_score), best first
    cutoff: int


def fuse(
    lexical: Sequence[tuple[str, float]],
    semantic: Sequence[tuple[str, float]],
    k_rrf: int = RRF_K,
    cutoff: int = DEFAULT_CUTOFF,
    *,
    case_id: str = "",
) -> CandidateList:
    """Reciprocal-rank fusion of the two rankings.

    fused(d) = sum over lists of 1/(k_rrf + rank_d), ranks starting at 1;
    a document absent from a list contributes nothing from it. Only ranks
    matter, so any positive monotone rescaling of input scores is a no-op.
    """
    fused: dict[str, float] = {}
    for ranking in (lexical, semantic):
        for position, (trial_id, _score) in enumerate(ranking, start=1):
            fused[trial_id] = fused.get(trial_id, 0.0) + 1.0 / (k_rrf + position)
    ordered = sorted(fused.items(), key=lambda pair: (-pair[1], pair[0]))
    return CandidateList(case_id, tuple(ordered[:cutoff]), cutoff)


def retrieve_case(
    case: PatientCase,
    index: LexicalIndex,
    records: Sequence[TrialRecord],
    adapter: InferenceAdapter,
    provider: EmbeddingProvider,
    *,
    cutoff: int = DEFAULT_CUTOFF,
    fallback: InferenceAdapter | None = None,
    include_summary: bool = False,
) -> CandidateList:
    """Full stage-1 run for one case: keywords -> BM25 + cosine -> fusion."""
    keyword_set = generate_keywords(case, adapter, fallback=fallback, include_summary=include_summary)
    query_terms: list[str] = []
    for keyword in keyword_set.keywords:
        query_terms.extend(tokenize(keyword))
    lexical = bm25_rank(index, query_terms)
    semantic = semantic_search(provider, case.note, records, top_m=cutoff, fields=index.fields)
    return fuse(lexical, semantic, cutoff=cutoff, case_id=case.case_id)


# --- candidate list files -----------------------------------------------------


def save_candidates(candidates: CandidateList, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{candidates.case_id}.json"
    payload = {
        "case_id": candidates.case_id,
        "cutoff": candidates.cutoff,
        "entries": [[trial_id, score] for trial_id, score in candidates.entries],
    }
    path.write_text(json.dumps(payload, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def load_candidates(path: str | Path) -> CandidateList:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = tuple((str(trial_id), float(score)) for trial_id, score in payload["entries"])
    return CandidateList(payload["case_id"], entries, int(payload["cutoff"]))
