"""Deterministic stub inference adapter for offline, reproducible runs.

The stub speaks the same task payloads and reply formats as a real service
(see inference.py) so every parse path is exercised without a network.
Judging uses a small rule table: age-bound extraction, a pregnancy rule for
male patients, a fixed list of condition keywords matched against the note,
and a sex rule; anything else is insufficient information. Keyword and
Boolean-query generation rank the note's tokens by TF-IDF against the
loaded corpus.
"""

from __future__ import annotations

import hashlib
import math
import re
from collections import Counter
from typing import Sequence

from .corpus import TrialRecord
from .errors import AdapterError
from .inference import (
    LABEL_INSUFFICIENT,
    LABEL_MET,
    LABEL_NOT_APPLICABLE,
    LABEL_NOT_MET,
    parse_task_payload,
)
from .ranking import criterion_score_from_counts
from .retrieval import DEFAULT_INDEX_FIELDS, document_text
from .textproc import split_sentences, tokenize

# Specific conditions come before umbrella terms: the first table entry
# found in the criterion text decides the rule.
DEFAULT_CONDITION_TERMS = (
    "pregnant",
    "pregnancy",
    "breastfeeding",
    "glioblastoma",
    "melanoma",
    "lymphoma",
    "leukemia",
    "carcinoma",
    "sarcoma",
    "asthma",
    "copd",
    "diabetes",
    "hypertension",
    "epilepsy",
    "seizure",
    "migraine",
    "stroke",
    "dialysis",
    "hepatitis",
    "hiv",
    "cirrhosis",
    "psoriasis",
    "arthritis",
    "lupus",
    "anemia",
    "chemotherapy",
    "radiotherapy",
    "immunotherapy",
    "insulin",
    "metformin",
    "smoker",
    "smoking",
    "obesity",
    "transplant",
    "pacemaker",
    "depression",
    "anxiety",
    "schizophrenia",
    "dementia",
    "cancer",
    "tumor",
)

_MALE_RE = re.compile(r"\b(male|man|men|boys?)\b")
_FEMALE_RE = re.compile(r"\b(female|woman|women|girls?)\b")

# (compiled pattern, handler tag); tried in order on the case-folded criterion.
_AGE_PATTERNS: list[tuple[re.Pattern, str]] = [
    (re.compile(r"\bage[ds]?\b\s*:?\s*(?:is\s*)?(>=|≥|<=|≤|>|<|=)\s*(\d{1,3})"), "cmp"),
    (re.compile(r"(>=|≥|<=|≤|>|<)\s*(\d{1,3})\s*years?"), "cmp"),
    (re.compile(r"\b(\d{1,3})\s*years?(?:\s*of\s*age)?\s*,?\s*(?:or|and)\s*older"), "ge"),
    (re.compile(r"\bat\s*least\s*(\d{1,3})\s*years?\s*(?:of\s*age|old)"), "ge"),
    (re.compile(r"\bolder\s*than\s*(\d{1,3})\s*years?"), "gt"),
    (re.compile(r"\byounger\s*than\s*(\d{1,3})\s*years?"), "lt"),
    (re.compile(r"\bunder\s*(\d{1,3})\s*years?\s*(?:of\s*age|old)?"), "lt"),
    (re.compile(r"\bage[ds]?\b.{0,12}?\b(\d{1,3})\s*(?:-|–|to)\s*(\d{1,3})\b"), "range"),
    (re.compile(r"\bbetween\s*(\d{1,3})\s*and\s*(\d{1,3})\s*years?"), "range"),
]


def _age_constraint(criterion: str) -> tuple[str, float, float] | None:
    """Extract (description, low, high) inclusive age bounds, if present."""
    for pattern, tag in _AGE_PATTERNS:
        found = pattern.search(criterion)
        if not found:
            continue
        if tag == "cmp":
            op, value = found.group(1), float(found.group(2))
            if op in (">=", "≥"):
                return f">= {value:g}", value, math.inf
            if op in ("<=", "≤"):
                return f"<= {value:g}", -math.inf, value
            if op == ">":
                return f"> {value:g}", math.nextafter(value, math.inf), math.inf
            if op == "<":
                return f"< {value:g}", -math.inf, math.nextafter(value, -math.inf)
            return f"= {value:g}", value, value
        if tag == "ge":
            value = float(found.group(1))
            return f">= {value:g}", value, math.inf
        if tag == "gt":
            value = float(found.group(1))
            return f"> {value:g}", math.nextafter(value, math.inf), math.inf
        if tag == "lt":
            value = float(found.group(1))
            return f"< {value:g}", -math.inf, math.nextafter(value, -math.inf)
        low, high = float(found.group(1)), float(found.group(2))
        return f"in [{low:g}, {high:g}]", low, high
    return None


def _verdict_reply(label: str, sentences: Sequence[int], explanation: str) -> str:
    lines = [f"label: {label}"]
    if sentences:
        lines.append("sentences: " + ", ".join(str(i) for i in sentences))
    lines.append(f"explanation: {explanation}")
    return "\n".join(lines)


class StubInferenceAdapter:
    """Rule-table adapter; identical inputs always produce identical replies."""

    kind = "stub"

    def __init__(
        self,
        corpus: Sequence[TrialRecord] = (),
        condition_terms: Sequence[str] = DEFAULT_CONDITION_TERMS,
    ):
        self.condition_terms = tuple(condition_terms)
        self._df: Counter[str] = Counter()
        self._n_docs = len(corpus)
        for record in corpus:
            self._df.update(set(tokenize(document_text(record, DEFAULT_INDEX_FIELDS))))
        rules_digest = hashlib.sha256(
            ("\x00".join(self.condition_terms) + "\x01v1").encode("utf-8")
        ).hexdigest()[:12]
        self.name = f"stub:{rules_digest}"

    # --- keyword scoring ---

    def _idf(self, token: str) -> float:
        return math.log((self._n_docs + 1.0) / (self._df.get(token, 0) + 1.0))

    def _ranked_tokens(self, text: str, limit: int) -> list[str]:
        counts = Counter(tokenize(text))
        scored = sorted(counts.items(), key=lambda kv: (-kv[1] * self._idf(kv[0]), kv[0]))
        return [token for token, _count in scored[:limit]]

    # --- task handlers ---

    def complete(self, system: str, user: str, temperature: float = 0.0) -> str:
        payload = parse_task_payload(user)
        task = payload["task"]
        if task == "keywords":
            limit = int(payload.get("max_keywords", 32))
            return "\n".join(self._ranked_tokens(payload["note"], limit))
        if task == "summary":
            return " ".join(split_sentences(payload["note"])[:3])
        if task == "boolean_query":
            # Operator words would make the OR-joined query unparseable.
            tokens = [
                t for t in self._ranked_tokens(payload["note"], 40) if t not in ("and", "or", "not")
            ]
            return " OR ".join(tokens[:32])
        if task == "criterion_verdict":
            return self._judge(payload)
        if task == "trial_scores":
            return self._score_trial(payload)
        raise AdapterError(f"stub adapter does not understand task '{task}'")

    def _judge(self, payload: dict) -> str:
        criterion = str(payload["criterion"]).casefold()
        sentences = [str(s) for s in payload.get("note_sentences", [])]
        age = payload.get("age_years")
        sex = str(payload.get("sex", "Unknown"))

        constraint = _age_constraint(criterion)
        if constraint is not None:
            description, low, high = constraint
            if age is None:
                return _verdict_reply(
                    LABEL_INSUFFICIENT, (), f"criterion requires age {description} but the case reports no age"
                )
            if low <= float(age) <= high:
                return _verdict_reply(LABEL_MET, (), f"patient age {age:g} satisfies age {description}")
            return _verdict_reply(LABEL_NOT_MET, (), f"patient age {age:g} violates age {description}")

        if ("pregnan" in criterion or "breastfeed" in criterion) and sex == "Male":
            return _verdict_reply(LABEL_NOT_APPLICABLE, (), "pregnancy-related criterion; patient is male")

        for term in self.condition_terms:
            if not re.search(rf"\b{re.escape(term)}\b", criterion):
                continue
            hits = [
                idx
                for idx, sentence in enumerate(sentences)
                if re.search(rf"\b{re.escape(term)}\b", sentence.casefold())
            ]
            if hits:
                return _verdict_reply(LABEL_MET, hits, f"the note mentions '{term}'")
            return _verdict_reply(LABEL_NOT_MET, (), f"the note does not mention '{term}'")

        wants_male = bool(_MALE_RE.search(criterion))
        wants_female = bool(_FEMALE_RE.search(criterion))
        if wants_male or wants_female:
            if sex == "Unknown":
                return _verdict_reply(LABEL_INSUFFICIENT, (), "criterion is sex-specific but the case reports no sex")
            matches = (wants_male and sex == "Male") or (wants_female and sex == "Female")
            if matches:
                return _verdict_reply(LABEL_MET, (), f"patient sex {sex} matches the criterion")
            return _verdict_reply(LABEL_NOT_MET, (), f"patient sex {sex} does not match the criterion")

        return _verdict_reply(LABEL_INSUFFICIENT, (), "no stub rule matches this criterion")

    def _score_trial(self, payload: dict) -> str:
        verdicts = payload.get("verdicts", [])
        inclusion = [v for v in verdicts if v.get("kind") == "Inclusion"]
        exclusion = [v for v in verdicts if v.get("kind") == "Exclusion"]
        satisfied = sum(1 for v in inclusion if v.get("label") in ("Met", "NotApplicable"))
        decided = sum(1 for v in verdicts if v.get("label") in ("Met", "NotMet"))
        c_score = criterion_score_from_counts(
            n_inclusion=len(inclusion),
            n_inclusion_satisfied=satisfied,
            n_exclusion=len(exclusion),
            n_exclusion_insufficient=sum(
                1 for v in exclusion if v.get("label") == "InsufficientInformation"
            ),
            any_exclusion_met=any(v.get("label") == "Met" for v in exclusion),
        )
        relevance = 100.0 * decided / len(verdicts) if verdicts else 0.0
        eligibility = 200.0 * c_score - 100.0
        return f"relevance: {relevance!r}\neligibility: {eligibility!r}"
