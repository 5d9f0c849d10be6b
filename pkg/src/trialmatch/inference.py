"""Inference adapter contract and the wire formats spoken over it.

Every model-backed operation sends a short fixed system instruction plus a
JSON task payload as the user message, and parses a small structured reply.
The deterministic stub (stub.py) speaks exactly the same formats, so the
full render/complete/parse round trip is exercised offline.

Reply formats:
  keywords         one keyword per line
  summary          plain text
  criterion_verdict labeled block: "label:", optional "sentences:", "explanation:"
  trial_scores     labeled block: "relevance:", "eligibility:"
  boolean_query    a single query line
"""

from __future__ import annotations

import json
import os
from typing import Protocol, runtime_checkable

import httpx

from .errors import AdapterError, ReplyFormatError
from .jsonl import canonical_json

SYSTEM_TEXT = (
    "You support a clinical-trial matching workbench. Read the JSON task "
    "payload in the user message and reply in exactly the format that task "
    "requires, with no extra commentary."
)

LABEL_MET = "met"
LABEL_NOT_MET = "not_met"
LABEL_INSUFFICIENT = "insufficient_information"
LABEL_NOT_APPLICABLE = "not_applicable"
LABEL_TOKENS = (LABEL_MET, LABEL_NOT_MET, LABEL_INSUFFICIENT, LABEL_NOT_APPLICABLE)

_LABEL_ALIASES = {
    "n/a": LABEL_NOT_APPLICABLE,
    "na": LABEL_NOT_APPLICABLE,
    "insufficient": LABEL_INSUFFICIENT,
    "unknown": LABEL_INSUFFICIENT,
}


@runtime_checkable
class InferenceAdapter(Protocol):
    """Text-completion contract; all pipeline calls use temperature 0."""

    kind: str  # "stub" or "service"
    name: str  # identity used in cache keys

    def complete(self, system: str, user: str, temperature: float = 0.0) -> str:
        ...


# --- task payloads ----------------------------------------------------------


def keywords_prompt(note: str, max_keywords: int = 32) -> tuple[str, str]:
    user = canonical_json({"task": "keywords", "max_keywords": max_keywords, "note": note})
    return SYSTEM_TEXT, user


def summary_prompt(note: str) -> tuple[str, str]:
    user = canonical_json({"task": "summary", "note": note})
    return SYSTEM_TEXT, user


def criterion_verdict_prompt(
    sentences: list[str],
    kind: str,
    criterion: str,
    age_years: float | None = None,
    sex: str = "Unknown",
) -> tuple[str, str]:
    user = canonical_json(
        {
            "task": "criterion_verdict",
            "kind": kind,
            "criterion": criterion,
            "note_sentences": sentences,
            "age_years": age_years,
            "sex": sex,
        }
    )
    return SYSTEM_TEXT, user


def trial_scores_prompt(note: str, verdicts: list[dict]) -> tuple[str, str]:
    user = canonical_json({"task": "trial_scores", "note": note, "verdicts": verdicts})
    return SYSTEM_TEXT, user


def boolean_query_prompt(note: str) -> tuple[str, str]:
    user = canonical_json({"task": "boolean_query", "note": note})
    return SYSTEM_TEXT, user


def parse_task_payload(user: str) -> dict:
    """Decode a task payload; used by stub adapters to dispatch."""
    try:
        payload = json.loads(user)
    except json.JSONDecodeError as exc:
        raise AdapterError(f"malformed task payload: {exc.msg}") from exc
    if not isinstance(payload, dict) or "task" not in payload:
        raise AdapterError("task payload must be an object with a 'task' key")
    return payload


# --- reply parsing ----------------------------------------------------------


def parse_keyword_reply(text: str) -> list[str]:
    """One keyword per line; blanks and leading list markers tolerated."""
    keywords = []
    for line in text.splitlines():
        word = line.strip().lstrip("-*").strip()
        if word:
            keywords.append(word)
    return keywords


def _labeled_lines(text: str) -> dict[str, str]:
    """Collect "key: value" lines; later lines extend the last seen key."""
    fields: dict[str, str] = {}
    current: str | None = None
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        head, sep, tail = stripped.partition(":")
        key = head.strip().casefold()
        if sep and key and " " not in key:
            fields[key] = tail.strip()
            current = key
        elif current is not None:
            fields[current] = f"{fields[current]} {stripped}".strip()
    return fields


def normalize_label(raw: str) -> str:
    token = raw.strip().casefold().replace("-", "_").replace(" ", "_")
    token = _LABEL_ALIASES.get(token, token)
    if token not in LABEL_TOKENS:
        raise ReplyFormatError(f"unknown verdict label '{raw}'", raw)
    return token


def parse_verdict_reply(text: str, n_sentences: int) -> tuple[str, tuple[int, ...], str]:
    """Parse a criterion verdict reply into (label, sentence indexes, explanation).

    Raises ReplyFormatError when the label is missing or unknown, a sentence
    index is out of range, or a met/not_met verdict has no explanation.
    """
    fields = _labeled_lines(text)
    if "label" not in fields:
        raise ReplyFormatError("reply has no 'label:' line", text)
    label = normalize_label(fields["label"])

    sentences: tuple[int, ...] = ()
    raw_sentences = fields.get("sentences", "")
    if raw_sentences and raw_sentences.casefold() not in ("none", "-"):
        try:
            indexes = tuple(int(part) for part in raw_sentences.replace(",", " ").split())
        except ValueError:
            raise ReplyFormatError(f"unparseable sentence indexes '{raw_sentences}'", text)
        for idx in indexes:
            if not 0 <= idx < n_sentences:
                raise ReplyFormatError(f"sentence index {idx} out of range [0, {n_sentences})", text)
        sentences = indexes

    explanation = fields.get("explanation", "")
    if label in (LABEL_MET, LABEL_NOT_MET) and not explanation:
        raise ReplyFormatError(f"label '{label}' requires a non-empty explanation", text)
    return label, sentences, explanation


def parse_scores_reply(text: str) -> tuple[float, float]:
    """Parse "relevance:" and "eligibility:" lines into raw (unclamped) floats."""
    fields = _labeled_lines(text)
    try:
        return float(fields["relevance"]), float(fields["eligibility"])
    except (KeyError, ValueError):
        raise ReplyFormatError("reply must contain numeric 'relevance:' and 'eligibility:' lines", text)


# --- service-backed adapter -------------------------------------------------

ENV_INFERENCE_URL = "TRIALMATCH_INFERENCE_URL"
ENV_INFERENCE_TOKEN = "TRIALMATCH_INFERENCE_TOKEN"
ENV_INFERENCE_MODEL = "TRIALMATCH_INFERENCE_MODEL"


class HttpInferenceAdapter:
    """Adapter backed by an HTTP completion service.

    POSTs {"system", "user", "temperature", "model"} and expects a JSON body
    with a "text" field. Endpoint and credentials come from the environment
    (see the README runbook) unless passed explicitly.
    """

    kind = "service"

    def __init__(
        self,
        url: str | None = None,
        token: str | None = None,
        model: str | None = None,
        timeout: float = 60.0,
    ):
        self.url = url or os.environ.get(ENV_INFERENCE_URL)
        if not self.url:
            raise AdapterError(f"no inference endpoint configured (set {ENV_INFERENCE_URL})")
        self.token = token if token is not None else os.environ.get(ENV_INFERENCE_TOKEN)
        self.model = model or os.environ.get(ENV_INFERENCE_MODEL, "")
        self.timeout = timeout
        self.name = f"service:{self.model or self.url}"

    def complete(self, system: str, user: str, temperature: float = 0.0) -> str:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        body = {"system": system, "user": user, "temperature": temperature}
        if self.model:
            body["model"] = self.model
        try:
            response = httpx.post(self.url, json=body, headers=headers, timeout=self.timeout)
            response.raise_for_status()
            payload = response.json()
        except httpx.HTTPError as exc:
            raise AdapterError(f"inference service call failed: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise AdapterError("inference service returned non-JSON body") from exc
        text = payload.get("text") if isinstance(payload, dict) else None
        if not isinstance(text, str):
            raise AdapterError("inference service reply missing 'text' field")
        return text
