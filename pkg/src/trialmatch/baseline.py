"""Keyword-search comparator: Boolean queries over trial condition fields.

Grammar (case-insensitive operators): OR binds loosest, then AND, then NOT;
parentheses group; double quotes delimit phrases; bare words are terms.
Terms match whole tokens of the diseases/diseases_list fields, phrases match
as substrings. Results come back in ascending trial_id order, capped at 10,
mirroring an unranked registry search.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

from .cases import PatientCase
from .corpus import TrialRecord
from .errors import AdapterError, ParseError, ValidationError
from .inference import InferenceAdapter, boolean_query_prompt
from .textproc import tokenize

MAX_RESULTS = 10


@dataclass(frozen=True)
class Term:
    word: str


@dataclass(frozen=True)
class Phrase:
    text: str


@dataclass(frozen=True)
class Not:
    child: "BooleanQuery"


@dataclass(frozen=True)
class And:
    left: "BooleanQuery"
    right: "BooleanQuery"


@dataclass(frozen=True)
class Or:
    left: "BooleanQuery"
    right: "BooleanQuery"


BooleanQuery = Union[Term, Phrase, Not, And, Or]


# --- lexer -------------------------------------------------------------------

_WORD_BREAK = set(' \t\r\n()"')


@dataclass(frozen=True)
class _Token:
    type: str  # LPAREN RPAREN PHRASE WORD AND OR NOT EOF
    value: str
    offset: int  # byte offset into the UTF-8 query


def _lex(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    byte_offset = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            byte_offset += len(ch.encode("utf-8"))
            i += 1
            continue
        if ch == "(":
            tokens.append(_Token("LPAREN", ch, byte_offset))
            byte_offset += 1
            i += 1
            continue
        if ch == ")":
            tokens.append(_Token("RPAREN", ch, byte_offset))
            byte_offset += 1
            i += 1
            continue
        if ch == '"':
            start_offset = byte_offset
            j = text.find('"', i + 1)
            if j == -1:
                raise ParseError("unterminated phrase quote", start_offset)
            phrase = text[i + 1 : j]
            if not phrase.strip():
                raise ParseError("empty phrase", start_offset)
            tokens.append(_Token("PHRASE", phrase, start_offset))
            byte_offset += len(text[i : j + 1].encode("utf-8"))
            i = j + 1
            continue
        start_offset = byte_offset
        j = i
        while j < n and text[j] not in _WORD_BREAK:
            j += 1
        word = text[i:j]
        upper = word.upper()
        if upper in ("AND", "OR", "NOT"):
            tokens.append(_Token(upper, word, start_offset))
        else:
            tokens.append(_Token("WORD", word, start_offset))
        byte_offset += len(word.encode("utf-8"))
        i = j
    tokens.append(_Token("EOF", "", byte_offset))
    return tokens


# --- recursive-descent parser --------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def parse(self) -> BooleanQuery:
        if self.peek().type == "EOF":
            raise ParseError("empty query", self.peek().offset)
        node = self.expr()
        trailing = self.peek()
        if trailing.type != "EOF":
            raise ParseError(f"unexpected '{trailing.value}'", trailing.offset)
        return node

    def expr(self) -> BooleanQuery:
        node = self.and_expr()
        while self.peek().type == "OR":
            self.advance()
            node = Or(node, self.and_expr())
        return node

    def and_expr(self) -> BooleanQuery:
        node = self.not_expr()
        while self.peek().type == "AND":
            self.advance()
            node = And(node, self.not_expr())
        return node

    def not_expr(self) -> BooleanQuery:
        if self.peek().type == "NOT":
            self.advance()
            return Not(self.not_expr())
        return self.atom()

    def atom(self) -> BooleanQuery:
        token = self.peek()
        if token.type == "LPAREN":
            self.advance()
            node = self.expr()
            closing = self.peek()
            if closing.type != "RPAREN":
                raise ParseError("unbalanced parenthesis", closing.offset)
            self.advance()
            return node
        if token.type == "PHRASE":
            self.advance()
            return Phrase(token.value)
        if token.type == "WORD":
            self.advance()
            return Term(token.value)
        if token.type in ("AND", "OR", "NOT", "RPAREN"):
            raise ParseError(f"unexpected '{token.value}'", token.offset)
        raise ParseError("expected a term, phrase, or group", token.offset)


def parse_query(text: str) -> BooleanQuery:
    """Parse query text into an AST; ParseError carries the byte offset."""
    return _Parser(_lex(text)).parse()


# --- printer -------------------------------------------------------------------

_LEVELS = {Or: 0, And: 1, Not: 2, Term: 3, Phrase: 3}
_WORD_RE = re.compile(r'^[^\s()"]+$')


def query_to_text(query: BooleanQuery) -> str:
    """Render an AST to text such that reparsing yields an equal AST."""

    def render(node: BooleanQuery, required_level: int) -> str:
        level = _LEVELS[type(node)]
        if isinstance(node, Term):
            if not _WORD_RE.match(node.word) or node.word.upper() in ("AND", "OR", "NOT"):
                raise ValidationError(f"term {node.word!r} cannot be rendered as a bare word")
            text = node.word
        elif isinstance(node, Phrase):
            if '"' in node.text or not node.text.strip():
                raise ValidationError(f"phrase {node.text!r} cannot be rendered")
            text = f'"{node.text}"'
        elif isinstance(node, Not):
            text = f"NOT {render(node.child, _LEVELS[Not])}"
        elif isinstance(node, And):
            text = f"{render(node.left, _LEVELS[And])} AND {render(node.right, _LEVELS[And] + 1)}"
        else:
            text = f"{render(node.left, _LEVELS[Or])} OR {render(node.right, _LEVELS[Or] + 1)}"
        if level < required_level:
            return f"({text})"
        return text

    return render(query, 0)


# --- evaluation ------------------------------------------------------------------


def _condition_texts(record: TrialRecord) -> list[str]:
    return [record.diseases, *record.diseases_list]


def evaluate(query: BooleanQuery, record: TrialRecord) -> bool:
    """Evaluate a parsed query against the record's condition fields only."""
    texts = _condition_texts(record)
    token_set: set[str] = set()
    for text in texts:
        token_set.update(tokenize(text))
    folded = [t.casefold() for t in texts]

    def walk(node: BooleanQuery) -> bool:
        if isinstance(node, Term):
            return node.word.casefold() in token_set
        if isinstance(node, Phrase):
            needle = node.text.casefold()
            return any(needle in haystack for haystack in folded)
        if isinstance(node, Not):
            return not walk(node.child)
        if isinstance(node, And):
            return walk(node.left) and walk(node.right)
        return walk(node.left) or walk(node.right)

    return walk(query)


# --- baseline runs ----------------------------------------------------------------


@dataclass(frozen=True)
class BaselineResult:
    case_id: str
    query_text: str
    matched: tuple[str, ...]  # ascending trial_id, at most MAX_RESULTS
    error: str | None = None


def run_baseline(
    case: PatientCase, corpus: Sequence[TrialRecord], adapter: InferenceAdapter
) -> BaselineResult:
    """Generate a Boolean query for the case and run it over the corpus.

    The corpus is expected to be pre-filtered the same way as the pipeline's
    (recruiting, location). An unparseable generated query is regenerated
    once; a second failure yields an empty result carrying the parse error.
    """
    system, user = boolean_query_prompt(case.note)

    def generate() -> str:
        try:
            reply = adapter.complete(system, user, temperature=0.0)
        except AdapterError as exc:
            raise AdapterError(f"query generation failed for case '{case.case_id}': {exc}") from exc
        lines = reply.strip().splitlines()
        return lines[0].strip() if lines else ""

    query_text = generate()
    try:
        query = parse_query(query_text)
    except ParseError as first_error:
        query_text = generate()
        try:
            query = parse_query(query_text)
        except ParseError:
            return BaselineResult(case.case_id, query_text, (), error=str(first_error))

    matched: list[str] = []
    for record in sorted(corpus, key=lambda r: r.trial_id):
        if evaluate(query, record):
            matched.append(record.trial_id)
            if len(matched) == MAX_RESULTS:
                break
    return BaselineResult(case.case_id, query_text, tuple(matched))


def save_baseline_result(result: BaselineResult, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{result.case_id}.json"
    payload = {
        "case_id": result.case_id,
        "query_text": result.query_text,
        "matched": list(result.matched),
        "error": result.error,
    }
    path.write_text(json.dumps(payload, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def load_baseline_result(path: str | Path) -> BaselineResult:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return BaselineResult(
        case_id=payload["case_id"],
        query_text=payload["query_text"],
        matched=tuple(payload["matched"]),
        error=payload["error"],
    )
