"""Text primitives used by every stage.

Tokenization and sentence splitting each have exactly one definition in the
codebase; retrieval, the stub judge, and the review API all share these so
that token counts and sentence indexes mean the same thing everywhere.
"""

from __future__ import annotations

import re

# Case-folded runs of letters/digits. Underscore is deliberately excluded.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# Sentence boundary: terminal punctuation followed by whitespace, or a blank
# line. Crude on abbreviations, but deterministic; sentence indexes stored in
# verdicts are only meaningful against this exact splitter.
_SENTENCE_BREAK_RE = re.compile(r"(?<=[.!?])\s+|\n{2,}")


def tokenize(text: str) -> list[str]:
    """Case-folded alphanumeric runs, in order of appearance."""
    return _TOKEN_RE.findall(text.casefold())


def split_sentences(text: str) -> list[str]:
    """Split free text into sentences; empty fragments are dropped."""
    parts = _SENTENCE_BREAK_RE.split(text)
    return [p.strip() for p in parts if p and p.strip()]
