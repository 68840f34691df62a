"""Corpus loading and the rule-based pre-filter for API-bearing texts."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import CorpusError

MIN_TOKENS = 8  # a text must have strictly more tokens than this

_KEYWORD_RE = re.compile(r"(?<![^\W_])(?:method|class|package)(?![^\W_])", re.IGNORECASE)


@dataclass(frozen=True)
class TextUnit:
    id: str
    source: str
    content: str

    def __post_init__(self):
        if not self.content.strip():
            raise CorpusError(f"text {self.id!r} has empty content")


@dataclass(frozen=True)
class Corpus:
    units: tuple[TextUnit, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        seen = set()
        for unit in self.units:
            if unit.id in seen:
                raise CorpusError(f"duplicate text id {unit.id!r}")
            seen.add(unit.id)

    def __iter__(self) -> Iterator[TextUnit]:
        return iter(self.units)

    def __len__(self) -> int:
        return len(self.units)

    def ids(self) -> list[str]:
        return [u.id for u in self.units]


def tokenize(content: str) -> list[str]:
    return content.split()


def _has_call_parens(content: str) -> bool:
    return "()" in content


def _has_dotted_name(content: str) -> bool:
    for i, ch in enumerate(content):
        if ch == "." and 0 < i < len(content) - 1:
            if content[i - 1].isalpha() and content[i + 1].isalpha():
                return True
    return False


def _has_keyword(content: str) -> bool:
    return _KEYWORD_RE.search(content) is not None


def passes_filter(unit: TextUnit) -> bool:
    """Keep texts longer than 8 tokens that look like they mention an API.

    A text qualifies through any of: a literal ``()``, a dot between two
    letters (``iterator.remove``), or one of the words method/class/package.
    """
    content = unit.content
    if len(tokenize(content)) <= MIN_TOKENS:
        return False
    return _has_call_parens(content) or _has_dotted_name(content) or _has_keyword(content)


def filter_corpus(corpus: Corpus) -> Corpus:
    return Corpus(tuple(u for u in corpus if passes_filter(u)))


def read_corpus(path: str | Path) -> Corpus:
    """Read a JSON Lines corpus of ``{"id", "source", "text"}`` objects."""
    path = Path(path)
    units: list[TextUnit] = []
    seen: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            try:
                uid, source, text = str(obj["id"]), str(obj.get("source", "")), obj["text"]
            except (KeyError, TypeError) as exc:
                raise CorpusError(f"{path}:{lineno}: missing field {exc}") from exc
            if uid in seen:
                raise CorpusError(
                    f"{path}:{lineno}: duplicate id {uid!r} (first seen on line {seen[uid]})"
                )
            seen[uid] = lineno
            if not isinstance(text, str) or not text:
                raise CorpusError(f"{path}:{lineno}: empty or non-string text")
            units.append(TextUnit(uid, source, text))
    return Corpus(tuple(units))


def write_corpus(corpus: Iterable[TextUnit], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for u in corpus:
            fh.write(json.dumps({"id": u.id, "source": u.source, "text": u.content}, ensure_ascii=False))
            fh.write("\n")
