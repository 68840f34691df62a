"""Parsers for the line-oriented output grammars used by the AI units."""

from __future__ import annotations

import re

from ..errors import MalformedOutput

_BULLET_RE = re.compile(r"^(?:[-*•]\s+|\d+[.)]\s+)")
_MAPPING_RE = re.compile(r"^(?P<key>[^:]+?)\s*:\s*(?P<value>.*)$")
_FUSION_RE = re.compile(r"^(?P<name>[^:\[\]|]+?)\s*:\s*\[(?P<members>[^\]]*)\]\s*(?:\|\s*(?P<definition>.*))?$")

NONE_MARKERS = {"none", "n/a", "no relation", "[]"}


def _lines(raw: str) -> list[str]:
    text = raw.strip()
    if text.startswith("```"):
        # tolerate a fenced block around the payload
        body = text.split("\n")[1:]
        if body and body[-1].strip().startswith("```"):
            body = body[:-1]
        text = "\n".join(body)
    out = []
    for line in text.splitlines():
        line = _BULLET_RE.sub("", line.strip()).strip()
        if line:
            out.append(line)
    return out


def _split_items(inner: str) -> list[str]:
    return [item.strip() for item in inner.split(",") if item.strip()]


def parse_list_output(raw: str, grammar: str = "list"):
    """Parse a unit's answer.

    ``grammar="list"`` gives one item per non-empty line. ``grammar="mapping"``
    expects ``key: value`` lines and returns a dict; a bracketed value such as
    ``[a, b]`` becomes a list.
    """
    lines = _lines(raw)
    if grammar == "list":
        return [ln for ln in lines if ln.lower() not in NONE_MARKERS]
    if grammar != "mapping":
        raise ValueError(f"unknown grammar {grammar!r}")
    result: dict[str, str | list[str]] = {}
    for line in lines:
        if line.lower() in NONE_MARKERS:
            continue
        m = _MAPPING_RE.match(line)
        if not m or not m.group("value").strip():
            raise MalformedOutput("expected 'key: value' lines", raw)
        key, value = m.group("key").strip(), m.group("value").strip()
        if value.startswith("[") and value.endswith("]"):
            result[key] = _split_items(value[1:-1])
        else:
            result[key] = value
    return result


def parse_fields(raw: str, width: int) -> list[list[str]]:
    """Parse ``a | b | c`` rows with exactly ``width`` non-empty fields."""
    rows = []
    for line in parse_list_output(raw, "list"):
        parts = [p.strip() for p in line.split("|")]
        if len(parts) != width or not all(parts):
            raise MalformedOutput(f"expected {width} '|'-separated fields per line", raw)
        rows.append(parts)
    return rows


def parse_fusion_output(raw: str) -> list[tuple[str, list[str], str]]:
    """Parse ``name: [member, member] | definition`` lines from a fusion unit."""
    out = []
    for line in _lines(raw):
        m = _FUSION_RE.match(line)
        if not m:
            raise MalformedOutput("expected 'type: [members] | definition' lines", raw)
        definition = (m.group("definition") or "").strip()
        if not definition:
            raise MalformedOutput(f"fused type {m.group('name').strip()!r} lacks a definition", raw)
        out.append((m.group("name").strip(), _split_items(m.group("members")), definition))
    return out
