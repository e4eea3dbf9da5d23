"""Tolerant JSON reading for hand-authored schema and entity documents.

Humanist-edited files routinely carry trailing commas or a missing comma
between two entries; rather than reject them, tokenize and normalize the
comma structure before handing off to the standard json parser. Also
supports streams of concatenated top-level objects (pretty-printed or one
per line), which is how entity files are written.
"""

from __future__ import annotations

import json
import re
from typing import Any

from .errors import SchemaError

_TOKEN = re.compile(
    r"""
    (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<literal>true|false|null)
  | (?P<punct>[{}\[\],:])
  | (?P<ws>\s+)
    """,
    re.VERBOSE,
)

_VALUE_END = {"string", "number", "literal", "close"}
_VALUE_START = {"string", "number", "literal", "open"}


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            snippet = text[pos : pos + 20]
            raise SchemaError(f"unreadable document at offset {pos}: {snippet!r}")
        pos = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        value = m.group(0)
        if kind == "punct":
            if value in "{[":
                kind = "open"
            elif value in "}]":
                kind = "close"
            elif value == ",":
                kind = "comma"
            else:
                kind = "colon"
        tokens.append((kind, value))
    return tokens


def _normalize(tokens: list[tuple[str, str]]) -> str:
    """Re-emit tokens with commas inserted/removed so json.loads accepts them."""
    out: list[str] = []
    for i, (kind, value) in enumerate(tokens):
        nxt = tokens[i + 1] if i + 1 < len(tokens) else None
        if kind == "comma":
            # drop trailing commas and duplicates
            if nxt is None or nxt[0] == "close" or nxt[0] == "comma":
                continue
            out.append(value)
            continue
        out.append(value)
        if nxt is None:
            continue
        ends_value = kind in _VALUE_END and not (kind == "string" and nxt[0] == "colon")
        if ends_value and nxt[0] in _VALUE_START:
            out.append(",")
    return " ".join(out)


def _check_duplicate_keys(pairs):
    seen = set()
    result = {}
    for key, value in pairs:
        if key in seen:
            raise SchemaError(f"duplicate name: {key!r}")
        seen.add(key)
        result[key] = value
    return result


def loads(text: str, *, reject_duplicate_keys: bool = False) -> Any:
    """Parse one JSON value, tolerating comma irregularities."""
    values = load_stream(text, reject_duplicate_keys=reject_duplicate_keys)
    if len(values) != 1:
        raise SchemaError(f"expected a single document, found {len(values)}")
    return values[0]


def load_stream(text: str, *, reject_duplicate_keys: bool = False) -> list[Any]:
    """Parse a stream of concatenated top-level JSON values (e.g. one record per line)."""
    tokens = _tokenize(text)
    hook = _check_duplicate_keys if reject_duplicate_keys else None
    values: list[Any] = []
    depth = 0
    start = 0
    for i, (kind, value) in enumerate(tokens):
        if kind == "open":
            depth += 1
        elif kind == "close":
            depth -= 1
            if depth < 0:
                raise SchemaError("unbalanced brackets in document")
        if depth == 0:
            chunk = tokens[start : i + 1]
            if kind == "comma":
                start = i + 1  # top-level separators between records are allowed
                continue
            try:
                values.append(json.loads(_normalize(chunk), object_pairs_hook=hook))
            except json.JSONDecodeError as exc:
                raise SchemaError(f"malformed document: {exc}") from exc
            start = i + 1
    if depth != 0:
        raise SchemaError("unterminated document (unbalanced brackets)")
    if start != len(tokens):
        raise SchemaError("trailing tokens after last document")
    return values
