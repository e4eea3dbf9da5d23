"""Minimal JSONPath selector: root, dotted children, wildcard, and string-equality filters.

Supported grammar:

    pattern := '$' step*
    step    := '.' NAME
             | '.' '*'
             | "[?(@." NAME "=='" LITERAL "')]"

This covers configuration rules over schema documents; anything else is
rejected with a parse error naming the offending token.
"""

from __future__ import annotations

import re
from typing import Any

from .errors import JsonPathError

Path = tuple[Any, ...]

_NAME = re.compile(r"[A-Za-z_@][A-Za-z0-9_@\-]*")
_FILTER = re.compile(r"\[\?\(@\.([A-Za-z_@][A-Za-z0-9_@\-]*)=='([^']*)'\)\]")


class _Step:
    pass


class _Child(_Step):
    def __init__(self, name: str):
        self.name = name


class _Wildcard(_Step):
    pass


class _Filter(_Step):
    def __init__(self, field: str, literal: str):
        self.field = field
        self.literal = literal


def parse_pattern(pattern: str) -> list[_Step]:
    """Parse a pattern string into steps, raising JsonPathError on unsupported syntax."""
    if not pattern.startswith("$"):
        raise JsonPathError(f"pattern must start with '$': {pattern!r}")
    steps: list[_Step] = []
    i = 1
    while i < len(pattern):
        if pattern[i] == ".":
            rest = pattern[i + 1 :]
            if rest.startswith("*"):
                steps.append(_Wildcard())
                i += 2
            else:
                m = _NAME.match(rest)
                if not m:
                    raise JsonPathError(
                        f"expected name after '.' at position {i}: {pattern[i:i+12]!r}"
                    )
                steps.append(_Child(m.group(0)))
                i += 1 + m.end()
        elif pattern[i] == "[":
            m = _FILTER.match(pattern, i)
            if not m:
                raise JsonPathError(
                    f"unsupported bracket expression at position {i}: {pattern[i:i+24]!r}"
                )
            steps.append(_Filter(m.group(1), m.group(2)))
            i = m.end()
        else:
            raise JsonPathError(f"unsupported token at position {i}: {pattern[i:i+12]!r}")
    return steps


def _node_at(document: Any, path: Path) -> Any:
    node = document
    for key in path:
        node = node[key]
    return node


def _children(node: Any):
    """Yield (key, child) pairs in document order; non-containers have none."""
    if isinstance(node, dict):
        yield from node.items()
    elif isinstance(node, list):
        yield from enumerate(node)


def select(document: Any, pattern: str) -> list[Path]:
    """Return the paths of all nodes matching pattern, in document order.

    Zero matches is a valid result. Paths are tuples of keys/indices from
    the document root; the root itself is the empty tuple.
    """
    steps = parse_pattern(pattern)
    locations: list[Path] = [()]
    for step in steps:
        found: list[Path] = []
        for loc in locations:
            node = _node_at(document, loc)
            if isinstance(step, _Child):
                if isinstance(node, dict) and step.name in node:
                    found.append(loc + (step.name,))
            elif isinstance(step, _Wildcard):
                for key, _child in _children(node):
                    found.append(loc + (key,))
            elif isinstance(step, _Filter):
                for key, child in _children(node):
                    if isinstance(child, dict) and child.get(step.field) == step.literal:
                        found.append(loc + (key,))
        locations = found
    return locations


def resolve(document: Any, path: Path) -> Any:
    """Return the node a select() path points at."""
    return _node_at(document, path)
