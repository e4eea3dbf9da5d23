"""Configuration rules: ordered JSONPath patterns writing "meta" annotations.

Rules are applied in order; later rules overwrite keys written by earlier
ones. A built-in default list assigns every property type its standard
encoder/decoder/loss and sizes before any user rules run.
"""

from __future__ import annotations

import copy
import importlib.resources
import json
from dataclasses import dataclass, field
from typing import Any

from . import jsonpath, loosejson
from .errors import SchemaError
from .schema import DomainSchema, ValidationReport, schema_from_document, schema_to_document


@dataclass
class ConfigRule:
    pattern: str
    values: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        jsonpath.parse_pattern(self.pattern)  # raise early on bad syntax


def default_rules() -> list[ConfigRule]:
    text = importlib.resources.files("graphloom").joinpath("default_rules.json").read_text()
    return [ConfigRule(pattern, dict(values)) for pattern, values in json.loads(text)]


def parse_rules(text: str) -> list[ConfigRule]:
    """Parse a rules file: a list of [pattern, values] pairs, or one bare pair."""
    document = loosejson.loads(text)
    if not isinstance(document, list):
        raise SchemaError("rules file must be a list")
    if document and isinstance(document[0], str):
        document = [document]  # single bare [pattern, values] pair
    rules = []
    for i, entry in enumerate(document):
        if not (isinstance(entry, list) and len(entry) == 2 and isinstance(entry[0], str)
                and isinstance(entry[1], dict)):
            raise SchemaError(f"rule {i}: expected a [pattern, values] pair")
        rules.append(ConfigRule(entry[0], entry[1]))
    return rules


def apply_rules(
    schema: DomainSchema,
    rules: list[ConfigRule],
    report: ValidationReport | None = None,
    include_defaults: bool = True,
) -> DomainSchema:
    """Resolve rules into per-node meta mappings and return the annotated schema.

    Default rules run first, then the given rules in order; each match merges
    the rule's values into the node's meta, overwriting existing keys.
    Zero-match user rules are reported as warnings.
    """
    document = schema_to_document(schema)
    if include_defaults:
        for rule in default_rules():
            _apply_one(document, rule, None)
    for rule in rules:
        matched = _apply_one(document, rule, report)
        if not matched and report is not None:
            report.warn(f"rule {rule.pattern!r}", "matched no locations")
    resolved = schema_from_document(document)
    return resolved


def _apply_one(document: dict, rule: ConfigRule, report: ValidationReport | None) -> int:
    locations = jsonpath.select(document, rule.pattern)
    applied = 0
    for loc in locations:
        node = jsonpath.resolve(document, loc)
        if not isinstance(node, dict):
            if report is not None:
                dotted = ".".join(str(k) for k in loc)
                report.warn(f"rule {rule.pattern!r}", f"{dotted} cannot carry meta; skipped")
            continue
        node.setdefault("meta", {}).update(copy.deepcopy(rule.values))
        applied += 1
    return len(locations)
