from __future__ import annotations

from pathlib import Path

import pytest

from graphloom.rules import apply_rules, parse_rules
from graphloom.schema import parse_entities, parse_schema

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def office_schema_text() -> str:
    return (DATA / "office_domain" / "schema.json").read_text()


@pytest.fixture(scope="session")
def office_entities_text() -> str:
    return (DATA / "office_domain" / "entities.txt").read_text()


@pytest.fixture(scope="session")
def office_rule_text() -> str:
    return (DATA / "office_domain" / "image_rule.json").read_text()


@pytest.fixture()
def office_schema(office_schema_text):
    return parse_schema(office_schema_text)


@pytest.fixture()
def office_entities(office_entities_text):
    return parse_entities(office_entities_text)


@pytest.fixture()
def resolved_office_schema(office_schema, office_rule_text):
    return apply_rules(office_schema, parse_rules(office_rule_text))
