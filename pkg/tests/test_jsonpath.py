from __future__ import annotations

import pytest

from graphloom import jsonpath
from graphloom.errors import JsonPathError
from graphloom.loosejson import loads


def test_root_selector_matches_root():
    assert jsonpath.select({"a": 1}, "$") == [()]
    assert jsonpath.select([1, 2], "$") == [()]


def test_child_and_wildcard(office_schema_text):
    doc = loads(office_schema_text)
    assert jsonpath.select(doc, "$.properties.name") == [("properties", "name")]
    stars = jsonpath.select(doc, "$.properties.*")
    assert stars == [
        ("properties", "name"),
        ("properties", "age"),
        ("properties", "job"),
        ("properties", "coordinates"),
        ("properties", "photo"),
    ]


def test_filter_selects_exactly_the_image_property(office_schema_text):
    doc = loads(office_schema_text)
    assert jsonpath.select(doc, "$.properties[?(@.type=='image')]") == [
        ("properties", "photo")
    ]


def test_zero_matches_is_valid():
    assert jsonpath.select({"a": {"b": 1}}, "$.missing") == []
    assert jsonpath.select({"a": {"b": 1}}, "$.a[?(@.x=='y')]") == []


def test_wildcard_over_list():
    assert jsonpath.select({"a": [10, 20]}, "$.a.*") == [("a", 0), ("a", 1)]


def test_select_is_pure(office_schema_text):
    doc = loads(office_schema_text)
    first = jsonpath.select(doc, "$.properties.*")
    second = jsonpath.select(doc, "$.properties.*")
    assert first == second


@pytest.mark.parametrize(
    "pattern",
    ["properties.name", "$..deep", "$[0]", "$.a[?(@.x==3)]", "$.a[*]", "$.", "$.a b"],
)
def test_unsupported_syntax_raises_with_token(pattern):
    with pytest.raises(JsonPathError) as err:
        jsonpath.select({}, pattern)
    assert str(err.value)


def test_resolve_follows_path():
    doc = {"a": {"b": [1, 2, 3]}}
    assert jsonpath.resolve(doc, ("a", "b", 2)) == 3
