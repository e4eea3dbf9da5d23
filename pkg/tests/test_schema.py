from __future__ import annotations

import pytest

from graphloom.errors import SchemaError
from graphloom.loosejson import load_stream, loads
from graphloom.schema import (
    parse_entities,
    parse_schema,
    schema_from_document,
    schema_to_document,
    serialize_schema,
    validate_entity,
)


def test_schema_document_parses_as_written(office_schema_text):
    # the document carries a missing comma after @context; the reader tolerates it
    schema = parse_schema(office_schema_text)
    assert len(schema.entity_types) == 2
    assert len(schema.properties) == 5
    assert len(schema.relationships) == 2
    assert schema.entity_types["person"].properties == ["name", "age", "job"]
    assert schema.relationships["office_of"].source_entity_type == "location"
    assert schema.context == {"@vocab": "https://www.comp-int-hum.org"}


def test_image_property_parses_with_warning(office_schema_text):
    schema = parse_schema(office_schema_text)
    assert any("photo" in loc for loc, _ in schema.warnings)


def test_empty_schema_is_valid():
    schema = parse_schema('{"entity_types": {}, "properties": {}, "relationships": {}}')
    assert not schema.entity_types and not schema.properties and not schema.relationships


def test_dangling_relationship_target_rejected(office_schema_text):
    doc = loads(office_schema_text)
    doc["relationships"]["office_of"]["target_entity_type"] = "manager"
    with pytest.raises(SchemaError) as err:
        schema_from_document(doc)
    assert "office_of" in str(err.value)


def test_unknown_property_type_rejected(office_schema_text):
    doc = loads(office_schema_text)
    doc["properties"]["age"]["type"] = "integer"
    with pytest.raises(SchemaError) as err:
        schema_from_document(doc)
    assert "integer" in str(err.value)


def test_duplicate_name_rejected():
    text = '{"properties": {"a": {"type": "scalar"}, "a": {"type": "text"}}}'
    with pytest.raises(SchemaError) as err:
        parse_schema(text)
    assert "duplicate" in str(err.value)


def test_dangling_property_reference_rejected():
    text = '{"entity_types": {"p": ["ghost"]}, "properties": {}, "relationships": {}}'
    with pytest.raises(SchemaError):
        parse_schema(text)


def test_round_trip_is_identity(office_schema_text):
    schema = parse_schema(office_schema_text)
    again = parse_schema(serialize_schema(schema))
    assert schema_to_document(again) == schema_to_document(schema)
    assert again.entity_types == schema.entity_types
    assert again.properties == schema.properties
    assert again.relationships == schema.relationships


def test_entities_parse_as_written(office_entities_text):
    # trailing comma after the age value; records are pretty-printed back to back
    records = parse_entities(office_entities_text)
    assert [r["id"] for r in records] == ["P1", "L1"]
    assert records[0]["age"] == 27
    assert records[1]["office_of"] == ["P1", "P4"]


def test_entity_stream_accepts_one_record_per_line():
    text = '{"entity_type": "a", "id": "1"}\n{"entity_type": "a", "id": "2"}\n'
    assert [r["id"] for r in load_stream(text)] == ["1", "2"]


def test_validate_accepts_example_records(office_schema, office_entities):
    for record in office_entities:
        report = validate_entity(office_schema, record)
        assert report.ok, report.render()


def test_validate_accepts_minimal_record(office_schema):
    report = validate_entity(office_schema, {"entity_type": "person", "id": "P9"})
    assert report.ok


def test_validate_rejects_unknown_property(office_schema, office_entities):
    record = dict(office_entities[0])
    record["salary"] = 10
    report = validate_entity(office_schema, record)
    assert not report.ok
    assert any("salary" in msg for _, msg in report.errors)


@pytest.mark.parametrize(
    "patch,field",
    [
        ({"entity_type": "robot"}, "entity_type"),
        ({"id": ""}, "id"),
        ({"age": "old"}, "age"),
        ({"name": 5}, "name"),
    ],
)
def test_validate_rejects_malformed_records(office_schema, office_entities, patch, field):
    record = {**office_entities[0], **patch}
    assert not validate_entity(office_schema, record).ok


def test_validate_rejects_relationship_from_wrong_source(office_schema):
    record = {"entity_type": "person", "id": "P2", "office_of": ["P1"]}
    report = validate_entity(office_schema, record)
    assert not report.ok


def test_validate_place_requires_both_coordinates(office_schema):
    record = {"entity_type": "location", "id": "L2", "coordinates": {"latitude": 1.0}}
    report = validate_entity(office_schema, record)
    assert any("longitude" in msg for _, msg in report.errors)
