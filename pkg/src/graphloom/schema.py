"""Entity-relationship schema model: parsing, validation, and serialization.

A schema document has three top-level mappings (entity_types, properties,
relationships) and an optional @context carrying a vocabulary base. Every
node may carry a "meta" mapping, normally written by configuration rules,
which controls how the model compiler treats it.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from typing import Any

from . import loosejson
from .errors import SchemaError

PROPERTY_TYPES = ("scalar", "categorical", "text", "distribution", "date", "place", "image")

#: record keys that are metadata rather than properties/relationships
META_KEYS = ("entity_type", "id")


@dataclass
class PropertyDef:
    name: str
    type: str
    meta: dict[str, Any] = field(default_factory=dict)
    extra: dict[str, Any] = field(default_factory=dict)  # unknown keys, preserved verbatim


@dataclass
class RelationshipDef:
    name: str
    source_entity_type: str
    target_entity_type: str
    meta: dict[str, Any] = field(default_factory=dict)
    extra: dict[str, Any] = field(default_factory=dict)


@dataclass
class EntityTypeDef:
    name: str
    properties: list[str] = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)


@dataclass
class ValidationReport:
    errors: list[tuple[str, str]] = field(default_factory=list)
    warnings: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def error(self, location: str, message: str) -> None:
        self.errors.append((location, message))

    def warn(self, location: str, message: str) -> None:
        self.warnings.append((location, message))

    def extend(self, other: "ValidationReport") -> None:
        self.errors.extend(other.errors)
        self.warnings.extend(other.warnings)

    def render(self) -> str:
        lines = [f"error: {loc}: {msg}" for loc, msg in self.errors]
        lines += [f"warning: {loc}: {msg}" for loc, msg in self.warnings]
        return "\n".join(lines)


@dataclass
class DomainSchema:
    entity_types: dict[str, EntityTypeDef]
    properties: dict[str, PropertyDef]
    relationships: dict[str, RelationshipDef]
    context: Any = None
    warnings: list[tuple[str, str]] = field(default_factory=list)

    def property_entity_types(self, prop: str) -> list[str]:
        return [name for name, et in self.entity_types.items() if prop in et.properties]

    def relationships_from(self, entity_type: str) -> list[str]:
        return [
            name
            for name, rel in self.relationships.items()
            if rel.source_entity_type == entity_type
        ]

    def relationships_to(self, entity_type: str) -> list[str]:
        return [
            name
            for name, rel in self.relationships.items()
            if rel.target_entity_type == entity_type
        ]


def parse_schema(text: str) -> DomainSchema:
    """Parse and validate a schema document, raising SchemaError on any error.

    Non-fatal findings (e.g. image properties, which are represented but not
    modeled) are collected on the returned schema's ``warnings``.
    """
    document = loosejson.loads(text, reject_duplicate_keys=True)
    return schema_from_document(document)


def schema_from_document(document: Any) -> DomainSchema:
    if not isinstance(document, dict):
        raise SchemaError("schema document must be a mapping")
    warnings: list[tuple[str, str]] = []

    properties: dict[str, PropertyDef] = {}
    for name, node in _mapping(document, "properties").items():
        if not isinstance(node, dict):
            raise SchemaError(f"properties.{name}: expected a mapping")
        ptype = node.get("type")
        if ptype not in PROPERTY_TYPES:
            raise SchemaError(
                f"properties.{name}: unknown property type {ptype!r} "
                f"(expected one of {', '.join(PROPERTY_TYPES)})"
            )
        if ptype == "image":
            warnings.append(
                (f"properties.{name}", "image properties are accepted but not modeled; "
                 "defaulting to Null encoder/decoder")
            )
        meta = dict(node.get("meta", {}))
        extra = {k: v for k, v in node.items() if k not in ("type", "meta")}
        properties[name] = PropertyDef(name=name, type=ptype, meta=meta, extra=extra)

    entity_types: dict[str, EntityTypeDef] = {}
    for name, node in _mapping(document, "entity_types").items():
        if isinstance(node, list):
            prop_names, meta = list(node), {}
        elif isinstance(node, dict):
            prop_names = list(node.get("properties", []))
            meta = dict(node.get("meta", {}))
        else:
            raise SchemaError(f"entity_types.{name}: expected a list of property names")
        for prop in prop_names:
            if prop not in properties:
                raise SchemaError(f"entity_types.{name}: dangling property reference {prop!r}")
        if len(set(prop_names)) != len(prop_names):
            raise SchemaError(f"entity_types.{name}: duplicate property in list")
        entity_types[name] = EntityTypeDef(name=name, properties=prop_names, meta=meta)

    relationships: dict[str, RelationshipDef] = {}
    for name, node in _mapping(document, "relationships").items():
        if not isinstance(node, dict):
            raise SchemaError(f"relationships.{name}: expected a mapping")
        source = node.get("source_entity_type")
        target = node.get("target_entity_type")
        for role, etype in (("source_entity_type", source), ("target_entity_type", target)):
            if etype not in entity_types:
                raise SchemaError(f"relationships.{name}: {role} {etype!r} is not an entity-type")
        meta = dict(node.get("meta", {}))
        extra = {
            k: v
            for k, v in node.items()
            if k not in ("source_entity_type", "target_entity_type", "meta")
        }
        relationships[name] = RelationshipDef(
            name=name,
            source_entity_type=source,
            target_entity_type=target,
            meta=meta,
            extra=extra,
        )

    return DomainSchema(
        entity_types=entity_types,
        properties=properties,
        relationships=relationships,
        context=document.get("@context"),
        warnings=warnings,
    )


def _mapping(document: dict, key: str) -> dict:
    node = document.get(key, {})
    if not isinstance(node, dict):
        raise SchemaError(f"{key}: expected a mapping")
    return node


def schema_to_document(schema: DomainSchema) -> dict:
    """Inverse of schema_from_document; parse(serialize(s)) == s on valid schemas."""
    document: dict[str, Any] = {}
    if schema.context is not None:
        document["@context"] = schema.context
    document["entity_types"] = {}
    for name, et in schema.entity_types.items():
        if et.meta:
            document["entity_types"][name] = {"properties": list(et.properties), "meta": et.meta}
        else:
            document["entity_types"][name] = list(et.properties)
    document["properties"] = {}
    for name, prop in schema.properties.items():
        node: dict[str, Any] = {"type": prop.type}
        node.update(prop.extra)
        if prop.meta:
            node["meta"] = prop.meta
        document["properties"][name] = node
    document["relationships"] = {}
    for name, rel in schema.relationships.items():
        node = {
            "source_entity_type": rel.source_entity_type,
            "target_entity_type": rel.target_entity_type,
        }
        node.update(rel.extra)
        if rel.meta:
            node["meta"] = rel.meta
        document["relationships"][name] = node
    return document


def serialize_schema(schema: DomainSchema) -> str:
    import json

    return json.dumps(schema_to_document(schema), indent=2)


def _check_place(value: Any) -> str | None:
    if not isinstance(value, dict):
        return "place value must be a mapping with latitude/longitude"
    for key in ("latitude", "longitude"):
        if not isinstance(value.get(key), (int, float)) or isinstance(value.get(key), bool):
            return f"place value missing numeric {key}"
    return None


def _check_date(value: Any) -> str | None:
    if isinstance(value, (_dt.date, _dt.datetime)):
        return None
    if isinstance(value, str):
        try:
            _dt.date.fromisoformat(value[:10])
            return None
        except ValueError:
            return f"date value {value!r} is not ISO formatted"
    return "date value must be an ISO string"


def check_property_value(ptype: str, value: Any) -> str | None:
    """Return an error message if value does not fit the property type, else None."""
    if ptype == "scalar":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return "scalar value must be a number"
    elif ptype == "categorical":
        if not isinstance(value, (str, int, float, bool)):
            return "categorical value must be a plain scalar"
    elif ptype == "text":
        if not isinstance(value, str):
            return "text value must be a string"
    elif ptype == "distribution":
        if not isinstance(value, list) or not value:
            return "distribution value must be a non-empty list of numbers"
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
            return "distribution value must contain only numbers"
    elif ptype == "date":
        return _check_date(value)
    elif ptype == "place":
        return _check_place(value)
    elif ptype == "image":
        if not isinstance(value, str):
            return "image value must be a URL or filename string"
    return None


def validate_entity(schema: DomainSchema, record: Any) -> ValidationReport:
    """Check one raw record against the schema. Findings are reported, never raised."""
    report = ValidationReport()
    if not isinstance(record, dict):
        report.error("$", "record must be a mapping")
        return report
    entity_type = record.get("entity_type")
    ident = record.get("id")
    where = f"entity {ident!r}" if ident else "entity"
    if not ident or not isinstance(ident, str):
        report.error(where, "id must be a non-empty string")
    if entity_type not in schema.entity_types:
        report.error(where, f"unknown entity_type {entity_type!r}")
        return report
    et = schema.entity_types[entity_type]
    for key, value in record.items():
        if key in META_KEYS:
            continue
        if key in schema.relationships:
            rel = schema.relationships[key]
            if rel.source_entity_type != entity_type:
                report.error(
                    f"{where}.{key}",
                    f"relationship {key!r} has source {rel.source_entity_type!r}, "
                    f"not {entity_type!r}",
                )
                continue
            targets = value if isinstance(value, list) else [value]
            for target in targets:
                if not isinstance(target, str) or not target:
                    report.error(f"{where}.{key}", "relationship values must be id strings")
                    break
            continue
        if key not in schema.properties:
            report.error(f"{where}.{key}", f"unknown property {key!r} for entity-type {entity_type!r}")
            continue
        if key not in et.properties:
            report.error(
                f"{where}.{key}",
                f"property {key!r} is not a potential property of {entity_type!r}",
            )
            continue
        problem = check_property_value(schema.properties[key].type, value)
        if problem:
            report.error(f"{where}.{key}", problem)
    return report


def parse_entities(text: str) -> list[dict]:
    """Parse an entity file: a stream of records, pretty-printed or one per line."""
    records = loosejson.load_stream(text)
    for i, record in enumerate(records):
        if not isinstance(record, dict):
            raise SchemaError(f"record {i}: expected a mapping")
    return records
