"""Heuristic schema derivation from tabular data.

One entity-type per hinted column group (default: a single type for the
whole table). Column types are inferred: all-numeric columns become
scalars, low-cardinality columns become categoricals, everything else is
text. Hinted foreign-key columns become relationships between groups.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Any

from .errors import SchemaError
from .schema import DomainSchema, EntityTypeDef, PropertyDef, RelationshipDef

#: distinct-value ceiling for treating a string column as categorical
CATEGORICAL_MAX = 32
CATEGORICAL_ROW_FRACTION = 0.10


@dataclass
class ColumnHint:
    entity_type: str | None = None   # group this column into the named entity-type
    type: str | None = None          # force a property type
    foreign_key: str | None = None   # column holds ids of the named entity-type
    is_id: bool = False              # column supplies the entity id for its group


@dataclass
class TabularResult:
    schema: DomainSchema
    records: list[dict] = field(default_factory=list)


def _parse_number(raw: str) -> float | None:
    try:
        return float(raw)
    except ValueError:
        return None


def infer_column_type(values: list[str], row_count: int) -> str:
    nonempty = [v for v in values if v != ""]
    if not nonempty:
        return "text"
    if all(_parse_number(v) is not None for v in nonempty):
        return "scalar"
    threshold = min(CATEGORICAL_MAX, int(CATEGORICAL_ROW_FRACTION * row_count))
    if len(set(nonempty)) <= max(1, threshold):
        return "categorical"
    return "text"


def derive_schema_from_tabular(
    rows: list[dict[str, str]] | str,
    hints: dict[str, ColumnHint] | None = None,
    default_entity_type: str = "record",
) -> TabularResult:
    """Derive a schema (and converted records) from rows sharing a header.

    Accepts either parsed rows or raw CSV text. Hints may group columns into
    entity-types, force property types, mark id columns, and declare foreign
    keys (which become relationships between the groups).
    """
    if isinstance(rows, str):
        reader = csv.reader(io.StringIO(rows))
        table = list(reader)
        if not table:
            raise SchemaError("empty table")
        header = table[0]
        widths = {len(r) for r in table}
        if len(widths) != 1:
            raise SchemaError(f"inconsistent column counts: {sorted(widths)}")
        rows = [dict(zip(header, r)) for r in table[1:]]
    if not rows:
        raise SchemaError("empty table")
    hints = hints or {}
    columns = list(rows[0].keys())
    row_count = len(rows)

    groups: dict[str, list[str]] = {}
    for col in columns:
        hint = hints.get(col, ColumnHint())
        group = hint.entity_type or default_entity_type
        groups.setdefault(group, []).append(col)

    properties: dict[str, PropertyDef] = {}
    entity_types: dict[str, EntityTypeDef] = {}
    relationships: dict[str, RelationshipDef] = {}
    id_columns: dict[str, str] = {}

    for group, cols in groups.items():
        prop_names = []
        for col in cols:
            hint = hints.get(col, ColumnHint())
            if hint.is_id:
                id_columns[group] = col
                continue
            if hint.foreign_key:
                relationships[col] = RelationshipDef(
                    name=col,
                    source_entity_type=group,
                    target_entity_type=hint.foreign_key,
                )
                continue
            ptype = hint.type or infer_column_type([r.get(col, "") for r in rows], row_count)
            properties[col] = PropertyDef(name=col, type=ptype)
            prop_names.append(col)
        entity_types[group] = EntityTypeDef(name=group, properties=prop_names)

    for rel in relationships.values():
        if rel.target_entity_type not in entity_types:
            raise SchemaError(
                f"foreign key {rel.name!r} targets unknown group {rel.target_entity_type!r}"
            )

    schema = DomainSchema(
        entity_types=entity_types, properties=properties, relationships=relationships
    )
    records = _rows_to_records(rows, schema, groups, id_columns, hints)
    return TabularResult(schema=schema, records=records)


def _convert(ptype: str, raw: str) -> Any:
    if ptype == "scalar":
        return float(raw)
    return raw


def _rows_to_records(rows, schema, groups, id_columns, hints):
    records = []
    seen_ids: dict[str, set] = {g: set() for g in groups}
    for i, row in enumerate(rows):
        for group, cols in groups.items():
            id_col = id_columns.get(group)
            ident = row[id_col] if id_col else f"{group}-{i}"
            if ident in seen_ids[group]:
                continue  # id columns may repeat across rows; first occurrence wins
            seen_ids[group].add(ident)
            record: dict[str, Any] = {"entity_type": group, "id": ident}
            for col in cols:
                hint = hints.get(col, ColumnHint())
                raw = row.get(col, "")
                if raw == "" or hint.is_id:
                    continue
                if hint.foreign_key:
                    record[col] = raw  # value is the target entity's id
                else:
                    record[col] = _convert(schema.properties[col].type, raw)
            records.append(record)
    return records
