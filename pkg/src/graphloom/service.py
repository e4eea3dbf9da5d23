"""Read-only inference service for the edit-and-rerun workflow.

The server holds one frozen checkpoint plus the dataset it was trained on.
What-if edits live entirely in the request: clients post a component of
(possibly edited) entities and an optional mask, and get back per-entity
reconstructions, per-depth bottlenecks, and per-property losses against
the provided values. Nothing is ever written server-side.
"""

from __future__ import annotations

import logging
from typing import Any

import numpy as np
from fastapi import Body, FastAPI, HTTPException, Response

from .dataset import Dataset, build_dataset, make_batch
from .errors import CodecError, GraphloomError
from .explore import BottleneckTable, export_bottlenecks, neighbors_of
from .model import AssembledModel, load_checkpoint, reconstruct
from .schema import parse_entities, validate_entity

logger = logging.getLogger(__name__)


class InferenceState:
    def __init__(self, model: AssembledModel, schema_json: str, dataset: Dataset):
        self.model = model
        self.schema_json = schema_json
        self.dataset = dataset
        self._table: BottleneckTable | None = None

    @property
    def table(self) -> BottleneckTable:
        if self._table is None:
            self._table = export_bottlenecks(self.model, self.dataset)
        return self._table


def load_state(checkpoint_path: str, entities_path: str) -> InferenceState:
    model, header = load_checkpoint(checkpoint_path)
    with open(entities_path) as handle:
        records = parse_entities(handle.read())
    problems = []
    for record in records:
        report = validate_entity(model.schema, record)
        problems.extend(report.errors)
    if problems:
        rendered = "; ".join(f"{loc}: {msg}" for loc, msg in problems[:5])
        raise GraphloomError(f"entity file does not match checkpoint schema: {rendered}")
    dataset = build_dataset(model.schema, records, model.codecs)
    return InferenceState(model, header["schema_json"], dataset)


def _strip_meta(record: dict) -> dict:
    return {k: v for k, v in record.items() if k not in ("entity_type", "id")}


def create_app(state: InferenceState) -> FastAPI:
    app = FastAPI(title="graphloom inference service")
    model = state.model
    dataset = state.dataset

    @app.get("/schema")
    def get_schema() -> Response:
        # byte-for-byte the schema embedded in the checkpoint
        return Response(content=state.schema_json, media_type="application/json")

    @app.get("/entities")
    def get_entities(type: str | None = None, offset: int = 0, limit: int = 50) -> dict:
        if offset < 0 or limit < 1 or limit > 500:
            raise HTTPException(status_code=400, detail="offset must be >= 0 and 1 <= limit <= 500")
        ids = [
            i for i in dataset.ids
            if type is None or dataset.entity_type[i] == type
        ]
        page = ids[offset : offset + limit]
        return {
            "total": len(ids),
            "offset": offset,
            "entities": [dataset.raw[i] for i in page],
        }

    @app.get("/entity/{ident}")
    def get_entity(ident: str) -> dict:
        if ident not in dataset.entity_type:
            raise HTTPException(status_code=404, detail=f"unknown entity {ident!r}")
        edges = []
        for rel, pairs in dataset.adjacency.items():
            for src, tgt in pairs:
                if src == ident or tgt == ident:
                    edges.append({"relationship": rel, "source": src, "target": tgt})
        return {"entity": dataset.raw[ident], "edges": edges}

    @app.get("/neighbors/{ident}")
    def get_neighbors(ident: str, k: int = 10) -> dict:
        if ident not in dataset.entity_type:
            raise HTTPException(status_code=404, detail=f"unknown entity {ident!r}")
        if k < 1:
            raise HTTPException(status_code=400, detail="k must be >= 1")
        try:
            ranked = neighbors_of(state.table, ident, k=k)
        except GraphloomError as err:
            raise HTTPException(status_code=422, detail=str(err))
        return {
            "id": ident,
            "neighbors": [
                {
                    "id": other,
                    "similarity": score,
                    "properties": _strip_meta(dataset.raw[other]),
                }
                for other, score in ranked
            ],
        }

    @app.post("/infer")
    def infer(request: dict = Body(...)) -> dict:
        return run_inference(model, request)

    return app


def run_inference(model: AssembledModel, request: dict) -> dict:
    """Pack the request component with the checkpoint codecs and forward it."""
    entities = request.get("entities")
    if not isinstance(entities, list) or not entities:
        raise HTTPException(status_code=422,
                            detail={"error": "request needs an entities list", "field": "entities"})
    known = {r.get("id") for r in entities if isinstance(r, dict)}
    for record in entities:
        report = validate_entity(model.schema, record)
        if not report.ok:
            location, message = report.errors[0]
            raise HTTPException(status_code=422, detail={"error": message, "field": location})
        for key, value in record.items():
            if key in model.schema.relationships:
                targets = value if isinstance(value, list) else [value]
                for target in targets:
                    if target not in known:
                        raise HTTPException(
                            status_code=422,
                            detail={
                                "error": f"edge target {target!r} is not part of the request",
                                "field": f"{record['id']}.{key}",
                            },
                        )
    try:
        dataset = build_dataset(model.schema, entities, model.codecs)
    except (CodecError, GraphloomError) as err:
        raise HTTPException(status_code=422, detail={"error": str(err), "field": "entities"})
    batch = make_batch(dataset, dataset.ids)

    mask = request.get("mask", [])
    row_of = {ident: i for i, ident in enumerate(batch.ids)}
    for entry in mask:
        if not (isinstance(entry, (list, tuple)) and len(entry) == 2):
            raise HTTPException(status_code=422,
                                detail={"error": "mask entries are [id, property] pairs",
                                        "field": "mask"})
        ident, prop = entry
        if ident not in row_of:
            raise HTTPException(status_code=422,
                                detail={"error": f"masked id {ident!r} not in request",
                                        "field": "mask"})
        if prop not in model.schema.properties:
            raise HTTPException(status_code=422,
                                detail={"error": f"unknown property {prop!r}", "field": "mask"})
        row = row_of[ident]
        if batch.observed[prop][row]:
            batch.observed[prop][row] = False
            batch.masked[prop][row] = True

    out = model.forward(batch, training=False)
    recon = reconstruct(model, out)
    response: dict[str, Any] = {"entities": {}}
    for row, ident in enumerate(batch.ids):
        losses = {
            prop: table[row]
            for prop, table in out.per_entity_losses.items()
            if row in table
        }
        response["entities"][ident] = {
            "entity_type": dataset.entity_type[ident],
            "reconstructions": _jsonable(recon.get(ident, {})),
            "bottlenecks": [[float(v) for v in depth[row]] for depth in out.bottlenecks],
            "losses": losses,
        }
    return response


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


def serve(checkpoint_path: str, entities_path: str, host: str, port: int) -> None:
    import uvicorn

    state = load_state(checkpoint_path, entities_path)
    app = create_app(state)
    uvicorn.run(app, host=host, port=port, log_level="warning")
