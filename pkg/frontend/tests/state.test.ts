import { describe, expect, it } from "vitest";

import {
  applyEdit,
  initialState,
  inferRequest,
  isMasked,
  loadComponent,
  lossDeltas,
  rerun,
  undo,
  ViewState,
} from "../src/state.js";
import type { EntityRecord, InferResponse } from "../src/types.js";
import { ApiClient } from "../src/api.js";

const records: EntityRecord[] = [
  { entity_type: "node", id: "a", operation: "add", value: 1.5, left: ["b"], right: ["c"] },
  { entity_type: "node", id: "b", operation: "const", value: 1.0 },
  { entity_type: "node", id: "c", operation: "const", value: 0.5 },
];

function loaded(): ViewState {
  return loadComponent(initialState(), records);
}

describe("component editing", () => {
  it("local edits never touch the loaded records", () => {
    const state = loaded();
    const edited = applyEdit(state, { kind: "set", id: "b", property: "value", value: 9 });
    expect(edited.component!.entities[1].value).toBe(9);
    expect(records[1].value).toBe(1.0);
    expect(state.component!.entities[1].value).toBe(1.0);
  });

  it("masking is per entity and property", () => {
    let state = loaded();
    state = applyEdit(state, { kind: "mask", id: "a", property: "value", on: true });
    expect(isMasked(state.component!, "a", "value")).toBe(true);
    expect(isMasked(state.component!, "b", "value")).toBe(false);
    expect(inferRequest(state.component!).mask).toEqual([["a", "value"]]);
    state = applyEdit(state, { kind: "mask", id: "a", property: "value", on: false });
    expect(inferRequest(state.component!).mask).toBeUndefined();
  });

  it("edge edits update the source record", () => {
    let state = loaded();
    state = applyEdit(state, {
      kind: "remove-edge", relationship: "left", source: "a", target: "b",
    });
    expect(state.component!.entities[0].left).toBeUndefined();
    state = applyEdit(state, {
      kind: "add-edge", relationship: "left", source: "a", target: "c",
    });
    expect(state.component!.entities[0].left).toEqual(["c"]);
  });

  it("undo walks back to the initially loaded component", () => {
    let state = loaded();
    state = applyEdit(state, { kind: "set", id: "a", property: "value", value: 2 });
    state = applyEdit(state, { kind: "set", id: "a", property: "value", value: 3 });
    state = undo(state);
    expect(state.component!.entities[0].value).toBe(2);
    state = undo(state);
    expect(state.component!.entities[0].value).toBe(1.5);
    const floor = undo(state);
    expect(floor.component!.entities[0].value).toBe(1.5);
  });
});

function fakeResponse(losses: Record<string, Record<string, number>>): InferResponse {
  const entities: InferResponse["entities"] = {};
  for (const [id, table] of Object.entries(losses)) {
    entities[id] = {
      entity_type: "node",
      reconstructions: {},
      bottlenecks: [[0, 0]],
      losses: table,
    };
  }
  return { entities };
}

describe("loss deltas", () => {
  it("are empty before two runs and zero for identical runs", () => {
    let state = loaded();
    expect(lossDeltas(state)).toEqual({});
    const run = fakeResponse({ a: { value: 0.25, operation: 1.5 } });
    state = { ...state, previousRun: run, lastRun: JSON.parse(JSON.stringify(run)) };
    const deltas = lossDeltas(state);
    expect(deltas.a.value).toBe(0);
    expect(deltas.a.operation).toBe(0);
  });

  it("report signed changes", () => {
    let state = loaded();
    state = {
      ...state,
      previousRun: fakeResponse({ a: { value: 0.5 } }),
      lastRun: fakeResponse({ a: { value: 0.125 } }),
    };
    expect(lossDeltas(state).a.value).toBeCloseTo(-0.375);
  });
});

describe("rerun", () => {
  it("shifts lastRun into previousRun", async () => {
    const responses = [
      fakeResponse({ a: { value: 0.5 } }),
      fakeResponse({ a: { value: 0.25 } }),
    ];
    let call = 0;
    const api = new ApiClient("", async () =>
      new Response(JSON.stringify(responses[call++]), { status: 200 }),
    );
    let state = loaded();
    state = await rerun(state, api);
    expect(state.previousRun).toBeNull();
    expect(state.lastRun!.entities.a.losses.value).toBe(0.5);
    state = await rerun(state, api);
    expect(state.previousRun!.entities.a.losses.value).toBe(0.5);
    expect(state.lastRun!.entities.a.losses.value).toBe(0.25);
  });
});
