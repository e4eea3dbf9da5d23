import { describe, expect, it } from "vitest";

import { fieldSpec, formatFieldValue, observedChoices, parseFieldInput } from "../src/forms.js";
import type { SchemaDoc } from "../src/types.js";

const schema: SchemaDoc = {
  entity_types: { person: ["name", "age", "job", "born", "home", "mix"] },
  properties: {
    name: { type: "text" },
    age: { type: "scalar" },
    job: { type: "categorical" },
    born: { type: "date" },
    home: { type: "place" },
    mix: { type: "distribution" },
  },
  relationships: {},
};

describe("schema-driven widgets", () => {
  it("chooses the widget by property type", () => {
    expect(fieldSpec(schema, "age").widget).toBe("number");
    expect(fieldSpec(schema, "name").widget).toBe("textarea");
    expect(fieldSpec(schema, "born").widget).toBe("date");
    expect(fieldSpec(schema, "home").widget).toBe("latlon");
    expect(fieldSpec(schema, "mix").widget).toBe("weights");
  });

  it("categoricals become selects when choices are known", () => {
    const spec = fieldSpec(schema, "job", ["clerk", "smith"]);
    expect(spec.choices).toEqual(["clerk", "smith"]);
    expect(fieldSpec(schema, "job").choices).toBeUndefined();
  });

  it("rejects unknown properties", () => {
    expect(() => fieldSpec(schema, "ghost")).toThrow();
  });
});

describe("value parsing and formatting", () => {
  it("round-trips numbers and coordinates", () => {
    expect(parseFieldInput("number", "2.5")).toBe(2.5);
    expect(parseFieldInput("latlon", "39.29, 76.61")).toEqual({
      latitude: 39.29,
      longitude: 76.61,
    });
    expect(formatFieldValue("latlon", { latitude: 1, longitude: 2 })).toBe("1, 2");
    expect(parseFieldInput("weights", "1, 3")).toEqual([1, 3]);
    expect(formatFieldValue("weights", [0.5, 0.5])).toBe("0.5, 0.5");
  });

  it("reports malformed input", () => {
    expect(() => parseFieldInput("number", "tall")).toThrow();
    expect(() => parseFieldInput("latlon", "39.29")).toThrow();
  });
});

describe("observed choices", () => {
  it("collects categorical values present in records", () => {
    const choices = observedChoices(
      [
        { entity_type: "person", id: "1", job: "smith" },
        { entity_type: "person", id: "2", job: "clerk" },
        { entity_type: "person", id: "3", job: "clerk", name: "x" },
      ],
      schema,
    );
    expect(choices.job).toEqual(["clerk", "smith"]);
    expect(choices.name).toBeUndefined();
  });
});
