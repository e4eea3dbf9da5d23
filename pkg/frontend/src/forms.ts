/** Schema-driven form generation: the widget follows the property type. */

import type { PropertyType, SchemaDoc } from "./types.js";

export interface FieldSpec {
  property: string;
  widget: "number" | "text" | "textarea" | "date" | "latlon" | "weights" | "url";
  /** categorical fields render as a select when choices are known */
  choices?: string[];
}

const WIDGETS: Record<PropertyType, FieldSpec["widget"]> = {
  scalar: "number",
  categorical: "text",
  text: "textarea",
  distribution: "weights",
  date: "date",
  place: "latlon",
  image: "url",
};

export function fieldSpec(
  schema: SchemaDoc,
  property: string,
  choices?: string[],
): FieldSpec {
  const def = schema.properties[property];
  if (!def) throw new Error(`unknown property ${property}`);
  const spec: FieldSpec = { property, widget: WIDGETS[def.type] };
  if (def.type === "categorical" && choices?.length) {
    spec.choices = choices;
  }
  return spec;
}

/** Collect the categorical values present in a set of records, per property. */
export function observedChoices(
  records: Array<Record<string, unknown>>,
  schema: SchemaDoc,
): Record<string, string[]> {
  const found: Record<string, Set<string>> = {};
  for (const record of records) {
    for (const [key, value] of Object.entries(record)) {
      if (schema.properties[key]?.type !== "categorical") continue;
      (found[key] ??= new Set()).add(String(value));
    }
  }
  return Object.fromEntries(
    Object.entries(found).map(([key, values]) => [key, [...values].sort()]),
  );
}

export function parseFieldInput(widget: FieldSpec["widget"], raw: string): unknown {
  switch (widget) {
    case "number": {
      const value = Number(raw);
      if (Number.isNaN(value)) throw new Error(`not a number: ${raw}`);
      return value;
    }
    case "latlon": {
      const [lat, lon] = raw.split(",").map((part) => Number(part.trim()));
      if (Number.isNaN(lat) || Number.isNaN(lon)) {
        throw new Error("expected 'latitude, longitude'");
      }
      return { latitude: lat, longitude: lon };
    }
    case "weights": {
      const weights = raw.split(",").map((part) => Number(part.trim()));
      if (weights.some(Number.isNaN)) throw new Error("expected comma-separated numbers");
      return weights;
    }
    default:
      return raw;
  }
}

export function formatFieldValue(widget: FieldSpec["widget"], value: unknown): string {
  if (value === undefined || value === null) return "";
  if (widget === "latlon" && typeof value === "object") {
    const place = value as { latitude?: number; longitude?: number };
    return `${place.latitude ?? ""}, ${place.longitude ?? ""}`;
  }
  if (widget === "weights" && Array.isArray(value)) {
    return value.join(", ");
  }
  return String(value);
}
