/** Payload shapes of the inference service HTTP API. */

export type PropertyType =
  | "scalar"
  | "categorical"
  | "text"
  | "distribution"
  | "date"
  | "place"
  | "image";

export interface PropertyDef {
  type: PropertyType;
  meta?: Record<string, unknown>;
}

export interface RelationshipDef {
  source_entity_type: string;
  target_entity_type: string;
  meta?: Record<string, unknown>;
}

export interface SchemaDoc {
  "@context"?: unknown;
  entity_types: Record<string, string[] | { properties: string[] }>;
  properties: Record<string, PropertyDef>;
  relationships: Record<string, RelationshipDef>;
}

export function entityTypeProperties(schema: SchemaDoc, name: string): string[] {
  const node = schema.entity_types[name];
  if (!node) return [];
  return Array.isArray(node) ? node : node.properties;
}

/** A record in the service's human form: metadata keys plus property/relationship values. */
export type EntityRecord = Record<string, unknown> & {
  entity_type: string;
  id: string;
};

export interface EntityPage {
  total: number;
  offset: number;
  entities: EntityRecord[];
}

export interface EdgeRef {
  relationship: string;
  source: string;
  target: string;
}

export interface EntityDetail {
  entity: EntityRecord;
  edges: EdgeRef[];
}

export interface Neighbor {
  id: string;
  similarity: number;
  properties: Record<string, unknown>;
}

export interface NeighborList {
  id: string;
  neighbors: Neighbor[];
}

export interface InferRequest {
  entities: EntityRecord[];
  mask?: Array<[string, string]>;
}

export interface EntityInference {
  entity_type: string;
  reconstructions: Record<string, unknown>;
  bottlenecks: number[][];
  losses: Record<string, number>;
}

export interface InferResponse {
  entities: Record<string, EntityInference>;
}
