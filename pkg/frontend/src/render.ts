/** HTML renderers. Pure string builders so they are testable without a DOM. */

import { FieldSpec, formatFieldValue } from "./forms.js";
import { ComponentState, ViewState, isMasked, lossDeltas } from "./state.js";
import { EntityRecord, NeighborList, SchemaDoc, entityTypeProperties } from "./types.js";

export function escapeHtml(value: unknown): string {
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function renderErrorBanner(message: string | null): string {
  if (!message) return "";
  return `<div class="banner error" role="alert">${escapeHtml(message)}</div>`;
}

export function renderTypeFilter(schema: SchemaDoc, active: string | null): string {
  const options = Object.keys(schema.entity_types)
    .map(
      (name) =>
        `<option value="${escapeHtml(name)}"${name === active ? " selected" : ""}>` +
        `${escapeHtml(name)}</option>`,
    )
    .join("");
  return (
    `<select data-action="filter-type"><option value="">all entity-types</option>` +
    options +
    `</select>`
  );
}

export function renderEntityBrowser(state: ViewState): string {
  const { page } = state;
  if (!page.entities.length) {
    return `<p class="empty">No entities to show.</p>`;
  }
  const rows = page.entities
    .map((record) => {
      const summary = Object.entries(record)
        .filter(([key]) => key !== "entity_type" && key !== "id")
        .slice(0, 4)
        .map(([key, value]) => `${escapeHtml(key)}=${escapeHtml(JSON.stringify(value))}`)
        .join("  ");
      return (
        `<tr data-action="open-entity" data-id="${escapeHtml(record.id)}">` +
        `<td>${escapeHtml(record.id)}</td>` +
        `<td>${escapeHtml(record.entity_type)}</td>` +
        `<td class="summary">${summary}</td></tr>`
      );
    })
    .join("");
  const lastPage = page.offset + page.entities.length >= page.total;
  return (
    `<table class="browser"><thead><tr><th>id</th><th>type</th><th>properties</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>` +
    `<nav class="pager">` +
    `<button data-action="page-prev"${page.offset === 0 ? " disabled" : ""}>previous</button>` +
    `<span>${page.offset + 1}-${page.offset + page.entities.length} of ${page.total}</span>` +
    `<button data-action="page-next"${lastPage ? " disabled" : ""}>next</button>` +
    `</nav>`
  );
}

function deltaBar(delta: number): string {
  const width = Math.min(60, Math.abs(delta) * 40);
  const side = delta >= 0 ? "worse" : "better";
  return (
    `<span class="delta ${side}" title="${delta.toFixed(4)}">` +
    `<i style="width:${width.toFixed(1)}px"></i>${delta >= 0 ? "+" : ""}${delta.toFixed(3)}` +
    `</span>`
  );
}

export interface EditorContext {
  schema: SchemaDoc;
  fields: Record<string, FieldSpec>;
  state: ViewState;
}

export function renderComponentEditor(ctx: EditorContext): string {
  const { state, schema } = ctx;
  const component = state.component;
  if (!component) return `<p class="empty">Select an entity to load its component.</p>`;
  const deltas = lossDeltas(state);
  const cards = component.entities
    .map((record) => renderEntityCard(ctx, component, record, deltas[record.id] ?? {}))
    .join("");
  return (
    `<div class="editor">` +
    `<div class="toolbar">` +
    `<button data-action="rerun">run inference</button>` +
    `<button data-action="undo"${state.history.length <= 1 ? " disabled" : ""}>undo</button>` +
    `</div>` +
    cards +
    `</div>`
  );
}

function renderEntityCard(
  ctx: EditorContext,
  component: ComponentState,
  record: EntityRecord,
  deltas: Record<string, number>,
): string {
  const inference = ctx.state.lastRun?.entities[record.id];
  const rows = entityTypeProperties(ctx.schema, record.entity_type)
    .map((property) => {
      const field = ctx.fields[property];
      const masked = isMasked(component, record.id, property);
      const value = formatFieldValue(field.widget, record[property]);
      const reconstruction = inference?.reconstructions?.[property];
      const recon =
        reconstruction === undefined
          ? ""
          : `<span class="recon${masked ? " inferred" : ""}">` +
            `${escapeHtml(formatFieldValue(field.widget, reconstruction))}` +
            `${masked ? " (inferred)" : ""}</span>`;
      const loss = inference?.losses?.[property];
      const lossCell = loss === undefined ? "" : loss.toFixed(4);
      const delta = deltas[property];
      return (
        `<tr><th>${escapeHtml(property)}</th>` +
        `<td>${renderFieldInput(field, record.id, value, masked)}</td>` +
        `<td>${recon}</td>` +
        `<td>${lossCell}${delta === undefined ? "" : deltaBar(delta)}</td></tr>`
      );
    })
    .join("");
  const edges = renderEdgeList(ctx, record);
  return (
    `<section class="entity-card" data-id="${escapeHtml(record.id)}">` +
    `<h3>${escapeHtml(record.id)} <small>${escapeHtml(record.entity_type)}</small>` +
    ` <button data-action="show-neighbors" data-id="${escapeHtml(record.id)}">neighbors</button></h3>` +
    `<table class="fields"><thead><tr><th>property</th><th>value</th>` +
    `<th>reconstruction</th><th>loss</th></tr></thead><tbody>${rows}</tbody></table>` +
    edges +
    `</section>`
  );
}

function renderFieldInput(
  field: FieldSpec,
  id: string,
  value: string,
  masked: boolean,
): string {
  const common =
    `data-action="edit-value" data-id="${escapeHtml(id)}" ` +
    `data-property="${escapeHtml(field.property)}" data-widget="${field.widget}"` +
    (masked ? " disabled" : "");
  let input: string;
  if (field.choices) {
    const options = field.choices
      .map(
        (choice) =>
          `<option value="${escapeHtml(choice)}"${choice === value ? " selected" : ""}>` +
          `${escapeHtml(choice)}</option>`,
      )
      .join("");
    input = `<select ${common}>${options}</select>`;
  } else if (field.widget === "textarea") {
    input = `<textarea ${common}>${escapeHtml(value)}</textarea>`;
  } else if (field.widget === "date") {
    input = `<input type="date" value="${escapeHtml(value)}" ${common}>`;
  } else if (field.widget === "number") {
    input = `<input type="number" step="any" value="${escapeHtml(value)}" ${common}>`;
  } else {
    input = `<input type="text" value="${escapeHtml(value)}" ${common}>`;
  }
  const maskToggle =
    `<label class="mask-toggle"><input type="checkbox" data-action="toggle-mask" ` +
    `data-id="${escapeHtml(id)}" data-property="${escapeHtml(field.property)}"` +
    `${masked ? " checked" : ""}>mask</label>`;
  return input + maskToggle;
}

function renderEdgeList(ctx: EditorContext, record: EntityRecord): string {
  const rows: string[] = [];
  for (const [name, rel] of Object.entries(ctx.schema.relationships)) {
    if (rel.source_entity_type !== record.entity_type) continue;
    const raw = record[name];
    const targets = Array.isArray(raw) ? raw : raw === undefined ? [] : [raw];
    for (const target of targets) {
      rows.push(
        `<li>${escapeHtml(name)} &rarr; ${escapeHtml(target)} ` +
          `<button data-action="remove-edge" data-relationship="${escapeHtml(name)}" ` +
          `data-source="${escapeHtml(record.id)}" data-target="${escapeHtml(target)}">` +
          `remove</button></li>`,
      );
    }
    rows.push(
      `<li><button data-action="add-edge" data-relationship="${escapeHtml(name)}" ` +
        `data-source="${escapeHtml(record.id)}">add ${escapeHtml(name)} edge</button></li>`,
    );
  }
  return rows.length ? `<ul class="edges">${rows.join("")}</ul>` : "";
}

export function renderNeighbors(list: NeighborList | null): string {
  if (!list) return "";
  const rows = list.neighbors
    .map(
      (neighbor) =>
        `<tr data-action="open-entity" data-id="${escapeHtml(neighbor.id)}">` +
        `<td>${escapeHtml(neighbor.id)}</td>` +
        `<td>${neighbor.similarity.toFixed(4)}</td>` +
        `<td>${escapeHtml(JSON.stringify(neighbor.properties))}</td></tr>`,
    )
    .join("");
  return (
    `<h3>nearest to ${escapeHtml(list.id)}</h3>` +
    `<table class="neighbors"><thead><tr><th>id</th><th>similarity</th><th>properties</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}
