/** Application bootstrap: wires the store, the service client, and the DOM. */

import { ApiClient, ServiceError } from "./api.js";
import { fieldSpec, observedChoices, parseFieldInput, FieldSpec } from "./forms.js";
import {
  applyEdit,
  initialState,
  loadComponent,
  rerun,
  undo,
  ViewState,
} from "./state.js";
import {
  renderComponentEditor,
  renderEntityBrowser,
  renderErrorBanner,
  renderNeighbors,
  renderTypeFilter,
} from "./render.js";
import { EntityRecord, entityTypeProperties } from "./types.js";

const api = new ApiClient((window as unknown as { SERVICE_URL?: string }).SERVICE_URL ?? "");

let state: ViewState = initialState();
let fields: Record<string, FieldSpec> = {};

function setState(next: ViewState): void {
  state = next;
  paint();
}

function paint(): void {
  const root = document.getElementById("app");
  if (!root || !state.schema) return;
  root.innerHTML =
    renderErrorBanner(state.error) +
    `<section class="pane browser-pane"><h2>entities</h2>` +
    renderTypeFilter(state.schema, state.typeFilter) +
    renderEntityBrowser(state) +
    `</section>` +
    `<section class="pane editor-pane"><h2>component</h2>` +
    renderComponentEditor({ schema: state.schema, fields, state }) +
    `</section>` +
    `<section class="pane neighbors-pane">` +
    renderNeighbors(state.neighbors) +
    `</section>`;
}

async function refreshPage(): Promise<void> {
  const page = await api.getEntities(state.typeFilter, state.page.offset, state.page.limit);
  setState({
    ...state,
    page: { ...state.page, total: page.total, entities: page.entities },
    error: null,
  });
}

/** Load the connected component around an entity by following edges breadth-first. */
async function loadComponentAround(id: string): Promise<void> {
  const seen = new Map<string, EntityRecord>();
  const queue = [id];
  while (queue.length) {
    const current = queue.shift()!;
    if (seen.has(current)) continue;
    const detail = await api.getEntity(current);
    seen.set(current, detail.entity);
    for (const edge of detail.edges) {
      for (const endpoint of [edge.source, edge.target]) {
        if (!seen.has(endpoint)) queue.push(endpoint);
      }
    }
  }
  const records = [...seen.values()];
  const choices = observedChoices(records, state.schema!);
  fields = {};
  for (const record of records) {
    for (const property of entityTypeProperties(state.schema!, record.entity_type)) {
      fields[property] ??= fieldSpec(state.schema!, property, choices[property]);
    }
  }
  setState(loadComponent(state, records));
}

async function runInference(): Promise<void> {
  try {
    setState(await rerun(state, api));
  } catch (err) {
    if (err instanceof ServiceError) {
      setState({ ...state, error: err.field ? `${err.field}: ${err.message}` : err.message });
    } else {
      throw err;
    }
  }
}

function onAction(target: HTMLElement): void {
  const action = target.dataset.action;
  const id = target.dataset.id ?? "";
  switch (action) {
    case "open-entity":
      void loadComponentAround(id).catch((err) =>
        setState({ ...state, error: String(err) }),
      );
      break;
    case "page-prev":
      state.page.offset = Math.max(0, state.page.offset - state.page.limit);
      void refreshPage();
      break;
    case "page-next":
      state.page.offset += state.page.limit;
      void refreshPage();
      break;
    case "rerun":
      void runInference();
      break;
    case "undo":
      setState(undo(state));
      break;
    case "show-neighbors":
      void api
        .getNeighbors(id, 10)
        .then((neighbors) => setState({ ...state, neighbors }))
        .catch((err) => setState({ ...state, error: String(err) }));
      break;
    case "toggle-mask":
      setState(
        applyEdit(state, {
          kind: "mask",
          id,
          property: target.dataset.property!,
          on: (target as HTMLInputElement).checked,
        }),
      );
      break;
    case "remove-edge":
      setState(
        applyEdit(state, {
          kind: "remove-edge",
          relationship: target.dataset.relationship!,
          source: target.dataset.source!,
          target: target.dataset.target!,
        }),
      );
      break;
    case "add-edge": {
      const to = window.prompt(`target id for ${target.dataset.relationship}?`);
      if (to) {
        setState(
          applyEdit(state, {
            kind: "add-edge",
            relationship: target.dataset.relationship!,
            source: target.dataset.source!,
            target: to,
          }),
        );
      }
      break;
    }
  }
}

function onValueEdit(target: HTMLInputElement): void {
  try {
    const value = parseFieldInput(
      target.dataset.widget as FieldSpec["widget"],
      target.value,
    );
    setState(
      applyEdit(state, {
        kind: "set",
        id: target.dataset.id!,
        property: target.dataset.property!,
        value,
      }),
    );
  } catch (err) {
    setState({ ...state, error: String(err) });
  }
}

export async function start(): Promise<void> {
  try {
    const schema = await api.getSchema();
    state = { ...initialState(), schema };
    await refreshPage();
  } catch (err) {
    const root = document.getElementById("app");
    if (root) root.innerHTML = renderErrorBanner(`cannot reach the service: ${String(err)}`);
    return;
  }
  document.addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
    if (target && target.dataset.action !== "edit-value" && target.tagName !== "SELECT") {
      onAction(target);
    }
  });
  document.addEventListener("change", (event) => {
    const target = event.target as HTMLInputElement;
    if (target.dataset.action === "edit-value") onValueEdit(target);
    else if (target.dataset.action === "toggle-mask") onAction(target);
    else if (target.dataset.action === "filter-type") {
      state.typeFilter = target.value || null;
      state.page.offset = 0;
      void refreshPage();
    }
  });
  paint();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void start();
}
