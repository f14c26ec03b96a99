// DOM wiring for the explorer. All analytics come from the service; this
// module only coordinates fetches and hands responses to the renderers.

import { ApiClient, ServiceError } from "./api.js";
import {
  beginProbe,
  comparisonProbes,
  dominanceFromDeltas,
  freshWhatIf,
  pickableActions,
  resolveProbe,
  sortSummaries,
  type WhatIfState,
} from "./state.js";
import { barsSvg } from "./render/bars.js";
import { gridSvg } from "./render/gridmap.js";
import { landerSvg } from "./render/landerstrip.js";
import { buildHistogram, histogramSvg } from "./render/histogram.js";
import {
  actionName,
  type Layout,
  type Rollout,
  type TrajectoryDetail,
  type TrajectorySummary,
} from "./types.js";

const API_BASE =
  new URLSearchParams(location.search).get("api") ?? "http://127.0.0.1:8000";

const api = new ApiClient(API_BASE);

interface AppState {
  metrics: string[];
  sortMetric: string;
  summaries: TrajectorySummary[];
  layout: Layout | null;
  selectedId: string | null;
  detail: TrajectoryDetail | null;
  selectedStep: number | null;
  whatIf: WhatIfState;
  rollout: Rollout | null;
  comparison: {
    lengths: number[];
    rewards: number[];
    deltas: Array<{ reward_delta: number; length_delta: number }>;
  } | null;
  comparisonBusy: boolean;
}

const state: AppState = {
  metrics: [],
  sortMetric: "vgoal",
  summaries: [],
  layout: null,
  selectedId: null,
  detail: null,
  selectedStep: null,
  whatIf: freshWhatIf(),
  rollout: null,
  comparison: null,
  comparisonBusy: false,
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function showError(message: string, retry: (() => void) | null): void {
  const banner = el<HTMLDivElement>("error-banner");
  banner.hidden = false;
  banner.textContent = message + " ";
  if (retry) {
    const button = document.createElement("button");
    button.textContent = "retry";
    button.onclick = () => {
      banner.hidden = true;
      retry();
    };
    banner.appendChild(button);
  }
}

function clearError(): void {
  el<HTMLDivElement>("error-banner").hidden = true;
}

function guarded(task: () => Promise<void>): void {
  task().catch((err) => {
    const msg = err instanceof ServiceError ? err.message : String(err);
    showError(msg, () => guarded(task));
  });
}

function actionCount(): number {
  return state.layout?.type === "lander" ? 2 : 4;
}

// ---------------------------------------------------------------------------
// rendering
// ---------------------------------------------------------------------------

function renderHeader(): void {
  el<HTMLSpanElement>("bundle-hash").textContent =
    api.bundleHash ? api.bundleHash.slice(0, 12) : "?";
  el<HTMLDivElement>("hash-banner").hidden = !api.bundleChanged;
}

function renderList(): void {
  const tbody = el<HTMLTableSectionElement>("traj-rows");
  const sorted = sortSummaries(state.summaries, state.sortMetric);
  tbody.replaceChildren(
    ...sorted.map((s) => {
      const tr = document.createElement("tr");
      if (s.id === state.selectedId) tr.classList.add("selected");
      const score = s.scores[state.sortMetric];
      tr.innerHTML =
        `<td>${s.id}</td><td>${s.length}</td>` +
        `<td>${s.total_reward.toFixed(1)}</td>` +
        `<td>${score !== undefined ? score.toFixed(3) : "-"}</td>`;
      tr.onclick = () => selectTrajectory(s.id);
      return tr;
    }),
  );
}

function renderMetricPicker(): void {
  const select = el<HTMLSelectElement>("metric-select");
  select.replaceChildren(
    ...state.metrics.map((m) => {
      const option = document.createElement("option");
      option.value = m;
      option.textContent = m;
      option.selected = m === state.sortMetric;
      return option;
    }),
  );
}

function renderTimeline(): void {
  const detail = state.detail;
  const host = el<HTMLDivElement>("timeline");
  if (!detail) {
    host.innerHTML = "<p class='hint'>select a trajectory</p>";
    return;
  }
  const b = detail.breakdown;
  host.innerHTML =
    `<h3>${detail.id} &middot; ${b.kind} I<sub>&tau;</sub> = ${b.i_tau.toFixed(4)}` +
    ` &middot; length ${detail.length} &middot; reward ${detail.total_reward.toFixed(1)}</h3>` +
    `<div class="bar-block"><span>&Delta;Q</span>${barsSvg(b.delta_q, state.selectedStep, "dq")}</div>` +
    `<div class="bar-block"><span>radical</span>${barsSvg(b.radical, state.selectedStep, "radical", b.fallback)}</div>` +
    `<div class="bar-block"><span>product</span>${barsSvg(b.product, state.selectedStep, "product")}</div>`;
  host.querySelectorAll<SVGRectElement>("rect.bar").forEach((rect) => {
    rect.addEventListener("click", () => {
      selectStep(Number(rect.dataset.step));
    });
  });
}

function renderEnv(): void {
  const host = el<HTMLDivElement>("envview");
  if (!state.layout || !state.detail) {
    host.innerHTML = "";
    return;
  }
  const cf = state.rollout ? state.rollout.transitions : null;
  const dev = state.rollout ? state.rollout.deviation_step : state.selectedStep;
  host.innerHTML =
    state.layout.type === "grid"
      ? gridSvg(state.layout, state.detail.transitions, cf, dev)
      : landerSvg(state.layout, state.detail.transitions, cf, dev);
}

function renderWhatIf(): void {
  const host = el<HTMLDivElement>("whatif");
  const detail = state.detail;
  if (!detail || state.selectedStep === null) {
    host.innerHTML = "<p class='hint'>click a step bar to probe it</p>";
    return;
  }
  const step = state.selectedStep;
  const original = detail.transitions[step];
  const options = pickableActions(detail, step, actionCount())
    .map(
      (a) =>
        `<button class="alt-action" data-action="${a}">` +
        `force ${actionName(state.layout, a)}</button>`,
    )
    .join(" ");
  let resultHtml = "";
  if (state.whatIf.pendingId !== null) {
    resultHtml = "<p class='hint'>rolling out&hellip;</p>";
  } else if (state.rollout && state.rollout.deviation_step === step) {
    const r = state.rollout;
    const sign = (x: number) => (x > 0 ? `+${x}` : `${x}`);
    resultHtml =
      `<p class="outcome">forced <b>${actionName(state.layout, r.forced_action)}</b>: ` +
      `${r.outcome.terminal}, length ${r.outcome.length} ` +
      `(${sign(r.length_delta)}), reward ${r.outcome.total_reward.toFixed(1)} ` +
      `(${sign(Number(r.reward_delta.toFixed(1)))})</p>`;
  }
  host.innerHTML =
    `<h3>what if&hellip; at step ${step}</h3>` +
    `<p>original action: <b>${actionName(state.layout, original.action)}</b> ` +
    `(disabled in the picker)</p>` +
    `<div class="actions">${options}</div>` +
    resultHtml;
  host.querySelectorAll<HTMLButtonElement>("button.alt-action").forEach((button) => {
    button.onclick = () => probe(step, Number(button.dataset.action));
  });
}

function renderComparison(): void {
  const host = el<HTMLDivElement>("comparison");
  if (!state.detail) {
    host.innerHTML = "";
    return;
  }
  const button = `<button id="run-comparison"${state.comparisonBusy ? " disabled" : ""}>` +
    `${state.comparisonBusy ? "probing&hellip;" : "run comparison"}</button>`;
  if (!state.comparison) {
    host.innerHTML = `<h3>counterfactual distribution</h3>${button}`;
  } else {
    const lengths = buildHistogram(state.comparison.lengths, state.detail.length);
    const rewards = buildHistogram(state.comparison.rewards, state.detail.total_reward);
    const dom = dominanceFromDeltas(state.comparison.deltas);
    host.innerHTML =
      `<h3>counterfactual distribution (${state.comparison.lengths.length} rollouts)</h3>` +
      button +
      `<p class="outcome">dominance: reward ${dom.reward.toFixed(2)}, ` +
      `length ${dom.length.toFixed(2)} (share of probes no better than the original)</p>` +
      histogramSvg(lengths, "length") +
      histogramSvg(rewards, "reward");
  }
  const run = document.getElementById("run-comparison");
  if (run) (run as HTMLButtonElement).onclick = () => runComparison();
}

function renderAll(): void {
  renderHeader();
  renderList();
  renderTimeline();
  renderEnv();
  renderWhatIf();
  renderComparison();
}

// ---------------------------------------------------------------------------
// actions
// ---------------------------------------------------------------------------

function selectTrajectory(id: string): void {
  state.selectedId = id;
  state.selectedStep = null;
  state.rollout = null;
  state.comparison = null;
  guarded(async () => {
    state.detail = await api.trajectoryDetail(id, state.sortMetric);
    clearError();
    renderAll();
  });
}

function selectStep(step: number): void {
  state.selectedStep = step;
  state.rollout = null;
  renderAll();
}

function probe(step: number, action: number): void {
  const detail = state.detail;
  if (!detail) return;
  const { state: next, requestId } = beginProbe(state.whatIf);
  state.whatIf = next;
  renderWhatIf();
  guarded(async () => {
    const rollout = await api.counterfactual(detail.id, step, action);
    const resolved = resolveProbe(state.whatIf, requestId, rollout);
    if (resolved !== state.whatIf) {
      state.whatIf = resolved;
      state.rollout = resolved.result?.rollout ?? null;
    }
    clearError();
    renderAll();
  });
}

function runComparison(): void {
  const detail = state.detail;
  if (!detail || state.comparisonBusy) return;
  state.comparisonBusy = true;
  renderComparison();
  guarded(async () => {
    const probes = comparisonProbes(detail, actionCount(), 120);
    const lengths: number[] = [];
    const rewards: number[] = [];
    const deltas: Array<{ reward_delta: number; length_delta: number }> = [];
    for (const p of probes) {
      const rollout = await api.counterfactual(detail.id, p.step, p.action);
      lengths.push(rollout.outcome.length);
      rewards.push(rollout.outcome.total_reward);
      deltas.push({ reward_delta: rollout.reward_delta, length_delta: rollout.length_delta });
    }
    state.comparison = { lengths, rewards, deltas };
    state.comparisonBusy = false;
    clearError();
    renderAll();
  });
}

function boot(): void {
  guarded(async () => {
    const health = await api.health();
    state.metrics = health.metrics;
    if (!state.metrics.includes(state.sortMetric)) {
      state.sortMetric = state.metrics[0];
    }
    state.layout = await api.environment();
    state.summaries = await api.allTrajectories();
    clearError();
    renderMetricPicker();
    renderAll();
    const ranked = await api.ranking(state.sortMetric, 5);
    if (!state.selectedId) selectTrajectory(ranked.selected_id);
  });
  el<HTMLSelectElement>("metric-select").onchange = (ev) => {
    state.sortMetric = (ev.target as HTMLSelectElement).value;
    if (state.selectedId) selectTrajectory(state.selectedId);
    renderAll();
  };
}

boot();
