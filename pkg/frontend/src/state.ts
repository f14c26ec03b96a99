// Pure state helpers: list sorting, what-if request bookkeeping, and probe
// enumeration for the comparison panel. No analytics happen here; scores,
// outcomes and deltas always come from service responses.

import type { Rollout, TrajectoryDetail, TrajectorySummary } from "./types.js";

export type SortDir = "asc" | "desc";

export function sortSummaries(
  items: TrajectorySummary[],
  metric: string,
  dir: SortDir = "desc",
): TrajectorySummary[] {
  const sign = dir === "desc" ? -1 : 1;
  return [...items].sort((a, b) => {
    const sa = a.scores[metric] ?? 0;
    const sb = b.scores[metric] ?? 0;
    if (sa !== sb) return sign * (sa - sb);
    return a.id < b.id ? -1 : a.id > b.id ? 1 : 0;
  });
}

export function pickableActions(
  detail: TrajectoryDetail,
  step: number,
  actionCount: number,
): number[] {
  // the original action is never offered: a counterfactual must deviate
  const original = detail.transitions[step]?.action;
  const out: number[] = [];
  for (let a = 0; a < actionCount; a++) {
    if (a !== original) out.push(a);
  }
  return out;
}

/** In-flight what-if bookkeeping: responses are matched by request id and
 * stale ones (superseded by a newer probe) are dropped. */
export interface WhatIfState {
  nextId: number;
  pendingId: number | null;
  result: { requestId: number; rollout: Rollout } | null;
}

export function freshWhatIf(): WhatIfState {
  return { nextId: 1, pendingId: null, result: null };
}

export function beginProbe(state: WhatIfState): { state: WhatIfState; requestId: number } {
  const requestId = state.nextId;
  return {
    state: { ...state, nextId: requestId + 1, pendingId: requestId },
    requestId,
  };
}

export function resolveProbe(
  state: WhatIfState,
  requestId: number,
  rollout: Rollout,
): WhatIfState {
  if (state.pendingId !== requestId) return state; // stale response
  return { ...state, pendingId: null, result: { requestId, rollout } };
}

/** Share of probes that are no better than the original, from the deltas
 * the service attached to each rollout response. */
export function dominanceFromDeltas(
  rollouts: Array<Pick<Rollout, "reward_delta" | "length_delta">>,
): { reward: number; length: number } {
  if (rollouts.length === 0) return { reward: 0, length: 0 };
  const rewardWorse = rollouts.filter((r) => r.reward_delta <= 0).length;
  const lengthWorse = rollouts.filter((r) => r.length_delta >= 0).length;
  return {
    reward: rewardWorse / rollouts.length,
    length: lengthWorse / rollouts.length,
  };
}

/** (step, action) pairs for the comparison panel, capped at `budget` probes
 * by a fixed stride over steps; each outcome is fetched from the service. */
export function comparisonProbes(
  detail: TrajectoryDetail,
  actionCount: number,
  budget: number,
): Array<{ step: number; action: number }> {
  const perStep = actionCount - 1;
  const maxSteps = Math.max(1, Math.floor(budget / perStep));
  const stride = detail.length > maxSteps ? Math.ceil(detail.length / maxSteps) : 1;
  const probes: Array<{ step: number; action: number }> = [];
  for (let step = 0; step < detail.length; step += stride) {
    for (const action of pickableActions(detail, step, actionCount)) {
      probes.push({ step, action });
    }
  }
  return probes;
}
