// API response shapes, mirroring the service's JSON schema exactly.
// The UI is display-only: these values are rendered as received, never
// recomputed client-side.

export interface TransitionRow {
  state: number;
  action: number;
  reward: number;
  next_state: number;
  done: boolean;
}

export interface TrajectorySummary {
  id: string;
  length: number;
  total_reward: number;
  checkpoint_fraction: number;
  scores: Record<string, number>;
}

export interface TrajectoryPage {
  items: TrajectorySummary[];
  page: number;
  page_size: number;
  total: number;
}

export interface Breakdown {
  kind: string;
  delta_q: number[];
  radical: number[];
  product: number[];
  fallback: boolean[];
  i_tau: number;
  goal_value: number | null;
}

export interface TrajectoryDetail {
  id: string;
  length: number;
  total_reward: number;
  checkpoint_fraction: number;
  transitions: TransitionRow[];
  breakdown: Breakdown;
}

export interface RankingEntry {
  id: string;
  score: number;
}

export interface RankingReport {
  metric: string;
  k: number;
  ranked: RankingEntry[];
  top_k: string[];
  selected_id: string;
  avg_length: number;
  avg_reward: number;
}

export interface Outcome {
  total_reward: number;
  length: number;
  terminal: string;
}

export interface Rollout {
  original_id: string;
  deviation_step: number;
  forced_action: number;
  transitions: TransitionRow[];
  outcome: Outcome;
  original_outcome: Outcome;
  reward_delta: number;
  length_delta: number;
}

export interface GridLayout {
  type: "grid";
  width: number;
  height: number;
  start: [number, number];
  goal: [number, number];
  walls: [number, number][];
  max_steps: number;
}

export interface LanderLayout {
  type: "lander";
  bins_h: number;
  bins_v: number;
  h_edges: number[];
  v_edges: number[];
  h_range: [number, number];
  v_range: [number, number];
  gravity: number;
  thrust: number;
  safe_speed: number;
  start_altitude: number;
  max_steps: number;
}

export type Layout = GridLayout | LanderLayout;

export interface Health {
  status: string;
  bundle_hash: string;
  env: string;
  trajectory_count: number;
  metrics: string[];
}

export const GRID_ACTIONS = ["up", "down", "left", "right"] as const;
export const LANDER_ACTIONS = ["noop", "thrust"] as const;

export function actionName(layout: Layout | null, action: number): string {
  const names: readonly string[] =
    layout?.type === "lander" ? LANDER_ACTIONS : GRID_ACTIONS;
  return names[action] ?? `a${action}`;
}
