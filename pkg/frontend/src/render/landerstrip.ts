// Mini-lander rendering: altitude/velocity strips over episode time.
// State ids decode row-major as h_bin * bins_v + v_bin, matching the
// service's layout contract.

import type { LanderLayout, TransitionRow } from "../types.js";

export const STRIP_W = 420;
export const STRIP_H = 120;

export function decodeState(
  layout: LanderLayout,
  state: number,
): { hBin: number; vBin: number } {
  return {
    hBin: Math.floor(state / layout.bins_v),
    vBin: state % layout.bins_v,
  };
}

function seriesPoints(
  layout: LanderLayout,
  transitions: TransitionRow[],
  pick: (bins: { hBin: number; vBin: number }) => number,
  binCount: number,
  span: number,
): string {
  const states = [transitions[0]?.state ?? 0, ...transitions.map((t) => t.next_state)];
  const dx = STRIP_W / Math.max(1, span);
  return states
    .map((s, i) => {
      const frac = pick(decodeState(layout, s)) / Math.max(1, binCount - 1);
      const y = STRIP_H - frac * STRIP_H;
      return `${(i * dx).toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
}

export function altitudePoints(
  layout: LanderLayout,
  transitions: TransitionRow[],
  span: number,
): string {
  return seriesPoints(layout, transitions, (b) => b.hBin, layout.bins_h, span);
}

export function velocityPoints(
  layout: LanderLayout,
  transitions: TransitionRow[],
  span: number,
): string {
  return seriesPoints(layout, transitions, (b) => b.vBin, layout.bins_v, span);
}

export function landerSvg(
  layout: LanderLayout,
  original: TransitionRow[],
  counterfactual: TransitionRow[] | null,
  deviationStep: number | null,
): string {
  const span = Math.max(
    original.length,
    counterfactual ? counterfactual.length : 0,
  );
  const parts: string[] = [
    `<svg viewBox="0 0 ${STRIP_W} ${STRIP_H + 18}" class="landerstrip" role="img">`,
    `<rect class="strip-bg" x="0" y="0" width="${STRIP_W}" height="${STRIP_H}"/>`,
    `<line class="ground" x1="0" y1="${STRIP_H}" x2="${STRIP_W}" y2="${STRIP_H}"/>`,
    `<polyline class="path original" points="${altitudePoints(layout, original, span)}"/>`,
  ];
  if (counterfactual) {
    parts.push(
      `<polyline class="path counterfactual" points="${altitudePoints(layout, counterfactual, span)}"/>`,
    );
  }
  if (deviationStep !== null && original.length > 0) {
    const dx = STRIP_W / Math.max(1, span);
    parts.push(
      `<line class="deviation" x1="${deviationStep * dx}" y1="0" ` +
        `x2="${deviationStep * dx}" y2="${STRIP_H}"/>`,
    );
  }
  parts.push(
    `<text class="axis-label" x="4" y="${STRIP_H + 14}">altitude bin over time</text>`,
    "</svg>",
  );
  return parts.join("");
}
