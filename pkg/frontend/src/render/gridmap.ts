// Gridworld rendering: cells, walls, start/goal, and path overlays.
// Pure string-producing functions so geometry is unit-testable.

import type { GridLayout, TransitionRow } from "../types.js";

export const CELL = 34;

export function cellXY(layout: GridLayout, state: number): { x: number; y: number } {
  // state ids are row-major: state = y * width + x
  return { x: state % layout.width, y: Math.floor(state / layout.width) };
}

export function cellCenter(layout: GridLayout, state: number): { cx: number; cy: number } {
  const { x, y } = cellXY(layout, state);
  return { cx: x * CELL + CELL / 2, cy: y * CELL + CELL / 2 };
}

export function pathPoints(layout: GridLayout, transitions: TransitionRow[]): string {
  if (transitions.length === 0) return "";
  const pts = [cellCenter(layout, transitions[0].state)];
  for (const t of transitions) pts.push(cellCenter(layout, t.next_state));
  return pts.map((p) => `${p.cx},${p.cy}`).join(" ");
}

export function gridSvg(
  layout: GridLayout,
  original: TransitionRow[],
  counterfactual: TransitionRow[] | null,
  deviationStep: number | null,
): string {
  const w = layout.width * CELL;
  const h = layout.height * CELL;
  const walls = new Set(layout.walls.map(([x, y]) => `${x},${y}`));
  const parts: string[] = [
    `<svg viewBox="0 0 ${w} ${h}" class="gridmap" role="img">`,
  ];
  for (let y = 0; y < layout.height; y++) {
    for (let x = 0; x < layout.width; x++) {
      let cls = "cell";
      if (walls.has(`${x},${y}`)) cls = "cell wall";
      else if (x === layout.start[0] && y === layout.start[1]) cls = "cell start";
      else if (x === layout.goal[0] && y === layout.goal[1]) cls = "cell goal";
      parts.push(
        `<rect class="${cls}" x="${x * CELL}" y="${y * CELL}" width="${CELL}" height="${CELL}"/>`,
      );
    }
  }
  parts.push(
    `<polyline class="path original" points="${pathPoints(layout, original)}"/>`,
  );
  if (counterfactual) {
    parts.push(
      `<polyline class="path counterfactual" points="${pathPoints(layout, counterfactual)}"/>`,
    );
  }
  if (deviationStep !== null && original[deviationStep]) {
    const { cx, cy } = cellCenter(layout, original[deviationStep].state);
    parts.push(`<circle class="deviation" cx="${cx}" cy="${cy}" r="${CELL / 4}"/>`);
  }
  parts.push("</svg>");
  return parts.join("");
}
