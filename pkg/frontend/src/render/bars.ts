// Per-step importance bars for the trajectory timeline. Values are drawn
// exactly as supplied by the breakdown endpoint; scaling is presentation
// only and the raw value rides along in a data attribute.

export const BAR_W = 9;
export const BAR_GAP = 2;
export const PANEL_H = 90;

export function barHeights(values: number[], panelHeight = PANEL_H): number[] {
  const peak = Math.max(...values.map((v) => Math.abs(v)), 1e-12);
  return values.map((v) => (Math.abs(v) / peak) * panelHeight);
}

export function barsSvg(
  values: number[],
  selectedStep: number | null,
  cssClass: string,
  fallback: boolean[] | null = null,
): string {
  const heights = barHeights(values);
  const width = values.length * (BAR_W + BAR_GAP);
  const parts = [
    `<svg viewBox="0 0 ${width} ${PANEL_H}" class="bars ${cssClass}" ` +
      `preserveAspectRatio="none" role="img">`,
  ];
  values.forEach((value, i) => {
    const h = heights[i];
    const x = i * (BAR_W + BAR_GAP);
    const classes = ["bar"];
    if (value < 0) classes.push("negative");
    if (i === selectedStep) classes.push("selected");
    if (fallback && fallback[i]) classes.push("fallback");
    parts.push(
      `<rect class="${classes.join(" ")}" data-step="${i}" data-value="${value}" ` +
        `x="${x}" y="${(PANEL_H - h).toFixed(2)}" width="${BAR_W}" height="${h.toFixed(2)}"/>`,
    );
  });
  parts.push("</svg>");
  return parts.join("");
}
