// Comparison panel: distribution of counterfactual outcomes with the
// original's value as a reference line. Outcome values come from service
// rollout responses; binning is presentation only.

export interface HistogramModel {
  binEdges: number[];
  counts: number[];
  referenceX: number; // pixel offset of the original's value
  lo: number;
  hi: number;
}

export const HIST_W = 420;
export const HIST_H = 140;

export function buildHistogram(
  values: number[],
  original: number,
  binCount = 12,
): HistogramModel {
  const lo = Math.min(...values, original);
  const hi = Math.max(...values, original);
  const span = hi - lo || 1;
  const edges: number[] = [];
  for (let i = 0; i <= binCount; i++) edges.push(lo + (span * i) / binCount);
  const counts = new Array<number>(binCount).fill(0);
  for (const v of values) {
    let b = Math.floor(((v - lo) / span) * binCount);
    if (b >= binCount) b = binCount - 1; // the max value belongs to the last bin
    if (b < 0) b = 0;
    counts[b] += 1;
  }
  const referenceX = ((original - lo) / span) * HIST_W;
  return { binEdges: edges, counts, referenceX, lo, hi };
}

export function histogramSvg(model: HistogramModel, label: string): string {
  const peak = Math.max(...model.counts, 1);
  const bw = HIST_W / model.counts.length;
  const parts = [
    `<svg viewBox="0 0 ${HIST_W} ${HIST_H + 20}" class="histogram" role="img">`,
  ];
  model.counts.forEach((count, i) => {
    const h = (count / peak) * HIST_H;
    parts.push(
      `<rect class="hbar" data-count="${count}" x="${(i * bw).toFixed(1)}" ` +
        `y="${(HIST_H - h).toFixed(1)}" width="${(bw - 1).toFixed(1)}" height="${h.toFixed(1)}"/>`,
    );
  });
  parts.push(
    `<line class="reference" x1="${model.referenceX.toFixed(1)}" y1="0" ` +
      `x2="${model.referenceX.toFixed(1)}" y2="${HIST_H}"/>`,
    `<text class="axis-label" x="4" y="${HIST_H + 14}">${label} ` +
      `(${model.lo.toFixed(1)} .. ${model.hi.toFixed(1)}, line = original)</text>`,
    "</svg>",
  );
  return parts.join("");
}
