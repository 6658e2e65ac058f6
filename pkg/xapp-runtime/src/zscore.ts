/** Robust z-score anomaly detection shared by the offline driver and tests. */

export function median(values: number[]): number {
  const sorted = [...values].sort((a, b) => a - b);
  const mid = sorted.length >> 1;
  return sorted.length % 2 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2;
}

export function robustZScores(values: number[]): number[] {
  const center = median(values);
  const deviations = values.map((v) => Math.abs(v - center));
  const scale = 1.4826 * median(deviations) || 1e-9;
  return values.map((v) => Math.abs(v - center) / scale);
}

export function detectAnomalies(columns: Record<string, number[]>, threshold: number): boolean[] {
  const names = Object.keys(columns);
  const total = names.length ? columns[names[0]].length : 0;
  const flags = new Array<boolean>(total).fill(false);
  for (const name of names) {
    const scores = robustZScores(columns[name]);
    for (let i = 0; i < total; i += 1) {
      if (scores[i] >= threshold) flags[i] = true;
    }
  }
  return flags;
}

export interface ConfusionReport {
  tp: number;
  fp: number;
  tn: number;
  fn: number;
  precision: number | null;
  recall: number | null;
  f1: number | null;
}

export function confusionReport(flags: boolean[], labels: number[]): ConfusionReport {
  let tp = 0;
  let fp = 0;
  let tn = 0;
  let fn = 0;
  flags.forEach((flag, i) => {
    const positive = labels[i] === 1;
    if (flag && positive) tp += 1;
    else if (flag && !positive) fp += 1;
    else if (!flag && positive) fn += 1;
    else tn += 1;
  });
  const precision = tp + fp > 0 ? tp / (tp + fp) : null;
  const recall = tp + fn > 0 ? tp / (tp + fn) : null;
  const f1 =
    precision !== null && recall !== null && precision + recall > 0
      ? (2 * precision * recall) / (precision + recall)
      : null;
  return { tp, fp, tn, fn, precision, recall, f1 };
}
