function median(values) {
  const sorted = [...values].sort((a, b) => a - b);
  const mid = sorted.length >> 1;
  return sorted.length % 2 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2;
}

function robustZScores(values) {
  const center = median(values);
  const deviations = values.map((v) => Math.abs(v - center));
  const scale = 1.4826 * median(deviations) || 1e-9;
  return values.map((v) => Math.abs(v - center) / scale);
}

function detectAnomalies(columns, threshold) {
  const names = Object.keys(columns);
  const total = names.length ? columns[names[0]].length : 0;
  const flags = new Array(total).fill(false);
  for (const name of names) {
    const scores = robustZScores(columns[name]);
    for (let i = 0; i < total; i += 1) {
      if (scores[i] >= threshold) flags[i] = true;
    }
  }
  return flags;
}

function confusionReport(flags, labels) {
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
  const f1 = precision !== null && recall !== null && precision + recall > 0
    ? (2 * precision * recall) / (precision + recall)
    : null;
  return { tp, fp, tn, fn, precision, recall, f1 };
}

function createDetector(config) {
  const history = {};
  return {
    update(sample) {
      let anomalous = false;
      for (const name of Object.keys(sample.metrics)) {
        const series = history[name] || (history[name] = []);
        series.push(sample.metrics[name]);
        if (series.length > config.windowSize) series.shift();
        if (series.length >= config.minSamples) {
          const scores = robustZScores(series);
          if (scores[scores.length - 1] >= config.threshold) anomalous = true;
        }
      }
      return anomalous ? { kind: 'flag_anomaly', cellId: sample.cellId } : null;
    },
    evaluate(rows) {
      const labels = rows.map((row) => row.label);
      const columns = {};
      for (const name of Object.keys(rows[0] || {})) {
        if (name !== 'label') columns[name] = rows.map((row) => row[name]);
      }
      const flags = detectAnomalies(columns, config.threshold);
      return confusionReport(flags, labels);
    },
  };
}
