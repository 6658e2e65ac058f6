'use strict';

const fs = require('fs');

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

function main() {
  const path = process.argv[2];
  if (!path) {
    process.stderr.write('usage: node program.js <dataset.csv>\n');
    process.exit(2);
  }
  const lines = fs.readFileSync(path, 'utf8').split('\n').filter((l) => l.trim());
  const header = lines[0].split(',').map((h) => h.trim());
  const labelIdx = header.indexOf('label');
  const columns = {};
  header.forEach((name, i) => {
    if (i !== labelIdx) columns[name] = [];
  });
  const labels = [];
  for (const line of lines.slice(1)) {
    const cells = line.split(',');
    header.forEach((name, i) => {
      if (i === labelIdx) labels.push(Number(cells[i]));
      else columns[name].push(Number(cells[i]));
    });
  }
  const flags = detectAnomalies(columns, 3.5);
  process.stdout.write(JSON.stringify(confusionReport(flags, labels)) + '\n');
}

main();
