/**
 * Offline evaluation driver honoring the sandbox contract: load a CSV dataset
 * (header of metric columns, optional final integer `label` column), run the
 * batch detector, and print exactly one JSON metrics object as the final
 * stdout line. Failures exit nonzero with a diagnostic on stderr.
 */

import { readFileSync } from 'fs';

import { confusionReport, detectAnomalies } from './zscore';

export interface Dataset {
  header: string[];
  columns: Record<string, number[]>;
  labels: number[] | null;
}

export function loadCsv(path: string): Dataset {
  const lines = readFileSync(path, 'utf8')
    .split('\n')
    .filter((line) => line.trim().length > 0);
  if (lines.length < 2) {
    throw new Error(`dataset ${path} has no data rows`);
  }
  const header = lines[0].split(',').map((h) => h.trim());
  const labelIdx = header.indexOf('label');
  const columns: Record<string, number[]> = {};
  header.forEach((name, i) => {
    if (i !== labelIdx) columns[name] = [];
  });
  const labels: number[] = [];
  for (const line of lines.slice(1)) {
    const cells = line.split(',');
    header.forEach((name, i) => {
      const value = Number(cells[i]);
      if (Number.isNaN(value)) {
        throw new Error(`non-numeric cell in column ${name}: ${cells[i]}`);
      }
      if (i === labelIdx) labels.push(value);
      else columns[name].push(value);
    });
  }
  return { header, columns, labels: labelIdx >= 0 ? labels : null };
}

export function evaluateDataset(dataset: Dataset, threshold = 3.5): Record<string, unknown> {
  const flags = detectAnomalies(dataset.columns, threshold);
  if (dataset.labels === null) {
    return { flagged: flags.filter(Boolean).length, total: flags.length };
  }
  return { ...confusionReport(flags, dataset.labels) };
}

export function main(argv: string[]): number {
  const path = argv[0];
  if (!path) {
    process.stderr.write('usage: node evaluate.js <dataset.csv> [threshold]\n');
    return 2;
  }
  const threshold = argv[1] ? Number(argv[1]) : 3.5;
  let metrics: Record<string, unknown>;
  try {
    metrics = evaluateDataset(loadCsv(path), threshold);
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n`);
    return 1;
  }
  process.stdout.write(JSON.stringify(metrics) + '\n');
  return 0;
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
