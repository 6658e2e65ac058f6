import { execFileSync, spawnSync } from 'child_process';
import { mkdtempSync, writeFileSync } from 'fs';
import { tmpdir } from 'os';
import { join } from 'path';

import { describe, expect, it } from 'vitest';

import { evaluateDataset, loadCsv } from '../src/evaluate';
import { detectAnomalies } from '../src/zscore';

const DRIVER = join(__dirname, '..', 'dist', 'evaluate.js');

function writeToyDataset(dir: string): { path: string; labels: number[] } {
  const lines = ['prb_util,dl_throughput,label'];
  const labels: number[] = [];
  for (let i = 0; i < 40; i += 1) {
    const label = i % 5 === 0 ? 1 : 0;
    labels.push(label);
    const prb = 50 + 0.3 * Math.sin(i) + (label ? 1000 : 0);
    const thr = 120 + 0.3 * Math.cos(i) + (label ? 1000 : 0);
    lines.push(`${prb},${thr},${label}`);
  }
  const path = join(dir, 'toy.csv');
  writeFileSync(path, lines.join('\n') + '\n');
  return { path, labels };
}

/** Deterministic 32-bit generator with Box-Muller, for this suite only. */
function makeRng(seed: number): () => number {
  let state = seed >>> 0;
  const next = () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
  return () => {
    const u1 = 1 - next();
    const u2 = next();
    return Math.sqrt(-2 * Math.log(u1)) * Math.cos(2 * Math.PI * u2);
  };
}

function writeSyntheticDataset(dir: string): { path: string; labels: number[] } {
  const gauss = makeRng(1234);
  const lines = ['prb_util,dl_throughput,label'];
  const labels: number[] = [];
  for (let i = 0; i < 5000; i += 1) {
    const label = i % 20 === 0 ? 1 : 0; // exactly 5% anomalous
    labels.push(label);
    const prb = 50 + 2 * gauss() + (label ? 12 : 0); // +6 sigma
    const thr = 120 + 5 * gauss() + (label ? 30 : 0);
    lines.push(`${prb},${thr},${label}`);
  }
  const path = join(dir, 'synthetic.csv');
  writeFileSync(path, lines.join('\n') + '\n');
  return { path, labels };
}

describe('offline evaluation driver', () => {
  it('prints exactly one final-line JSON object with perfect scores on the toy set', () => {
    const dir = mkdtempSync(join(tmpdir(), 'xapp-eval-'));
    const { path } = writeToyDataset(dir);
    const stdout = execFileSync('node', [DRIVER, path], { encoding: 'utf8' });
    const lines = stdout.split('\n').filter((line) => line.trim().length > 0);
    expect(lines).toHaveLength(1);
    const metrics = JSON.parse(lines[lines.length - 1]);
    expect(metrics.precision).toBe(1);
    expect(metrics.recall).toBe(1);
  });

  it('exits nonzero with a stderr diagnostic for a missing file', () => {
    const result = spawnSync('node', [DRIVER, '/nonexistent/nowhere.csv'], { encoding: 'utf8' });
    expect(result.status).not.toBe(0);
    expect(result.stderr.length).toBeGreaterThan(0);
  });

  it('clears 0.95 precision/recall on a 5% +6-sigma synthetic set (brute-force labels)', () => {
    const dir = mkdtempSync(join(tmpdir(), 'xapp-eval-'));
    const { path, labels } = writeSyntheticDataset(dir);
    const dataset = loadCsv(path);
    const metrics = evaluateDataset(dataset) as {
      tp: number;
      fp: number;
      fn: number;
      precision: number;
      recall: number;
    };
    // brute-force confusion against the construction labels
    const flags = detectAnomalies(dataset.columns, 3.5);
    let tp = 0;
    let fp = 0;
    let fn = 0;
    flags.forEach((flag, i) => {
      if (flag && labels[i] === 1) tp += 1;
      else if (flag && labels[i] === 0) fp += 1;
      else if (!flag && labels[i] === 1) fn += 1;
    });
    expect(metrics.tp).toBe(tp);
    expect(metrics.fp).toBe(fp);
    expect(metrics.fn).toBe(fn);
    expect(metrics.precision).toBeGreaterThanOrEqual(0.95);
    expect(metrics.recall).toBeGreaterThanOrEqual(0.95);
  });

  it('rejects datasets without data rows', () => {
    const dir = mkdtempSync(join(tmpdir(), 'xapp-eval-'));
    const path = join(dir, 'empty.csv');
    writeFileSync(path, 'prb_util,label\n');
    expect(() => loadCsv(path)).toThrow(/no data rows/);
  });
});
