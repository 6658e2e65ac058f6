/**
 * End-to-end smoke against the simulator: the no-op skeleton registers,
 * subscribes, sees 10 indications and exits cleanly when the stream closes.
 * The simulator is the python package's `sim serve` command, reached only
 * through its CLI and the wire protocol.
 */

import { ChildProcess, execFileSync, spawn } from 'child_process';
import { mkdtempSync, readFileSync, writeFileSync } from 'fs';
import { tmpdir } from 'os';
import { join } from 'path';

import { afterAll, describe, expect, it } from 'vitest';

const { buildNoopSkeleton } = require('../skeleton/build_noop.js');

const REPO_ROOT = join(__dirname, '..', '..');
const ECHO_SCENARIO = join(
  REPO_ROOT, 'src', 'autoran', 'data', 'fixtures', 'scenarios', 'echo_10s.json',
);

const children: ChildProcess[] = [];

afterAll(() => {
  for (const child of children) {
    if (child.exitCode === null) child.kill('SIGKILL');
  }
});

function waitForLine(child: ChildProcess, pattern: RegExp, timeoutMs: number): Promise<string> {
  return new Promise((resolve, reject) => {
    let buffer = '';
    const timer = setTimeout(
      () => reject(new Error(`no match for ${pattern} in: ${buffer}`)),
      timeoutMs,
    );
    child.stdout!.on('data', (chunk: Buffer) => {
      buffer += chunk.toString('utf8');
      const match = buffer.match(pattern);
      if (match) {
        clearTimeout(timer);
        resolve(match[0]);
      }
    });
    child.on('exit', () => {
      clearTimeout(timer);
      reject(new Error(`process exited early: ${buffer}`));
    });
  });
}

function collectExit(child: ChildProcess): Promise<{ code: number; stdout: string; stderr: string }> {
  let stdout = '';
  let stderr = '';
  child.stdout?.on('data', (chunk: Buffer) => (stdout += chunk.toString('utf8')));
  child.stderr?.on('data', (chunk: Buffer) => (stderr += chunk.toString('utf8')));
  return new Promise((resolve) => {
    child.on('exit', (code) => resolve({ code: code ?? -1, stdout, stderr }));
  });
}

describe('no-op skeleton against the simulator', () => {
  it('registers, subscribes, sees 10 indications, exits cleanly', async () => {
    const dir = mkdtempSync(join(tmpdir(), 'xapp-smoke-'));

    // 10 ticks of the shipped echo scenario
    const scenario = JSON.parse(readFileSync(ECHO_SCENARIO, 'utf8'));
    scenario.duration_ms = 1000;
    const scenarioPath = join(dir, 'scenario.json');
    writeFileSync(scenarioPath, JSON.stringify(scenario));

    const skeletonPath = join(dir, 'xapp.noop.js');
    const skeleton = buildNoopSkeleton(join(__dirname, '..', 'skeleton', 'xapp.tmpl.js'));
    writeFileSync(skeletonPath, skeleton);
    execFileSync('node', ['--check', skeletonPath]); // parse-only gate

    const sim = spawn(
      'python3',
      ['-m', 'autoran.cli', 'sim', 'serve', '--scenario', scenarioPath, '--wait', '20'],
      { cwd: REPO_ROOT },
    );
    children.push(sim);
    const simDone = collectExit(sim);
    const listening = await waitForLine(sim, /LISTENING \S+:\d+/, 20000);
    const endpoint = listening.replace('LISTENING ', '').trim();

    const xapp = spawn('node', [skeletonPath, '--endpoint', endpoint]);
    children.push(xapp);
    const xappDone = collectExit(xapp);

    const xappResult = await xappDone;
    expect(xappResult.stderr).toBe('');
    expect(xappResult.code).toBe(0);

    const simResult = await simDone;
    expect(simResult.code).toBe(0);
    const summary = JSON.parse(simResult.stdout.slice(simResult.stdout.indexOf('{')));
    expect(summary.indications).toBe(10);
  }, 60000);
});
