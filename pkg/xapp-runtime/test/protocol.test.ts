import { readdirSync, readFileSync } from 'fs';
import { join } from 'path';

import { describe, expect, it } from 'vitest';

import {
  decodeEnvelope,
  encodeEnvelope,
  LineSplitter,
  ProtocolError,
  ProtocolVersionMismatch,
} from '../src/protocol';

const FIXTURE_DIR = join(__dirname, '..', '..', 'src', 'autoran', 'data', 'fixtures', 'protocol');

describe('golden protocol fixtures', () => {
  const files = readdirSync(FIXTURE_DIR).filter((name) => name.endsWith('.jsonl'));

  it('ships at least three fixture files', () => {
    expect(files.length).toBeGreaterThanOrEqual(3);
  });

  for (const name of files) {
    it(`round-trips ${name} byte-identically`, () => {
      const data = readFileSync(join(FIXTURE_DIR, name), 'utf8');
      const lines = data.split('\n').filter((line) => line.trim().length > 0);
      expect(lines.length).toBeGreaterThan(0);
      for (const line of lines) {
        const msg = decodeEnvelope(line);
        expect(encodeEnvelope(msg)).toBe(line + '\n');
      }
    });
  }
});

describe('decode validation', () => {
  it('rejects protocol version 2', () => {
    const line = '{"v":2,"type":"REGISTER","seq":1,"ts_ms":0,"payload":{}}';
    expect(() => decodeEnvelope(line)).toThrow(ProtocolVersionMismatch);
  });

  it('rejects unknown message types', () => {
    const line = '{"v":1,"type":"TELEPORT","seq":1,"ts_ms":0,"payload":{}}';
    expect(() => decodeEnvelope(line)).toThrow(ProtocolError);
  });

  it('ignores unknown envelope keys and keeps unknown payload keys', () => {
    const line =
      '{"v":1,"type":"REGISTER","seq":3,"ts_ms":7,"payload":{"xapp":"x","future":42},"later":true}';
    const msg = decodeEnvelope(line);
    expect(msg.seq).toBe(3);
    expect(msg.payload.future).toBe(42);
  });

  it('canonicalizes integral floats like the simulator', () => {
    const msg = decodeEnvelope(
      '{"v":1,"type":"RIC_INDICATION","seq":1,"ts_ms":100,"payload":{"metrics":{"dl_throughput":62}}}',
    );
    expect(encodeEnvelope(msg)).toContain('"dl_throughput":62}');
  });
});

describe('line splitting', () => {
  it('reassembles partial chunks in order', () => {
    const splitter = new LineSplitter();
    expect(splitter.feed('{"a"')).toEqual([]);
    expect(splitter.feed(':1}\n{"b":2}\n{"c"')).toEqual(['{"a":1}', '{"b":2}']);
    expect(splitter.feed(':3}\n')).toEqual(['{"c":3}']);
  });
});
