/**
 * Wire protocol: newline-delimited JSON envelopes, protocol v1.
 *
 * The canonical byte encoding (envelope key order, sorted payload keys,
 * ECMAScript number formatting) is pinned in the simulator's docs/protocol.md;
 * encode(decode(line)) must reproduce the input bytes exactly.
 */

export const PROTOCOL_VERSION = 1;
export const MAX_LINE_BYTES = 1024 * 1024;

export const MSG_TYPES = [
  'E2_SETUP',
  'REGISTER',
  'SUBSCRIPTION_REQ',
  'SUBSCRIPTION_RESP',
  'RIC_INDICATION',
  'RIC_CONTROL',
  'CONTROL_ACK',
  'ERROR',
] as const;

export type MsgType = (typeof MSG_TYPES)[number];

export interface Envelope {
  v: number;
  type: MsgType;
  seq: number;
  ts_ms: number;
  payload: Record<string, unknown>;
}

export class ProtocolError extends Error {}
export class ProtocolVersionMismatch extends ProtocolError {}

function canonNumber(value: number): string {
  if (!Number.isFinite(value)) {
    throw new ProtocolError('non-finite numbers are not representable on the wire');
  }
  return Object.is(value, -0) ? '0' : String(value);
}

function canonJson(value: unknown): string {
  if (value === null) return 'null';
  if (typeof value === 'boolean') return value ? 'true' : 'false';
  if (typeof value === 'number') return canonNumber(value);
  if (typeof value === 'string') return JSON.stringify(value);
  if (Array.isArray(value)) return '[' + value.map(canonJson).join(',') + ']';
  if (typeof value === 'object') {
    const record = value as Record<string, unknown>;
    const keys = Object.keys(record).sort();
    return '{' + keys.map((k) => JSON.stringify(k) + ':' + canonJson(record[k])).join(',') + '}';
  }
  throw new ProtocolError(`unserializable value: ${String(value)}`);
}

export function encodeEnvelope(msg: Envelope): string {
  const line =
    '{"v":' + canonNumber(msg.v) +
    ',"type":' + JSON.stringify(msg.type) +
    ',"seq":' + canonNumber(msg.seq) +
    ',"ts_ms":' + canonNumber(msg.ts_ms) +
    ',"payload":' + canonJson(msg.payload) + '}\n';
  if (Buffer.byteLength(line, 'utf8') > MAX_LINE_BYTES) {
    throw new ProtocolError(`encoded message exceeds ${MAX_LINE_BYTES} bytes`);
  }
  return line;
}

export function decodeEnvelope(line: string | Buffer): Envelope {
  const text = (typeof line === 'string' ? line : line.toString('utf8')).trim();
  if (!text) throw new ProtocolError('empty protocol line');
  if (Buffer.byteLength(text, 'utf8') > MAX_LINE_BYTES) {
    throw new ProtocolError(`line exceeds ${MAX_LINE_BYTES} bytes`);
  }
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new ProtocolError(`malformed protocol line: ${text.slice(0, 80)}`);
  }
  if (typeof raw !== 'object' || raw === null || Array.isArray(raw)) {
    throw new ProtocolError('protocol line is not a JSON object');
  }
  const record = raw as Record<string, unknown>;
  if (record.v !== PROTOCOL_VERSION) {
    throw new ProtocolVersionMismatch(`unsupported protocol version ${String(record.v)}`);
  }
  const type = record.type;
  if (typeof type !== 'string' || !(MSG_TYPES as readonly string[]).includes(type)) {
    throw new ProtocolError(`unknown message type ${String(type)}`);
  }
  const payload = record.payload ?? {};
  if (typeof payload !== 'object' || payload === null || Array.isArray(payload)) {
    throw new ProtocolError('payload must be a JSON object');
  }
  return {
    v: PROTOCOL_VERSION,
    type: type as MsgType,
    seq: Number(record.seq ?? 0),
    ts_ms: Number(record.ts_ms ?? 0),
    payload: payload as Record<string, unknown>,
  };
}

/** Incremental line framing for a byte stream. */
export class LineSplitter {
  private buffer = '';

  feed(chunk: string | Buffer): string[] {
    this.buffer += typeof chunk === 'string' ? chunk : chunk.toString('utf8');
    const lines: string[] = [];
    let idx: number;
    while ((idx = this.buffer.indexOf('\n')) >= 0) {
      const line = this.buffer.slice(0, idx);
      this.buffer = this.buffer.slice(idx + 1);
      if (line.trim()) lines.push(line);
    }
    return lines;
  }
}
