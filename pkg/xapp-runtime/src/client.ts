/**
 * Protocol shim: connect, register, subscribe, then a single-threaded event
 * loop dispatching indications to a callback. A returned action is encoded as
 * RIC_CONTROL carrying the triggering indication's correlation id; callback
 * exceptions are reported as ERROR messages without killing the loop. Stream
 * close is the normal end-of-scenario signal.
 */

import * as net from 'net';

import {
  decodeEnvelope,
  encodeEnvelope,
  Envelope,
  LineSplitter,
  MsgType,
  ProtocolError,
} from './protocol';

export class ConnectFailed extends Error {}
export class SubscriptionRejected extends Error {
  constructor(public code: number, message: string) {
    super(message);
  }
}

export interface ShimConfig {
  /** "host:port" for TCP or a filesystem path for a unix socket. */
  endpoint: string;
  name: string;
  version?: string;
  connectTimeoutMs?: number;
}

export interface IndicationMeta {
  seq: number;
  tsMs: number;
  cellId: string;
  sliceId: string | null;
  subscriptionId: string | null;
}

export type ControlAction = { name: string; params: Record<string, unknown> } | null;

export type IndicationHandler = (
  metrics: Record<string, number>,
  meta: IndicationMeta,
) => ControlAction | Promise<ControlAction>;

export interface EventLoopStats {
  indications: number;
  controls: number;
  callbackErrors: number;
}

interface SocketLike {
  write(data: string): void;
  on(event: string, handler: (...args: never[]) => void): void;
  end(): void;
  destroy(): void;
}

export class XappSession {
  readonly name: string;
  private seq = 0;
  private splitter = new LineSplitter();
  private pending: Envelope[] = [];
  private waiters: Array<(msg: Envelope | null) => void> = [];
  private closed = false;
  private failure: Error | null = null;

  constructor(private socket: SocketLike, name: string) {
    this.name = name;
    socket.on('data', ((chunk: Buffer) => this.feed(chunk)) as never);
    socket.on('close', (() => this.handleClose()) as never);
    socket.on('error', (() => this.handleClose()) as never);
  }

  /** Test hook and transport entry: push raw bytes into the session. */
  feed(chunk: Buffer | string): void {
    let lines: string[];
    try {
      lines = this.splitter.feed(chunk);
    } catch (err) {
      this.failure = err as Error;
      this.handleClose();
      return;
    }
    for (const line of lines) {
      let msg: Envelope;
      try {
        msg = decodeEnvelope(line);
      } catch (err) {
        this.failure = err as Error;
        this.handleClose();
        return;
      }
      const waiter = this.waiters.shift();
      if (waiter) waiter(msg);
      else this.pending.push(msg);
    }
  }

  private handleClose(): void {
    if (this.closed) return;
    this.closed = true;
    for (const waiter of this.waiters.splice(0)) waiter(null);
  }

  get isClosed(): boolean {
    return this.closed;
  }

  send(type: MsgType, payload: Record<string, unknown>): Envelope {
    this.seq += 1;
    const msg: Envelope = { v: 1, type, seq: this.seq, ts_ms: Date.now(), payload };
    this.socket.write(encodeEnvelope(msg));
    return msg;
  }

  /** Next inbound message, or null at stream close. */
  async receive(): Promise<Envelope | null> {
    if (this.failure) throw this.failure;
    const queued = this.pending.shift();
    if (queued) return queued;
    if (this.closed) return null;
    return new Promise((resolve) => this.waiters.push(resolve));
  }

  async subscribe(metrics: string[], granularity: string, periodMs: number): Promise<string> {
    this.send('SUBSCRIPTION_REQ', {
      metrics,
      granularity,
      period_ms: periodMs,
    });
    for (;;) {
      const msg = await this.receive();
      if (msg === null) throw new ConnectFailed('stream closed before subscription response');
      if (msg.type === 'SUBSCRIPTION_RESP') {
        return String(msg.payload.subscription_id ?? '');
      }
      if (msg.type === 'ERROR') {
        throw new SubscriptionRejected(
          Number(msg.payload.code ?? 0),
          String(msg.payload.message ?? 'subscription rejected'),
        );
      }
      this.pending.push(msg);
      // yield so the pushed-back message does not spin this loop
      await new Promise((resolve) => setImmediate(resolve));
    }
  }

  /**
   * Dispatch every RIC_INDICATION to the callback, one message at a time,
   * until the stream closes.
   */
  async runEventLoop(onIndication: IndicationHandler): Promise<EventLoopStats> {
    const stats: EventLoopStats = { indications: 0, controls: 0, callbackErrors: 0 };
    for (;;) {
      const msg = await this.receive();
      if (msg === null) return stats;
      if (msg.type !== 'RIC_INDICATION') continue;
      stats.indications += 1;
      const meta: IndicationMeta = {
        seq: msg.seq,
        tsMs: msg.ts_ms,
        cellId: String(msg.payload.cell_id ?? ''),
        sliceId: msg.payload.slice_id === undefined ? null : String(msg.payload.slice_id),
        subscriptionId:
          msg.payload.subscription_id === undefined ? null : String(msg.payload.subscription_id),
      };
      let action: ControlAction = null;
      try {
        action = await onIndication((msg.payload.metrics ?? {}) as Record<string, number>, meta);
      } catch (err) {
        stats.callbackErrors += 1;
        this.send('ERROR', {
          code: 2001,
          message: `callback failed: ${(err as Error).message}`,
          correlation: { seq: msg.seq, ts_ms: msg.ts_ms },
        });
        continue;
      }
      if (action) {
        stats.controls += 1;
        this.send('RIC_CONTROL', {
          action: action.name,
          params: action.params,
          correlation: { seq: msg.seq, ts_ms: msg.ts_ms },
        });
      }
    }
  }

  close(): void {
    try {
      this.socket.end();
    } catch {
      this.socket.destroy();
    }
  }
}

function connectSocket(endpoint: string, timeoutMs: number): Promise<net.Socket> {
  return new Promise((resolve, reject) => {
    const socket = endpoint.includes(':')
      ? net.createConnection(
          Number(endpoint.slice(endpoint.lastIndexOf(':') + 1)),
          endpoint.slice(0, endpoint.lastIndexOf(':')),
        )
      : net.createConnection(endpoint);
    const timer = setTimeout(() => {
      socket.destroy();
      reject(new ConnectFailed(`timed out connecting to ${endpoint}`));
    }, timeoutMs);
    socket.once('connect', () => {
      clearTimeout(timer);
      resolve(socket);
    });
    socket.once('error', (err) => {
      clearTimeout(timer);
      reject(new ConnectFailed(`cannot connect to ${endpoint}: ${err.message}`));
    });
  });
}

/** Connect, register (seq 1), and wait for the acknowledgement. */
export async function connectAndRegister(config: ShimConfig): Promise<XappSession> {
  const socket = await connectSocket(config.endpoint, config.connectTimeoutMs ?? 10000);
  const session = new XappSession(socket, config.name);
  session.send('REGISTER', { xapp: config.name, version: config.version ?? '0.1.0' });
  for (;;) {
    const msg = await session.receive();
    if (msg === null) throw new ConnectFailed('stream closed during registration');
    if (msg.type === 'REGISTER') {
      if (msg.payload.status !== 'ok') {
        throw new ConnectFailed(`registration rejected: ${JSON.stringify(msg.payload)}`);
      }
      return session;
    }
    if (msg.type === 'E2_SETUP') continue; // server hello carries capabilities
    throw new ProtocolError(`unexpected ${msg.type} during registration`);
  }
}
