// xApp scaffold speaking the v1 newline-delimited JSON E2 protocol.
// Fill every slot before deployment. Each slot defines the function named in
// the banner above it; the fixed runtime at the bottom drives them.
'use strict';

const net = require('net');
const fs = require('fs');

// ---- init(): returns {name, version} and performs one-time setup ----
@@SLOT:init@@

// ---- parseConfig(argv): returns {mode, endpoint, datasetPath, subscriptions, policies, ...} ----
@@SLOT:config_parser@@

// ---- processIndication(payload): returns {cellId, sliceId, metrics} ----
@@SLOT:event_processing@@

// ---- createDetector(config): returns {update(sample) -> action|null, evaluate(rows) -> metrics} ----
@@SLOT:decision_logic@@

// ---- applyPolicies(action, policies): returns the permitted action or null ----
@@SLOT:policy_interpretation@@

// ---- buildControl(action, meta): returns {name, params} for RIC_CONTROL ----
@@SLOT:control_dispatch@@

// ---------------- fixed runtime; do not edit below this line ----------------

function canonNumber(x) {
  if (!Number.isFinite(x)) throw new Error('non-finite number on the wire');
  return Object.is(x, -0) ? '0' : String(x);
}

function canonJson(value) {
  if (value === null) return 'null';
  if (typeof value === 'boolean') return value ? 'true' : 'false';
  if (typeof value === 'number') return canonNumber(value);
  if (typeof value === 'string') return JSON.stringify(value);
  if (Array.isArray(value)) return '[' + value.map(canonJson).join(',') + ']';
  const keys = Object.keys(value).sort();
  return '{' + keys.map((k) => JSON.stringify(k) + ':' + canonJson(value[k])).join(',') + '}';
}

function encodeEnvelope(msg) {
  return (
    '{"v":' + canonNumber(msg.v) +
    ',"type":' + JSON.stringify(msg.type) +
    ',"seq":' + canonNumber(msg.seq) +
    ',"ts_ms":' + canonNumber(msg.ts_ms) +
    ',"payload":' + canonJson(msg.payload) + '}\n'
  );
}

class E2Client {
  constructor(socket) {
    this.socket = socket;
    this.seq = 0;
    this.buffer = '';
    this.handlers = [];
    this.closed = false;
    socket.setEncoding('utf8');
    socket.on('data', (chunk) => this._feed(chunk));
    socket.on('close', () => {
      this.closed = true;
      this.handlers.forEach((h) => h(null));
    });
  }

  _feed(chunk) {
    this.buffer += chunk;
    let idx;
    while ((idx = this.buffer.indexOf('\n')) >= 0) {
      const line = this.buffer.slice(0, idx);
      this.buffer = this.buffer.slice(idx + 1);
      if (!line.trim()) continue;
      const msg = JSON.parse(line);
      if (msg.v !== 1) throw new Error('protocol version mismatch: ' + msg.v);
      this.handlers.forEach((h) => h(msg));
    }
  }

  onMessage(handler) {
    this.handlers.push(handler);
  }

  send(type, payload, tsMs) {
    this.seq += 1;
    const msg = { v: 1, type, seq: this.seq, ts_ms: tsMs === undefined ? Date.now() : tsMs, payload };
    this.socket.write(encodeEnvelope(msg));
    return msg;
  }
}

function connectEndpoint(endpoint) {
  if (endpoint.includes(':')) {
    const at = endpoint.lastIndexOf(':');
    return net.createConnection(Number(endpoint.slice(at + 1)), endpoint.slice(0, at));
  }
  return net.createConnection(endpoint); // unix socket path
}

function loadCsv(path) {
  const lines = fs.readFileSync(path, 'utf8').split('\n').filter((l) => l.trim().length > 0);
  const header = lines[0].split(',').map((h) => h.trim());
  return lines.slice(1).map((line) => {
    const cells = line.split(',');
    const row = {};
    header.forEach((name, i) => {
      row[name] = Number(cells[i]);
    });
    return row;
  });
}

function runOffline(config) {
  const rows = loadCsv(config.datasetPath);
  const detector = createDetector(config);
  const metrics = detector.evaluate(rows);
  process.stdout.write(JSON.stringify(metrics) + '\n');
}

function runOnline(config) {
  const meta = init();
  const socket = connectEndpoint(config.endpoint);
  const client = new E2Client(socket);
  const detector = createDetector(config);
  let registered = false;
  socket.on('connect', () => {
    client.send('REGISTER', { xapp: meta.name, version: meta.version });
  });
  client.onMessage((msg) => {
    if (msg === null) {
      process.exit(0);
    }
    if (msg.type === 'REGISTER' && !registered) {
      registered = true;
      client.send('SUBSCRIPTION_REQ', {
        metrics: config.subscriptions.map((s) => s.name),
        granularity: config.subscriptions[0].granularity,
        period_ms: config.subscriptions[0].period_ms,
      });
    } else if (msg.type === 'RIC_INDICATION') {
      const sample = processIndication(msg.payload);
      let action = detector.update(sample);
      action = applyPolicies(action, config.policies || []);
      if (action) {
        const control = buildControl(action, {
          cellId: sample.cellId,
          indicationSeq: msg.seq,
          indicationTs: msg.ts_ms,
        });
        client.send('RIC_CONTROL', {
          action: control.name,
          params: control.params,
          correlation: { seq: msg.seq, ts_ms: msg.ts_ms },
        });
      }
    } else if (msg.type === 'ERROR') {
      process.stderr.write('sim error: ' + JSON.stringify(msg.payload) + '\n');
    }
  });
}

function main() {
  const config = parseConfig(process.argv.slice(2));
  if (config.mode === 'online') {
    runOnline(config);
  } else {
    runOffline(config);
  }
}

main();
