// xApp scaffold speaking the v1 newline-delimited JSON E2 protocol.
// Fill every slot before deployment. Each slot defines the function named in
// the banner above it; the fixed runtime at the bottom drives them.
'use strict';

const net = require('net');
const fs = require('fs');

// ---- init(): returns {name, version} and performs one-time setup ----
function init() {
  return { name: 'anomaly-detection-xapp', version: '0.1.0' };
}

// ---- parseConfig(argv): returns {mode, endpoint, datasetPath, subscriptions, policies, ...} ----
function parseConfig(argv) {
  const config = {
    mode: 'offline',
    endpoint: '',
    datasetPath: '',
    threshold: 3.5,
    windowSize: 64,
    minSamples: 16,
    subscriptions: [
      { name: 'prb_util', granularity: 'per_cell', period_ms: 100 },
      { name: 'dl_throughput', granularity: 'per_cell', period_ms: 100 },
    ],
    policies: [],
  };
  for (const arg of argv) {
    if (arg === '--endpoint') {
      config.mode = 'online';
    } else if (config.mode === 'online' && !config.endpoint) {
      config.endpoint = arg;
    } else {
      config.datasetPath = arg;
    }
  }
  return config;
}

// ---- processIndication(payload): returns {cellId, sliceId, metrics} ----
function processIndication(payload) {
  return {
    cellId: payload.cell_id || '',
    sliceId: payload.slice_id || null,
    metrics: payload.metrics || {},
  };
}

// ---- createDetector(config): returns {update(sample) -> action|null, evaluate(rows) -> metrics} ----
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

// ---- applyPolicies(action, policies): returns the permitted action or null ----
function applyPolicies(action, policies) {
  if (!action) return null;
  for (const policy of policies) {
    if (policy.deny && policy.deny === action.kind) return null;
    if (policy.max_flags_per_cell && action.kind === 'flag_anomaly') {
      action.budget = policy.max_flags_per_cell;
    }
  }
  return action;
}

// ---- buildControl(action, meta): returns {name, params} for RIC_CONTROL ----
function buildControl(action, meta) {
  return {
    name: action.kind,
    params: { cell_id: action.cellId || meta.cellId },
  };
}

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
