#!/usr/bin/env node
// Fill every template slot with a no-op body. The result must parse and run
// the full register/subscribe/event-loop path while deciding nothing.
'use strict';

const fs = require('fs');
const path = require('path');

const NOOP_SLOTS = {
  init: `function init() {
  return { name: 'noop-skeleton', version: '0.0.0' };
}`,
  config_parser: `function parseConfig(argv) {
  const config = {
    mode: 'offline',
    endpoint: '',
    datasetPath: '',
    threshold: 3.5,
    subscriptions: [{ name: 'prb_util', granularity: 'per_cell', period_ms: 100 }],
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
}`,
  event_processing: `function processIndication(payload) {
  return {
    cellId: payload.cell_id || '',
    sliceId: payload.slice_id || null,
    metrics: payload.metrics || {},
  };
}`,
  decision_logic: `function createDetector(config) {
  return {
    update() {
      return null;
    },
    evaluate(rows) {
      return { rows: rows.length };
    },
  };
}`,
  policy_interpretation: `function applyPolicies(action, policies) {
  return action;
}`,
  control_dispatch: `function buildControl(action, meta) {
  return { name: action.kind, params: { cell_id: meta.cellId } };
}`,
};

function buildNoopSkeleton(templatePath) {
  let source = fs.readFileSync(templatePath, 'utf8');
  for (const [slot, body] of Object.entries(NOOP_SLOTS)) {
    const marker = `@@SLOT:${slot}@@`;
    if (!source.includes(marker)) {
      throw new Error(`template is missing slot marker ${marker}`);
    }
    source = source.replace(marker, body);
  }
  if (source.includes('@@SLOT:')) {
    throw new Error('unfilled slot marker left in skeleton');
  }
  return source;
}

if (require.main === module) {
  const templatePath = path.join(__dirname, 'xapp.tmpl.js');
  const outPath = process.argv[2] || path.join(__dirname, 'xapp.noop.js');
  fs.writeFileSync(outPath, buildNoopSkeleton(templatePath));
  process.stdout.write(`wrote ${outPath}\n`);
}

module.exports = { buildNoopSkeleton, NOOP_SLOTS };
