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
