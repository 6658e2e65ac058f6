function init() {
  return { name: 'anomaly-detection-xapp', version: '0.1.0' };
}
