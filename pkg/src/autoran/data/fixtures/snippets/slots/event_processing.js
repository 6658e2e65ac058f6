function processIndication(payload) {
  return {
    cellId: payload.cell_id || '',
    sliceId: payload.slice_id || null,
    metrics: payload.metrics || {},
  };
}
