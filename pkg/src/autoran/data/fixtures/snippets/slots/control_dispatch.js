function buildControl(action, meta) {
  return {
    name: action.kind,
    params: { cell_id: action.cellId || meta.cellId },
  };
}
