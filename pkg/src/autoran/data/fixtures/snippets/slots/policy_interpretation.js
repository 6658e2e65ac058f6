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
