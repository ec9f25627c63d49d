"""The ranking loss on a single preference sample.

Four candidate actions; the first is the chosen one and the rest get
riskier. Raising the chosen action's log-probability lowers the loss,
and the analytic gradient agrees with finite differences.
"""

import numpy as np

from csnkit.pldpo import BetaTable, PreferenceSample, finite_difference_gradient, loss_gradient, pl_dpo_loss, pl_dpo_nll_loss

table = BetaTable()
ref = np.array([-2.0, -2.2, -2.5, -3.0])
sample = PreferenceSample(ref.copy(), ref, "turn")
print(f"beta for turns: {table.beta('turn')}")
print(f"policy == reference: loss {pl_dpo_loss(sample, 0.35):.4f} (log 4! = {np.log(24):.4f})")

for step in (0.5, 1.0, 2.0):
    pol = ref + np.array([step, 0.0, -step / 2, -step])
    s = sample.with_policy(pol)
    print(f"push chosen up by {step}: PL loss {pl_dpo_loss(s, 0.35):.4f}, with NLL term {pl_dpo_nll_loss(s, table):.4f}")

g = loss_gradient(sample, table)
fd = finite_difference_gradient(sample, table)
print("\nanalytic gradient ", np.round(g, 6))
print("finite differences", np.round(fd, 6))
print(f"sum of entries {g.sum():+.6f} (the NLL weight, negated)")
