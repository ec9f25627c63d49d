"""A reduced ablation grid: two reps on the ablation suite.

The full run (five reps) is `csnkit grid --out-dir results`; this version
takes well under a minute and prints the same tables.
"""

from csnkit.report import run_ablation_grid
from csnkit.suites import ablation_suite

report = run_ablation_grid(ablation_suite(), reps=2, noise_levels=("clean", "severe", "extreme"))
print(report.to_text())
