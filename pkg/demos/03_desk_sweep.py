"""
A reduced (K, r) sweep
======================

The full desk sweep takes a few minutes on one core; here we use a
smaller grid and fewer repetitions, then locate the corners of the
BHR/FPR frontier and write every artifact to ``sweep_out/``.
"""

import numpy as np

from coopcache import SweepConfig, corner_points, run_sweep, tertile_shares, write_sweep

cfg = SweepConfig(k_values=(1, 2, 10), r_values=(0, 1, 2, 3), repetitions=3,
                  requests=6000, seed=11)
res = run_sweep(cfg)

print("BHR  (rows K, columns r)")
for K in cfg.k_values:
    print(K, [round(res.point(K, r).bhr, 3) for r in cfg.r_values])

###############################################################################
# Corners: A is the weakest policy, B maximizes BHR, C maximizes FPR, D has
# the weakest coupling between centrality and cached popularity.

corners = corner_points(res)
for name, q in corners.items():
    print(f"{name}: K={q.K} r={q.r}  bhr={q.bhr:.3f} fpr={q.fpr:.3f} cpf={q.cpf:+.3f}")

###############################################################################
# Share of the top-10% popularity mass per centrality tertile (low, mid,
# high) in the final placements.

for name in "BC":
    q = corners[name]
    shares = np.mean([tertile_shares(run.final, inst["topology"].centrality,
                                     res.popularity, res.sizes)
                      for run, inst in zip(res.runs[(q.K, q.r)], res.instances)], axis=0)
    print(name, np.round(shares, 3))

write_sweep(res, "sweep_out")
