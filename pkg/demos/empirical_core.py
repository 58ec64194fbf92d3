"""Sample many incorporation orders and look at the spread of stable payoffs.

Run with ``python demos/empirical_core.py`` (about a minute on one core).
"""

import numpy as np

from flowcore import gen_constant, run_ecore, time_matrix

n = 30
print(f"{n} players, every capacity C, every pair demands 1; 500 sampled orders each")
print("   C  distinct  min welfare / LP  best fairness / LP")
for C in (0, 5, 20, 60, 120, 230):
    rep = run_ecore(gen_constant(n, C, 1), 500, seed=1)
    ratio = float(rep.sw.min / rep.lp_sw) if rep.lp_sw else 1.0
    print(f"{C:4d}  {rep.distinct:8d}  {ratio:16.3f}  {float(rep.fairness.max):5.1f} / {float(rep.lp_fairness):5.1f}")

tm = time_matrix(gen_constant(n, 90, 1), 2000, seed=2)
avg = tm.avg
print("\naverage payoff by incorporation time, for a few positions:")
for pos in (1, n // 4, n // 2, n):
    row = avg[pos - 1]
    best = int(np.nanargmax(row)) + 1
    print(f"  position {pos:2d}: best time {best:2d}, payoff there {row[best - 1]:.1f}, row mean {np.nanmean(row):.1f}")
