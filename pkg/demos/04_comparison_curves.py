"""
Star units against cross-shaped units
=====================================

Both schemes share the chain-growth terms; they differ in the last step.  A
star unit connects its neighbors in one parallel round (t_a), the cross-unit
scheme needs (t_a/p) ln(2N/eps).  T1 is therefore logarithmic in ln(2N/eps)
and T2 linear.
"""

import numpy as np

from starcluster import analytics

T1 = analytics.lattice_cost(None, None, 0.25, lnterm=30)
T2 = analytics.duan_time(None, None, 0.25, lnterm=30)
print("p = 0.25, ln(2N/eps) = 30")
print("  T1 terms:", [round(t, 3) for t in T1.time_terms], "total", round(T1.time, 2))
print("  T2 terms:", [round(t, 3) for t in T2.time_terms], "total", round(T2.time, 2))
print("  ratio:", round(T1.time / T2.time, 4))

# sweep ln(2N/eps) at fixed p
rows = analytics.figure3a()
L = np.array([r["x"] for r in rows])
gap = np.array([r["T2"] - r["T1"] for r in rows])
print("\nT2 - T1 grows by", np.polyfit(L, gap, 1)[0], "per unit of ln(2N/eps)")
for r in rows[::9]:
    print(f"  L = {r['x']:>4.0f}: T1 = {r['T1']:8.2f}  T2 = {r['T2']:8.2f}")

# sweep p at fixed ln(2N/eps); the improvement 1 - T1/T2 grows with p
print()
for r in analytics.figure3b(values=[0.05, 0.1, 0.2, 0.3, 0.4, 0.5]):
    print(f"  p = {r['x']:.2f}: T1 = {r['T1']:.4g}  T2 = {r['T2']:.4g}  1 - ratio = {1 - r['ratio']:.3g}")

# `starcluster sweep figure3a` / `figure3b` write the same rows as CSV
