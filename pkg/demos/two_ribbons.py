"""Compare the two ribbons of a correlated bit pair along a few slices.

For each lambda2 the MC boundary comes from bisection on the exact PSD test
and the HC boundary from bisection with the heuristic search (tolerance
1e-3). The HC ribbon always lies inside the MC ribbon; for this symmetric
pair the two boundaries coincide with the known curve.

Run: python3 demos/two_ribbons.py
"""
import numpy as np

from nsbox import JointDistribution, hc_membership, mc_boundary_slice


def hc_slice(d, l2, tol=1e-3):
    lo, hi = 1.0 - l2, 1.0
    if not hc_membership(d, (1.0, l2), restarts=32).outside:
        return 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if hc_membership(d, (mid, l2), restarts=32).outside:
            hi = mid
        else:
            lo = mid
    return lo


r = 0.6
d = JointDistribution(np.array([[1 + r, 1 - r], [1 - r, 1 + r]]) / 4)
print("lambda2  mc_lambda1  hc_lambda1  known_hc_lambda1")
for l2 in (0.1, 0.3, 0.5, 0.7, 0.9):
    # (1/l1 - 1)(1/l2 - 1) = r^2 for this pair
    known = 1.0 / (1.0 + r * r / (1.0 / l2 - 1.0))
    print(f"{l2:7.2f}  {mc_boundary_slice(d, l2):10.4f}  {hc_slice(d, l2):10.4f}  {known:16.4f}")
