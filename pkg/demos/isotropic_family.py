"""Walk the isotropic family and print rho, CHSH and the ribbon slope.

Run: python3 demos/isotropic_family.py
"""
import numpy as np

from nsbox import TSIRELSON_ETA
from nsbox.harness import isotropic_csv, isotropic_scan, strictly_separated

etas = sorted(set(np.round(np.linspace(0, 1, 11), 10).tolist()) | {TSIRELSON_ETA})
rows = isotropic_scan(etas, n_max=10_000)
print(isotropic_csv(rows), end="")
# rho climbs strictly with eta, so no wiring can turn PR_eta into PR_eta' with eta' > eta
print("strictly separated:", strictly_separated(rows))
