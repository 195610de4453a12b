"""Cycle-jump step size: fully adaptive versus increments capped at 10.

Prints both stiffness histories on a common cycle grid.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

import cases  # noqa: E402

ad = cases.strip_analysis(100.0, False).run()
cap = cases.strip_analysis(100.0, False, dN_max=10.0).run()
print(f"N_fail adaptive {ad.N_fail:.4g} ({len(ad.rows)} steps), capped {cap.N_fail:.4g} ({len(cap.rows)} steps)")
A, C = np.array(ad.stiffness), np.array(cap.stiffness)
grid = np.linspace(0.0, min(A[-1, 0], C[-1, 0]), 9)
print(f"{'N':>8} {'E adaptive':>11} {'E capped':>9}")
for N in grid:
    print(f"{N:8.1f} {np.interp(N, A[:, 0], A[:, 1]):11.4f} {np.interp(N, C[:, 0], C[:, 1]):9.4f}")
