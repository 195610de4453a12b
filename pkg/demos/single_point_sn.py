"""S-N curve of one cohesive point at constant peak traction.

The simulated life is compared with the closed-form integral of the
damage rate.  Runs in a few seconds.
"""

import numpy as np

from lamfatigue import fczm
from lamfatigue.driver import Analysis, AnalysisSchedule, single_point_model
from lamfatigue.fczm import CohesiveParams
from lamfatigue.fem.solver import SolverConfig

p = CohesiveParams(K_n=1.0e6, f_n=95.0, f_sh=107.0, G_Ic=1.0, G_IIc=1.0)
R, B = 0.1, 0.0
E = float(fczm.relative_endurance(np.array([R]), np.array([B]), p)[0])
beta = float(fczm.sn_exponent(E, p))
print(f"endurance limit E = {E:.4f}, exponent beta = {beta:.3f}")
print(f"{'severity':>8} {'N simulated':>14} {'N closed form':>14} {'rel. diff':>10}")
for s in (0.4, 0.5, 0.6, 0.7, 0.8, 0.9):
    a = Analysis(
        single_point_model(p, s, B, R),
        AnalysisSchedule(R_glob=R, stop_fraction=None, failure_on_instability=True, N_max=1e12),
        SolverConfig(dD_max=0.01),
    )
    N = a.run().N_fail
    # at constant traction the jump ratio is s/(1-D) and growth ends at D = 1-s
    ref = p.gamma * (E / s) ** beta * (1.0 - s ** (beta + 1.0))
    print(f"{s:8.2f} {N:14.5g} {ref:14.5g} {N / ref - 1:10.2e}")
