"""Local versus global stress ratio on a cooled [0/90] strip.

Cooling by 160 degrees leaves the 90 ply in transverse tension, so its
local stress ratio under R = 0.1 cycling is higher than 0.1.  The offset
matters most at low load, where the local-R run lives much longer.
Takes about a minute.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

import cases  # noqa: E402

print(f"{'peak MPa':>9} {'N local':>10} {'N global':>10} {'ratio':>6}  cracks (local)")
for sev in cases.SEVERITIES:
    S = cases.STRENGTH * sev
    loc = cases.strip_analysis(S, False)
    r_loc = loc.run()
    r_glo = cases.strip_analysis(S, True).run()
    print(f"{S:9.2f} {r_loc.N_fail:10.4g} {r_glo.N_fail:10.4g} {r_loc.N_fail / r_glo.N_fail:6.2f}  "
          f"{len(loc.state.cracks)}")
