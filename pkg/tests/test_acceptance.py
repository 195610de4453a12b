"""Acceptance criteria 1 to 10, one test each.

Every test records a one-line verdict; the lines are printed in the
terminal summary (see conftest) and by ``python tests/test_acceptance.py``.
"""

import functools
import math

import numpy as np
import pytest

import cases
import oracles
from lamfatigue import fczm
from lamfatigue.fem.model import ModelState, StepContext
from lamfatigue.io.outputs import capture_dump, dump_to_text, history_csv, summary_json
from lamfatigue.xfem import min_path_spacing

VERDICTS: dict[int, str] = {}


def verdict(k, ok, detail):
    VERDICTS[k] = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, VERDICTS[k]


# ------------------------------------------------------------------ shared runs
@functools.lru_cache(maxsize=None)
def severity_sweep():
    out = {}
    for g in (False, True):
        out[g] = [cases.strip_analysis(cases.STRENGTH * sv, g).run() for sv in cases.SEVERITIES]
    return out


# ------------------------------------------------------------------- criteria
def test_c01_single_point_sn():
    worst, where = 0.0, None
    for s in (0.5, 0.6, 0.7, 0.8, 0.9):
        for R in (0.1, 0.5):
            for B in (0.0, 0.5, 1.0):
                rec = cases.single_point_cycles(s, R, B)
                ref = oracles.sn_cycles_rk4(s, R, B, 1e6, 95.0, 107.0, 1.0, 1.0)
                err = abs(rec.N_fail / ref - 1.0)
                if err > worst:
                    worst, where = err, (s, R, B)
    verdict(1, worst <= 0.02, f"worst rel. error {worst:.2e} at (s, R, B) = {where}, 30 cases, tol 2e-2")


def test_c02_endurance_anchor():
    p = cases.PLY_CRACK
    worst = 0.0
    for R in (0.1, 0.5):
        for B in (0.0, 0.5, 1.0):
            E = float(fczm.relative_endurance(np.array([R]), np.array([B]), p)[0])
            rec = cases.single_point_cycles(E, R, B)
            worst = max(worst, abs(rec.N_fail / p.gamma - 1.0))
    verdict(2, worst <= 0.05, f"worst |N/gamma - 1| = {worst:.2e}, 6 cases, tol 5e-2")


def test_c03_static_dissipation():
    worst = 0.0
    for B in (0.0, 0.5, 1.0):
        W, G_c, D = cases.static_dissipation(cases.PLY_CRACK, B)
        assert D == 1.0
        worst = max(worst, abs(W / G_c - 1.0))
    verdict(3, worst <= 1e-6, f"worst rel. dissipation error {worst:.2e}, tol 1e-6")


def test_c04_tangent_consistency():
    rng = np.random.default_rng(20240611)
    states = cases.fd_states(cases.PLY_CRACK, rng, 100)
    errs = [cases.fd_error(cases.PLY_CRACK, st) for st in states]
    verdict(4, max(errs) < 1e-6, f"max rel. FD error {max(errs):.2e} over {len(errs)} states, tol 1e-6")


def test_c05_step_size_insensitivity():
    ra = cases.strip_analysis(100.0, False).run()
    rc = cases.strip_analysis(100.0, False, dN_max=10.0).run()
    dN = abs(ra.N_fail - rc.N_fail) / rc.N_fail
    A, C = np.array(ra.stiffness), np.array(rc.stiffness)
    N_end = min(A[-1, 0], C[-1, 0])
    sel = A[:, 0] <= N_end
    dE = float(np.max(np.abs(np.interp(A[sel, 0], C[:, 0], C[:, 1]) - A[sel, 1]) / A[sel, 1]))
    ok = dN <= 0.05 and dE <= 0.02
    verdict(5, ok, f"N_fail adaptive {ra.N_fail:.4g} vs capped {rc.N_fail:.4g} (rel {dN:.2e}); "
                   f"max rel. E_eff diff {dE:.2e}")


def test_c06_local_vs_global_ratio():
    sw = severity_sweep()
    Nl = [r.N_fail for r in sw[False]]
    Ng = [r.N_fail for r in sw[True]]
    gap = [(a - b) / a for a, b in zip(Nl, Ng)]
    ok = (
        Nl[0] > Ng[0]
        and all(g1 < g0 for g0, g1 in zip(gap, gap[1:]))
        and abs(Nl[-1] - Ng[-1]) / Nl[-1] <= 0.25
        and not any(r.censored for r in sw[False] + sw[True])
    )
    verdict(6, ok, "local " + ", ".join(f"{n:.4g}" for n in Nl) + " | global "
            + ", ".join(f"{n:.4g}" for n in Ng) + " | rel. gap " + ", ".join(f"{g:.3f}" for g in gap))


def test_c07_xfem_kinematics():
    from test_xfem import one_vertex_area, small_strip

    m, topo = small_strip()
    # rigid separation and area partition on every cuttable element of one layer
    jump_err, area_err, n_cut = 0.0, 0.0, 0
    v = np.array([2.5e-3, 1.5e-3])
    for e in range(len(topo.conn0) // 2):
        s = m.initial_state()
        path = topo.new_path(s, e)
        s.u[:] = 0.0
        for j in s.conn[e]:
            s.u[2 * j: 2 * j + 2] = v
        L, dofs = m.cohesive_operators(s)
        jump = np.einsum("nij,nj->ni", L, s.u[dofs])[-2:]
        jump_err = max(jump_err, np.abs(jump - [path.n @ v, path.f @ v, 0.0]).max() / np.linalg.norm(v))
        d, _, _ = topo.cut(e, path.p0, path.n)
        a_lone, pos = one_vertex_area(m.mesh.nodes[topo.conn0[e]], d)
        fA, fB = s.frac[e], s.frac[-1]
        area_err = max(area_err, abs(fA + fB - 1.0), abs((fA if pos else fB) - a_lone / topo.area0[e]))
        n_cut += 1
    base = m.initial_state()
    worst_spacing = np.inf
    for seed in range(1000):
        s = base.snapshot()
        idx = np.random.default_rng(seed).uniform(0.0, 2.0, len(topo.conn0))
        topo.check_insertion(s, "CycleJump", idx)
        worst_spacing = min(worst_spacing, min_path_spacing(s))
    ok = jump_err <= 1e-15 and area_err <= 1e-12 and worst_spacing >= topo.l_c - 1e-9
    verdict(7, ok, f"jump error {jump_err:.1e}, area error {area_err:.1e} ({n_cut} cuts), "
                   f"min spacing {worst_spacing:.4f} >= l_c {topo.l_c} over 1000 trials")


def test_c08_thermal_residual():
    a = cases.strip_analysis(100.0, False)
    a.run_phase_thermal()
    m, s = a.model, a.state
    sig = m.element_stress(s)
    vol = m.thickness[s.layer] * s.area * s.frac
    P = cases.PLY
    pl = (P.E1, P.E2, P.G12, P.nu12, P.alpha1, P.alpha2)
    ref, _ = oracles.clt_thermal_stresses([pl, pl], [0.125, 2.0], [0, 90], cases.DELTA_T)
    err = 0.0
    for k in range(2):
        sel = s.layer == k
        mean = (sig[sel] * vol[sel, None]).sum(0) / vol[sel].sum()
        err = max(err, np.linalg.norm(mean - ref[k]) / np.linalg.norm(ref[k]))
    net = abs((sig[:, 0] * vol).sum()) / (np.abs(sig[:, 0]) * vol).sum()
    verdict(8, err <= 0.01 and net <= 1e-8,
            f"ply-mean stress error {err:.2e} (tol 1e-2), net section force {net:.1e} (tol 1e-8)")


def test_c09_severity_monotonicity():
    sw = severity_sweep()
    ok = True
    parts = []
    for g in (False, True):
        N = [r.N_fail for r in sw[g]]
        ok &= all(b < a for a, b in zip(N, N[1:]))
        parts.append(("global " if g else "local ") + " > ".join(f"{n:.4g}" for n in N))
    verdict(9, ok, "; ".join(parts))


def test_c10_determinism_and_rollback(monkeypatch):
    texts = []
    for _ in range(2):
        a = cases.strip_analysis(cases.STRENGTH * 0.8, False)
        rec = a.run()
        texts.append((history_csv(rec), summary_json(rec.summary()), dump_to_text(capture_dump(a)),
                      a.state.checksum()))
    same = texts[0] == texts[1]

    # every rollback must restore the snapshot taken before the failed attempt
    checks = []
    original = ModelState.restore

    def restore(self, snap):
        dirty = self.checksum() != snap.checksum()
        original(self, snap)
        checks.append((self.checksum() == snap.checksum(), dirty))

    monkeypatch.setattr(ModelState, "restore", restore)
    a = cases.strip_analysis(cases.STRENGTH * 0.8, False)
    a.run()
    natural = all(c[0] for c in checks) and len(checks) > 0

    # a jump that commits damage and inserts cracks, then is rolled back
    a = cases.strip_analysis(cases.STRENGTH * 0.6, False)
    a.run_phase_thermal()
    a.run_static_ramp()
    a.run_control_cycle()
    a.phase = "CycleJump"
    h0, n0 = a.state.checksum(), len(a.state.cracks)
    snap = a.state.snapshot()
    a._solve_and_insert(StepContext(1.0, 1.0, 10.0, True))
    moved = a.state.checksum() != h0 and len(a.state.cracks) > n0
    a.state.restore(snap)
    forced = moved and a.state.checksum() == h0 and len(a.state.cracks) == n0
    ok = same and natural and forced
    verdict(10, ok, f"repeat runs identical: {same}; {len(checks)} solver rollbacks exact: {natural}; "
                    f"rollback of a committed jump with crack insertion exact: {forced}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
