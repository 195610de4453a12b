"""Four-phase fatigue analysis: thermal load, static ramp, control cycles and
cycle jumps, with effective-stiffness tracking and S-N point extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fczm import CohesiveParams
from .fem.mesh import Mesh, generate_strip_mesh, single_line_element
from .fem.model import Model, ModelState, StepContext
from .fem.solver import SolverConfig, adapt_step, newton_solve, relax_to_equilibrium
from .ply import PlyParams
from .xfem import CrackTopology

PHASES = ("Thermal", "StaticRamp", "ControlCycle", "CycleJump")
_REL_DN_MIN = 1e-5  # cycle increments below this fraction of N count as stalled


class SolverAbort(RuntimeError):
    """Step size fell below its minimum without convergence."""


@dataclass(frozen=True)
class AnalysisSchedule:
    delta_T: float = 0.0
    R_glob: float = 0.1
    k_jumps: int = 3
    N_max: float = 1e7
    stop_fraction: float | None = 0.15
    global_R_mode: bool = False
    failure_on_instability: bool = False
    insert_cracks: bool = True
    peak_stress: float = 0.0  # reported with the S-N datum
    max_steps: int = 20000
    dump_at: tuple = ()

    def __post_init__(self):
        if not self.R_glob < 1.0:
            raise ValueError("R_glob must be below 1")
        if self.k_jumps < 1:
            raise ValueError("k_jumps must be at least 1")
        if self.N_max <= 0:
            raise ValueError("N_max must be positive")
        if self.stop_fraction is not None and not 0.0 < self.stop_fraction < 1.0:
            raise ValueError("stop_fraction must lie in (0, 1)")


@dataclass
class RunRecord:
    rows: list = field(default_factory=list)
    events: list = field(default_factory=list)
    stiffness: list = field(default_factory=list)  # (N, E_eff_norm) per control cycle
    N_fail: float | None = None
    censored: bool = False
    failure_mode: str = ""
    peak_stress: float = 0.0

    COLUMNS = ("step", "phase", "N", "load_factor", "E_eff_norm", "n_iter", "dt")

    def add_row(self, phase, N, lam, E_norm, n_iter, dt):
        self.rows.append((len(self.rows) + 1, phase, float(N), float(lam), float(E_norm), int(n_iter), float(dt)))

    def count(self, kind: str) -> int:
        return sum(1 for e in self.events if e[0] == kind)

    def summary(self) -> dict:
        return {
            "peak_stress": self.peak_stress,
            "N_fail": self.N_fail,
            "censored": self.censored,
            "failure_mode": self.failure_mode,
            "steps": len(self.rows),
            "control_cycles": len(self.stiffness),
            "insertions": self.count("insert"),
            "restarts": self.count("restart"),
            "final_E_eff_norm": self.stiffness[-1][1] if self.stiffness else 1.0,
        }


def extract_sn_point(history, stop_fraction: float):
    """Cycles at which the normalised stiffness first reaches ``1 - stop_fraction``.

    ``history`` is a sequence of ``(N, E_norm)``; interpolation is linear in
    log N between the bracketing entries (linear in N when the lower one is
    at N = 0).  Returns ``(N_fail, censored)``.
    """
    target = 1.0 - stop_fraction
    prev = None
    for N, E in history:
        if E <= target:
            if prev is None or E == target:
                return float(N), False
            N0, E0 = prev
            s = (E0 - target) / (E0 - E)
            if N0 <= 0.0:
                return float(N0 + s * (N - N0)), False
            return float(math.exp(math.log(N0) + s * (math.log(N) - math.log(N0)))), False
        prev = (N, E)
    return (float(history[-1][0]) if history else 0.0), True


class Analysis:
    """One fatigue analysis of a model under a load schedule.

    ``load_dofs``/``load_weights`` define the work-conjugate displacement of
    the loaded boundary used for the effective stiffness.
    """

    def __init__(
        self,
        model: Model,
        schedule: AnalysisSchedule,
        solver: SolverConfig = SolverConfig(),
        topology: CrackTopology | None = None,
        on_dump=None,
    ):
        self.model = model
        self.schedule = schedule
        self.cfg = solver
        self.topology = topology
        self.state: ModelState = model.initial_state()
        self.record = RunRecord(peak_stress=schedule.peak_stress)
        self.phase = "Thermal"
        self.E0 = None
        self.E_norm = 1.0
        self.dN_next = solver.dN_init
        self.dN_cap = math.inf  # stiffness-loss limit on the cycle increment
        self.dt_control = 1.0
        self.on_dump = on_dump
        self._dumped = set()
        f = model.force
        self.load_dofs = np.flatnonzero(f)
        F = f[self.load_dofs]
        self.F_total = float(np.sum(np.abs(F)))
        self.load_weights = F / (self.F_total if self.F_total > 0 else 1.0)

    # -------------------------------------------------------------- helpers
    def conjugate_displacement(self) -> float:
        return float(self.load_weights @ self.state.u[self.load_dofs])

    def _thermal_factor(self) -> float:
        return 1.0 if self.schedule.delta_T != 0.0 else 0.0

    def _fail(self, msg):
        self.record.events.append(("abort", self.state.N, msg))
        raise SolverAbort(msg)

    def _solve_and_insert(self, ctx: StepContext) -> tuple[bool, int]:
        """Newton solve, commit, then crack insertion with re-equilibration."""
        res = newton_solve(self.model, self.state, ctx, self.cfg)
        if not res.converged:
            return False, res.n_iter
        self.model.commit(self.state, ctx)
        n_iter = res.n_iter
        if self.topology is None or not self.schedule.insert_cracks:
            return True, n_iter
        if self.phase not in ("StaticRamp", "CycleJump"):
            return True, n_iter
        ok, n = self._insert_loop(StepContext(ctx.lam_F, ctx.lam_T, 0.0, False))
        return ok, (n_iter if ok else n)

    def _insert_loop(self, frozen: StepContext) -> tuple[bool, int]:
        """Insert cracks and re-equilibrate at frozen load until none is added."""
        for _ in range(len(self.topology.conn0) + 1):
            done = self.topology.check_insertion(self.state, self.phase)
            if not done:
                break
            for d in done:
                self.record.events.append(("insert", self.state.N, d.element))
            res = newton_solve(self.model, self.state, frozen, self.cfg)
            if not res.converged:
                return False, res.n_iter
            self.model.commit(self.state, frozen)
        return True, 0

    def _advance(self, phase: str, ctx_of, dt_init: float, dt_max: float) -> float:
        """Pseudo-time stepping of ``ctx_of(t)`` from t = 0 to 1; returns the last dt."""
        self.phase = phase
        t, dt = 0.0, dt_init
        while t < 1.0 - 1e-12:
            dt = min(dt, 1.0 - t)
            snap = self.state.snapshot()
            ok, n_iter = self._solve_and_insert(ctx_of(t + dt))
            if not ok:
                self.state.restore(snap)
                self.record.events.append(("restart", self.state.N, phase))
                dt *= self.cfg.c_red
                if dt < self.cfg.dt_min:
                    if phase != "StaticRamp" or self.schedule.failure_on_instability:
                        self._fail(f"{phase}: load increment below minimum")
                    ok, n_iter = self._traverse(ctx_of(t + dt))
                    if not ok:
                        self._fail(f"{phase}: load increment below minimum")
                else:
                    continue
            t += dt
            ctx = ctx_of(t)
            self.record.add_row(phase, self.state.N, ctx.lam_F, self.E_norm, n_iter, dt)
            self._check_steps()
            dt = adapt_step(dt, max(n_iter, 1), self.cfg, self.cfg.dt_min, dt_max)
        return dt

    def _check_steps(self):
        if len(self.record.rows) > self.schedule.max_steps:
            self._fail("step budget exhausted")

    # --------------------------------------------------------------- phases
    def run_phase_thermal(self):
        if self.schedule.delta_T == 0.0:
            return
        self._advance("Thermal", lambda t: StepContext(0.0, t), 1.0, 1.0)

    def run_static_ramp(self):
        lt = self._thermal_factor()
        self._advance("StaticRamp", lambda t: StepContext(t, lt), self.cfg.dt_init, self.cfg.dt_max)

    def run_control_cycle(self) -> float:
        """Unload to F_min and reload with fatigue frozen; finalise local ratios."""
        lt, R = self._thermal_factor(), self.schedule.R_glob
        D_before = self.state.coh.D.copy()
        dt = self._advance("ControlCycle", lambda t: StepContext(1.0 + t * (R - 1.0), lt), self.dt_control, 1.0)
        u_min = self.conjugate_displacement()
        self.model.record_extrema(self.state, "min", "ControlCycle")
        dt2 = self._advance("ControlCycle", lambda t: StepContext(R + t * (1.0 - R), lt), dt, 1.0)
        self.dt_control = dt2
        u_max = self.conjugate_displacement()
        self.model.record_extrema(self.state, "max", "ControlCycle")
        self.model.finalize_ratios(self.state, self.schedule.global_R_mode)
        self.model.refresh_rates(self.state)
        if self.state.coh.D.size and np.any(self.state.coh.D < D_before):
            raise AssertionError("damage decreased during a control cycle")
        du = u_max - u_min
        if self.F_total > 0 and du > 0:
            E = (1.0 - R) * self.F_total / du
            if self.E0 is None:
                self.E0 = E
            self.E_norm = E / self.E0
        self.record.stiffness.append((self.state.N, self.E_norm))
        self._maybe_dump()
        return self.E_norm

    def run_cycle_jump_block(self) -> bool:
        """k cycle jumps at peak load; returns False on structural failure."""
        self.phase = "CycleJump"
        lt = self._thermal_factor()
        dN = min(self.dN_next, self.dN_cap)
        for _ in range(self.schedule.k_jumps):
            room = self.schedule.N_max - self.state.N
            if room <= 0.0:
                break
            while True:
                step = min(dN, room, self.cfg.dN_max)
                D0 = self.state.coh.D.copy()
                snap = self.state.snapshot()
                ok, n_iter = self._solve_and_insert(StepContext(1.0, lt, step, True))
                if ok and self.schedule.failure_on_instability and self._separated():
                    ok = False  # locate the loss of equilibrium by step reduction
                if ok:
                    break
                self.state.restore(snap)
                self.record.events.append(("restart", self.state.N, "CycleJump"))
                dN = step * self.cfg.c_red
                if dN < max(self.cfg.dN_min, _REL_DN_MIN * self.state.N):
                    if self.schedule.failure_on_instability:
                        self.record.failure_mode = "instability"
                        return False
                    ok, n_iter = self._traverse(StepContext(1.0, lt, step, True))
                    if not ok:
                        self._fail("CycleJump: cycle increment below minimum")
                    break
            self.record.add_row("CycleJump", self.state.N, 1.0, self.E_norm, n_iter, step)
            self._check_steps()
            dN = adapt_step(step, max(n_iter, 1), self.cfg, self.cfg.dN_min, self.cfg.dN_max)
            dD = float(np.max(self.state.coh.D[: len(D0)] - D0, initial=0.0))
            if dD > 0.0:
                dN = min(dN, step * self.cfg.dD_max / dD)
            dN = max(min(dN, self.dN_cap), self.cfg.dN_min)
        self.dN_next = dN
        return True

    def _traverse(self, ctx: StepContext) -> tuple[bool, int]:
        """Cross a local snap-back at fixed load; the state is kept only on success."""
        snap = self.state.snapshot()
        ok, rounds = relax_to_equilibrium(self.model, self.state, ctx, self.cfg)
        self.record.events.append(("traverse", self.state.N, rounds, ok))
        if ok and self.topology is not None and self.schedule.insert_cracks:
            ok, _ = self._insert_loop(StepContext(ctx.lam_F, ctx.lam_T, 0.0, False))
        if not ok:
            self.state.restore(snap)
            return False, rounds
        self.record.events.append(("instability", self.state.N, rounds))
        return True, rounds

    def _separated(self) -> bool:
        return bool(np.any(self.state.coh.D >= 1.0))

    # ------------------------------------------------------------------ run
    def run(self) -> RunRecord:
        sch = self.schedule
        self.run_phase_thermal()
        self.run_static_ramp()
        self.run_control_cycle()
        while True:
            if sch.stop_fraction is not None and self.E_norm <= 1.0 - sch.stop_fraction:
                self.record.N_fail, _ = extract_sn_point(self.record.stiffness, sch.stop_fraction)
                self.record.failure_mode = "stiffness"
                break
            if self.state.N >= sch.N_max:
                self.record.N_fail, self.record.censored = self.state.N, True
                break
            E_prev, N_prev = self.E_norm, self.state.N
            if not self.run_cycle_jump_block():
                self.record.N_fail = self.state.N
                break
            try:
                self.run_control_cycle()
            except SolverAbort:
                if not sch.failure_on_instability:
                    raise
                self.record.N_fail = self.state.N
                self.record.failure_mode = "instability"
                break
            # keep the predicted stiffness loss of the next block below dE_max
            drop, span = E_prev - self.E_norm, self.state.N - N_prev
            if drop > 0.0 and span > 0.0:
                self.dN_cap = max(self.cfg.dE_max * span / (drop * sch.k_jumps), self.cfg.dN_min)
            else:
                self.dN_cap = math.inf
        return self.record

    def _maybe_dump(self):
        if self.on_dump is None:
            return
        for m in self.schedule.dump_at:
            if m not in self._dumped and self.state.N >= m:
                self._dumped.add(m)
                self.on_dump(self, m)


# ----------------------------------------------------------------- builders
def edge_force(mesh: Mesh, nodes, stress: float, axis: int = 0, along: int = 1) -> np.ndarray:
    """Consistent nodal forces of a uniform edge stress on every layer.

    ``nodes`` lie on a straight edge; each layer carries ``stress * t_k``
    per unit edge length in direction ``axis``.
    """
    f = np.zeros(2 * mesh.n_nodes)
    nodes = np.asarray(nodes)
    for layer in mesh.layers:
        used = np.intersect1d(np.unique(layer.conn), nodes)
        if len(used) < 2:
            continue
        order = used[np.argsort(mesh.nodes[used, along])]
        s = mesh.nodes[order, along]
        q = stress * layer.thickness
        for i in range(len(order) - 1):
            half = 0.5 * q * (s[i + 1] - s[i])
            f[2 * order[i] + axis] += half
            f[2 * order[i + 1] + axis] += half
    return f


def build_strip_model(
    mesh: Mesh,
    plies: list[PlyParams],
    interface: CohesiveParams,
    ply_crack: CohesiveParams,
    peak_stress: float,
    delta_T: float = 0.0,
    R_glob: float = 0.1,
    crackable_layers=None,
) -> Model:
    """Strip loaded in x on its right edge, roller on the left edge, pinned corner.

    ``peak_stress`` is the laminate (average) stress at F_max.
    """
    dirichlet = [(mesh.boundary["left"], 0, 0.0, 0.0), (mesh.boundary["pin"], 1, 0.0, 0.0)]
    force = edge_force(mesh, mesh.boundary["right"], peak_stress)
    return Model(
        mesh, plies, {"interface": interface, "ply": ply_crack}, dirichlet, force,
        delta_T=delta_T, R_default=R_glob, crackable_layers=crackable_layers,
    )


def single_point_model(
    params: CohesiveParams, severity: float, B: float, R_glob: float, width: float = 1.0
) -> Model:
    """One line cohesive element under force control.

    The peak traction has mode mixity ``B`` (under the undamaged map) and
    equivalent traction ``severity * f_B``.
    """
    from .fczm import mixed_envelope

    mesh = single_line_element(width=width)
    f_B = float(mixed_envelope(np.array([B]), params).f_B[0])
    K_B = params.K_n + (params.K_sh - params.K_n) * B
    # t_n^2/K_n = (1-B) q, t_s^2/K_sh = B q, with K_B q = (s f_B)^2
    q = (severity * f_B) ** 2 / K_B
    t_n = math.sqrt((1.0 - B) * q * params.K_n)
    t_s = math.sqrt(B * q * params.K_sh)
    weight = 0.5 * 1.0 * width
    force = np.zeros(8)
    for node in (2, 3):
        force[2 * node] = weight * t_s
        force[2 * node + 1] = weight * t_n
    dirichlet = [(mesh.boundary["bottom"], 0, 0.0, 0.0), (mesh.boundary["bottom"], 1, 0.0, 0.0)]
    return Model(mesh, [], {"interface": params}, dirichlet, force, R_default=R_glob)


def strip_mesh_for(cfg_geometry: dict, angles, thicknesses) -> Mesh:
    g = cfg_geometry
    return generate_strip_mesh(
        g["length"], g["width"], g["element_size"], angles, thicknesses, tuple(g["fine_region"])
    )
