"""Global Newton-Raphson solve and adaptive pseudo-time step control."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse.linalg as spla

from .model import Model, ModelState, StepContext

_TINY_FORCE = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-4
    n_iter_max: int = 20
    C: float = 2.0
    xi: float = 2.0
    n_iter_opt: int = 5
    c_red: float = 0.5
    dt_min: float = 1e-6
    dt_max: float = 0.25
    dt_init: float = 0.25
    dN_init: float = 1.0
    dN_min: float = 1e-3
    dN_max: float = 1e9
    dD_max: float = 0.05  # cap on the largest fatigue damage increment per jump
    dE_max: float = 0.01  # cap on the normalised stiffness loss per jump block
    line_search: int = 6  # max residual-norm backtracking halvings per iteration

    def __post_init__(self):
        if not self.C > 1.0:
            raise ValueError("C must exceed 1")
        if not 0.0 < self.c_red < 1.0:
            raise ValueError("c_red must lie in (0, 1)")
        if self.tol <= 0.0 and self.tol != 0.0:
            raise ValueError("tol must be non-negative")
        if self.n_iter_max < 1 or self.n_iter_opt < 1 or self.xi <= 0:
            raise ValueError("iteration counts and xi must be positive")
        if not 0.0 < self.dt_min <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_max")
        if not 0.0 < self.dN_min <= self.dN_max:
            raise ValueError("need 0 < dN_min <= dN_max")


class NewtonResult(NamedTuple):
    converged: bool
    n_iter: int
    residual: float
    reason: str = ""


def interface_dummy_stiffness(G12: float, t_p: float) -> float:
    if G12 <= 0 or t_p <= 0:
        raise ValueError("G12 and t_p must be positive")
    return G12 / (0.5 * t_p)


def adapt_step(dt: float, n_iter: int, cfg: SolverConfig, dt_min: float, dt_max: float) -> float:
    """Next increment from the iteration count of the last converged step."""
    if n_iter < 1:
        raise ValueError("n_iter must be at least 1")
    dt_next = cfg.C ** (-(n_iter - cfg.n_iter_opt) / cfg.xi) * dt
    return float(min(max(dt_next, dt_min), dt_max))


def newton_solve(model: Model, state: ModelState, ctx: StepContext, cfg: SolverConfig) -> NewtonResult:
    """Equilibrate ``state.u`` for the loads of ``ctx``.

    On success ``state.u`` and the trial history buffers hold the converged
    solution (nothing is committed).  On failure ``state`` is left exactly
    as it was on entry.
    """
    u0 = state.u.copy()
    c = state.coh
    trial0 = (c.D_trial.copy(), c.rate_trial.copy(), c.t_trial.copy())
    free = model.free_dofs(state)
    state.u[model.fixed] = model.prescribed(ctx.lam_F)
    res = np.inf
    reason = "max iterations"
    for it in range(cfg.n_iter_max + 1):
        f_int, f_ext, K, f_th = model.assemble(state, ctx)
        r = f_int - f_ext
        if not np.all(np.isfinite(r)):
            reason = "non-finite residual"
            break
        ref = max(
            np.linalg.norm(f_ext),
            np.linalg.norm(f_int[model.fixed]),
            np.linalg.norm(f_th),
            _TINY_FORCE,
        )
        res = np.linalg.norm(r[free]) / ref
        if it >= 1 and res <= cfg.tol:
            return NewtonResult(True, it, res)
        if it == cfg.n_iter_max:
            break
        Kff = K[free][:, free].tocsc()
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            try:
                du = spla.spsolve(Kff, -r[free])
            except (RuntimeError, spla.MatrixRankWarning, Warning):
                du = None
        if du is None or not np.all(np.isfinite(du)):
            reason = "singular system"
            break
        if cfg.line_search and it >= 1:
            du = _backtrack(model, state, ctx, free, du, np.linalg.norm(r[free]), cfg.line_search)
        state.u[free] += du
    state.u = u0
    c.D_trial, c.rate_trial, c.t_trial = trial0
    return NewtonResult(False, it, float(res), reason)


def _backtrack(model, state, ctx, free, du, r0, n_max):
    """Halve the update while it increases the residual norm."""
    base = state.u.copy()
    eta = 1.0
    try:
        for _ in range(n_max):
            state.u[free] = base[free] + eta * du
            f_int, f_ext, _, _ = model.assemble(state, ctx, tangent=False)
            if np.linalg.norm((f_int - f_ext)[free]) < r0:
                break
            eta *= 0.5
    finally:
        state.u = base
    return eta * du


def relax_to_equilibrium(
    model: Model, state: ModelState, ctx: StepContext, cfg: SolverConfig,
    a_init: float = 0.5, a_min: float = 1.0 / 64.0, max_rounds: int = 2000,
) -> tuple[bool, int]:
    """Pass an unstable branch at fixed load by damped static damage growth.

    Each round admits only a fraction ``a`` of the static damage growth and
    is committed.  The first round applies ``ctx`` (including its cycle
    increment), later rounds hold N fixed.  A plain solve is retried after
    1, 2, 4, ... relaxed rounds; the traverse ends once it converges.
    Returns ``(converged, rounds)``.
    """
    from dataclasses import replace

    a = a_init
    cur = ctx
    wait, count = 1, 0
    for rounds in range(1, max_rounds + 1):
        if count >= wait:
            res = newton_solve(model, state, cur, cfg)
            if res.converged:
                model.commit(state, cur)
                return True, rounds
            count, wait = 0, 2 * wait
        relaxed = replace(cur, static_fraction=a)
        res = newton_solve(model, state, relaxed, cfg)
        if res.converged:
            model.commit(state, relaxed)
            cur = replace(cur, dN=0.0, fatigue=False)
            count += 1
            continue
        a *= 0.5
        if a < a_min:
            break
    return False, rounds
