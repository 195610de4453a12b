"""Mixed-mode fatigue cohesive zone model.

Static bilinear envelope with mode-dependent penalty stiffness, CF20-type
S-N damage rate, implicit trapezoidal damage update and the consistent
tangent. All point-level functions broadcast over leading array axes, so a
whole group of integration points is evaluated in one call.

Jumps are given in the local frame as ``(u_n, u_s)`` or ``(u_n, u_s1, u_s2)``;
the shear magnitude is the norm of the trailing components.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

LN10 = np.log(10.0)
_TINY = 1e-300

# local Newton on the damage update
NEWTON_TOL = 1e-12
NEWTON_MAXIT = 50


class DegenerateRatioError(ValueError):
    """Goodman denominator collapsed (stress ratio too close to or above 1)."""


class DamageUpdateError(RuntimeError):
    pass


@dataclass(frozen=True)
class CohesiveParams:
    """Material constants of the fatigue cohesive law.

    ``K_sh`` is derived from ``K_n`` with the stiffness-ratio constraint
    ``K_sh = K_n * (G_Ic / G_IIc) * (f_sh / f_n)**2`` unless given, in which
    case it must satisfy it.  ``p_exp=None`` means ``p = beta``.
    """

    K_n: float
    f_n: float
    f_sh: float
    G_Ic: float
    G_IIc: float
    eta_bk: float = 2.1
    eta_brittle: float = 0.95
    eps_end: float = 0.2
    gamma: float = 1.0e7
    p_exp: float | None = None
    K_sh: float | None = field(default=None)

    def __post_init__(self):
        for name in ("K_n", "f_n", "f_sh", "G_Ic", "G_IIc", "gamma", "eta_bk", "eta_brittle"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")
        if not 0.0 < self.eps_end < 1.0:
            raise ValueError(f"eps_end must lie in (0, 1), got {self.eps_end!r}")
        if self.p_exp is not None and self.p_exp < 0:
            raise ValueError(f"p_exp must be non-negative, got {self.p_exp!r}")
        k_sh = self.K_n * (self.G_Ic / self.G_IIc) * (self.f_sh / self.f_n) ** 2
        if self.K_sh is None:
            object.__setattr__(self, "K_sh", k_sh)
        elif abs(self.K_sh - k_sh) > 1e-9 * k_sh:
            raise ValueError(
                f"K_sh={self.K_sh!r} violates the stiffness-ratio constraint (expected {k_sh!r})"
            )


class MixedModeQuantities(NamedTuple):
    B: np.ndarray
    K_B: np.ndarray
    f_B: np.ndarray
    G_c: np.ndarray
    Delta0: np.ndarray
    Deltaf: np.ndarray


class PointResponse(NamedTuple):
    """Result of :func:`evaluate` for a set of points."""

    traction: np.ndarray  # (..., m)
    tangent: np.ndarray  # (..., m, m)
    D: np.ndarray  # combined energy damage
    D_fatigue: np.ndarray
    d: np.ndarray  # stiffness damage
    rate: np.ndarray  # dD/dN at (D, jump)
    B: np.ndarray
    Delta: np.ndarray


# ---------------------------------------------------------------------------
# closed-form pieces


def _split(jump):
    jump = np.asarray(jump, dtype=float)
    un = jump[..., 0]
    us2 = np.sum(jump[..., 1:] ** 2, axis=-1)
    return jump, un, us2


def mode_mixity(jump, params: CohesiveParams):
    """Displacement-based mode mixity ``B``; 0 for a closed or zero jump."""
    _, un, us2 = _split(jump)
    a = params.K_n * np.maximum(un, 0.0) ** 2
    b = params.K_sh * us2
    q = a + b
    with np.errstate(invalid="ignore", divide="ignore"):
        B = np.where(q > 0.0, b / np.where(q > 0.0, q, 1.0), 0.0)
    return B


def _check_B(B):
    B = np.asarray(B, dtype=float)
    if np.any((B < 0.0) | (B > 1.0)) or not np.all(np.isfinite(B)):
        raise ValueError("mode mixity B must lie in [0, 1]")
    return B


def _envelope_with_derivs(B, params: CohesiveParams):
    """Envelope quantities and their derivatives with respect to B."""
    p = params
    eta = p.eta_bk
    Beta = B**eta
    dBeta = np.where(B > 0.0, eta * B ** (eta - 1.0), 0.0 if eta > 1.0 else np.inf)
    e_n = p.f_n**2 / p.K_n
    e_s = p.f_sh**2 / p.K_sh
    h = e_n + (e_s - e_n) * Beta
    dh = (e_s - e_n) * dBeta
    K_B = p.K_n + (p.K_sh - p.K_n) * B
    dK = p.K_sh - p.K_n
    G_c = p.G_Ic + (p.G_IIc - p.G_Ic) * Beta
    dG = (p.G_IIc - p.G_Ic) * dBeta
    f_B = np.sqrt(K_B * h)
    df = 0.5 * f_B * (dK / K_B + dh / h)
    D0 = np.sqrt(h / K_B)
    dD0 = 0.5 * D0 * (dh / h - dK / K_B)
    Df = 2.0 * G_c / f_B
    dDf = Df * (dG / G_c - df / f_B)
    return K_B, dK, f_B, df, G_c, D0, dD0, Df, dDf


def mixed_envelope(B, params: CohesiveParams) -> MixedModeQuantities:
    """Mode-dependent stiffness, strength, toughness and bilinear end points."""
    B = _check_B(B)
    K_B, _, f_B, _, G_c, D0, _, Df, _ = _envelope_with_derivs(B, params)
    return MixedModeQuantities(B, K_B, f_B, G_c, D0, Df)


def equivalent_jump(jump, params: CohesiveParams):
    """Energy-weighted equivalent jump, ``K_B * Delta**2 = K_n<u_n>^2 + K_sh u_s^2``."""
    _, un, us2 = _split(jump)
    q = params.K_n * np.maximum(un, 0.0) ** 2 + params.K_sh * us2
    B = mode_mixity(jump, params)
    K_B = params.K_n + (params.K_sh - params.K_n) * B
    return np.sqrt(q / K_B)


def juvinall_Cl(B):
    B = _check_B(B)
    return 1.0 - 0.42 * B


def goodman_endurance(R, B, params: CohesiveParams, floor: float = 1e-12):
    """Relative endurance limit at stress ratio ``R`` and mixity ``B``.

    Raises :class:`DegenerateRatioError` when the Goodman denominator drops to
    ``floor`` or below.
    """
    R = np.asarray(R, dtype=float)
    c = juvinall_Cl(B) * params.eps_end
    den = c + 1.0 + R * (c - 1.0)
    if np.any(den <= floor):
        raise DegenerateRatioError(f"Goodman denominator <= {floor} for R={R!r}")
    E = 2.0 * c / den
    return np.clip(E, _TINY, 1.0)


def sn_exponent(E_rel, params: CohesiveParams):
    E_rel = np.asarray(E_rel, dtype=float)
    if np.any((E_rel <= 0.0) | (E_rel >= 1.0)):
        raise ValueError("relative endurance limit must lie in (0, 1)")
    return -7.0 * params.eta_brittle / np.log10(E_rel)


def cf20_rate(D, Delta, DeltaStar, E_rel, beta, params: CohesiveParams, p=None):
    """Damage rate per cycle.  ``p`` defaults to ``params.p_exp`` or ``beta``."""
    D = np.asarray(D, dtype=float)
    Delta = np.asarray(Delta, dtype=float)
    if p is None:
        p = beta if params.p_exp is None else params.p_exp
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        lnr = (
            -np.log(params.gamma)
            + (beta - p) * np.log1p(-np.minimum(D, 1.0))
            - beta * np.log(E_rel)
            - np.log(p + 1.0)
            + beta * (np.log(Delta) - np.log(DeltaStar))
        )
        r = np.exp(np.minimum(lnr, 700.0))
    r = np.where((Delta > 0.0) & (D < 1.0), r, 0.0)
    return r


def static_damage(Delta, Delta0, Deltaf):
    return (np.asarray(Delta) - Delta0) / (Deltaf - Delta0)


def combine_damage(D_s, D_f, D_prev=0.0):
    """Energy damage as the max of static and fatigue parts, kept monotone."""
    return np.clip(np.maximum(np.maximum(D_s, D_f), D_prev), 0.0, 1.0)


def stiffness_damage(D, Delta0, Deltaf):
    D = np.asarray(D, dtype=float)
    return 1.0 - (1.0 - D) * Delta0 / (D * Deltaf + (1.0 - D) * Delta0)


def traction(jump, d, params: CohesiveParams):
    """Tractions for a given stiffness damage; compression is never damaged."""
    jump = np.asarray(jump, dtype=float)
    d = np.asarray(d, dtype=float)
    t = np.empty_like(jump)
    m = 1.0 - d
    un = jump[..., 0]
    t[..., 0] = np.where(un >= 0.0, m * params.K_n * un, params.K_n * un)
    t[..., 1:] = (m * params.K_sh)[..., None] * jump[..., 1:]
    return t


def local_stress_ratio(S_min, S_max, default: float, floor: float = 1e-12):
    """Projection of the minimum onto the maximum severity vector.

    Returns ``(R, unloaded)``; points whose ``|S_max|`` is below ``floor`` get
    ``default`` and ``unloaded=True``.
    """
    S_min = np.asarray(S_min, dtype=float)
    S_max = np.asarray(S_max, dtype=float)
    n2 = np.sum(S_max**2, axis=-1)
    unloaded = np.sqrt(n2) < floor
    with np.errstate(divide="ignore", invalid="ignore"):
        R = np.sum(S_min * S_max, axis=-1) / np.where(unloaded, 1.0, n2)
    R = np.where(unloaded, default, R)
    return R, unloaded


# ---------------------------------------------------------------------------
# fatigue kernel


class _Fatigue(NamedTuple):
    E: np.ndarray
    dE: np.ndarray
    beta: np.ndarray
    dbeta: np.ndarray
    p: np.ndarray
    dp: np.ndarray
    active: np.ndarray


def relative_endurance(R, B, params: CohesiveParams):
    """Like :func:`goodman_endurance` but returns 1 (no fatigue) for R >= 1."""
    return _fatigue_terms(R, np.asarray(B, dtype=float), params).E


def _fatigue_terms(R, B, params: CohesiveParams) -> _Fatigue:
    """Endurance limit, S-N exponent and their B-derivatives; R >= 1 disables."""
    R = np.broadcast_to(np.asarray(R, dtype=float), np.shape(B))
    c = (1.0 - 0.42 * B) * params.eps_end
    den = c + 1.0 + R * (c - 1.0)
    active = (R < 1.0) & (den > 1e-12)
    den_s = np.where(active, den, 1.0)
    E = np.where(active, 2.0 * c / den_s, 1.0)
    E = np.clip(E, _TINY, 1.0)
    active = active & (E < 1.0)
    dE_dc = 2.0 * (1.0 - R) / den_s**2
    dE = np.where(active, dE_dc * params.eps_end * (-0.42), 0.0)
    lg = np.where(active, np.log10(np.where(active, E, 0.5)), -1.0)
    beta = -7.0 * params.eta_brittle / lg
    dbeta = 7.0 * params.eta_brittle / lg**2 * dE / (np.where(active, E, 1.0) * LN10)
    if params.p_exp is None:
        p, dp = beta, dbeta
    else:
        p = np.full_like(beta, params.p_exp)
        dp = np.zeros_like(beta)
    return _Fatigue(E, dE, beta, dbeta, p, dp, active)


def _log_rate_parts(D, lnDelta, D0, Df, fat: _Fatigue, params):
    """ln r and its partial derivative with respect to D."""
    Dstar = D0 + D * (Df - D0)
    one_m = np.maximum(1.0 - D, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ln1m = np.log(one_m)
        lnr = (
            -np.log(params.gamma)
            + np.where(fat.beta == fat.p, 0.0, (fat.beta - fat.p) * ln1m)
            - fat.beta * np.log(fat.E)
            - np.log(fat.p + 1.0)
            + fat.beta * (lnDelta - np.log(Dstar))
        )
        dlnr_dD = -np.where(fat.beta == fat.p, 0.0, (fat.beta - fat.p) / one_m) - fat.beta * (
            Df - D0
        ) / Dstar
    return lnr, dlnr_dD, Dstar


def _rate(D, lnDelta, D0, Df, fat, params, live):
    lnr, dlnr, Dstar = _log_rate_parts(D, lnDelta, D0, Df, fat, params)
    with np.errstate(over="ignore", invalid="ignore"):
        r = np.exp(np.minimum(lnr, 700.0))
    ok = live & fat.active & (D < 1.0)
    r = np.where(ok, r, 0.0)
    dr = np.where(ok, r * dlnr, 0.0)
    return r, dr, Dstar


def implicit_damage_update(
    D_prev, rate_prev, dN, lnDelta, Delta0, Deltaf, fat, params, live, tol=NEWTON_TOL
):
    """Trapezoidal update ``D = D_prev + dN/2 (rate_prev + rate(D))``.

    Vectorized Newton with a bisection fallback on ``[D_prev, 1]``.  Returns
    ``(D_f, rate(D_f), d rate/dD at D_f, residual)``.
    """
    D_prev = np.asarray(D_prev, dtype=float)
    dN = np.broadcast_to(np.asarray(dN, dtype=float), D_prev.shape)
    half = 0.5 * dN

    def g_and_dg(D):
        r, dr, _ = _rate(D, lnDelta, Delta0, Deltaf, fat, params, live)
        return D - D_prev - half * (rate_prev + r), 1.0 - half * dr, r, dr

    D = np.clip(D_prev + dN * rate_prev, D_prev, 1.0)
    for _ in range(NEWTON_MAXIT + 1):
        g, dg, _, _ = g_and_dg(D)
        # g <= 0 at D = 1 means the point saturates
        converged = (np.abs(g) <= tol) | ((D >= 1.0) & (g <= 0.0))
        if converged.all():
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(converged, 0.0, g / dg)
        step = np.where(np.isfinite(step), step, 0.0)
        D = np.clip(D - step, D_prev, 1.0)

    if not converged.all():
        D = _bisect(D, converged, D_prev, g_and_dg, tol)

    # one polishing step brings the root to round-off level
    g, dg, _, _ = g_and_dg(D)
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where((D < 1.0) & (dg > 0), g / dg, 0.0)
    step = np.where(np.isfinite(step), step, 0.0)
    D = np.clip(D - step, D_prev, 1.0)
    g, dg, r, dr = g_and_dg(D)
    return D, r, dr, g


def _bisect(D, converged, D_prev, g_and_dg, tol):
    lo = D_prev.copy()
    hi = np.ones_like(D_prev)
    g_lo = g_and_dg(lo)[0]
    g_hi = g_and_dg(hi)[0]
    todo = ~converged
    bad = todo & (g_lo > tol)
    if bad.any():
        raise DamageUpdateError("damage update bracket invalid (g(D_prev) > 0)")
    sat = todo & (g_hi <= 0.0)
    D = np.where(sat, 1.0, D)
    todo = todo & ~sat
    if todo.any():
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gm = g_and_dg(mid)[0]
            left = gm > 0.0
            hi = np.where(todo & left, mid, hi)
            lo = np.where(todo & ~left, mid, lo)
            if np.all(np.where(todo, hi - lo, 0.0) <= 1e-16):
                break
        D = np.where(todo, 0.5 * (lo + hi), D)
    return D


def evaluate(
    params: CohesiveParams,
    jump,
    D_prev,
    rate_prev,
    R,
    dN=0.0,
    fatigue: bool = True,
    static_fraction: float = 1.0,
) -> PointResponse:
    """Traction, consistent tangent and trial history for a set of points.

    ``jump`` has shape (n, m) with m = 2 or 3 in the local (normal, shear...)
    frame.  ``D_prev`` and ``rate_prev`` are the committed history, ``R`` the
    local stress ratio.  With ``fatigue=False`` or ``dN == 0`` the fatigue
    damage is frozen at ``D_prev``.  ``static_fraction < 1`` admits only
    that share of the static damage growth beyond ``D_prev`` (relaxation
    used to pass unstable equilibrium branches).
    """
    p = params
    jump = np.atleast_2d(np.asarray(jump, dtype=float))
    n, m = jump.shape
    D_prev = np.broadcast_to(np.asarray(D_prev, dtype=float), (n,)).copy()
    rate_prev = np.broadcast_to(np.asarray(rate_prev, dtype=float), (n,)).copy()
    R = np.broadcast_to(np.asarray(R, dtype=float), (n,))

    un = jump[:, 0]
    unp = np.maximum(un, 0.0)
    tens = un > 0.0
    Kvec = np.full(m, p.K_sh)
    Kvec[0] = p.K_n
    ju = jump.copy()
    ju[:, 0] = unp
    q = np.sum(Kvec * ju**2, axis=1)
    live = q > 0.0
    qs = np.where(live, q, 1.0)
    b = q - p.K_n * unp**2
    B = np.where(live, np.clip(b / qs, 0.0, 1.0), 0.0)

    dq = 2.0 * Kvec * ju  # (n, m)
    db = dq.copy()
    db[:, 0] = 0.0
    dB = np.where(live[:, None], (db - B[:, None] * dq) / qs[:, None], 0.0)

    K_B, dK, f_B, _, _, D0, dD0, Df, dDf = _envelope_with_derivs(B, p)
    Delta = np.sqrt(q / K_B)
    Dsafe = np.where(live, Delta, 1.0)
    dDelta = np.where(
        live[:, None],
        dq / (2.0 * K_B * Dsafe)[:, None] - (Delta * dK / (2.0 * K_B))[:, None] * dB,
        0.0,
    )
    with np.errstate(divide="ignore"):
        lnDelta = np.where(live, np.log(Dsafe), -np.inf)

    fat = _fatigue_terms(R, B, p)

    # fatigue branch
    dN = float(dN) if fatigue else 0.0
    if dN > 0.0:
        D_f, r_f, dr_f, _ = implicit_damage_update(
            D_prev, rate_prev, dN, lnDelta, D0, Df, fat, p, live
        )
    else:
        D_f = D_prev.copy()
        r_f = dr_f = None

    # static branch
    span = Df - D0
    D_s = (Delta - D0) / span
    a = float(static_fraction)
    if a < 1.0:
        D_s = np.where(D_s > D_prev, D_prev + a * (D_s - D_prev), D_s)
    D = np.clip(np.maximum(D_s, D_f), 0.0, 1.0)

    # derivative of the selected damage branch with respect to the jump
    dD = np.zeros((n, m))
    static_sel = (D_s > D_f) & (D_s < 1.0) & live
    if static_sel.any():
        dDs_dB = (-dD0 * span - (Delta - D0) * (dDf - dD0)) / span**2
        dDs = dDelta / span[:, None] + dDs_dB[:, None] * dB
        if a < 1.0:
            dDs = dDs * np.where(D_s > D_prev, a, 1.0)[:, None]
        dD[static_sel] = dDs[static_sel]
    fat_sel = (~static_sel) & (D_f > D_prev) & (D_f < 1.0) & live & fat.active
    if dN > 0.0 and fat_sel.any():
        # dr/du at fixed D, evaluated at D_f
        lnr, _, Dstar = _log_rate_parts(D_f, lnDelta, D0, Df, fat, p)
        with np.errstate(divide="ignore", invalid="ignore"):
            ln1m = np.log(np.maximum(1.0 - D_f, _TINY))
            dlnr_dB = (
                (fat.dbeta - fat.dp) * ln1m
                - fat.dbeta * np.log(fat.E)
                - fat.beta * fat.dE / fat.E
                - fat.dp / (fat.p + 1.0)
                + fat.dbeta * (lnDelta - np.log(Dstar))
                - fat.beta * (dD0 + D_f * (dDf - dD0)) / Dstar
            )
            dlnr_dDelta = fat.beta / Dsafe
            dr_du = r_f[:, None] * (dlnr_dDelta[:, None] * dDelta + dlnr_dB[:, None] * dB)
        dr_du = np.where(fat_sel[:, None], dr_du, 0.0)
        gprime = 1.0 - 0.5 * dN * dr_f
        dDf_du = (0.5 * dN) * dr_du / gprime[:, None]
        dD[fat_sel] = dDf_du[fat_sel]

    # stiffness damage, m = 1 - d = (1 - D) / (1 + D (phi - 1))
    phi = Df / D0
    den = 1.0 + D * (phi - 1.0)
    mfac = (1.0 - D) / den
    dm_dD = -phi / den**2
    dphi = phi * (dDf / Df - dD0 / D0)
    dm_dphi = -(1.0 - D) * D / den**2
    dm = dm_dD[:, None] * dD + (dm_dphi * dphi)[:, None] * dB
    d = 1.0 - mfac

    t = traction(jump, d, p)
    Kt = np.zeros((n, m, m))
    idx = np.arange(m)
    Kt[:, idx, idx] = mfac[:, None] * Kvec
    comp = ~tens
    Kt[comp, 0, 0] = p.K_n
    # damaged components: t_i = m K_i u_i
    dmg_u = Kvec * jump
    dmg_u[comp, 0] = 0.0
    Kt += dmg_u[:, :, None] * dm[:, None, :]

    # rate at the committed candidate (cached for the next trapezoid step)
    rate, _, _ = _rate(D, lnDelta, D0, Df, fat, p, live)
    return PointResponse(t, Kt, D, D_f, 1.0 - mfac, rate, B, Delta)
