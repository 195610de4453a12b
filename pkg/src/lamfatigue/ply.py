"""Orthotropic plane-stress ply behaviour, thermal strain and bulk monitoring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fczm
from .fczm import CohesiveParams


@dataclass(frozen=True)
class PlyParams:
    E1: float
    E2: float
    G12: float
    nu12: float
    alpha1: float = 0.0
    alpha2: float = 0.0
    theta: float = 0.0  # fibre angle [rad] w.r.t. the laminate x axis
    t_p: float = 0.125

    def __post_init__(self):
        for name in ("E1", "E2", "G12", "t_p"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")
        if 1.0 - self.nu12 * self.nu21 <= 0.0:
            raise ValueError("1 - nu12*nu21 must be positive")

    @property
    def nu21(self) -> float:
        return self.nu12 * self.E2 / self.E1

    def rotated(self, theta: float) -> "PlyParams":
        return PlyParams(
            self.E1, self.E2, self.G12, self.nu12, self.alpha1, self.alpha2, theta, self.t_p
        )


def strain_rotation(theta: float) -> np.ndarray:
    """Maps laminate engineering strains (ex, ey, gxy) to material axes."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array(
        [
            [c * c, s * s, c * s],
            [s * s, c * c, -c * s],
            [-2 * c * s, 2 * c * s, c * c - s * s],
        ]
    )


def material_stiffness(params: PlyParams) -> np.ndarray:
    den = 1.0 - params.nu12 * params.nu21
    Q11 = params.E1 / den
    Q22 = params.E2 / den
    Q12 = params.nu12 * params.E2 / den
    return np.array([[Q11, Q12, 0.0], [Q12, Q22, 0.0], [0.0, 0.0, params.G12]])


def ply_stiffness(params: PlyParams) -> np.ndarray:
    """Plane-stress stiffness in laminate axes (engineering shear strain)."""
    T = strain_rotation(params.theta)
    Q = T.T @ material_stiffness(params) @ T
    Q = 0.5 * (Q + Q.T)
    if np.any(np.linalg.eigvalsh(Q) <= 0.0):
        raise ValueError("ply stiffness is not positive definite")
    return Q


def thermal_strain(params: PlyParams, dT: float) -> np.ndarray:
    """Free thermal strain in laminate axes."""
    eps_mat = np.array([params.alpha1 * dT, params.alpha2 * dT, 0.0])
    return np.linalg.solve(strain_rotation(params.theta), eps_mat)


def fibre_frame(theta: float):
    """Unit fibre direction and the in-plane normal perpendicular to it."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([c, s]), np.array([-s, c])


def bulk_traction(sigma, theta: float):
    """Traction ``(t_n, t_sh)`` on the fibre-parallel plane for stresses (..., 3)."""
    sigma = np.asarray(sigma, dtype=float)
    f, n = fibre_frame(theta)
    sx, sy, txy = sigma[..., 0], sigma[..., 1], sigma[..., 2]
    tx = sx * n[0] + txy * n[1]
    ty = txy * n[0] + sy * n[1]
    return np.stack([tx * n[0] + ty * n[1], tx * f[0] + ty * f[1]], axis=-1)


def severity(traction, params: CohesiveParams):
    t = np.asarray(traction, dtype=float)
    scale = np.full(t.shape[-1], params.f_sh)
    scale[0] = params.f_n
    return t / scale


def _equivalent_traction(t, params: CohesiveParams):
    """Equivalent traction, mixity from tractions under the undamaged elastic map."""
    tn = np.maximum(t[..., 0], 0.0)
    ts2 = np.sum(t[..., 1:] ** 2, axis=-1)
    a = tn**2 / params.K_n
    b = ts2 / params.K_sh
    q = a + b
    with np.errstate(invalid="ignore", divide="ignore"):
        B = np.where(q > 0.0, b / np.where(q > 0.0, q, 1.0), 0.0)
    K_B = params.K_n + (params.K_sh - params.K_n) * B
    return np.sqrt(K_B * q), B


def static_index(sigma, theta: float, params: CohesiveParams):
    """Ratio of equivalent traction to mode-dependent strength."""
    t = bulk_traction(sigma, theta)
    s_eq, B = _equivalent_traction(t, params)
    return s_eq / fczm.mixed_envelope(B, params).f_B


def failure_index(sigma, theta: float, R_local, params: CohesiveParams):
    """Endurance-based insertion index ``sigma_eq / (E_rel * f_B)``."""
    t = bulk_traction(sigma, theta)
    s_eq, B = _equivalent_traction(t, params)
    f_B = fczm.mixed_envelope(B, params).f_B
    R = np.broadcast_to(np.asarray(R_local, dtype=float), np.shape(B))
    E = fczm.relative_endurance(R, B, params)
    return s_eq / (E * f_B)


class BulkPointState:
    """Control-cycle monitoring arrays for the bulk points of one ply layer."""

    def __init__(self, n: int, R_default: float):
        self.R_default = R_default
        self.S_min = np.zeros((n, 2))
        self.S_max = np.zeros((n, 2))
        self.R_local = np.full(n, R_default)
        self.unloaded = np.ones(n, dtype=bool)

    def record_severity_extrema(self, sigma, theta, params: CohesiveParams, which: str, phase):
        """Store the severity at the min- or max-load solve of a control cycle."""
        if phase != "ControlCycle":
            raise RuntimeError(f"severity extrema may only be recorded in control cycles, not {phase}")
        S = severity(bulk_traction(sigma, theta), params)
        if which == "min":
            self.S_min = S
        elif which == "max":
            self.S_max = S
        else:
            raise ValueError(which)

    def finalize(self, global_R_mode: bool = False):
        R, unloaded = fczm.local_stress_ratio(self.S_min, self.S_max, self.R_default)
        if global_R_mode:
            R = np.full_like(R, self.R_default)
        self.R_local = R
        self.unloaded = unloaded
        return R
