"""Independent reference computations used by the tests.

Nothing here imports the package kernels; formulas are re-derived from the
model definition so that agreement is a genuine check.
"""

from __future__ import annotations

import math

import numpy as np


# ------------------------------------------------------------- cohesive law
def envelope(K_n, f_n, f_sh, G_Ic, G_IIc, B, eta=2.1):
    K_sh = K_n * (G_Ic / G_IIc) * (f_sh / f_n) ** 2
    K_B = (1 - B) * K_n + B * K_sh
    e = f_n**2 / K_n + (f_sh**2 / K_sh - f_n**2 / K_n) * B**eta
    f_B = math.sqrt(K_B * e)
    G_c = G_Ic + (G_IIc - G_Ic) * B**eta
    d0 = f_B / K_B
    df = 2 * G_c / f_B
    return K_B, f_B, G_c, d0, df


def endurance(R, B, eps=0.2):
    c = (1 - 0.42 * B) * eps
    return 2 * c / (c + 1 + R * (c - 1))


def exponent(E, eta_brittle=0.95):
    return -7 * eta_brittle / math.log10(E)


def cf20(D, Delta, Dstar, E, beta, p, gamma):
    return (1 - D) ** (beta - p) * (Delta / Dstar) ** beta / (gamma * E**beta * (p + 1))


def sn_cycles_rk4(s, R, B, K_n, f_n, f_sh, G_Ic, G_IIc, gamma=1e7, eta_bk=2.1, eta_br=0.95,
                  eps=0.2, p=None, rtol=1e-9):
    """Cycles until a point held at constant peak severity ``s`` fails.

    The traction stays at ``s * f_B`` and the jump follows from the damaged
    secant.  Fatigue damage grows from 0 until the jump reaches the static
    envelope (``Delta = Delta*``), beyond which no equilibrium exists.
    Adaptive classical RK4 in N with step doubling; the end event is
    located by bisection on the last step.
    """
    K_B, f_B, _, d0, df = envelope(K_n, f_n, f_sh, G_Ic, G_IIc, B, eta_bk)
    E = endurance(R, B, eps)
    beta = exponent(E, eta_br)
    p = beta if p is None else p

    def rate(D):
        Dstar = D * df + (1 - D) * d0
        secant = (1 - D) * d0 / Dstar * K_B  # (1 - d) K_B
        Delta = s * f_B / secant
        return cf20(D, Delta, Dstar, E, beta, p, gamma)

    def end(D):  # positive once the static envelope is reached
        Dstar = D * df + (1 - D) * d0
        return s * f_B / ((1 - D) * d0 / Dstar * K_B) - Dstar

    def step(D, h):
        k1 = rate(D)
        k2 = rate(min(D + h / 2 * k1, 1 - 1e-15))
        k3 = rate(min(D + h / 2 * k2, 1 - 1e-15))
        k4 = rate(min(D + h * k3, 1 - 1e-15))
        return D + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6

    D, N = 0.0, 0.0
    h = 1e-3 / rate(0.0)
    while True:
        full = step(D, h)
        half = step(step(D, h / 2), h / 2)
        if abs(half - full) > rtol * max(abs(half - D), 1e-300) * 15 and h > 1e-12:
            h *= 0.5
            continue
        if end(half) >= 0.0:
            lo, hi = 0.0, h
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if end(step(step(D, mid / 2), mid / 2)) >= 0.0:
                    hi = mid
                else:
                    lo = mid
                if hi - lo <= 1e-14 * (N + hi):
                    break
            return N + 0.5 * (lo + hi)
        D, N = half, N + h
        h *= 1.5


# ---------------------------------------------------------- laminate theory
def clt_thermal_stresses(plies, thicknesses, angles_deg, dT):
    """Residual ply stresses of a free laminate under a uniform dT.

    Plies are (E1, E2, G12, nu12, a1, a2).  Plane stress, membrane only,
    with the explicit transformed reduced stiffness and expansion terms.
    """
    A = np.zeros((3, 3))
    Nth = np.zeros(3)
    Qs, eth = [], []
    for (E1, E2, G12, nu12, a1, a2), t, ang in zip(plies, thicknesses, angles_deg):
        den = 1 - nu12 * nu12 * E2 / E1
        Q11, Q22, Q12, Q66 = E1 / den, E2 / den, nu12 * E2 / den, G12
        th = math.radians(ang)
        c, s = math.cos(th), math.sin(th)
        c2, s2, cs = c * c, s * s, c * s
        Qb11 = Q11 * c2 * c2 + 2 * (Q12 + 2 * Q66) * s2 * c2 + Q22 * s2 * s2
        Qb22 = Q11 * s2 * s2 + 2 * (Q12 + 2 * Q66) * s2 * c2 + Q22 * c2 * c2
        Qb12 = (Q11 + Q22 - 4 * Q66) * s2 * c2 + Q12 * (s2 * s2 + c2 * c2)
        Qb66 = (Q11 + Q22 - 2 * Q12 - 2 * Q66) * s2 * c2 + Q66 * (s2 * s2 + c2 * c2)
        Qb16 = (Q11 - Q12 - 2 * Q66) * c2 * cs + (Q12 - Q22 + 2 * Q66) * s2 * cs
        Qb26 = (Q11 - Q12 - 2 * Q66) * s2 * cs + (Q12 - Q22 + 2 * Q66) * c2 * cs
        Q = np.array([[Qb11, Qb12, Qb16], [Qb12, Qb22, Qb26], [Qb16, Qb26, Qb66]])
        e = dT * np.array([a1 * c2 + a2 * s2, a1 * s2 + a2 * c2, 2 * (a1 - a2) * cs])
        A += Q * t
        Nth += Q @ e * t
        Qs.append(Q)
        eth.append(e)
    eps0 = np.linalg.solve(A, Nth)
    return [Q @ (eps0 - e) for Q, e in zip(Qs, eth)], eps0
