"""Finite-element model: state container, element kinematics and assembly.

All history lives in :class:`ModelState` so a deep copy is a complete
snapshot; :class:`Model` holds only the immutable problem definition.
Bulk elements and cohesive integration points are stored as flat arrays
that grow when cracks are inserted.
"""

from __future__ import annotations

import copy
import hashlib
import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .. import fczm, ply
from ..fczm import CohesiveParams
from ..ply import PlyParams
from .mesh import Mesh

KIND_SURFACE, KIND_LINE, KIND_CRACK = 0, 1, 2

# undamaged spring added to every cohesive point, relative to its penalty
# stiffness, so that fully separated pieces keep a non-singular system
DEFAULT_RESIDUAL_STIFFNESS = 1e-9

_topology_ids = itertools.count(1)


@dataclass
class CohesivePoints:
    """Flat arrays of cohesive integration points.

    Point ``p`` has global jump ``sum_k w[p,k] * (u[a[p,k]] - u[b[p,k]])``
    which ``T[p]`` maps to the local (normal, shear, shear) frame.
    """

    a: np.ndarray  # (n, 3) node ids
    b: np.ndarray  # (n, 3)
    w: np.ndarray  # (n, 3)
    T: np.ndarray  # (n, 3, 2)
    weight: np.ndarray  # (n,) area or length*thickness
    mat: np.ndarray  # (n,) index into Model.cohesive
    kind: np.ndarray  # (n,)
    owner: np.ndarray  # (n,) crack path id, -1 for interfaces
    D: np.ndarray
    rate: np.ndarray
    R: np.ndarray
    S_min: np.ndarray  # (n, 3)
    S_max: np.ndarray
    unloaded: np.ndarray
    D_trial: np.ndarray
    rate_trial: np.ndarray
    t_trial: np.ndarray  # (n, 3) local traction at the last evaluation

    @classmethod
    def empty(cls) -> "CohesivePoints":
        return cls.build(
            np.zeros((0, 3), np.int64),
            np.zeros((0, 3), np.int64),
            np.zeros((0, 3)),
            np.zeros((0, 3, 2)),
            np.zeros(0),
            np.zeros(0, np.int64),
            np.zeros(0, np.int64),
            np.zeros(0, np.int64),
            np.zeros(0),
        )

    @classmethod
    def build(cls, a, b, w, T, weight, mat, kind, owner, R) -> "CohesivePoints":
        n = len(a)
        return cls(
            np.asarray(a, np.int64),
            np.asarray(b, np.int64),
            np.asarray(w, float),
            np.asarray(T, float),
            np.asarray(weight, float),
            np.asarray(mat, np.int64),
            np.asarray(kind, np.int64),
            np.asarray(owner, np.int64),
            np.zeros(n),
            np.zeros(n),
            np.asarray(R, float).copy(),
            np.zeros((n, 3)),
            np.zeros((n, 3)),
            np.ones(n, dtype=bool),
            np.zeros(n),
            np.zeros(n),
            np.zeros((n, 3)),
        )

    def __len__(self) -> int:
        return len(self.D)

    def extend(self, other: "CohesivePoints") -> None:
        for name in self.__dataclass_fields__:
            setattr(self, name, np.concatenate([getattr(self, name), getattr(other, name)]))


@dataclass
class ModelState:
    coords: np.ndarray  # (nn, 2) including phantom nodes
    u: np.ndarray  # (2 nn,)
    # bulk (sub-)elements
    conn: np.ndarray  # (nb, 3)
    layer: np.ndarray  # (nb,)
    frac: np.ndarray  # (nb,) area fraction of the parent element
    parent: np.ndarray  # (nb,) original element id
    Bmat: np.ndarray  # (nb, 3, 6)
    area: np.ndarray  # (nb,) parent element area
    # per original element
    cracked: np.ndarray
    bulk_R: np.ndarray
    bulk_Smin: np.ndarray  # (ne, 2)
    bulk_Smax: np.ndarray
    bulk_unloaded: np.ndarray
    coh: CohesivePoints
    cracks: list = field(default_factory=list)
    N: float = 0.0
    lam_F: float = 0.0
    lam_T: float = 0.0
    topology_id: int = 0

    @property
    def n_nodes(self) -> int:
        return len(self.coords)

    def snapshot(self) -> "ModelState":
        return copy.deepcopy(self)

    def restore(self, snap: "ModelState") -> None:
        self.__dict__.update(copy.deepcopy(snap).__dict__)

    def checksum(self) -> str:
        """Digest of the committed state (trial buffers excluded)."""
        h = hashlib.sha256()
        c = self.coh
        for arr in (
            self.coords, self.u, self.conn, self.layer, self.frac, self.parent,
            self.cracked, self.bulk_R, self.bulk_Smin, self.bulk_Smax,
            c.a, c.b, c.w, c.T, c.weight, c.mat, c.D, c.rate, c.R, c.S_min, c.S_max,
        ):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(np.array([self.N, self.lam_F, self.lam_T]).tobytes())
        h.update(repr([cr.signature() for cr in self.cracks]).encode())
        return h.hexdigest()


@dataclass(frozen=True)
class StepContext:
    lam_F: float
    lam_T: float
    dN: float = 0.0
    fatigue: bool = False
    static_fraction: float = 1.0


def cst_B(x: np.ndarray):
    """Strain-displacement matrices and areas of triangles ``x`` (n, 3, 2)."""
    x = np.asarray(x, dtype=float)
    x1, x2, x3 = x[:, 0], x[:, 1], x[:, 2]
    area2 = (x2[:, 0] - x1[:, 0]) * (x3[:, 1] - x1[:, 1]) - (x3[:, 0] - x1[:, 0]) * (
        x2[:, 1] - x1[:, 1]
    )
    b = np.stack([x2[:, 1] - x3[:, 1], x3[:, 1] - x1[:, 1], x1[:, 1] - x2[:, 1]], axis=1) / area2[:, None]
    c = np.stack([x3[:, 0] - x2[:, 0], x1[:, 0] - x3[:, 0], x2[:, 0] - x1[:, 0]], axis=1) / area2[:, None]
    B = np.zeros((len(x), 3, 6))
    B[:, 0, 0::2] = b
    B[:, 1, 1::2] = c
    B[:, 2, 0::2] = c
    B[:, 2, 1::2] = b
    return B, 0.5 * area2


def _dofs(nodes: np.ndarray) -> np.ndarray:
    """(n, k) node ids -> (n, 2k) interleaved dof ids."""
    d = np.empty(nodes.shape[:-1] + (2 * nodes.shape[-1],), dtype=np.int64)
    d[..., 0::2] = 2 * nodes
    d[..., 1::2] = 2 * nodes + 1
    return d


class Model:
    """Problem definition: mesh, materials, boundary conditions and loads.

    ``cohesive`` maps material names to :class:`CohesiveParams`; interface
    sets use ``"interface"`` and matrix cracks ``"ply"`` unless the line
    set names another.  ``dirichlet`` is a list of ``(nodes, component,
    value_fixed, value_per_load)``; the prescribed value is
    ``value_fixed + lam_F * value_per_load``.  ``force`` is the external
    nodal force vector at ``lam_F = 1``.
    """

    def __init__(
        self,
        mesh: Mesh,
        plies: list[PlyParams],
        cohesive: dict[str, CohesiveParams],
        dirichlet=(),
        force: np.ndarray | None = None,
        delta_T: float = 0.0,
        R_default: float = 0.1,
        crackable_layers=None,
        residual_stiffness: float = DEFAULT_RESIDUAL_STIFFNESS,
    ):
        mesh.validate()
        if len(plies) != len(mesh.layers):
            raise ValueError("one PlyParams per mesh layer is required")
        self.mesh = mesh
        self.plies = [p.rotated(layer.theta) for p, layer in zip(plies, mesh.layers)]
        self.mat_names = list(cohesive)
        self.cohesive = [cohesive[k] for k in self.mat_names]
        self.delta_T = float(delta_T)
        self.R_default = float(R_default)
        self.residual_stiffness = float(residual_stiffness)
        nl = len(mesh.layers)
        self.crackable = np.zeros(nl, dtype=bool)
        self.crackable[list(range(nl)) if crackable_layers is None else list(crackable_layers)] = True
        self.Q = np.array([ply.ply_stiffness(p) for p in self.plies]).reshape(nl, 3, 3)
        self.eps_th = np.array([ply.thermal_strain(p, 1.0) for p in self.plies]).reshape(nl, 3)
        self.thickness = np.array([layer.thickness for layer in mesh.layers])
        self.theta = np.array([layer.theta for layer in mesh.layers])
        self.elem_fine = (
            np.concatenate([layer.fine for layer in mesh.layers]) if nl else np.zeros(0, bool)
        )
        self.n_real_nodes = mesh.n_nodes

        nd = 2 * mesh.n_nodes
        self.force = np.zeros(nd) if force is None else np.asarray(force, float).copy()
        fixed: dict[int, tuple[float, float]] = {}
        for nodes, comp, v0, v1 in dirichlet:
            for n_ in np.atleast_1d(nodes):
                fixed[int(2 * n_ + comp)] = (float(v0), float(v1))
        keys = sorted(fixed)
        self.fixed = np.array(keys, dtype=np.int64)
        self.fixed_v0 = np.array([fixed[k][0] for k in keys])
        self.fixed_v1 = np.array([fixed[k][1] for k in keys])
        self._cache_id = None
        self._cache = None

    # ------------------------------------------------------------------ setup
    def material_index(self, name: str) -> int:
        return self.mat_names.index(name)

    def initial_state(self) -> ModelState:
        mesh = self.mesh
        conn = np.concatenate(
            [np.zeros((0, 3), np.int64)] + [layer.conn for layer in mesh.layers]
        ).astype(np.int64)
        lay = np.concatenate(
            [np.zeros(0, np.int64)]
            + [np.full(len(layer.conn), k, np.int64) for k, layer in enumerate(mesh.layers)]
        )
        ne = len(conn)
        B, area = cst_B(mesh.nodes[conn])
        coh = CohesivePoints.empty()
        if mesh.interfaces:
            coh.extend(self._surface_points())
        for ln in mesh.lines:
            coh.extend(self._line_points(ln))
        return ModelState(
            coords=mesh.nodes.copy(),
            u=np.zeros(2 * mesh.n_nodes),
            conn=conn,
            layer=lay,
            frac=np.ones(ne),
            parent=np.arange(ne, dtype=np.int64),
            Bmat=B,
            area=area,
            cracked=np.zeros(ne, dtype=bool),
            bulk_R=np.full(ne, self.R_default),
            bulk_Smin=np.zeros((ne, 2)),
            bulk_Smax=np.zeros((ne, 2)),
            bulk_unloaded=np.ones(ne, dtype=bool),
            coh=coh,
            topology_id=next(_topology_ids),
        )

    def _surface_points(self) -> CohesivePoints:
        mat = self.material_index("interface")
        a, b, wt = [], [], []
        for itf in self.mesh.interfaces:
            _, area = cst_B(self.mesh.nodes[itf.conn_lower])
            for k in range(3):
                a.append(itf.conn_upper[:, k])
                b.append(itf.conn_lower[:, k])
                wt.append(area / 3.0)
        a = np.concatenate(a)
        b = np.concatenate(b)
        n = len(a)
        T = np.zeros((n, 3, 2))
        T[:, 1, 0] = 1.0
        T[:, 2, 1] = 1.0
        w = np.zeros((n, 3))
        w[:, 0] = 1.0
        return CohesivePoints.build(
            np.repeat(a[:, None], 3, axis=1),
            np.repeat(b[:, None], 3, axis=1),
            w, T, np.concatenate(wt),
            np.full(n, mat), np.full(n, KIND_SURFACE), np.full(n, -1),
            np.full(n, self.R_default),
        )

    def _line_points(self, ln) -> CohesivePoints:
        mat = self.material_index(ln.material)
        xa = self.mesh.nodes[ln.conn_a]
        e = xa[:, 1] - xa[:, 0]
        L = np.linalg.norm(e, axis=1)
        e = e / L[:, None]
        nrm = np.column_stack([-e[:, 1], e[:, 0]])
        T1 = np.zeros((len(L), 3, 2))
        T1[:, 0] = nrm
        T1[:, 1] = e
        a = np.concatenate([ln.conn_a[:, 0], ln.conn_a[:, 1]])
        b = np.concatenate([ln.conn_b[:, 0], ln.conn_b[:, 1]])
        n = len(a)
        w = np.zeros((n, 3))
        w[:, 0] = 1.0
        return CohesivePoints.build(
            np.repeat(a[:, None], 3, axis=1),
            np.repeat(b[:, None], 3, axis=1),
            w, np.concatenate([T1, T1]), np.concatenate([L, L]) * 0.5 * ln.width,
            np.full(n, mat), np.full(n, KIND_LINE), np.full(n, -1),
            np.full(n, self.R_default),
        )

    # --------------------------------------------------------------- loading
    def prescribed(self, lam_F: float) -> np.ndarray:
        return self.fixed_v0 + lam_F * self.fixed_v1

    def external_force(self, state: ModelState, lam_F: float) -> np.ndarray:
        f = np.zeros(2 * state.n_nodes)
        f[: len(self.force)] = lam_F * self.force
        return f

    # ---------------------------------------------------------------- bulk
    def _bulk_cache(self, state: ModelState):
        if self._cache_id == state.topology_id:
            return self._cache
        Q = self.Q[state.layer]
        tA = self.thickness[state.layer] * state.area * state.frac
        BtQ = np.einsum("eij,eik->ejk", state.Bmat, Q)
        Ke = tA[:, None, None] * np.einsum("eji,eik->ejk", BtQ, state.Bmat)
        fth = tA[:, None] * np.einsum("eji,ei->ej", BtQ, self.eps_th[state.layer])
        dofs = _dofs(state.conn)
        nd = 2 * state.n_nodes
        rows = np.repeat(dofs, 6, axis=1).ravel()
        cols = np.tile(dofs, (1, 6)).ravel()
        K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(nd, nd)).tocsr()
        f_th = np.bincount(dofs.ravel(), weights=fth.ravel(), minlength=nd)
        self._cache_id = state.topology_id
        self._cache = (K, f_th)
        return self._cache

    def bulk_stress(self, state: ModelState, lam_T: float | None = None) -> np.ndarray:
        """Stress in every bulk (sub-)element, shape (nb, 3)."""
        lam_T = state.lam_T if lam_T is None else lam_T
        ue = state.u[_dofs(state.conn)]
        eps = np.einsum("eij,ej->ei", state.Bmat, ue) - lam_T * self.delta_T * self.eps_th[state.layer]
        return np.einsum("eij,ej->ei", self.Q[state.layer], eps)

    def element_stress(self, state: ModelState) -> np.ndarray:
        """Stress per original element (rows of cracked elements are zero)."""
        ne = len(state.cracked)
        sig = np.zeros((ne, 3))
        s = self.bulk_stress(state)
        intact = state.frac == 1.0
        sig[state.parent[intact]] = s[intact]
        return sig

    # ------------------------------------------------------------ cohesive
    def cohesive_operators(self, state: ModelState):
        c = state.coh
        n = len(c)
        G = np.zeros((n, 2, 12))
        G[:, 0, 0:6:2] = c.w
        G[:, 1, 1:6:2] = c.w
        G[:, 0, 6::2] = -c.w
        G[:, 1, 7::2] = -c.w
        L = np.einsum("nij,njk->nik", c.T, G)
        dofs = np.concatenate([_dofs(c.a), _dofs(c.b)], axis=1)
        return L, dofs

    def cohesive_response(self, state: ModelState, ctx: StepContext, L=None, dofs=None):
        """Evaluate every cohesive point; returns local jumps, tractions, tangents."""
        c = state.coh
        n = len(c)
        if L is None:
            L, dofs = self.cohesive_operators(state)
        jump = np.einsum("nij,nj->ni", L, state.u[dofs]) if n else np.zeros((0, 3))
        t = np.zeros((n, 3))
        Kt = np.zeros((n, 3, 3))
        D = c.D.copy()
        rate = c.rate.copy()
        for m, params in enumerate(self.cohesive):
            sel = np.flatnonzero(c.mat == m)
            if not len(sel):
                continue
            res = fczm.evaluate(
                params, jump[sel], c.D[sel], c.rate[sel], c.R[sel],
                dN=ctx.dN, fatigue=ctx.fatigue, static_fraction=ctx.static_fraction,
            )
            kreg = self.residual_stiffness * np.array([params.K_n, params.K_sh, params.K_sh])
            t[sel] = res.traction + kreg * jump[sel]
            Kt[sel] = res.tangent + np.diag(kreg)
            D[sel] = res.D
            rate[sel] = res.rate
        return jump, t, Kt, D, rate

    # ------------------------------------------------------------ assembly
    def assemble(self, state: ModelState, ctx: StepContext, tangent: bool = True):
        """Internal force, external force and tangent at the current ``u``.

        Updates the trial damage, rate and traction buffers of ``state``.
        """
        K_bulk, f_th = self._bulk_cache(state)
        nd = 2 * state.n_nodes
        dT = ctx.lam_T * self.delta_T
        f_int = K_bulk @ state.u - dT * f_th
        L, dofs = self.cohesive_operators(state)
        jump, t, Kt, D, rate = self.cohesive_response(state, ctx, L, dofs)
        c = state.coh
        c.D_trial, c.rate_trial, c.t_trial = D, rate, t
        K = None
        if len(c):
            fe = c.weight[:, None] * np.einsum("nij,ni->nj", L, t)
            f_int += np.bincount(dofs.ravel(), weights=fe.ravel(), minlength=nd)
        if tangent:
            K = K_bulk
            if len(c):
                Ke = c.weight[:, None, None] * np.einsum("nki,nkl,nlj->nij", L, Kt, L)
                rows = np.repeat(dofs, 12, axis=1).ravel()
                cols = np.tile(dofs, (1, 12)).ravel()
                K = K + sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(nd, nd)).tocsr()
        return f_int, self.external_force(state, ctx.lam_F), K, np.abs(dT) * f_th

    def free_dofs(self, state: ModelState) -> np.ndarray:
        mask = np.ones(2 * state.n_nodes, dtype=bool)
        mask[self.fixed] = False
        return np.flatnonzero(mask)

    # -------------------------------------------------------------- energy
    def stored_energy(self, state: ModelState) -> float:
        """Elastic energy of the bulk (thermal part included) and of the
        undamaged share of the cohesive springs."""
        sig = self.bulk_stress(state)
        ue = state.u[_dofs(state.conn)]
        eps_m = np.einsum("eij,ej->ei", state.Bmat, ue) - state.lam_T * self.delta_T * self.eps_th[state.layer]
        vol = self.thickness[state.layer] * state.area * state.frac
        e = 0.5 * np.sum(vol * np.einsum("ei,ei->e", sig, eps_m))
        c = state.coh
        if len(c):
            L, dofs = self.cohesive_operators(state)
            jump = np.einsum("nij,nj->ni", L, state.u[dofs])
            e += 0.5 * np.sum(c.weight * np.einsum("ni,ni->n", c.t_trial, jump))
        return float(e)

    # ------------------------------------------------------------- history
    def commit(self, state: ModelState, ctx: StepContext) -> None:
        c = state.coh
        c.D = np.maximum(c.D, c.D_trial)
        c.rate = c.rate_trial.copy()
        state.lam_F, state.lam_T = ctx.lam_F, ctx.lam_T
        if ctx.fatigue:
            state.N += ctx.dN

    def refresh_rates(self, state: ModelState) -> None:
        """Recompute the cached damage rates at the committed state."""
        ctx = StepContext(state.lam_F, state.lam_T, 0.0, False)
        _, _, _, _, rate = self.cohesive_response(state, ctx)
        state.coh.rate = rate

    def record_extrema(self, state: ModelState, which: str, phase: str) -> None:
        """Store severities of the current (converged) state as control-cycle extrema."""
        if phase != "ControlCycle":
            raise RuntimeError(f"severity extrema may only be recorded in control cycles, not {phase}")
        c = state.coh
        S = np.zeros((len(c), 3))
        for m, params in enumerate(self.cohesive):
            sel = c.mat == m
            S[sel] = c.t_trial[sel] / np.array([params.f_n, params.f_sh, params.f_sh])
        sig = self.element_stress(state)
        pp = self.cohesive[self.material_index("ply")] if "ply" in self.mat_names else None
        Sb = np.zeros((len(sig), 2))
        if pp is not None:
            for k, th in enumerate(self.theta):
                sel = np.flatnonzero(state.layer[: len(sig)] == k)
                Sb[sel] = ply.severity(ply.bulk_traction(sig[sel], th), pp)
        if which == "min":
            c.S_min, state.bulk_Smin = S, Sb
        elif which == "max":
            c.S_max, state.bulk_Smax = S, Sb
        else:
            raise ValueError(which)

    def finalize_ratios(self, state: ModelState, global_R_mode: bool = False) -> None:
        c = state.coh
        if len(c):
            R, unl = fczm.local_stress_ratio(c.S_min, c.S_max, self.R_default)
            c.R, c.unloaded = (np.full_like(R, self.R_default) if global_R_mode else R), unl
        R, unl = fczm.local_stress_ratio(state.bulk_Smin, state.bulk_Smax, self.R_default)
        state.bulk_R = np.full_like(R, self.R_default) if global_R_mode else R
        state.bulk_unloaded = unl
