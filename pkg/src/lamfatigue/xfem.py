"""Phantom-node matrix cracks.

A crack path is a straight line with the fibre direction of its ply.  Every
element it crosses is replaced by two overlapping copies: copy A keeps the
real nodes on the positive-normal side of the line and uses phantom nodes
for the others, copy B the reverse.  Phantom nodes are shared by all
elements of one path.  Two cohesive points at the segment end points tie
the copies together.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ply
from .fem.model import KIND_CRACK, CohesivePoints, Model, ModelState, cst_B

AREA_FLOOR = 1e-3  # smallest admissible sub-element area ratio
NUDGE = 1e-3  # cut shift relative to the element size
GEOM_TOL = 1e-9


class InsertionError(ValueError):
    pass


@dataclass
class CrackPath:
    pid: int
    layer: int
    p0: np.ndarray  # a point on the line
    f: np.ndarray  # fibre direction
    n: np.ndarray  # line normal, positive side = sub-element A
    elements: list = field(default_factory=list)
    segments: list = field(default_factory=list)  # [(P, Q)] per element
    tips: list = field(default_factory=list)  # [(element, edge)] open ends
    phantom: dict = field(default_factory=dict)  # real node -> phantom node

    def distance(self, x) -> float:
        return float(abs(self.n @ (np.asarray(x) - self.p0)))

    def signature(self):
        return (self.pid, self.layer, tuple(self.elements), tuple(sorted(self.phantom.items())))


@dataclass
class Decision:
    element: int
    index: float
    action: str  # "new", "extend" or "rejected"
    path: int = -1
    reason: str = ""


def _edge(i: int, j: int):
    return (i, j) if i < j else (j, i)


class CrackTopology:
    """Static adjacency data plus the insertion logic for one model."""

    def __init__(self, model: Model, l_c: float, material: str = "ply"):
        self.model = model
        self.l_c = float(l_c)
        self.mat = model.material_index(material)
        self.params = model.cohesive[self.mat]
        mesh = model.mesh
        self.conn0 = np.concatenate([np.zeros((0, 3), np.int64)] + [ly.conn for ly in mesh.layers])
        self.layer0 = np.concatenate(
            [np.zeros(0, np.int64)] + [np.full(len(ly.conn), k) for k, ly in enumerate(mesh.layers)]
        )
        self.edge_elems: dict = {}
        for e, tri in enumerate(self.conn0):
            for i in range(3):
                key = (int(self.layer0[e]),) + _edge(int(tri[i]), int(tri[(i + 1) % 3]))
                self.edge_elems.setdefault(key, []).append(e)
        _, self.area0 = cst_B(mesh.nodes[self.conn0]) if len(self.conn0) else (None, np.zeros(0))
        self.rejected: list[Decision] = []

    # ------------------------------------------------------------ geometry
    def eligible(self, state: ModelState) -> np.ndarray:
        return self.model.elem_fine & self.model.crackable[self.layer0] & ~state.cracked

    def neighbour(self, e: int, edge) -> int | None:
        for other in self.edge_elems.get((int(self.layer0[e]),) + tuple(edge), []):
            if other != e:
                return other
        return None

    def cut(self, e: int, p0, nrm):
        """Signed node distances and end points of the cut of element ``e``.

        Returns ``(d, points, edges)``; a cut passing within ``NUDGE`` of a
        node is shifted off that node.
        """
        x = self.model.mesh.nodes[self.conn0[e]]
        h = np.sqrt(2.0 * self.area0[e])
        d = (x - p0) @ nrm
        tol = NUDGE * h
        if np.any(np.abs(d) < tol):
            k = int(np.argmin(np.abs(d)))
            for shift in sorted((d[k] - tol, d[k] + tol), key=abs):
                dd = d - shift
                if dd.min() < 0.0 < dd.max() and np.all(np.abs(dd) >= 0.5 * tol):
                    d = dd
                    break
        if not (d.min() < 0.0 < d.max()):
            raise InsertionError(f"crack line does not cross element {e}")
        pts, edges = [], []
        for i in range(3):
            j = (i + 1) % 3
            if d[i] * d[j] < 0.0:
                s = d[i] / (d[i] - d[j])
                pts.append(x[i] + s * (x[j] - x[i]))
                edges.append(_edge(int(self.conn0[e][i]), int(self.conn0[e][j])))
        return d, pts, edges

    @staticmethod
    def side_area(x, d) -> float:
        """Area of the part of triangle ``x`` with positive ``d``."""
        poly = []
        for i in range(3):
            j = (i + 1) % 3
            if d[i] > 0.0:
                poly.append(x[i])
            if d[i] * d[j] < 0.0:
                s = d[i] / (d[i] - d[j])
                poly.append(x[i] + s * (x[j] - x[i]))
        if len(poly) < 3:
            return 0.0
        p = np.array(poly)
        return 0.5 * abs(np.dot(p[:, 0], np.roll(p[:, 1], -1)) - np.dot(p[:, 1], np.roll(p[:, 0], -1)))

    # ------------------------------------------------------------- topology
    def split_element(self, state: ModelState, e: int, path: CrackPath, entry_edge=None):
        """Replace element ``e`` by two phantom-node copies cut by ``path``."""
        if state.cracked[e]:
            raise InsertionError(f"element {e} is already cracked")
        d, pts, edges = self.cut(e, path.p0, path.n)
        x = self.model.mesh.nodes[self.conn0[e]]
        area = self.area0[e]
        fracA = self.side_area(x, d) / area
        if not AREA_FLOOR <= fracA <= 1.0 - AREA_FLOOR:
            raise InsertionError(f"cut of element {e} leaves a sliver (area ratio {fracA:.2e})")
        fracB = 1.0 - fracA
        conn = self.conn0[e]
        for j in conn:
            j = int(j)
            if j not in path.phantom:
                pid = state.n_nodes
                path.phantom[j] = pid
                state.coords = np.vstack([state.coords, state.coords[j]])
                state.u = np.concatenate([state.u, state.u[2 * j: 2 * j + 2]])
        connA = np.array([j if dj > 0 else path.phantom[int(j)] for j, dj in zip(conn, d)])
        connB = np.array([j if dj < 0 else path.phantom[int(j)] for j, dj in zip(conn, d)])
        # bulk bookkeeping: row e becomes copy A, copy B is appended
        state.conn[e] = connA
        state.frac[e] = fracA
        state.conn = np.vstack([state.conn, connB])
        state.layer = np.append(state.layer, state.layer[e])
        state.frac = np.append(state.frac, fracB)
        state.parent = np.append(state.parent, e)
        state.Bmat = np.concatenate([state.Bmat, state.Bmat[e: e + 1]])
        state.area = np.append(state.area, state.area[e])
        state.cracked[e] = True
        # cohesive points at the two segment ends
        P = np.array(pts)
        order = np.argsort(P @ path.f)
        P = P[order]
        edges = [edges[i] for i in order]
        L = np.linalg.norm(P[1] - P[0])
        w = np.array([self.barycentric(x, p) for p in P])
        T = np.zeros((2, 3, 2))
        T[:, 0] = path.n
        T[:, 1] = path.f
        pts_new = CohesivePoints.build(
            np.tile(connA, (2, 1)), np.tile(connB, (2, 1)), w, T,
            np.full(2, 0.5 * L * self.model.thickness[self.layer0[e]]),
            np.full(2, self.mat), np.full(2, KIND_CRACK), np.full(2, path.pid),
            np.full(2, 0.0),
        )
        transfer_history(state, e, pts_new)
        state.coh.extend(pts_new)
        path.elements.append(int(e))
        path.segments.append((P[0].copy(), P[1].copy()))
        for ed in edges:
            if entry_edge is None or tuple(ed) != tuple(entry_edge):
                path.tips.append((int(e), tuple(ed)))
        state.topology_id = _next_topology_id()
        return connA, connB, fracA, fracB

    @staticmethod
    def barycentric(x, p):
        B = np.array([[x[0, 0], x[1, 0], x[2, 0]], [x[0, 1], x[1, 1], x[2, 1]], [1.0, 1.0, 1.0]])
        return np.linalg.solve(B, np.array([p[0], p[1], 1.0]))

    def new_path(self, state: ModelState, e: int) -> CrackPath:
        k = int(self.layer0[e])
        f, nrm = ply.fibre_frame(self.model.theta[k])
        c = self.model.mesh.nodes[self.conn0[e]].mean(axis=0)
        path = CrackPath(len(state.cracks), k, c.copy(), f, nrm)
        self.split_element(state, e, path)
        state.cracks.append(path)
        return path

    def extend_path(self, state: ModelState, path: CrackPath, tip_index: int, e: int):
        _, edge = path.tips.pop(tip_index)
        try:
            self.split_element(state, e, path, entry_edge=edge)
        except InsertionError:
            path.tips.insert(tip_index, (path.elements[-1], edge))
            raise

    # ------------------------------------------------------------ criteria
    def indices(self, state: ModelState, phase: str) -> np.ndarray:
        """Static index during the ramp, endurance index in fatigue phases."""
        sig = self.model.element_stress(state)
        out = np.zeros(len(sig))
        for k, th in enumerate(self.model.theta):
            sel = np.flatnonzero(self.layer0 == k)
            if phase == "StaticRamp":
                out[sel] = ply.static_index(sig[sel], th, self.params)
            else:
                out[sel] = ply.failure_index(sig[sel], th, state.bulk_R[sel], self.params)
        return out

    def tip_map(self, state: ModelState) -> dict:
        m = {}
        for path in state.cracks:
            for ti, (e, edge) in enumerate(path.tips):
                nb = self.neighbour(e, edge)
                if nb is not None:
                    m.setdefault(nb, (path.pid, ti))
        return m

    def spacing_ok(self, state: ModelState, e: int) -> bool:
        k = int(self.layer0[e])
        c = self.model.mesh.nodes[self.conn0[e]].mean(axis=0)
        return all(p.distance(c) >= self.l_c - GEOM_TOL for p in state.cracks if p.layer == k)

    def check_insertion(self, state: ModelState, phase: str, index=None) -> list[Decision]:
        """Insert every admissible crack segment for the current stress field.

        Candidates are ranked by index (ties by element id); passes repeat
        until no further segment is added, so paths grow across the
        elements that exceed the criterion.
        """
        idx = self.indices(state, phase) if index is None else np.asarray(index, float)
        self.rejected = []
        done: list[Decision] = []
        while True:
            cand = np.flatnonzero(self.eligible(state) & (idx >= 1.0))
            cand = cand[np.lexsort((cand, -idx[cand]))]
            added = 0
            for e in cand:
                e = int(e)
                if state.cracked[e]:
                    continue
                tips = self.tip_map(state)
                try:
                    if e in tips:
                        pid, ti = tips[e]
                        self.extend_path(state, state.cracks[pid], ti, e)
                        done.append(Decision(e, float(idx[e]), "extend", pid))
                    elif self.spacing_ok(state, e):
                        path = self.new_path(state, e)
                        done.append(Decision(e, float(idx[e]), "new", path.pid))
                    else:
                        continue
                    added += 1
                except InsertionError as exc:
                    self.rejected.append(Decision(e, float(idx[e]), "rejected", reason=str(exc)))
            if not added:
                break
        for e in np.flatnonzero(self.eligible(state) & (idx >= 1.0)):
            self.rejected.append(Decision(int(e), float(idx[e]), "rejected", reason="spacing"))
        return done


def transfer_history(state: ModelState, e: int, points: CohesivePoints) -> None:
    """Initialise new crack points from the bulk history of parent ``e``."""
    points.R[:] = state.bulk_R[e]
    points.unloaded[:] = state.bulk_unloaded[e]
    points.S_min[:, :2] = state.bulk_Smin[e]
    points.S_max[:, :2] = state.bulk_Smax[e]
    points.D[:] = 0.0
    points.D_trial[:] = 0.0


def _next_topology_id() -> int:
    from .fem import model as _m

    return next(_m._topology_ids)


def min_path_spacing(state: ModelState) -> float:
    """Smallest orthogonal distance between distinct paths of the same ply."""
    best = np.inf
    for i, p in enumerate(state.cracks):
        for q in state.cracks[i + 1:]:
            if p.layer == q.layer:
                best = min(best, p.distance(q.p0))
    return float(best)
