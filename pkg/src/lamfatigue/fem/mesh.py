"""Layered plane-stress meshes.

Every ply is a layer of constant-strain triangles built on one common base
triangulation.  Nodes inside the delamination (fine) region are duplicated
per layer and linked by zero-thickness interface elements; elsewhere the
layers share node ids, i.e. they are rigidly tied.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

COINCIDENCE_TOL = 1e-9


class MeshError(ValueError):
    pass


@dataclass
class Layer:
    conn: np.ndarray  # (ne, 3) node ids, counter-clockwise
    theta: float  # fibre angle [rad]
    thickness: float
    fine: np.ndarray  # (ne,) bool, element inside the delamination region


@dataclass
class InterfaceSet:
    """Paired triangular faces between layer ``lower`` and layer ``lower + 1``."""

    lower: int
    conn_lower: np.ndarray  # (ni, 3)
    conn_upper: np.ndarray  # (ni, 3)


@dataclass
class LineInterfaceSet:
    """Zero-thickness line cohesive elements between coincident node pairs.

    The local normal is the left normal of the edge ``a0 -> a1``; the ``a``
    nodes sit on its positive side.  ``width`` is the out-of-plane size.
    """

    conn_a: np.ndarray  # (m, 2)
    conn_b: np.ndarray  # (m, 2)
    width: float = 1.0
    material: str = "interface"


@dataclass
class Mesh:
    nodes: np.ndarray  # (nn, 2)
    layers: list[Layer]
    interfaces: list[InterfaceSet] = field(default_factory=list)
    lines: list[LineInterfaceSet] = field(default_factory=list)
    boundary: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return sum(len(layer.conn) for layer in self.layers)

    def element_offsets(self) -> np.ndarray:
        return np.cumsum([0] + [len(layer.conn) for layer in self.layers])

    def validate(self) -> "Mesh":
        nn = self.n_nodes
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 2:
            raise MeshError("nodes must be an (n, 2) array")
        for k, layer in enumerate(self.layers):
            if layer.conn.size and (layer.conn.min() < 0 or layer.conn.max() >= nn):
                raise MeshError(f"layer {k}: element references a missing node")
            if len(layer.fine) != len(layer.conn):
                raise MeshError(f"layer {k}: fine flags do not match element count")
            if layer.thickness <= 0:
                raise MeshError(f"layer {k}: thickness must be positive")
            if len(layer.conn):
                x = self.nodes[layer.conn]
                area2 = (x[:, 1, 0] - x[:, 0, 0]) * (x[:, 2, 1] - x[:, 0, 1]) - (
                    x[:, 2, 0] - x[:, 0, 0]
                ) * (x[:, 1, 1] - x[:, 0, 1])
                if np.any(area2 <= 0):
                    bad = int(np.argmax(area2 <= 0))
                    raise MeshError(f"layer {k}: element {bad} is inverted or degenerate")
        for j, itf in enumerate(self.interfaces):
            if not 0 <= itf.lower < len(self.layers) - 1:
                raise MeshError(f"interface {j}: invalid layer index {itf.lower}")
            for c in (itf.conn_lower, itf.conn_upper):
                if c.size and (c.min() < 0 or c.max() >= nn):
                    raise MeshError(f"interface {j}: references a missing node")
            gap = np.abs(self.nodes[itf.conn_lower] - self.nodes[itf.conn_upper]).max(initial=0.0)
            if gap > COINCIDENCE_TOL:
                raise MeshError(f"interface {j}: node pairs are not coincident (gap {gap:.3g})")
        for j, ln in enumerate(self.lines):
            for c in (ln.conn_a, ln.conn_b):
                if c.size and (c.min() < 0 or c.max() >= nn):
                    raise MeshError(f"line interface {j}: references a missing node")
            gap = np.abs(self.nodes[ln.conn_a] - self.nodes[ln.conn_b]).max(initial=0.0)
            if gap > COINCIDENCE_TOL:
                raise MeshError(f"line interface {j}: node pairs are not coincident (gap {gap:.3g})")
        for name, ids in self.boundary.items():
            if len(ids) and (np.min(ids) < 0 or np.max(ids) >= nn):
                raise MeshError(f"boundary set {name!r} references a missing node")
        return self


def layered_mesh(
    base_nodes: np.ndarray,
    base_tris: np.ndarray,
    angles_deg,
    thicknesses,
    fine_nodes: np.ndarray,
    fine_tris: np.ndarray,
    boundary: dict[str, np.ndarray] | None = None,
) -> Mesh:
    """Stack copies of a base triangulation into a layered mesh.

    ``fine_nodes`` marks base nodes that get one copy per layer; all other
    nodes are shared.  ``fine_tris`` marks triangles that carry interface
    elements and may host matrix cracks.  Base boundary sets are expanded to
    every layer copy of their nodes.
    """
    base_nodes = np.asarray(base_nodes, dtype=float)
    base_tris = np.asarray(base_tris, dtype=np.int64)
    nl = len(angles_deg)
    if nl == 0 or len(thicknesses) != nl:
        raise MeshError("layup angles and thicknesses must be non-empty and of equal length")
    nb = len(base_nodes)
    fine_nodes = np.asarray(fine_nodes, dtype=bool)
    node_map = np.empty((nl, nb), dtype=np.int64)
    coords = []
    nid = 0
    # deterministic numbering: base order, layer copies consecutive
    for i in range(nb):
        if fine_nodes[i]:
            node_map[:, i] = np.arange(nid, nid + nl)
            coords.extend([base_nodes[i]] * nl)
            nid += nl
        else:
            node_map[:, i] = nid
            coords.append(base_nodes[i])
            nid += 1
    nodes = np.array(coords, dtype=float).reshape(-1, 2)
    layers = [
        Layer(
            conn=node_map[k][base_tris],
            theta=float(np.deg2rad(angles_deg[k])),
            thickness=float(thicknesses[k]),
            fine=np.asarray(fine_tris, dtype=bool).copy(),
        )
        for k in range(nl)
    ]
    ft = np.flatnonzero(fine_tris)
    interfaces = [
        InterfaceSet(k, node_map[k][base_tris[ft]], node_map[k + 1][base_tris[ft]])
        for k in range(nl - 1)
    ]
    bsets = {}
    for name, ids in (boundary or {}).items():
        bsets[name] = np.unique(node_map[:, np.asarray(ids, dtype=np.int64)].ravel())
    return Mesh(nodes, layers, interfaces, [], bsets).validate()


def structured_rectangle(length: float, width: float, nx: int, ny: int):
    """Base nodes/triangles of a structured rectangle, two triangles per cell."""
    xs = np.linspace(0.0, length, nx + 1)
    ys = np.linspace(0.0, width, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    tris = []
    for j in range(ny):
        for i in range(nx):
            n0 = j * (nx + 1) + i
            n1, n2, n3 = n0 + 1, n0 + nx + 2, n0 + nx + 1
            tris.append((n0, n1, n2))
            tris.append((n0, n2, n3))
    return nodes, np.array(tris, dtype=np.int64)


def generate_strip_mesh(
    length: float,
    width: float,
    element_size: float,
    angles_deg,
    thicknesses,
    fine_region: tuple[float, float] | None = None,
) -> Mesh:
    """Layered strip along x with loaded edges ``left``/``right``.

    ``fine_region=(x0, x1)`` bounds the delamination zone; nodes strictly
    inside it are duplicated per layer.  ``None`` puts the whole strip in the
    zone (every node duplicated).
    """
    if element_size <= 0 or length <= 0 or width <= 0:
        raise MeshError("strip dimensions and element size must be positive")
    if element_size > length + 1e-12 or element_size > width + 1e-12:
        raise MeshError("element size larger than the strip")
    nx = max(1, int(round(length / element_size)))
    ny = max(1, int(round(width / element_size)))
    nodes, tris = structured_rectangle(length, width, nx, ny)
    cent = nodes[tris].mean(axis=1)
    tol = 1e-9 * length
    if fine_region is None:
        fine_nodes = np.ones(len(nodes), dtype=bool)
        fine_tris = np.ones(len(tris), dtype=bool)
    else:
        x0, x1 = fine_region
        if not 0.0 <= x0 < x1 <= length:
            raise MeshError("fine region must lie inside the strip")
        if x1 - x0 < element_size - 1e-12:
            raise MeshError("element size larger than the fine region")
        fine_nodes = (nodes[:, 0] > x0 + tol) & (nodes[:, 0] < x1 - tol)
        fine_tris = (cent[:, 0] > x0) & (cent[:, 0] < x1)
    x, y = nodes[:, 0], nodes[:, 1]
    boundary = {
        "left": np.flatnonzero(np.abs(x) < tol),
        "right": np.flatnonzero(np.abs(x - length) < tol),
        "bottom": np.flatnonzero(np.abs(y) < tol),
        "top": np.flatnonzero(np.abs(y - width) < tol),
        "pin": np.flatnonzero((np.abs(x) < tol) & (np.abs(y) < tol)),
    }
    return layered_mesh(nodes, tris, angles_deg, thicknesses, fine_nodes, fine_tris, boundary)


def generate_open_hole_mesh(
    length: float,
    width: float,
    hole_diameter: float,
    coarse_size: float,
    fine_size: float,
    fine_box: tuple[float, float, float, float],
    angles_deg,
    thicknesses,
) -> Mesh:
    """Unstructured open-hole plate centred at (length/2, width/2).

    Points are laid on a fine grid inside ``fine_box = (x0, x1, y0, y1)`` and a
    coarse grid outside, plus a ring on the hole edge; a Delaunay
    triangulation with the hole cut out forms the base mesh.
    """
    from scipy.spatial import Delaunay

    cx, cy, rad = 0.5 * length, 0.5 * width, 0.5 * hole_diameter
    x0, x1, y0, y1 = fine_box
    pts = []

    def grid(xa, xb, ya, yb, h):
        nx = max(1, int(round((xb - xa) / h)))
        ny = max(1, int(round((yb - ya) / h)))
        gx, gy = np.meshgrid(np.linspace(xa, xb, nx + 1), np.linspace(ya, yb, ny + 1))
        return np.column_stack([gx.ravel(), gy.ravel()])

    fine = grid(x0, x1, y0, y1, fine_size)
    coarse = grid(0.0, length, 0.0, width, coarse_size)
    inside_box = (
        (coarse[:, 0] > x0 - 0.5 * coarse_size)
        & (coarse[:, 0] < x1 + 0.5 * coarse_size)
        & (coarse[:, 1] > y0 - 0.5 * coarse_size)
        & (coarse[:, 1] < y1 + 0.5 * coarse_size)
    )
    # keep the coarse nodes on the plate edges so the outline stays straight
    on_edge = (
        np.isclose(coarse[:, 0], 0.0)
        | np.isclose(coarse[:, 0], length)
        | np.isclose(coarse[:, 1], 0.0)
        | np.isclose(coarse[:, 1], width)
    )
    pts.append(coarse[~inside_box | on_edge])
    pts.append(fine)
    n_ring = max(12, int(np.ceil(2 * np.pi * rad / fine_size)))
    ang = np.linspace(0.0, 2 * np.pi, n_ring, endpoint=False)
    pts.append(np.column_stack([cx + rad * np.cos(ang), cy + rad * np.sin(ang)]))
    P = np.vstack(pts)
    r = np.hypot(P[:, 0] - cx, P[:, 1] - cy)
    P = P[r > rad * (1.0 - 1e-9) - 0.35 * fine_size]
    r = np.hypot(P[:, 0] - cx, P[:, 1] - cy)
    keep = (r >= rad * (1.0 - 1e-9)) & ~((r < rad + 0.35 * fine_size) & (r > rad * (1 + 1e-9)))
    P = P[keep]
    P = np.unique(np.round(P, 12), axis=0)
    tri = Delaunay(P)
    T = tri.simplices
    cent = P[T].mean(axis=1)
    T = T[np.hypot(cent[:, 0] - cx, cent[:, 1] - cy) > rad]
    # drop slivers Delaunay produces across the hole or along straight edges
    x = P[T]
    area2 = (x[:, 1, 0] - x[:, 0, 0]) * (x[:, 2, 1] - x[:, 0, 1]) - (x[:, 2, 0] - x[:, 0, 0]) * (
        x[:, 1, 1] - x[:, 0, 1]
    )
    T = np.where((area2 < 0)[:, None], T[:, [0, 2, 1]], T)
    T = T[np.abs(area2) > 1e-10 * fine_size**2]
    used = np.unique(T)
    remap = -np.ones(len(P), dtype=np.int64)
    remap[used] = np.arange(len(used))
    P = P[used]
    T = remap[T]
    cent = P[T].mean(axis=1)
    tol = 1e-9 * length
    fine_nodes = (
        (P[:, 0] > x0 + tol) & (P[:, 0] < x1 - tol) & (P[:, 1] > y0 + tol) & (P[:, 1] < y1 - tol)
    )
    fine_tris = (cent[:, 0] > x0) & (cent[:, 0] < x1) & (cent[:, 1] > y0) & (cent[:, 1] < y1)
    boundary = {
        "left": np.flatnonzero(np.abs(P[:, 0]) < tol),
        "right": np.flatnonzero(np.abs(P[:, 0] - length) < tol),
        "bottom": np.flatnonzero(np.abs(P[:, 1]) < tol),
        "top": np.flatnonzero(np.abs(P[:, 1] - width) < tol),
        "pin": np.flatnonzero((np.abs(P[:, 0]) < tol) & (np.abs(P[:, 1]) < tol)),
    }
    return layered_mesh(P, T, angles_deg, thicknesses, fine_nodes, fine_tris, boundary)


def single_line_element(length: float = 1.0, width: float = 1.0, material: str = "interface") -> Mesh:
    """Two coincident node pairs joined by one line cohesive element.

    Nodes 0, 1 form the bottom (``b``) face, nodes 2, 3 the top (``a``) face;
    boundary sets ``bottom`` and ``top``.
    """
    nodes = np.array([[0.0, 0.0], [length, 0.0], [0.0, 0.0], [length, 0.0]])
    line = LineInterfaceSet(
        conn_a=np.array([[2, 3]]), conn_b=np.array([[0, 1]]), width=width, material=material
    )
    return Mesh(
        nodes, [], [], [line], {"bottom": np.array([0, 1]), "top": np.array([2, 3])}
    ).validate()
