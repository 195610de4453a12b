"""Plain-text layered mesh format (see ``docs/formats.md``).

Records are whitespace separated; ``#`` starts a comment.  Floats are
written with ``repr`` so a write/read cycle is lossless.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..fem.mesh import InterfaceSet, Layer, LineInterfaceSet, Mesh, MeshError

MAGIC = "lamfatigue-mesh"
VERSION = 1


def write_mesh(mesh: Mesh, path: str | Path) -> None:
    Path(path).write_text(mesh_to_text(mesh))


def mesh_to_text(mesh: Mesh) -> str:
    out = [f"{MAGIC} {VERSION}", f"nodes {mesh.n_nodes}"]
    out += [f"{x!r} {y!r}" for x, y in mesh.nodes.tolist()]
    for k, ly in enumerate(mesh.layers):
        out.append(f"layer {k} {float(np.rad2deg(ly.theta))!r} {ly.thickness!r} {len(ly.conn)}")
        out += [f"{a} {b} {c} {int(f)}" for (a, b, c), f in zip(ly.conn.tolist(), ly.fine.tolist())]
    for itf in mesh.interfaces:
        out.append(f"interface {itf.lower} {len(itf.conn_lower)}")
        out += [" ".join(map(str, lo + up)) for lo, up in zip(itf.conn_lower.tolist(), itf.conn_upper.tolist())]
    for ln in mesh.lines:
        out.append(f"lines {len(ln.conn_a)} {ln.width!r} {ln.material}")
        out += [" ".join(map(str, a + b)) for a, b in zip(ln.conn_a.tolist(), ln.conn_b.tolist())]
    for name in sorted(mesh.boundary):
        ids = np.asarray(mesh.boundary[name]).tolist()
        out.append(f"boundary {name} {len(ids)}")
        out.append(" ".join(map(str, ids)))
    out.append("end")
    return "\n".join(out) + "\n"


class _Reader:
    def __init__(self, text: str):
        self.rows = []
        for i, line in enumerate(text.splitlines(), start=1):
            body = line.split("#", 1)[0].split()
            if body:
                self.rows.append((i, body))
        self.pos = 0

    def next(self, what: str):
        if self.pos >= len(self.rows):
            raise MeshError(f"unexpected end of file while reading {what}")
        row = self.rows[self.pos]
        self.pos += 1
        return row

    def table(self, n: int, width: int, kind, what: str):
        data = []
        for r in range(n):
            line, tok = self.next(f"{what} record {r}")
            if len(tok) != width:
                raise MeshError(f"line {line}: {what} record {r} needs {width} fields, got {len(tok)}")
            try:
                data.append([kind(t) for t in tok])
            except ValueError:
                raise MeshError(f"line {line}: {what} record {r} is not numeric") from None
        return np.array(data, dtype=float if kind is float else np.int64).reshape(n, width)


def mesh_from_text(text: str) -> Mesh:
    rd = _Reader(text)
    line, head = rd.next("header")
    if head[0] != MAGIC or len(head) != 2 or head[1] != str(VERSION):
        raise MeshError(f"line {line}: expected header '{MAGIC} {VERSION}'")
    line, tok = rd.next("node count")
    if tok[0] != "nodes" or len(tok) != 2:
        raise MeshError(f"line {line}: expected 'nodes <count>'")
    nodes = rd.table(int(tok[1]), 2, float, "node")
    layers, interfaces, lines, boundary = [], [], [], {}
    while True:
        line, tok = rd.next("section header")
        key = tok[0]
        if key == "end":
            break
        try:
            if key == "layer":
                k, ang, t, n = int(tok[1]), float(tok[2]), float(tok[3]), int(tok[4])
                if k != len(layers):
                    raise MeshError(f"line {line}: layers must be numbered consecutively")
                tab = rd.table(n, 4, int, f"layer {k} element")
                _check_ids(tab[:, :3], len(nodes), f"layer {k} element", rd, n)
                layers.append(Layer(tab[:, :3].copy(), float(np.deg2rad(ang)), t, tab[:, 3].astype(bool)))
            elif key == "interface":
                lower, n = int(tok[1]), int(tok[2])
                tab = rd.table(n, 6, int, f"interface {len(interfaces)} pair")
                _check_ids(tab, len(nodes), f"interface {len(interfaces)} pair", rd, n)
                interfaces.append(InterfaceSet(lower, tab[:, :3].copy(), tab[:, 3:].copy()))
            elif key == "lines":
                n, width, mat = int(tok[1]), float(tok[2]), tok[3]
                tab = rd.table(n, 4, int, f"line interface {len(lines)} pair")
                _check_ids(tab, len(nodes), f"line interface {len(lines)} pair", rd, n)
                lines.append(LineInterfaceSet(tab[:, :2].copy(), tab[:, 2:].copy(), width, mat))
            elif key == "boundary":
                name, n = tok[1], int(tok[2])
                if n:
                    bl, ids = rd.next(f"boundary {name}")
                    if len(ids) != n:
                        raise MeshError(f"line {bl}: boundary {name} lists {len(ids)} ids, expected {n}")
                    arr = np.array([int(i) for i in ids], dtype=np.int64)
                    bad = np.flatnonzero((arr < 0) | (arr >= len(nodes)))
                    if bad.size:
                        raise MeshError(f"line {bl}: boundary {name} entry {bad[0]} references missing node {arr[bad[0]]}")
                else:
                    arr = np.zeros(0, dtype=np.int64)
                boundary[name] = arr
            else:
                raise MeshError(f"line {line}: unknown section {key!r}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, MeshError):
                raise
            raise MeshError(f"line {line}: malformed {key} header") from None
    return Mesh(nodes, layers, interfaces, lines, boundary).validate()


def _check_ids(tab, nn, what, rd, n):
    bad = np.argwhere((tab < 0) | (tab >= nn))
    if bad.size:
        r = int(bad[0, 0])
        line = rd.rows[rd.pos - n + r][0]
        raise MeshError(f"line {line}: {what} record {r} references missing node {tab[r, bad[0, 1]]}")


def load_external_mesh(path: str | Path) -> Mesh:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MeshError(f"cannot read {path}: {exc.strerror}") from None
    return mesh_from_text(text)
