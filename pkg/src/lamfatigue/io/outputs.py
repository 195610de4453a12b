"""Result files: step history CSV, JSON summary and field dumps.

Every float is written with ``repr``, so identical runs give byte-identical
files and dumps reload exactly.  Wall-clock time goes to a separate
``timing.json`` to keep the other files deterministic.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import ply
from ..driver import RunRecord
from ..fem.model import KIND_CRACK

DUMP_MAGIC = "lamfatigue-fielddump"
DUMP_VERSION = 1


class OutputError(RuntimeError):
    pass


def _finite(x, what):
    if isinstance(x, float) and not math.isfinite(x):
        raise OutputError(f"non-finite value in {what}")
    return x


def history_csv(record: RunRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RunRecord.COLUMNS)
    for row in record.rows:
        w.writerow([repr(_finite(v, "history")) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def summary_json(summary: dict) -> str:
    try:
        return json.dumps(summary, indent=2, sort_keys=True, allow_nan=False) + "\n"
    except ValueError as exc:
        raise OutputError(f"non-finite value in summary: {exc}") from None


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}") from None


def emit_outputs(out_dir: str | Path, record: RunRecord, summary: dict, wall_time: float | None = None):
    out = Path(out_dir)
    _write(out / "history.csv", history_csv(record))
    _write(out / "summary.json", summary_json(summary))
    if wall_time is not None:
        _write(out / "timing.json", json.dumps({"wall_time_s": wall_time}) + "\n")


def sn_table(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ("label", "severity", "peak_stress", "N_fail", "censored", "failure_mode")
    w.writerow(cols)
    for r in rows:
        w.writerow(["" if r.get(c) is None else (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in cols])
    return buf.getvalue()


# --------------------------------------------------------------- field dumps
@dataclass
class FieldDump:
    N: float
    phase: str
    sections: dict = field(default_factory=dict)  # name -> (columns, (n, m) float array)

    def __eq__(self, other):
        if not isinstance(other, FieldDump) or (self.N, self.phase) != (other.N, other.phase):
            return False
        if self.sections.keys() != other.sections.keys():
            return False
        return all(
            self.sections[k][0] == other.sections[k][0]
            and np.array_equal(self.sections[k][1], other.sections[k][1])
            for k in self.sections
        )


def capture_dump(analysis) -> FieldDump:
    """Snapshot of the current fields of an ``Analysis``."""
    m, st = analysis.model, analysis.state
    xy = st.coords
    u = st.u.reshape(-1, 2)
    sec = {"nodes": (["x", "y", "ux", "uy"], np.column_stack([xy, u]))}
    c = st.coh
    pos = np.einsum("pi,pij->pj", c.w, xy[c.a]) if len(c.D) else np.zeros((0, 2))
    itf = c.kind != KIND_CRACK
    sec["interface_points"] = (
        ["x", "y", "kind", "owner", "D", "R"],
        np.column_stack([pos[itf], c.kind[itf], c.owner[itf], c.D[itf], c.R[itf]]),
    )
    seg = []
    for path in st.cracks:
        for e, (P, Q) in zip(path.elements, path.segments):
            seg.append([path.pid, path.layer, e, P[0], P[1], Q[0], Q[1]])
    sec["crack_segments"] = (["path", "layer", "element", "x0", "y0", "x1", "y1"], np.array(seg, float).reshape(-1, 7))
    cr = ~itf
    sec["crack_points"] = (["x", "y", "path", "D", "R"], np.column_stack([pos[cr], c.owner[cr], c.D[cr], c.R[cr]]))
    n0 = m.mesh.n_elements
    if n0 and "ply" in m.mat_names:
        params = m.cohesive[m.material_index("ply")]
        sig = m.element_stress(st)
        layer = st.layer[:n0]
        fI = np.zeros(n0)
        for k, th in enumerate(m.theta):
            sel = np.flatnonzero(layer == k)
            fI[sel] = ply.failure_index(sig[sel], th, st.bulk_R[sel], params)
        sec["bulk"] = (["element", "layer", "f_I", "R"], np.column_stack([np.arange(n0), layer, fI, st.bulk_R[:n0]]))
    for name, (_, arr) in sec.items():
        if not np.all(np.isfinite(arr)):
            raise OutputError(f"non-finite value in field dump section {name}")
    return FieldDump(float(st.N), analysis.phase, sec)


def dump_to_text(d: FieldDump) -> str:
    out = [f"{DUMP_MAGIC} {DUMP_VERSION}", f"N {d.N!r}", f"phase {d.phase}"]
    for name, (cols, arr) in d.sections.items():
        out.append(f"section {name} {arr.shape[0]} {' '.join(cols)}")
        out += [" ".join(repr(float(v)) for v in row) for row in arr.tolist()]
    out.append("end")
    return "\n".join(out) + "\n"


def dump_from_text(text: str) -> FieldDump:
    lines = text.splitlines()
    if not lines or lines[0] != f"{DUMP_MAGIC} {DUMP_VERSION}":
        raise OutputError("not a field dump (bad header)")
    N = float(lines[1].split()[1])
    phase = lines[2].split(maxsplit=1)[1]
    sec, i = {}, 3
    while lines[i] != "end":
        tok = lines[i].split()
        name, n, cols = tok[1], int(tok[2]), tok[3:]
        rows = [[float(v) for v in ln.split()] for ln in lines[i + 1: i + 1 + n]]
        sec[name] = (cols, np.array(rows, float).reshape(n, len(cols)))
        i += 1 + n
    return FieldDump(N, phase, sec)


def write_dump(d: FieldDump, path: str | Path):
    _write(Path(path), dump_to_text(d))


def read_dump(path: str | Path) -> FieldDump:
    return dump_from_text(Path(path).read_text())
