"""Run configuration: TOML text to a validated ``RunConfig``.

Errors carry the line of the offending key (or table) in the source text.
The documented schema lives in ``docs/formats.md``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

import tomli

from ..fczm import CohesiveParams
from ..fem.solver import SolverConfig, interface_dummy_stiffness
from ..ply import PlyParams


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


_PLY_KEYS = {"E1", "E2", "G12", "nu12", "alpha1", "alpha2"}
_COHESIVE_KEYS = {f.name for f in fields(CohesiveParams)}
_SOLVER_KEYS = {f.name for f in fields(SolverConfig)}
_SCHEMA = {
    "title": None,
    "output": {"directory"},
    "ply": _PLY_KEYS,
    "ply_crack": _COHESIVE_KEYS,
    "interface": _COHESIVE_KEYS,
    "layup": {"angles", "thicknesses", "symmetric", "crackable"},
    "geometry": {"kind", "length", "width", "element_size", "fine_region", "mesh"},
    "xfem": {"l_c", "enabled"},
    "load": {"delta_T", "R", "peak_stress", "strength", "severities", "global_R"},
    "schedule": {"k_jumps", "N_max", "stop_fraction", "max_steps", "dump_at"},
    "solver": _SOLVER_KEYS,
}
_REQUIRED = {
    "ply": {"E1", "E2", "G12", "nu12"},
    "ply_crack": {"K_n", "f_n", "f_sh", "G_Ic", "G_IIc"},
    "interface": {"f_n", "f_sh", "G_Ic", "G_IIc"},
    "layup": {"angles", "thicknesses"},
    "geometry": {"kind"},
    "load": {"R"},
}


@dataclass(frozen=True)
class RunEntry:
    label: str
    peak_stress: float
    severity: float | None = None


@dataclass
class RunConfig:
    title: str
    ply: PlyParams
    ply_crack: CohesiveParams
    interface: CohesiveParams
    angles: list
    thicknesses: list
    symmetric: bool
    crackable: list | None
    geometry: dict
    l_c: float
    xfem: bool
    delta_T: float
    R_glob: float
    global_R: bool
    runs: list
    solver: SolverConfig
    k_jumps: int = 3
    N_max: float = 1e7
    stop_fraction: float = 0.15
    max_steps: int = 20000
    dump_at: tuple = ()
    output: str = "out"
    base_dir: Path = field(default_factory=Path)
    derived: dict = field(default_factory=dict)

    def mesh_path(self) -> Path:
        return (self.base_dir / self.geometry["mesh"]).resolve()

    def echo(self) -> str:
        """Derived quantities, one ``name = value`` per line."""
        return "\n".join(f"{k} = {v!r}" for k, v in self.derived.items())


class _Lines:
    """Line numbers of tables and keys in a TOML text."""

    _table = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\-]+)\s*\]")
    _key = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")

    def __init__(self, text: str):
        self.tables: dict = {}
        self.keys: dict = {}
        cur = ""
        for i, line in enumerate(text.splitlines(), start=1):
            m = self._table.match(line)
            if m:
                cur = m.group(1)
                self.tables.setdefault(cur, i)
                continue
            m = self._key.match(line)
            if m:
                self.keys.setdefault((cur, m.group(1)), i)

    def of(self, table: str, key: str | None = None):
        if key is not None and (table, key) in self.keys:
            return self.keys[(table, key)]
        return self.tables.get(table)


def _num(tab: dict, table: str, key: str, lines: _Lines, default=None, positive=False, integer=False):
    if key not in tab:
        if default is None:
            raise ConfigError(f"missing required key {table}.{key}", lines.of(table))
        return default
    v = tab[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{table}.{key} must be a number", lines.of(table, key))
    if not math.isfinite(v):
        raise ConfigError(f"{table}.{key} must be finite", lines.of(table, key))
    if positive and v <= 0:
        raise ConfigError(f"{table}.{key} must be positive, got {v!r}", lines.of(table, key))
    if integer:
        if int(v) != v:
            raise ConfigError(f"{table}.{key} must be an integer", lines.of(table, key))
        return int(v)
    return float(v)


def _list(tab, table, key, lines, default=None, nonempty=True):
    if key not in tab:
        if default is None:
            raise ConfigError(f"missing required key {table}.{key}", lines.of(table))
        return default
    v = tab[key]
    if not isinstance(v, list) or (nonempty and not v):
        raise ConfigError(f"{table}.{key} must be a non-empty list", lines.of(table, key))
    if any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
        raise ConfigError(f"{table}.{key} must contain numbers only", lines.of(table, key))
    return [float(x) for x in v]


def _cohesive(tab: dict, table: str, lines: _Lines, K_default=None) -> CohesiveParams:
    kw = {}
    for k, v in tab.items():
        kw[k] = None if v is None else _num(tab, table, k, lines)
    if "K_n" not in kw:
        if K_default is None:
            raise ConfigError(f"missing required key {table}.K_n", lines.of(table))
        kw["K_n"] = K_default
    try:
        return CohesiveParams(**kw)
    except ValueError as exc:
        msg = str(exc)
        key = msg.split()[0].split("=")[0]
        raise ConfigError(f"{table}: {msg}", lines.of(table, key)) from None


def parse_config(text: str, base_dir: str | Path = ".") -> RunConfig:
    """Parse and validate a run configuration."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"malformed document: {exc}", int(m.group(1)) if m else None) from None
    lines = _Lines(text)
    for name, val in doc.items():
        if name not in _SCHEMA:
            raise ConfigError(f"unknown table or key {name!r}", lines.of(name) or lines.of("", name))
        allowed = _SCHEMA[name]
        if allowed is None:
            continue
        if not isinstance(val, dict):
            raise ConfigError(f"{name} must be a table", lines.of("", name))
        for key in val:
            if key not in allowed:
                raise ConfigError(f"unknown key {name}.{key}", lines.of(name, key))
    for name, req in _REQUIRED.items():
        if name not in doc:
            raise ConfigError(f"missing required table [{name}]")
        for key in sorted(req - set(doc[name])):
            raise ConfigError(f"missing required key {name}.{key}", lines.of(name))

    derived = {}
    p = doc["ply"]
    try:
        ply = PlyParams(**{k: _num(p, "ply", k, lines) for k in p})
    except ValueError as exc:
        key = str(exc).split()[0]
        raise ConfigError(f"ply: {exc}", lines.of("ply", key)) from None

    lay = doc["layup"]
    angles = _list(lay, "layup", "angles", lines)
    thick = _list(lay, "layup", "thicknesses", lines)
    if len(angles) != len(thick):
        raise ConfigError(
            f"layup has {len(angles)} angles but {len(thick)} thicknesses", lines.of("layup", "thicknesses")
        )
    if any(t <= 0 for t in thick):
        raise ConfigError("layup.thicknesses must be positive", lines.of("layup", "thicknesses"))
    symmetric = bool(lay.get("symmetric", False))
    crackable = None
    if "crackable" in lay:
        crackable = [int(k) for k in _list(lay, "layup", "crackable", lines, nonempty=False)]
        if any(not 0 <= k < len(angles) for k in crackable):
            raise ConfigError("layup.crackable names a missing layer", lines.of("layup", "crackable"))

    ply_crack = _cohesive(doc["ply_crack"], "ply_crack", lines)
    # interface penalty from the ply shear modulus and thickness unless given
    K_d = interface_dummy_stiffness(ply.G12, min(thick))
    interface = _cohesive(doc["interface"], "interface", lines, K_default=K_d)
    derived["interface.K_n"] = interface.K_n
    derived["interface.K_sh"] = interface.K_sh
    derived["ply_crack.K_sh"] = ply_crack.K_sh
    # a symmetric layup lists the modelled half; in-plane fields are identical
    derived["laminate_thickness"] = (2.0 if symmetric else 1.0) * sum(thick)

    geo = dict(doc["geometry"])
    kind = geo.get("kind")
    if kind == "strip":
        for k in ("length", "width", "element_size"):
            geo[k] = _num(geo, "geometry", k, lines, positive=True)
        if "fine_region" in geo:
            fr = _list(geo, "geometry", "fine_region", lines)
            if len(fr) != 2 or not 0.0 <= fr[0] < fr[1] <= geo["length"]:
                raise ConfigError("geometry.fine_region must be [x0, x1] inside the strip", lines.of("geometry", "fine_region"))
            geo["fine_region"] = fr
        if geo["element_size"] > min(geo["length"], geo["width"]):
            raise ConfigError("geometry.element_size larger than the strip", lines.of("geometry", "element_size"))
    elif kind == "mesh":
        if not isinstance(geo.get("mesh"), str):
            raise ConfigError("geometry.mesh must name a mesh file", lines.of("geometry", "mesh") or lines.of("geometry"))
        if not (Path(base_dir) / geo["mesh"]).is_file():
            raise ConfigError(f"mesh file {geo['mesh']!r} does not exist", lines.of("geometry", "mesh"))
    else:
        raise ConfigError("geometry.kind must be 'strip' or 'mesh'", lines.of("geometry", "kind"))

    xf = doc.get("xfem", {})
    l_c = _num(xf, "xfem", "l_c", lines, default=0.75, positive=True)
    xfem_on = bool(xf.get("enabled", True))

    ld = doc["load"]
    R = _num(ld, "load", "R", lines)
    if not R < 1.0:
        raise ConfigError("load.R must be below 1", lines.of("load", "R"))
    dT = _num(ld, "load", "delta_T", lines, default=0.0)
    runs = []
    if "peak_stress" in ld and ("severities" in ld or "strength" in ld):
        raise ConfigError("give either load.peak_stress or load.strength with load.severities", lines.of("load", "peak_stress"))
    if "peak_stress" in ld:
        v = ld["peak_stress"]
        vals = _list(ld, "load", "peak_stress", lines) if isinstance(v, list) else [_num(ld, "load", "peak_stress", lines)]
        runs = [RunEntry(f"S{s:g}", s) for s in vals]
    elif "severities" in ld:
        strength = _num(ld, "load", "strength", lines, positive=True)
        sev = _list(ld, "load", "severities", lines)
        if any(not 0.0 < s for s in sev):
            raise ConfigError("load.severities must be positive", lines.of("load", "severities"))
        runs = [RunEntry(f"s{s:g}", s * strength, s) for s in sev]
    else:
        raise ConfigError("missing load.peak_stress (or load.strength and load.severities)", lines.of("load"))
    if any(r.peak_stress <= 0 for r in runs):
        raise ConfigError("peak stresses must be positive", lines.of("load", "peak_stress"))

    sc = doc.get("schedule", {})
    k_jumps = _num(sc, "schedule", "k_jumps", lines, default=3, positive=True, integer=True)
    N_max = _num(sc, "schedule", "N_max", lines, default=1e7, positive=True)
    stop = _num(sc, "schedule", "stop_fraction", lines, default=0.15)
    if not 0.0 < stop < 1.0:
        raise ConfigError("schedule.stop_fraction must lie in (0, 1)", lines.of("schedule", "stop_fraction"))
    max_steps = _num(sc, "schedule", "max_steps", lines, default=20000, positive=True, integer=True)
    dump_at = tuple(_list(sc, "schedule", "dump_at", lines, default=[], nonempty=False))

    sv = doc.get("solver", {})
    kw = {}
    for k in sv:
        kw[k] = _num(sv, "solver", k, lines, integer=k in ("n_iter_max", "n_iter_opt", "line_search"))
    try:
        solver = SolverConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}", lines.of("solver")) from None

    out = doc.get("output", {}).get("directory", "out")
    if not isinstance(out, str):
        raise ConfigError("output.directory must be a string", lines.of("output", "directory"))
    return RunConfig(
        title=str(doc.get("title", "")),
        ply=ply, ply_crack=ply_crack, interface=interface,
        angles=angles, thicknesses=thick, symmetric=symmetric, crackable=crackable,
        geometry=geo, l_c=l_c, xfem=xfem_on, delta_T=dT, R_glob=R,
        global_R=bool(ld.get("global_R", False)), runs=runs, solver=solver,
        k_jumps=k_jumps, N_max=N_max, stop_fraction=stop, max_steps=max_steps,
        dump_at=dump_at, output=out, base_dir=Path(base_dir), derived=derived,
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, path.parent)
