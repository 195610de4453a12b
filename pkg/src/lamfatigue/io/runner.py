"""Build and run analyses from a ``RunConfig``."""

from __future__ import annotations

import os
import time
from pathlib import Path

from ..driver import Analysis, AnalysisSchedule, build_strip_model
from ..fem.mesh import Mesh, generate_strip_mesh
from ..xfem import CrackTopology
from .config import RunConfig, RunEntry
from .meshio import load_external_mesh
from .outputs import capture_dump, emit_outputs, write_dump

OUTPUT_ROOT_ENV = "LAMFATIGUE_OUTPUT_ROOT"


def output_dir(cfg: RunConfig) -> Path:
    """Configured output directory, under ``$LAMFATIGUE_OUTPUT_ROOT`` if set."""
    out = Path(cfg.output)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


def build_mesh(cfg: RunConfig) -> Mesh:
    g = cfg.geometry
    if g["kind"] == "mesh":
        mesh = load_external_mesh(cfg.mesh_path())
        if len(mesh.layers) != len(cfg.angles):
            from ..fem.mesh import MeshError

            raise MeshError(f"mesh has {len(mesh.layers)} layers, layup has {len(cfg.angles)}")
        return mesh
    fr = tuple(g["fine_region"]) if "fine_region" in g else None
    return generate_strip_mesh(g["length"], g["width"], g["element_size"], cfg.angles, cfg.thicknesses, fr)


def build_analysis(cfg: RunConfig, entry: RunEntry, mesh: Mesh | None = None, on_dump=None) -> Analysis:
    mesh = build_mesh(cfg) if mesh is None else mesh
    model = build_strip_model(
        mesh, [cfg.ply] * len(mesh.layers), cfg.interface, cfg.ply_crack, entry.peak_stress,
        delta_T=cfg.delta_T, R_glob=cfg.R_glob, crackable_layers=cfg.crackable,
    )
    schedule = AnalysisSchedule(
        delta_T=cfg.delta_T, R_glob=cfg.R_glob, k_jumps=cfg.k_jumps, N_max=cfg.N_max,
        stop_fraction=cfg.stop_fraction, global_R_mode=cfg.global_R, insert_cracks=cfg.xfem,
        peak_stress=entry.peak_stress, max_steps=cfg.max_steps, dump_at=cfg.dump_at,
    )
    topo = CrackTopology(model, cfg.l_c) if cfg.xfem else None
    return Analysis(model, schedule, cfg.solver, topo, on_dump=on_dump)


def summary_for(cfg: RunConfig, entry: RunEntry, analysis: Analysis) -> dict:
    s = analysis.record.summary()
    s.update(
        label=entry.label, severity=entry.severity, title=cfg.title,
        global_R=cfg.global_R, R_glob=cfg.R_glob, delta_T=cfg.delta_T,
        state_checksum=analysis.state.checksum(), derived=dict(cfg.derived),
    )
    return s


def run_entry(cfg: RunConfig, entry: RunEntry, out_dir: Path) -> dict:
    """Run one load level and write its outputs; returns the summary.

    A solver abort still writes the partial history before re-raising.
    """
    out_dir = Path(out_dir)

    def on_dump(an, milestone):
        write_dump(capture_dump(an), out_dir / "dumps" / f"dump_N{milestone:g}.txt")

    analysis = build_analysis(cfg, entry, on_dump=on_dump)
    t0 = time.perf_counter()
    try:
        analysis.run()
    except Exception:
        summary = summary_for(cfg, entry, analysis)
        summary["failure_mode"] = "abort"
        emit_outputs(out_dir, analysis.record, summary, time.perf_counter() - t0)
        raise
    summary = summary_for(cfg, entry, analysis)
    write_dump(capture_dump(analysis), out_dir / "dumps" / "dump_final.txt")
    emit_outputs(out_dir, analysis.record, summary, time.perf_counter() - t0)
    return summary
