"""Command line: ``run``, ``sweep``, ``mesh-gen`` and ``validate``.

Exit codes: 0 success, 2 configuration or mesh error, 3 solver abort.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .driver import SolverAbort
from .fem.mesh import MeshError
from .io.config import ConfigError, RunConfig, load_config
from .io.meshio import write_mesh
from .io.outputs import OutputError, sn_table
from .io.runner import build_mesh, output_dir, run_entry

EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 2, 3
log = logging.getLogger("lamfatigue")


def _sn_row(entry, summary):
    return {
        "label": entry.label, "severity": entry.severity, "peak_stress": entry.peak_stress,
        "N_fail": summary.get("N_fail"), "censored": summary.get("censored"),
        "failure_mode": summary.get("failure_mode"),
    }


def cmd_validate(cfg: RunConfig, args) -> int:
    build_mesh(cfg)
    print(cfg.echo())
    for e in cfg.runs:
        print(f"run {e.label} peak_stress = {e.peak_stress!r}")
    return EXIT_OK


def cmd_mesh_gen(cfg: RunConfig, args) -> int:
    mesh = build_mesh(cfg)
    path = Path(args.output) if args.output else output_dir(cfg) / "mesh.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_mesh(mesh, path)
    print(f"wrote {path} ({mesh.n_nodes} nodes, {mesh.n_elements} elements)")
    return EXIT_OK


def cmd_run(cfg: RunConfig, args) -> int:
    if len(cfg.runs) != 1:
        raise ConfigError(f"'run' needs exactly one load level, the config lists {len(cfg.runs)}; use 'sweep'")
    entry = cfg.runs[0]
    out = output_dir(cfg)
    s = run_entry(cfg, entry, out)
    print(f"{entry.label}: N_fail = {s['N_fail']!r} censored = {s['censored']} ({out})")
    return EXIT_OK


def _sweep_one(args):
    cfg, entry, out = args
    try:
        return run_entry(cfg, entry, out), None
    except SolverAbort as exc:
        return {"N_fail": None, "censored": False, "failure_mode": "abort"}, str(exc)


def cmd_sweep(cfg: RunConfig, args) -> int:
    out = output_dir(cfg)
    jobs = [(cfg, e, out / e.label) for e in cfg.runs]
    if args.jobs == 1:
        results = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_one, jobs))
    rows, code = [], EXIT_OK
    for e, (s, err) in zip(cfg.runs, results):
        rows.append(_sn_row(e, s))
        if err:
            log.error("%s aborted: %s", e.label, err)
            code = EXIT_ABORT
        print(f"{e.label}: peak_stress = {e.peak_stress!r} N_fail = {s['N_fail']!r}")
    out.mkdir(parents=True, exist_ok=True)
    (out / "sn.csv").write_text(sn_table(rows))
    return code


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "mesh-gen": cmd_mesh_gen, "validate": cmd_validate}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="lamfatigue", description="Laminate fatigue analysis")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config")
        if name == "sweep":
            p.add_argument("-j", "--jobs", type=int, default=None, help="worker processes")
        if name == "mesh-gen":
            p.add_argument("-o", "--output", default=None, help="mesh file to write")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, MeshError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverAbort as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except OutputError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
