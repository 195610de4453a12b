import json
import numpy as np
import pytest

from lamfatigue.cli import main
from lamfatigue.fem.mesh import MeshError, generate_strip_mesh
from lamfatigue.io.config import ConfigError, load_config, parse_config
from lamfatigue.io.meshio import load_external_mesh, mesh_from_text, mesh_to_text
from lamfatigue.io.outputs import FieldDump, OutputError, capture_dump, dump_from_text, dump_to_text, summary_json
from lamfatigue.io.runner import OUTPUT_ROOT_ENV, build_analysis, build_mesh

TINY = """\
title = "tiny"

[output]
directory = "out"

[ply]
E1 = 161000.0
E2 = 11380.0
G12 = 5170.0
nu12 = 0.32
alpha2 = 3.0e-5

[ply_crack]
K_n = 1.0e6
f_n = 95.0
f_sh = 107.0
G_Ic = 1.0
G_IIc = 1.0

[interface]
f_n = 45.0
f_sh = 45.0
G_Ic = 1.0
G_IIc = 1.0

[layup]
angles = [0.0, 90.0]
thicknesses = [0.125, 2.0]
crackable = [1]

[geometry]
kind = "strip"
length = 4.0
width = 1.0
element_size = 0.5
fine_region = [1.0, 3.0]

[load]
delta_T = -160.0
R = 0.1
peak_stress = 100.0

[schedule]
N_max = 20.0
dump_at = [5.0]
"""


@pytest.fixture(autouse=True)
def _outputs_in_tmp(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))


def write_cfg(tmp_path, text=TINY, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_derived_values():
    cfg = parse_config(TINY)
    assert cfg.derived["interface.K_n"] == pytest.approx(5170.0 / 0.0625)
    assert cfg.derived["interface.K_sh"] == pytest.approx(5170.0 / 0.0625)
    assert cfg.derived["ply_crack.K_sh"] == pytest.approx(1e6 * (107 / 95) ** 2)
    assert cfg.derived["laminate_thickness"] == pytest.approx(2.125)
    assert len(cfg.runs) == 1 and cfg.runs[0].label == "S100"
    assert "interface.K_n = 82720.0" in cfg.echo()


def test_symmetric_layup_doubles_thickness():
    cfg = parse_config(TINY.replace("crackable = [1]", "crackable = [1]\nsymmetric = true"))
    assert cfg.derived["laminate_thickness"] == pytest.approx(4.25)


def test_severity_plan_expands_to_four_entries(root):
    cfg = load_config(root / "configs" / "desk_strip_local.toml")
    assert [e.peak_stress for e in cfg.runs] == pytest.approx([81.25, 97.5, 113.75, 130.0], rel=1e-15)
    assert [e.label for e in cfg.runs] == ["s0.5", "s0.6", "s0.7", "s0.8"]
    assert not cfg.global_R
    assert load_config(root / "configs" / "desk_strip_global.toml").global_R


@pytest.mark.parametrize(
    "edit, line, msg",
    [
        (("E2 = 11380.0", "E2 = -1.0"), 8, "positive"),
        (("nu12 = 0.32", "nu12 = 0.32\nbogus = 3"), 11, "unknown key"),
        (("G_IIc = 1.0\n\n[interface]", "\n[interface]"), None, "G_IIc"),
        (('kind = "strip"', 'kind = "disc"'), 32, "kind"),
        (("R = 0.1", "R = 1.0"), None, "R"),
        (("peak_stress = 100.0", "peak_stress = [100.0, -5.0]"), 41, "peak stresses"),
    ],
)
def test_config_errors_name_the_line(edit, line, msg):
    with pytest.raises(ConfigError) as exc:
        parse_config(TINY.replace(*edit, 1))
    assert msg in str(exc.value)
    if line is not None:
        assert exc.value.line == line and str(exc.value).startswith(f"line {line}:")


def test_config_rejects_unknown_table_and_bad_toml():
    with pytest.raises(ConfigError, match="unknown"):
        parse_config(TINY + "\n[extras]\nx = 1\n")
    with pytest.raises(ConfigError):
        parse_config("title = \n")


def test_mesh_round_trip_is_exact():
    m = generate_strip_mesh(4.0, 1.0, 0.5, [0, 45, 90], [0.125, 0.2, 0.3], (1.0, 3.0))
    text = mesh_to_text(m)
    m2 = mesh_from_text(text)
    assert mesh_to_text(m2) == text
    assert np.array_equal(m.nodes, m2.nodes)
    for a, b in zip(m.layers, m2.layers):
        assert np.array_equal(a.conn, b.conn) and a.theta == b.theta and np.array_equal(a.fine, b.fine)


def test_corrupt_mesh_names_the_record():
    m = generate_strip_mesh(2.0, 1.0, 0.5, [0], [0.1])
    lines = mesh_to_text(m).splitlines()
    i = next(k for k, ln in enumerate(lines) if ln.startswith("layer")) + 3
    parts = lines[i].split()
    parts[1] = "9999"
    lines[i] = " ".join(parts)
    with pytest.raises(MeshError, match=rf"line {i + 1}.*9999"):
        mesh_from_text("\n".join(lines))
    with pytest.raises(MeshError, match="header"):
        mesh_from_text("not a mesh\n")


def test_shipped_open_hole_mesh_loads(root):
    m = load_external_mesh(root / "data" / "open_hole_coarse.mesh")
    assert len(m.layers) == 4 and m.n_nodes == 398
    cfg = load_config(root / "configs" / "open_hole_coarse.toml")
    assert build_mesh(cfg).n_elements == m.n_elements


def test_field_dump_round_trip():
    cfg = parse_config(TINY)
    a = build_analysis(cfg, cfg.runs[0])
    a.run_phase_thermal()
    a.run_static_ramp()
    a.run_control_cycle()
    d = capture_dump(a)
    assert isinstance(d, FieldDump)
    assert dump_from_text(dump_to_text(d)) == d
    assert dump_to_text(dump_from_text(dump_to_text(d))) == dump_to_text(d)


def test_summary_json_refuses_nan():
    with pytest.raises(OutputError):
        summary_json({"x": float("nan")})


def test_cli_validate_and_mesh_gen(tmp_path, capsys):
    p = write_cfg(tmp_path)
    assert main(["validate", str(p)]) == 0
    assert "interface.K_n" in capsys.readouterr().out
    assert main(["mesh-gen", str(p), "-o", str(tmp_path / "m.txt")]) == 0
    assert load_external_mesh(tmp_path / "m.txt").n_elements == 2 * 32


def test_cli_exit_codes(tmp_path):
    bad = write_cfg(tmp_path, TINY.replace("E2 = 11380.0", "E2 = -1.0"), "bad.toml")
    assert main(["validate", str(bad)]) == 2
    two = write_cfg(tmp_path, TINY.replace("peak_stress = 100.0", "peak_stress = [90.0, 100.0]"), "two.toml")
    assert main(["run", str(two)]) == 2
    budget = write_cfg(tmp_path, TINY.replace("N_max = 20.0", "N_max = 20.0\nmax_steps = 3"), "b.toml")
    assert main(["run", str(budget)]) == 3
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["failure_mode"] == "abort"


def test_cli_run_outputs_are_deterministic(tmp_path, monkeypatch):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        d.mkdir()
        monkeypatch.setenv(OUTPUT_ROOT_ENV, str(d))
        assert main(["run", str(write_cfg(d))]) == 0
    for name in ("history.csv", "summary.json", "dumps/dump_N5.txt", "dumps/dump_final.txt"):
        assert (a / "out" / name).read_bytes() == (b / "out" / name).read_bytes()
    s = json.loads((a / "out" / "summary.json").read_text())
    assert s["censored"] and s["N_fail"] == 20.0


def test_cli_sweep_writes_sn_table(tmp_path):
    p = write_cfg(tmp_path, TINY.replace("peak_stress = 100.0", "peak_stress = [90.0, 100.0]"))
    assert main(["sweep", str(p), "-j", "1"]) == 0
    rows = (tmp_path / "out" / "sn.csv").read_text().splitlines()
    assert len(rows) == 3 and rows[0].startswith("label")
    assert (tmp_path / "out" / "S90" / "history.csv").exists()


def test_open_hole_config_runs_static_ramp(root):
    cfg = load_config(root / "configs" / "open_hole_coarse.toml")
    a = build_analysis(cfg, cfg.runs[0])
    a.run_phase_thermal()
    a.run_static_ramp()
    a.run_control_cycle()
    assert a.E_norm == 1.0 and a.state.lam_F == 1.0
    assert np.all(np.isfinite(a.state.u))


def test_documented_mesh_example_parses(root):
    import re

    text = (root / "docs" / "formats.md").read_text()
    block = re.search(r"```\n(lamfatigue-mesh 1\nnodes 4\n.*?)```", text, re.S).group(1)
    m = mesh_from_text(block)
    assert m.n_elements == 2 and set(m.boundary) == {"left", "pin", "right"}
