"""Config parsing, command wiring, exit codes, output determinism."""

import os

import numpy as np
import pytest

from swellrom.errors import ConfigError
from swellrom.fom_solver import FomSolver, ParameterVector
from swellrom.harness_cli import StudyConfig, load_config, main
from swellrom.harness_cli.studies import (
    _background_lattice,
    _embed_state,
    _lattice_mass,
    _weighted_singular_values,
)


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


BASE = """\
# smoke scale settings
mesh_h = 0.25
dt = 0.01
t_final = 0.1
train_grid = 2x2
test_count = 2
seed = 3
eps_rb = 1e-3
eps_ei = 1e-3
"""


def test_config_file_parsing(tmp_path):
    text = BASE + "conservative = no\nwith_variance = true\nworkers = 2\n"
    cfg = load_config(_write(tmp_path, "a.cfg", text))
    assert cfg.mesh_h == 0.25
    assert cfg.t_final == 0.1
    assert cfg.train_grid == "2x2"
    assert cfg.conservative is False
    assert cfg.with_variance is True
    assert cfg.workers == 2
    assert cfg.n_steps() == 10
    assert cfg.eps_rb_list() == [1e-3]


def test_config_rejects_unknown_and_malformed(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "b.cfg", "volume = 11\n"))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "c.cfg", "mesh_h 0.25\n"))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "d.cfg", "conservative = maybe\n"))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "e.cfg", "dt = fast\n"))
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.cfg"))


def test_overrides_beat_file_values(tmp_path):
    path = _write(tmp_path, "f.cfg", BASE)
    cfg = load_config(path, {"dt": 0.02, "seed": None, "out": "elsewhere"})
    assert cfg.dt == 0.02
    assert cfg.seed == 3  # None overrides are ignored
    assert cfg.out == "elsewhere"
    assert cfg.n_steps() == 5


def test_step_count_must_divide_horizon():
    cfg = StudyConfig(dt=0.3, t_final=1.0)
    with pytest.raises(ConfigError):
        cfg.n_steps()
    assert StudyConfig(dt=0.25, t_final=1.0).n_steps() == 4
    with pytest.raises(ConfigError):
        StudyConfig(dt=-0.1, t_final=1.0).n_steps()


def test_times_must_sit_on_the_step_grid():
    cfg = StudyConfig(dt=0.1, t_final=1.0, variance_times="0,0.2,1.0")
    assert cfg.times_list() == [0.0, 0.2, 1.0]
    bad = StudyConfig(dt=0.1, t_final=1.0, variance_times="0.05")
    with pytest.raises(ConfigError):
        bad.times_list()
    late = StudyConfig(dt=0.1, t_final=1.0, variance_times="1.1")
    with pytest.raises(ConfigError):
        late.times_list()


def test_eps_lists_must_be_positive():
    cfg = StudyConfig(eps_rb="1e-2, 1e-4", eps_ei="-1")
    assert cfg.eps_rb_list() == [1e-2, 1e-4]
    with pytest.raises(ConfigError):
        cfg.eps_ei_list()
    with pytest.raises(ConfigError):
        StudyConfig(eps_rb="").eps_rb_list()


def test_parameters_respect_admissible_box():
    cfg = StudyConfig(alpha=0.5, beta=0.05, delta1=0.2, delta2=0.9)
    mu = cfg.parameters()
    assert mu == ParameterVector(0.5, 0.05, 0.2, 0.9)
    with pytest.raises(ConfigError):
        StudyConfig(alpha=7.0).parameters()


def test_usage_errors_exit_three(capsys):
    assert main(["fom", "--frobnicate"]) == 3
    assert main(["transmogrify"]) == 3
    assert main([]) == 3
    capsys.readouterr()


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "swellrom" in capsys.readouterr().out


def test_fom_command_and_equilibrium_column(tmp_path, capsys):
    cfg = _write(tmp_path, "eq.cfg", BASE + "delta1 = 0\ndelta2 = 0\n")
    out = str(tmp_path / "eq_out")
    assert main(["fom", "--config", cfg, "--out", out]) == 0
    capsys.readouterr()
    summary = open(os.path.join(out, "fom_summary.csv")).read().splitlines()
    header = next(l for l in summary if not l.startswith("#")).split(",")
    rows = [l.split(",") for l in summary if not l.startswith("#")][1:]
    assert len(rows) == 11
    disp = [float(r[header.index("max_displacement")]) for r in rows]
    # undisturbed disk: motion stays at the spatial discretization level
    assert max(disp) < 0.25**2
    mass = [float(r[header.index("total_mass")]) for r in rows]
    assert max(abs(m - mass[0]) for m in mass) < 1e-12 * abs(mass[0])
    assert os.path.isfile(os.path.join(out, "fom_timings.csv"))
    assert os.path.isdir(os.path.join(out, "fom_trajectory"))


def test_offline_sizes_and_rom_chain(tmp_path, capsys):
    cfg = _write(
        tmp_path, "off.cfg",
        BASE.replace("eps_rb = 1e-3", "eps_rb = 1e-1,1e-4")
            .replace("eps_ei = 1e-3", "eps_ei = 1e-2,1e-5"),
    )
    out = str(tmp_path / "off_out")
    assert main(["offline", "--config", cfg, "--out", out]) == 0
    capsys.readouterr()
    lines = open(os.path.join(out, "offline_sizes.csv")).read().splitlines()
    data = [l.split(",") for l in lines if not l.startswith("#")]
    header, rows = data[0], data[1:]
    assert len(rows) == 4
    ku = header.index("n_concentration")
    by_pair = {(float(r[0]), float(r[1])): int(r[ku]) for r in rows}
    # tighter basis tolerance never shrinks the space
    assert by_pair[(1e-4, 1e-5)] >= by_pair[(1e-1, 1e-5)]
    m5 = header.index("m_coefficient_5")
    assert int(rows[0][m5]) <= int(rows[1][m5])

    # reuse the saved model for an online run without retraining
    model = os.path.join(out, "model")
    rom_cfg = _write(
        tmp_path, "rom.cfg",
        BASE.replace("eps_rb = 1e-3", "eps_rb = 1e-1")
            .replace("eps_ei = 1e-3", "eps_ei = 1e-2")
        + f"model = {model}\n",
    )
    rom_out = str(tmp_path / "rom_out")
    code = main(["rom", "--config", rom_cfg, "--out", rom_out,
                 "--non-conservative"])
    assert code == 0
    capsys.readouterr()
    assert os.path.isfile(os.path.join(rom_out, "rom_summary.csv"))
    assert os.path.isfile(os.path.join(rom_out, "rom_timings.csv"))

    # absurd step sizes fold the reduced shape: solver failure exit code
    bad_cfg = _write(
        tmp_path, "bad.cfg",
        f"mesh_h = 0.25\nmodel = {model}\ndt = 20\nt_final = 200\n"
        "eps_rb = 1e-4\neps_ei = 1e-5\n",
    )
    code = main(["rom", "--config", bad_cfg, "--out", str(tmp_path / "bad")])
    assert code == 2
    assert "folds over" in capsys.readouterr().err


def test_loose_basis_keeps_single_mode(tmp_path, capsys):
    cfg = _write(
        tmp_path, "loose.cfg",
        BASE.replace("eps_rb = 1e-3", "eps_rb = 1").replace(
            "eps_ei = 1e-3", "eps_ei = 1e-1"),
    )
    out = str(tmp_path / "loose_out")
    assert main(["offline", "--config", cfg, "--out", out]) == 0
    capsys.readouterr()
    lines = open(os.path.join(out, "offline_sizes.csv")).read().splitlines()
    data = [l.split(",") for l in lines if not l.startswith("#")]
    header, row = data[0], data[1]
    assert row[header.index("n_concentration")] == "1"


def test_study_outputs_deterministic(tmp_path, capsys):
    # identical config including the out path: rerun must reproduce
    # every non-timing byte
    cfg = _write(tmp_path, "det.cfg", BASE)
    out = str(tmp_path / "det")

    def run_and_snapshot():
        assert main(["study", "error-surface", "--config", cfg,
                     "--out", out]) == 0
        capsys.readouterr()
        return {
            name: open(os.path.join(out, name), "rb").read()
            for name in sorted(os.listdir(out))
            if name.endswith(".csv") and not name.endswith("_timings.csv")
        }

    first = run_and_snapshot()
    second = run_and_snapshot()
    assert set(first) == set(second)
    assert len(first) >= 1
    for name in first:
        assert first[name] == second[name], name


def test_background_lattice_orientation():
    vertices, cells, axis = _background_lattice(1.5)
    assert axis[0] == -3.0 and axis[-1] == 3.0
    tri = vertices[cells]
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    assert np.all(areas > 0.0)
    mass = _lattice_mass(len(vertices), cells, axis[1] - axis[0])
    assert mass.sum() == pytest.approx(36.0, rel=1e-12)


def test_embedding_samples_inside_only(coarse_mesh):
    solver = FomSolver(coarse_mesh)
    state = solver.initial_state(ParameterVector(0.1, 0.1, 0.0, 0.0))
    _, _, axis = _background_lattice(0.5)
    n1 = len(axis)
    values = np.zeros(n1 * n1)
    _embed_state(coarse_mesh, state, axis, values)
    grid = values.reshape(n1, n1)
    center = n1 // 2  # axis hits 0.0 exactly for this spacing
    assert grid[center, center] == pytest.approx(1.0, abs=1e-12)
    assert grid[0, 0] == 0.0
    assert grid[-1, -1] == 0.0
    # interior vertices of the unit disk all carry the unit concentration
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    inside = xx**2 + yy**2 < 0.9**2
    assert np.abs(grid[inside] - 1.0).max() < 1e-12


def test_weighted_spectrum_of_rank_one_set():
    vertices, cells, axis = _background_lattice(1.0)
    mass = _lattice_mass(len(vertices), cells, 1.0)
    row = np.linspace(0.0, 1.0, len(vertices))
    snaps = np.vstack([row, row, row])
    sig = _weighted_singular_values(snaps, mass)
    assert sig[0] > 0.0
    assert sig[1] < 1e-7 * sig[0]
    assert np.all(sig[:-1] >= sig[1:])
