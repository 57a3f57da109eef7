import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from quditmeas.cli import EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_OK, coord_columns, main
from quditmeas.config import dumps, load_config, loads, parse_real
from quditmeas.errors import ConfigError
from quditmeas.trajectories import Method

PRESETS = os.path.join(os.path.dirname(__file__), os.pardir, "presets")

BASE = """\
# qubit spiral
theta = 0, pi/2
tau_us = 1.0
dt_us = 0.01
duration_us = 0.5
init_bloch = 0, 1, 0
n_traj = 20
seed = 7
"""


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# parsing -----------------------------------------------------------------

def test_parse_real_expressions():
    assert parse_real("pi/2") == pytest.approx(np.pi / 2)
    assert parse_real("-2*pi/3 + 1") == pytest.approx(1 - 2 * np.pi / 3)
    assert parse_real("1e-2") == 0.01
    assert parse_real(3) == 3.0
    for bad in ("__import__('os')", "pi/0", "abc", "True"):
        with pytest.raises(ValueError):
            parse_real(bad)


def test_loads_resolves_fields():
    cfg = loads(BASE)
    m = cfg.measurement
    assert m.theta == (0.0, np.pi / 2) and m.tau == 1.0 and m.dt == 0.01
    assert cfg.n_traj == 20 and cfg.seed == 7 and cfg.method is Method.ITO_SME
    np.testing.assert_array_equal(cfg.initial, [0, 1, 0])
    clock = load_config(os.path.join(PRESETS, "clock6.cfg"))
    np.testing.assert_allclose(clock.measurement.theta, np.pi * np.arange(6) / 3)


@pytest.mark.parametrize("text,line,key", [
    ("theta = 0, 1\nbogus = 3\n", 2, "bogus"),
    ("theta = 0, 1\ntheta = 0, 2\n", 2, "theta"),
    ("theta = 0, 1\ntau_us 1.0\n", 2, None),
    (BASE + "tau_us = fast\n", None, "tau_us"),
])
def test_parse_errors_point_at_line_and_key(text, line, key):
    if line is None:
        text = text.replace("tau_us = 1.0\n", "", 1)
        line = text.splitlines().index("tau_us = fast") + 1
    with pytest.raises(ConfigError) as exc:
        loads(text)
    assert exc.value.line == line and exc.value.key == key
    assert f"line {line}" in str(exc.value)


@pytest.mark.parametrize("edit,key", [
    (lambda t: t.replace("init_bloch = 0, 1, 0", "init_bloch = 0, 2, 0"), "init_bloch"),
    (lambda t: t.replace("init_bloch = 0, 1, 0", "init_bloch = 0, 1"), "init_bloch"),
    (lambda t: t + "init_amplitudes = 1, 0\n", "init_amplitudes"),
    (lambda t: t.replace("init_bloch = 0, 1, 0\n", ""), "init_bloch"),
    (lambda t: t.replace("init_bloch = 0, 1, 0", "init_amplitudes = 1, 1"), "init_amplitudes"),
    (lambda t: t + "levels = 3\n", "levels"),
    (lambda t: t + "clock = 4\n", "clock"),
    (lambda t: t + "record_every = 0\n", "record_every"),
    (lambda t: t.replace("seed = 7", "seed = -1"), "seed"),
    (lambda t: t.replace("seed = 7", "seed = 1.5"), "seed"),
    (lambda t: t + "method = euler\n", "method"),
    (lambda t: t + "scheme = homodyne\n", "scheme"),
    (lambda t: t.replace("duration_us = 0.5", "duration_us = 0.001"), "duration_us"),
])
def test_validation_names_the_key(edit, key):
    with pytest.raises(ConfigError) as exc:
        loads(edit(BASE))
    assert exc.value.key == key


def test_measurement_errors_are_config_errors():
    with pytest.raises(ConfigError, match="efficienc"):
        loads(BASE + "eta = 1.0\n")


def test_large_seed_is_exact():
    cfg = loads(BASE.replace("seed = 7", f"seed = {2**64 - 1}"))
    assert cfg.seed == 2**64 - 1


def test_complex_amplitudes():
    cfg = loads(BASE.replace("init_bloch = 0, 1, 0", "init_amplitudes = 0.6, 0.8j"))
    np.testing.assert_array_equal(cfg.initial, [0.6, 0.8j])


@pytest.mark.parametrize("text", [BASE, BASE.replace("init_bloch = 0, 1, 0", "init_amplitudes = 0.6, 0+0.8j")
                                  + "scheme = phase_sensitive\nphi = pi/4\nsignal_dt_us = 0.5\n"
                                  + "density_coord = x\npositivity_abort = none\n"])
def test_round_trip_text_and_manifest(text):
    cfg = loads(text)
    again = loads(dumps(cfg))
    assert again.to_dict() == cfg.to_dict()
    manifest = json.dumps({"command": "simulate", "config": cfg.to_dict()})
    assert loads(manifest).to_dict() == cfg.to_dict()


# commands ----------------------------------------------------------------

def test_simulate_outputs_and_determinism(tmp_path):
    cfg = write(tmp_path, BASE)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--threads", "3"]) == EXIT_OK
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    assert a == (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert b"\r\n" not in a
    rows = read_csv(tmp_path / "a" / "trajectory.csv")
    assert rows[0] == ["t", "q_s01", "q_a10", "q_d0", "I", "Q"]
    assert len(rows) == 1 + 51
    assert [float(v) for v in rows[1][1:4]] == [0.0, 1.0, 0.0]
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["seed"] == 7 and man["method"] == "ito_sme" and man["n_steps"] == 50
    assert set(man["defects"]) == {"trace", "hermiticity", "min_eigenvalue"}
    assert man["config"]["theta"] == [0.0, np.pi / 2]


def test_manifest_reproduces_run(tmp_path):
    cfg = write(tmp_path, BASE)
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "99"])
    main(["simulate", "--config", str(tmp_path / "a" / "manifest.json"), "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()


def test_simulate_trajectory_flag(tmp_path):
    cfg = write(tmp_path, BASE)
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--trajectory", "3"])
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() != (tmp_path / "b" / "trajectory.csv").read_bytes()


def test_phase_sensitive_readout_column(tmp_path):
    cfg = write(tmp_path, BASE + "scheme = phase_sensitive\n")
    main(["simulate", "--config", cfg, "--out", str(tmp_path)])
    assert read_csv(tmp_path / "trajectory.csv")[0][-1] == "r"


def test_ensemble_outputs(tmp_path):
    cfg = write(tmp_path, BASE + "eta = 0.5, 0.5\n")
    out = tmp_path / "e"
    assert main(["ensemble", "--config", cfg, "--out", str(out), "--threads", "2"]) == EXIT_OK
    mean = read_csv(out / "mean.csv")
    assert mean[0] == ["t", "q_s01", "q_a10", "q_d0", "se_q_s01", "se_q_a10", "se_q_d0"]
    dens = read_csv(out / "density.csv")
    assert dens[0] == ["t", "q_d0", "density"] and len(dens) == 1 + 100 * 61
    up, low = read_csv(out / "postselect_upper.csv"), read_csv(out / "postselect_lower.csv")
    assert up[0] == low[0] == ["t", "q_s01", "q_a10", "q_d0"]
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["eta"] == [0.5, 0.5]
    assert sum(man["postselection"]["fractions"].values()) == pytest.approx(1.0)
    main(["ensemble", "--config", cfg, "--out", str(tmp_path / "f")])
    for name in ("mean.csv", "density.csv", "postselect_upper.csv", "postselect_lower.csv"):
        assert (out / name).read_bytes() == (tmp_path / "f" / name).read_bytes()


def test_ensemble_rejects_single_trajectory(tmp_path, capsys):
    cfg = write(tmp_path, BASE.replace("n_traj = 20", "n_traj = 1"))
    assert main(["ensemble", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "simulate" in capsys.readouterr().err


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, BASE + "wibble = 1\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "line 9" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)]) == EXIT_CONFIG
    bad_method = write(tmp_path, BASE + "eta = 0.5, 0.5\nmethod = pure_exact\n", "m.cfg")
    assert main(["simulate", "--config", bad_method, "--out", str(tmp_path)]) == EXIT_CONFIG


@pytest.mark.filterwarnings("ignore:dt = 0.5 exceeds")
def test_divergence_exit_code(tmp_path):
    text = BASE.replace("theta = 0, pi/2", "theta = 0, pi").replace("dt_us = 0.01", "dt_us = 0.5")
    text = text.replace("duration_us = 0.5", "duration_us = 400").replace("init_bloch = 0, 1, 0",
                                                                          "init_bloch = 1, 0, 0")
    cfg = write(tmp_path, text)
    codes = {main(["simulate", "--config", cfg, "--out", str(tmp_path), "--trajectory", str(k)])
             for k in range(10)}
    assert EXIT_DIVERGENCE in codes


def test_signal_tables(tmp_path):
    cfg = write(tmp_path, "theta = 0, pi\ntau_us = 1\ndt_us = 0.01\nduration_us = 1\n")
    assert main(["signal", "--config", cfg, "--out", str(tmp_path / "pp"), "--dt", "0.4"]) == EXIT_OK
    rows = read_csv(tmp_path / "pp" / "signal.csv")
    assert rows[0] == ["i", "j", "S_closed", "S_numeric", "rel_defect"]
    # dt |alpha|^2/T with |alpha|^2/T = 1/(4 tau)
    assert float(rows[1][2]) == pytest.approx(0.1)
    assert float(rows[1][4]) < 1e-6
    ps = write(tmp_path, "theta = 0, pi\ntau_us = 1\ndt_us = 0.01\nduration_us = 1\n"
               "scheme = phase_sensitive\nphi = 0.3\n", "ps.cfg")
    main(["signal", "--config", ps, "--out", str(tmp_path / "ps"), "--dt", "0.4"])
    assert float(read_csv(tmp_path / "ps" / "signal.csv")[1][2]) == pytest.approx(0.2 * np.cos(0.3) ** 2)


def test_signal_clock_and_single_level(tmp_path):
    assert main(["signal", "--config", os.path.join(PRESETS, "clock6.cfg"), "--out", str(tmp_path / "c")]) == 0
    rows = read_csv(tmp_path / "c" / "signal.csv")[1:]
    assert len(rows) == 15
    by_sep = {}
    for i, j, s, sn, rel in rows:
        sep = min(int(j) - int(i), 6 - int(j) + int(i))
        by_sep.setdefault(sep, set()).add(round(float(s), 12))
        assert float(rel) < 1e-6
    assert all(len(v) == 1 for v in by_sep.values())
    one = write(tmp_path, "theta = 0\ntau_us = 1\ndt_us = 0.01\nduration_us = 1\n", "one.cfg")
    assert main(["signal", "--config", one, "--out", str(tmp_path / "one")]) == EXIT_OK
    assert read_csv(tmp_path / "one" / "signal.csv") == [["i", "j", "S_closed", "S_numeric", "rel_defect"]]


@pytest.mark.parametrize("N", [2, 3])
def test_coord_columns_follow_basis_order(N):
    cols = coord_columns(N)
    assert len(cols) == N * N - 1 and cols[-1] == f"q_d{N - 2}"
    if N == 3:
        assert cols[:3] == ["q_s01", "q_s02", "q_s12"]


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, BASE)
    res = subprocess.run([sys.executable, "-m", "quditmeas", "simulate", "--config", cfg, "--out",
                          str(tmp_path / "o")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    res = subprocess.run([sys.executable, "-m", "quditmeas", "simulate", "--config", cfg],
                         capture_output=True, text=True)
    assert res.returncode == 2


@pytest.mark.parametrize("name", sorted(f for f in os.listdir(PRESETS) if f.endswith(".cfg")))
def test_presets_parse(name):
    cfg = load_config(os.path.join(PRESETS, name))
    assert cfg.initial is not None and cfg.n_traj >= 1
