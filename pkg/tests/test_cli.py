import csv
import io
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from mimcavity import cli
from mimcavity.errors import ConfigError, NumericalError


def run(args, tmp_path=None, config=None):
    if config is not None:
        p = tmp_path / "run.toml"
        p.write_text(config)
        args = args + ["--config", str(p)]
    buf = io.StringIO()
    code = cli.main(args, stream=buf)
    return code, buf.getvalue()


def table(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_print_config_round_trip(tmp_path):
    code, text = run(["print-config"])
    assert code == 0
    p = tmp_path / "c.toml"
    p.write_text(text)
    assert cli.load_config(p) == cli.RunConfig()
    # every field is listed explicitly
    for f in cli.RunConfig.__dataclass_fields__:
        assert f"\n{f} = " in text


def test_config_errors_exit_2(tmp_path, capsys):
    assert run(["modes"], tmp_path, "lenght_m = 0.06\n")[0] == 2
    assert "unknown configuration keys" in capsys.readouterr().err
    assert run(["modes"], tmp_path, "length_m = 'six'\n")[0] == 2
    assert run(["modes"], tmp_path, "length_m = [\n")[0] == 2
    assert run(["modes"], tmp_path, "refractive_index = 0.5\n")[0] == 2
    assert run(["modes", "--config", str(tmp_path / "missing.toml")])[0] == 2


def test_numerical_failure_exit_3(monkeypatch, capsys):
    def boom(cfg, out, q=None):
        raise NumericalError("diverged")

    monkeypatch.setitem(cli.COMMANDS, "modes", boom)
    assert cli.main(["modes"]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_console_script_exit_code(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("nope = 1\n")
    r = subprocess.run([sys.executable, "-m", "mimcavity.cli", "modes", "--config", str(bad)],
                       capture_output=True, text=True)
    assert r.returncode == 2


def test_modes_table_reference_cavity():
    code, text = run(["modes", "--k-max", "6"])
    rows = table(text)
    assert code == 0 and len(rows) == 6
    assert set(rows[0]) >= {"k", "omega_rad_s", "wavelength_nm", "parity", "domega_dq_rad_s_m",
                            "d2omega_dq2_rad_s_m2", "spacing_rad_s"}
    w = np.array([float(r["omega_rad_s"]) for r in rows])
    assert np.any(np.abs(w / 1.77e15 - 1) < 0.01)
    gaps = np.diff(w)
    assert abs((gaps[0] + gaps[1]) / 3e10 - 1) < 0.15
    assert {int(r["parity"]) for r in rows} == {-1, 1}
    assert text.count("\r\n") == 7  # header plus rows, CRLF line ends


def test_modes_deterministic():
    assert run(["modes", "--k-max", "4"])[1] == run(["modes", "--k-max", "4"])[1]


def test_modes_empty_cavity_exact(tmp_path):
    code, text = run(["modes", "--k-max", "5"], tmp_path,
                     "length_m = 1.0\nrefractive_index = 1.0\ntarget_wavelength_nm = 4e8\n")
    c = 299_792_458.0
    for r in table(text):
        assert float(r["omega_rad_s"]) == pytest.approx(int(r["k"]) * math.pi * c, rel=1e-12)
        assert float(r["domega_dq_rad_s_m"]) == 0.0


def test_modes_mirror_positions(tmp_path):
    cfg = "length_m = 0.001\ntarget_wavelength_nm = 1000.0\n"
    _, a = run(["modes", "--k-max", "4", "--q", "0.0003"], tmp_path, cfg)
    _, b = run(["modes", "--k-max", "4", "--q", "0.0007"], tmp_path, cfg)
    ra, rb = table(a), table(b)
    for x, y in zip(ra, rb):
        assert x["k"] == y["k"]
        assert float(x["omega_rad_s"]) == pytest.approx(float(y["omega_rad_s"]), rel=1e-13)
        assert float(x["domega_dq_rad_s_m"]) == pytest.approx(-float(y["domega_dq_rad_s_m"]), rel=1e-6)
        assert float(x["d2omega_dq2_rad_s_m2"]) == pytest.approx(float(y["d2omega_dq2_rad_s_m2"]), rel=1e-4)


def test_json_format():
    code, text = run(["modes", "--k-max", "3", "--format", "json"])
    data = json.loads(text)
    assert code == 0 and len(data) == 3 and "omega_rad_s" in data[0]


def test_couplings_checks(tmp_path):
    out = tmp_path / "o"
    code, _ = run(["couplings", "--k-max", "8", "--out", str(out)])
    assert code == 0
    summary = json.loads((out / "couplings_checks.json").read_text())
    assert all(c["pass"] for c in summary["checks"].values())
    rows = table((out / "couplings.csv").read_text())
    assert all(float(r["g_per_m"]) == 0.0 for r in rows if r["k"] == r["j"])
    assert not [f for f in os.listdir(out) if f.startswith(".tmp")]


def test_shift_and_eta_run():
    code, text = run(["eta"])
    data = json.loads(text)
    assert code == 0 and data["k2"] == data["k1"] + 1 and data["eta_rad_s"] != 0
    assert run(["shift", "--k-max", "4"])[0] == 0


def _reproduce(tmp_path=None, config=None):
    code, text = run(["reproduce-paper", "--format", "json"], tmp_path, config)
    assert code == 0
    return {r["quantity"]: r for r in json.loads(text)["rows"]}


def test_reproduce_default_rows():
    rows = _reproduce()
    for name in ("mode_frequency_rad_s", "mode_spacing_rad_s", "curvature_rad_s_nm2",
                 "per_mode_coupling_rad_s_nm2"):
        assert rows[name]["pass"] is True, name
    assert rows["window_sum_constant_rad_s_nm2"]["pass"] is None
    # both doublet members are reported; their curvatures have opposite sign
    partner = rows["partner_curvature_rad_s_nm2"]
    assert partner["computed"] * rows["curvature_rad_s_nm2"]["computed"] < 0
    assert rows["mode_frequency_rad_s"]["note"].split("=")[1] in partner["note"].split("k=")[-1]
    for r in rows.values():
        assert r["computed"] is not None


def test_reproduce_chi_zero_fails_with_explanation(tmp_path):
    rows = _reproduce(tmp_path, "refractive_index = 1.0\n")
    for name in ("curvature_rad_s_nm2", "per_mode_coupling_rad_s_nm2",
                 "window_sum_quoted_spacing_rad_s_nm2"):
        assert rows[name]["pass"] is False
        assert rows[name]["computed"] == 0.0
        assert "susceptibility" in rows[name]["note"]


def test_reproduce_window_sum_depends_on_window(tmp_path):
    full = _reproduce()["window_sum_quoted_spacing_rad_s_nm2"]["computed"]
    half = _reproduce(tmp_path, "window_high_rad_s = 5.5e15\n")["window_sum_quoted_spacing_rad_s_nm2"]
    assert half["computed"] < 0.5 * full


def test_reproduce_row_failure_is_isolated(monkeypatch):
    from mimcavity import effective

    def broken(*a, **k):
        raise RuntimeError("no")

    monkeypatch.setattr(effective, "renormalized_mass_correction", broken)
    rows = _reproduce()
    assert rows["vacuum_mass_correction_kg"]["pass"] is False
    assert "RuntimeError" in rows["vacuum_mass_correction_kg"]["note"]
    assert rows["mode_frequency_rad_s"]["pass"] is True


FAST = "sim_cells = 200\nsim_mode = 3\nsim_t_end = 20.0\n"


def test_classical_static_scenario(tmp_path):
    out = tmp_path / "o"
    cfg = FAST + 'scenario = "static"\n'
    code, _ = run(["classical", "--out", str(out)], tmp_path, cfg)
    assert code == 0
    s = json.loads((out / "classical_static.json").read_text())
    assert s["energy_drift"] < 1e-3
    first = (out / "classical_static.csv").read_bytes()
    run(["classical", "--out", str(out)], tmp_path, cfg)
    assert (out / "classical_static.csv").read_bytes() == first


def test_quantum_two_mode_scenario(tmp_path):
    code, text = run(["quantum"], tmp_path, 'scenario = "two-mode-resonance"\n')
    assert code == 0
    summary = json.loads(text[text.index("{"):])
    assert abs(summary["relative_error"]) < 1e-4


def test_unknown_scenario(tmp_path):
    assert run(["classical"], tmp_path, 'scenario = "warp"\n')[0] == 2
    assert run(["quantum"], tmp_path, 'scenario = "warp"\n')[0] == 2


def test_load_config_types():
    cfg = cli.load_config(None, {"length_m": 1, "surrogate": True})
    assert cfg.length_m == 1.0 and cfg.surrogate is True
    with pytest.raises(ConfigError):
        cli.load_config(None, {"mode_count": 2.5})
    with pytest.raises(ConfigError):
        cli.load_config(None, {"surrogate": 1})
