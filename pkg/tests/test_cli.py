from __future__ import annotations

import json

import numpy as np
import pytest

from secrecy_region import cli

SCENARIO = """\
name = "tiny"
power_db = [0.0]
grid_points = 3
schemes = ["optimal", "no-an", "tdma"]

[channels]
re = [[1.1, -0.2], [0.3, 0.7], [-0.6, 0.4]]
im = [[0.4, 0.9], [-0.8, 0.2], [0.5, -0.3]]
"""


@pytest.fixture
def scenario(tmp_path):
    p = tmp_path / "tiny.toml"
    p.write_text(SCENARIO)
    return p


def run_cli(scenario, out, *extra):
    return cli.main(["--scenario", str(scenario), "--out", str(out), *extra])


def test_bundled_scenarios_parse():
    for name in ("five_user", "five_user_robust"):
        label, text = cli.resolve_scenario(name)
        sc = cli.parse_scenario(text, label)
        assert sc.channels.shape == (5, 2)
        assert sc.power_db == [20.0]
    robust = cli.parse_scenario(*reversed(cli.resolve_scenario("five_user_robust")))
    assert np.all(robust.radii == 0.2)


def test_end_to_end_and_byte_stable(scenario, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run_cli(scenario, out1, "--dump-covariances") == cli.EXIT_OK
    assert run_cli(scenario, out2, "--dump-covariances") == cli.EXIT_OK
    for stem in ("optimal_0dB", "no-an_0dB", "tdma_0dB"):
        a = (out1 / f"{stem}.csv").read_bytes()
        assert a == (out2 / f"{stem}.csv").read_bytes()
        lines = a.decode().splitlines()
        assert lines[0] == ",".join(cli.CSV_COLUMNS)
        assert len(lines) == 4
    summary = json.loads((out1 / "summary.json").read_text())
    assert summary["config"]["scenario"] == "tiny"
    assert all(run["status"] == "ok" for run in summary["runs"])
    assert all(run["within_budget"] for run in summary["runs"] if "within_budget" in run)
    assert summary["dominance"] and all(c["holds"] for c in summary["dominance"])
    cov = json.loads((out1 / "optimal_0dB_covariances.json").read_text())
    assert len(cov) == 3
    Qc = np.array(cov[0]["Qc"]["re"]) + 1j * np.array(cov[0]["Qc"]["im"])
    np.testing.assert_allclose(Qc, Qc.conj().T, atol=1e-12)


def test_empty_scheme_list_is_fatal(scenario, tmp_path, capsys):
    assert run_cli(scenario, tmp_path / "o", "--schemes", "") == cli.EXIT_FATAL
    assert "scheme" in capsys.readouterr().err


def test_unknown_scheme_flag(scenario, tmp_path):
    assert run_cli(scenario, tmp_path / "o", "--schemes", "optimal,bogus") == cli.EXIT_FATAL


def test_malformed_toml_reports_line(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text('name = "x"\npower_db = [20.0\n')
    assert run_cli(p, tmp_path / "o") == cli.EXIT_FATAL
    err = capsys.readouterr().err
    assert f"{p}:" in err


def test_bad_scheme_in_file_reports_its_line(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text(SCENARIO.replace('"tdma"', '"tdmx"'))
    assert run_cli(p, tmp_path / "o") == cli.EXIT_FATAL
    assert f"{p}:4:" in capsys.readouterr().err


def test_bad_channels_report_line(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text(SCENARIO.replace("[0.5, -0.3]]", "[0.5]]"))
    assert run_cli(p, tmp_path / "o") == cli.EXIT_FATAL
    assert f"{p}:6:" in capsys.readouterr().err


def test_missing_scenario(tmp_path):
    assert run_cli(tmp_path / "nope.toml", tmp_path / "o") == cli.EXIT_FATAL


def test_failed_combination_gives_partial_exit(scenario, tmp_path, monkeypatch):
    real = cli.run_scheme

    def flaky(scheme, config, seed=0):
        if scheme == "tdma":
            raise RuntimeError("boom")
        return real(scheme, config, seed)

    monkeypatch.setattr(cli, "run_scheme", flaky)
    out = tmp_path / "o"
    assert run_cli(scenario, out) == cli.EXIT_PARTIAL
    summary = json.loads((out / "summary.json").read_text())
    bad = [r for r in summary["runs"] if r["scheme"] == "tdma"][0]
    assert bad["status"] == "error" and "boom" in bad["error"]
    assert (out / "optimal_0dB.csv").exists()


def test_status_cell_sanitized():
    assert cli._status_cell("error: a, b\nc") == "error: a; b;c"


def test_dominance_violation_flagged():
    entries = [
        {"scheme": "optimal", "power_db": 0.0, "tau": [0.0, 1.0], "secrecy": [1.0, 0.5]},
        {"scheme": "no-an", "power_db": 0.0, "tau": [0.0, 1.0], "secrecy": [1.2, None]},
    ]
    check = [c for c in cli.dominance_checks(entries) if c["lower"] == "no-an"][0]
    assert not check["holds"]
    assert check["min_margin"] == pytest.approx(-0.2)
