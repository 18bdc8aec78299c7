import json

import pytest

from rydgauge import cli
from rydgauge.output import read_csv, sha256


def run(*argv):
    return cli.main(list(argv))


@pytest.fixture(scope="module")
def fig3a(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig3a")
    assert run("potentials", "--preset", "fig3a", "--out", str(out), "--threads", "1") == 0
    return out


def test_fig3a_two_curves(fig3a):
    header, rows = read_csv(fig3a / "fig3a.csv")
    assert header == ["delta_ratio", "rho", "z", "phi", "label", "energy"]
    assert sorted({r[0] for r in rows}) == ["1.3", "3"]
    assert len({(r[0], r[4]) for r in rows}) == 2


def test_manifest(fig3a):
    m = json.loads((fig3a / "fig3a.manifest.json").read_text())
    assert m["config"]["preset"] == "fig3a"
    assert m["config"]["command"] == "potentials"
    assert m["package_version"]
    assert m["wall_time_s"] >= 0
    (art,) = m["artifacts"]
    assert art["sha256"] == sha256(fig3a / art["file"])
    assert art["rows"] == len(read_csv(fig3a / art["file"])[1])


def test_deterministic_and_reproducible_from_manifest(fig3a, tmp_path):
    assert run("potentials", "--config", str(fig3a / "fig3a.manifest.json"), "--out", str(tmp_path),
               "--threads", "2") == 0
    assert (tmp_path / "fig3a.csv").read_bytes() == (fig3a / "fig3a.csv").read_bytes()


def test_csv_formatting(fig3a):
    text = (fig3a / "fig3a.csv").read_text()
    assert "\r" not in text and text.endswith("\n")
    value = text.splitlines()[1].split(",")[-1]
    assert len(value.lstrip("-").replace(".", "").lstrip("0")) <= 12


def test_flags_override_preset(tmp_path):
    assert run("bound", "--preset", "fig4b", "--delta-ratio", "2.5", "--out", str(tmp_path)) == 0
    m = json.loads((tmp_path / "fig4b.manifest.json").read_text())
    assert m["config"]["model"]["delta_ratio"] == 2.5
    header, rows = read_csv(tmp_path / "fig4b.csv")
    assert header == ["M_mot", "level_index", "energy_hbar_delta", "energy_hbar_OmegaL_rel"]
    assert [int(r[0]) for r in rows] == list(range(-3, 4))


def test_fig4b_ladder(tmp_path):
    assert run("bound", "--preset", "fig4b", "--out", str(tmp_path)) == 0
    summary = json.loads((tmp_path / "fig4b.manifest.json").read_text())["summary"]
    assert summary["ground_M"] == 1
    assert summary["E2_minus_E1_OmegaL"] == pytest.approx(2.76, rel=0.05)


def test_gauge_commutator_preset(tmp_path):
    assert run("gauge", "--preset", "fig5d", "--out", str(tmp_path)) == 0
    header, rows = read_csv(tmp_path / "fig5d.csv")
    assert header == ["delta_ratio", "rho", "z", "phi", "quantity", "real", "imag"]
    assert {r[4] for r in rows} == {"C11", "C12", "C21", "C22"}


def test_scales_in_manifest(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"command": "bound", "preset": "fig4b",
                               "scales": {"species": "K39", "R0": 2.85e-6, "delta_abs": 1e7}}))
    assert run("bound", "--config", str(cfg), "--out", str(tmp_path)) == 0
    scales = json.loads((tmp_path / "fig4b.manifest.json").read_text())["summary"]["scales"]
    assert scales["Omega_L_over_2pi_Hz"] == pytest.approx(31.9, rel=0.01)


@pytest.mark.parametrize("doc", [
    {"model": {"delta_ratio": 3.0, "kapa": 1e-6}},
    {"bound": {"levels": 0}},
    {"unknown": 1},
    {"map": {"plane": "yz"}},
])
def test_schema_rejection(tmp_path, doc, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(doc))
    with pytest.raises(SystemExit) as info:
        run("potentials", "--config", str(cfg), "--out", str(tmp_path))
    assert info.value.code == 2
    assert "invalid config" in capsys.readouterr().err


def test_usage_errors(tmp_path):
    for argv in (["bound", "--preset", "fig6"], ["bound", "--preset", "fig9"],
                 ["potentials", "--delta-ratio", "-1"], ["potentials", "--config", str(tmp_path / "none.json")],
                 ["explode"]):
        with pytest.raises(SystemExit) as info:
            run(*argv, "--out", str(tmp_path))
        assert info.value.code == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bound": {"n": 4000, "M_min": 0, "M_max": 0}}))
    assert run("bound", "--config", str(cfg), "--out", str(tmp_path)) == 1
    assert "ResolutionError" in capsys.readouterr().err


def test_long_dynamics_refused(tmp_path, capsys):
    assert run("dynamics", "--t-end", "2000", "--out", str(tmp_path)) == 1
    assert "limit" in capsys.readouterr().err


def test_fig6_preset(tmp_path):
    assert run("dynamics", "--preset", "fig6", "--out", str(tmp_path)) == 0
    header, rows = read_csv(tmp_path / "fig6.csv")
    assert header == ["tau", "x", "y", "rho", "P1", "P2", "Psum", "energy"]
    P1, P2 = float(rows[-1][4]), float(rows[-1][5])
    assert 0.35 <= P1 <= 0.65 and 0.35 <= P2 <= 0.65


def test_verify_command(tmp_path, capsys):
    assert run("verify", "--out", str(tmp_path)) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 14


def test_presets_cover_all_figures():
    assert set(cli.PRESETS) == {"fig2a", "fig2b", "fig3a", "fig3b", "fig4a", "fig4b",
                                "fig5a", "fig5b", "fig5c", "fig5d", "fig6"}
    for name, preset in cli.PRESETS.items():
        assert preset["command"] in cli.COMMANDS, name
