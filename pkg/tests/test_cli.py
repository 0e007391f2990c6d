import json

import pytest

from hydrofcr.cli import main
from hydrofcr.hillchart import GridSpec, generate_training_set, write_training_csv

SHORT_TOML = """\
duration_s = 900.0
warmup_s = 60.0

[frequency]
split_at_s = 450.0
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory, surrogate):
    d = tmp_path_factory.mktemp("cli")
    (d / "short.toml").write_text(SHORT_TOML)
    surrogate.to_json(d / "surrogate.json")
    return d


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def error_of(err):
    doc = json.loads(err.strip().splitlines()[-1])
    assert set(doc) == {"error", "message"}
    return doc


def test_gen_hillchart(capsys, tmp_path):
    code, out, _ = run(capsys, "gen-hillchart", "--out", tmp_path, "--seed", 5)
    assert code == 0
    assert json.loads(out)["rows"] == 31 * 26 * 11
    assert (tmp_path / "training.csv").read_text().startswith("alpha_deg,beta_deg,n_ed,eta,q_ed\n")


def test_fit_surrogate_from_training_file(capsys, tmp_path, chart):
    ts = generate_training_set(chart, GridSpec(alpha_max=10.0, beta_min=12.0, beta_max=22.0, n_ed_count=4), 0.003, 1)
    write_training_csv(ts, tmp_path / "t.csv")
    code, out, _ = run(capsys, "fit-surrogate", "--training", tmp_path / "t.csv", "--out", tmp_path)
    assert code == 0
    info = json.loads(out)
    assert info["r2"] > 0.9 and (tmp_path / "surrogate.json").exists()


def test_gen_cam(capsys, workdir, tmp_path):
    code, out, _ = run(capsys, "gen-cam", "--surrogate", workdir / "surrogate.json", "--out", tmp_path)
    assert code == 0
    for name in ("cam_kaplan.csv", "cam_kaplan.json", "cam_varspeed.csv", "cam_varspeed.json"):
        assert (tmp_path / name).exists()


def test_gen_frequency(capsys, workdir, tmp_path):
    code, out, _ = run(capsys, "gen-frequency", "--config", workdir / "short.toml", "--out", tmp_path)
    assert code == 0 and json.loads(out)["samples"] == 900
    assert (tmp_path / "frequency.svg").read_text().lstrip().startswith("<?xml")


def test_simulate_compare_report(capsys, workdir, tmp_path):
    sim = tmp_path / "sim"
    code, out, _ = run(capsys, "simulate", "--config", workdir / "short.toml", "--surrogate",
                       workdir / "surrogate.json", "--modes", "only_hydro,varspeed", "--out", sim)
    assert code == 0 and json.loads(out)["modes"] == ["only_hydro", "varspeed"]
    for name in ("only_hydro.trace.csv", "varspeed.kpi.json", "comparison.csv", "comparison.txt"):
        assert (sim / name).exists()
    assert list(sim.glob("*.svg"))

    code, out, _ = run(capsys, "compare", "--in", sim, "--out", tmp_path / "cmp")
    assert code == 0 and "rms_te" in out
    assert (tmp_path / "cmp" / "comparison.csv").exists()

    code, out, _ = run(capsys, "report", "--in", sim, "--out", tmp_path / "plots")
    assert code == 0
    assert all(p.endswith(".svg") for p in json.loads(out.strip().splitlines()[-1])["plots"])


def test_simulate_with_frequency_file(capsys, workdir, tmp_path):
    f = tmp_path / "f.csv"
    f.write_text("time_s,frequency_hz\n" + "".join(f"{k},{50.0 if k < 400 else 49.95}\n" for k in range(900)))
    code, _, _ = run(capsys, "simulate", "--config", workdir / "short.toml", "--surrogate", workdir / "surrogate.json",
                     "--freq", f, "--modes", "bess_5kw", "--out", tmp_path / "o")
    assert code == 0
    assert (tmp_path / "o" / "bess_5kw.kpi.json").exists()


def test_unknown_config_key_is_a_json_error(capsys, tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("durration_s = 5\n")
    code, _, err = run(capsys, "gen-frequency", "--config", cfg, "--out", tmp_path)
    assert code == 2
    doc = error_of(err)
    assert doc["error"] == "ScenarioError" and "durration_s" in doc["message"]


def test_bad_frequency_file_reports_line(capsys, workdir, tmp_path):
    f = tmp_path / "f.csv"
    f.write_text("time_s,frequency_hz\n0,50\n1,60\n")
    code, _, err = run(capsys, "simulate", "--config", workdir / "short.toml", "--surrogate",
                       workdir / "surrogate.json", "--freq", f, "--out", tmp_path / "o")
    assert code == 2 and ":3:" in error_of(err)["message"]


def test_unknown_mode(capsys, workdir, tmp_path):
    code, _, err = run(capsys, "simulate", "--config", workdir / "short.toml", "--modes", "pumped", "--out", tmp_path)
    assert code == 2 and "pumped" in error_of(err)["message"]


def test_missing_input_directory(capsys, tmp_path):
    code, _, err = run(capsys, "report", "--in", tmp_path / "nothing", "--out", tmp_path)
    assert code == 2
    error_of(err)


def test_usage_errors_are_json(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["teleport"])
    assert exc.value.code == 2
    assert error_of(capsys.readouterr().err)["error"] == "UsageError"
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--seed", "x"])
    assert exc.value.code == 2
