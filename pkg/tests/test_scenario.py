import numpy as np
import pytest

from hydrofcr import scenario
from hydrofcr.scenario import (
    ALL_MODES, BASELINE, FrequencyParseError, FrequencySeries, ScenarioConfig, ScenarioError, compare_scenarios,
    format_comparison, load_frequency_csv, load_reports, run_scenario, run_trace, synthesize_frequency,
    write_comparison_csv,
)

SHORT = dict(duration_s=900.0, warmup_s=60.0)


def write(tmp_path, text, name="f.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_two_row_file(tmp_path):
    fs = load_frequency_csv(write(tmp_path, "time_s,frequency_hz\n0,50.0\n1,49.98\n"))
    assert len(fs) == 2 and fs.step == 1.0


def test_band_edges_accepted(tmp_path):
    fs = load_frequency_csv(write(tmp_path, "time_s,frequency_hz\n0,49\n1,51\n2,50\n"))
    assert fs.frequency_hz.tolist() == [49.0, 51.0, 50.0]


@pytest.mark.parametrize("body, line", [
    ("0,50\n1,44\n", 3),
    ("0,50\n1,abc\n", 3),
    ("0,50\n1,50\n3,50\n", 4),
    ("0,50\n1,50,7\n", 3),
    ("0,50\n0,50\n", 3),
    ("0,50\n1,nan\n", 3),
])
def test_parse_errors_name_the_line(tmp_path, body, line):
    with pytest.raises(FrequencyParseError, match=f":{line}:"):
        load_frequency_csv(write(tmp_path, "time_s,frequency_hz\n" + body))


def test_bad_header_and_empty(tmp_path):
    with pytest.raises(FrequencyParseError, match=":1:"):
        load_frequency_csv(write(tmp_path, "t,f\n0,50\n"))
    with pytest.raises(FrequencyParseError):
        load_frequency_csv(write(tmp_path, "time_s,frequency_hz\n"))


def test_resample_zero_order_hold(tmp_path):
    fs = load_frequency_csv(write(tmp_path, "time_s,frequency_hz\n0,50\n1,49.9\n"), dt=0.25)
    assert fs.frequency_hz.tolist() == [50.0] * 4 + [49.9] * 4


def test_series_validation():
    with pytest.raises(ScenarioError):
        FrequencySeries(np.array([0.0, 1.0]), np.array([50.0, 56.0]))
    with pytest.raises(ScenarioError):
        FrequencySeries(np.array([0.0, 1.0, 3.0]), np.full(3, 50.0))


def test_csv_round_trip(tmp_path):
    fs = synthesize_frequency(3, 120.0, 60.0)
    fs.to_csv(tmp_path / "s.csv")
    back = load_frequency_csv(tmp_path / "s.csv")
    np.testing.assert_array_equal(back.frequency_hz, fs.frequency_hz)


def test_synthetic_series_shape(freq, cfg):
    split = cfg.frequency.split_at_s
    again = synthesize_frequency(cfg.seed, cfg.duration_s, split)
    assert again.frequency_hz.tobytes() == freq.frequency_hz.tobytes()
    assert len(freq) == 43_200 and freq.step == 1.0
    pre = freq.frequency_hz[freq.time_s < split]
    assert 0.010 <= pre.std() <= 0.040
    assert abs(pre.mean() - 50.0) < 0.01
    t_min = freq.time_s[np.argmin(freq.frequency_hz)]
    assert split <= t_min <= split + 60.0
    post = freq.frequency_hz[freq.time_s >= split + 900.0]
    assert post.mean() < 50.0 and post.std() > pre.std()
    other = synthesize_frequency(cfg.seed + 1, cfg.duration_s, split)
    assert not np.array_equal(other.frequency_hz, freq.frequency_hz)


def test_config_defaults_and_unknown_keys(tmp_path):
    cfg = ScenarioConfig()
    assert (cfg.duration_s, cfg.p_disp, cfg.head) == (43_200.0, 27_000.0, 10.0)
    assert cfg.modes == ALL_MODES
    p = write(tmp_path, 'seed = 7\nmodes = ["varspeed"]\n[plant]\ngvo_rate = 3.0\n[droop]\ndead_band = 0.001\n', "c.toml")
    c = ScenarioConfig.from_toml(p)
    assert c.seed == 7 and c.modes == ("varspeed",) and c.plant.gvo_rate == 3.0 and c.droop.dead_band == 0.001
    assert c.with_seed(9).seed == 9
    with pytest.raises(ScenarioError, match="bogus"):
        ScenarioConfig.from_dict({"bogus": 1})
    with pytest.raises(ScenarioError, match="plant"):
        ScenarioConfig.from_dict({"plant": {"gvo_rat": 1.0}})
    with pytest.raises(ScenarioError):
        ScenarioConfig.from_dict({"modes": ["steam"]})
    with pytest.raises(ScenarioError):
        ScenarioConfig.from_dict({"duration_s": -1.0})
    with pytest.raises(ScenarioError):
        ScenarioConfig.from_toml(write(tmp_path, "seed = = 1\n", "bad.toml"))


@pytest.mark.parametrize("mode", ALL_MODES)
def test_nominal_frequency_tracks_dispatch(assets, mode):
    freq = FrequencySeries(np.arange(900.0), np.full(900, 50.0))
    trace, rep = run_scenario(ScenarioConfig(**SHORT), freq, mode, assets)
    assert rep.rms_te < 0.01 * 27_000.0
    assert len(trace) == 900


def test_frequency_drop_raises_output(assets):
    f = np.full(900, 50.0)
    f[300:] = 49.9
    tr = run_trace(ScenarioConfig(**SHORT), "only_hydro", FrequencySeries(np.arange(900.0), f), assets)
    assert tr.p_set[299] == 27_000.0 and tr.p_set[400] == pytest.approx(39_500.0)
    assert tr.p_pcc[-1] > tr.p_pcc[250] + 10_000.0
    assert tr.gvo[-1] > tr.gvo[250]


def test_run_checks_inputs(assets):
    short = FrequencySeries(np.arange(100.0), np.full(100, 50.0))
    with pytest.raises(ScenarioError):
        run_trace(ScenarioConfig(**SHORT), "only_hydro", short, assets)
    with pytest.raises(ScenarioError):
        run_trace(ScenarioConfig(**SHORT), "pumped", short, assets)


def test_trace_invariants_over_batch(batch):
    results, _ = batch
    for mode, (tr, rep) in results.items():
        assert len(tr) == 43_200
        assert np.all((tr.soc >= 0.0) & (tr.soc <= 1.0))
        assert rep.mode == mode
    hyb = results["bess_9kw"][0]
    assert np.any(hyb.p_bess != 0.0)
    assert np.all(results["only_hydro"][0].p_bess == 0.0)


def test_compare_against_baseline(batch, tmp_path):
    results, _ = batch
    reports = {m: r for m, (_, r) in results.items()}
    cmp = compare_scenarios(reports)
    assert all(v in (0.0, None) for v in cmp[BASELINE].percent_deltas.values())
    assert cmp["varspeed"].percent_deltas["mileage_rba"] == -100.0
    assert cmp["bess_5kw"].percent_deltas["rms_te"] < 0
    write_comparison_csv(cmp, tmp_path / "cmp.csv")
    lines = (tmp_path / "cmp.csv").read_text().splitlines()
    assert lines[0].startswith("mode,rms_te,rms_te_pct") and len(lines) == 5
    assert "rms_te" in format_comparison(cmp)
    with pytest.raises(ScenarioError):
        compare_scenarios({"varspeed": reports["varspeed"]})


def test_load_reports(batch, tmp_path):
    results, _ = batch
    for m, (_, r) in results.items():
        (tmp_path / f"{m}.kpi.json").write_text(r.to_json())
    back = load_reports(tmp_path)
    assert sorted(back) == sorted(results)
    assert back["varspeed"].to_json() == results["varspeed"][1].to_json()


def test_mode_table_covers_all_modes():
    assert set(scenario.MODE_TABLE) == set(ALL_MODES)
