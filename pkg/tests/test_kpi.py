import json

import numpy as np
import pytest

from hydrofcr.kpi import (
    SCHEMA_VERSION, KpiConfig, KpiError, KpiReport, Trace, compute_report, efficiency_series, mileage,
    number_of_movements, percent_delta, rbt_derivative_cdf, rms_te, tracking_error,
)

import oracles


def make_trace(length=600, **cols):
    n = length
    base = dict(
        time_s=np.arange(float(n)), f=np.full(n, 50.0), p_set=np.full(n, 27_000.0), p_pcc=np.full(n, 27_000.0),
        p_bess=np.zeros(n), p_m=np.full(n, 28_421.0), Q=np.full(n, 0.4), n=np.full(n, 25.0), H=np.full(n, 10.0),
        T_shaft=np.full(n, 180.0), gvo=np.full(n, 12.0), rba=np.full(n, 15.0), t_blade=np.full(n, 3.0),
        soc=np.full(n, 0.5),
    )
    base.update(cols)
    return Trace(**base)


def triangle(m, half=10, amp=1.0):
    up = np.linspace(0.0, amp, half + 1)
    seg = np.concatenate([up, up[::-1][1:]])
    return np.concatenate([np.zeros(3)] + [seg[1:] if i else seg for i in range(m)])


def test_tracking_error_examples():
    assert np.all(tracking_error([1.0, 2.0], [1.0, 2.0]) == 0)
    np.testing.assert_array_equal(tracking_error([100.0, 200.0], [0.0, 100.0]), [100.0, 100.0])
    assert tracking_error([27_000.0], [26_000.0])[0] > 0  # underproduction
    with pytest.raises(KpiError):
        tracking_error([1.0, 2.0], [1.0])
    tr = make_trace(p_pcc=np.full(600, 26_900.0))
    assert np.all(tracking_error(tr) == 100.0)


def test_rms_te_examples():
    assert rms_te(np.full(600, 7.5)) == pytest.approx(7.5)
    assert rms_te(np.concatenate([np.full(60, 3.0), np.full(60, 4.0)])) == pytest.approx(3.5355, abs=1e-4)
    alt = np.tile([5.0, -5.0], 60)
    assert rms_te(alt) == 0.0


def test_rms_te_window_and_partial_bin():
    te = np.concatenate([np.full(60, 2.0), np.full(60, 4.0), np.full(30, 100.0)])
    assert rms_te(te) == pytest.approx(np.sqrt((4 + 16) / 2))
    assert rms_te(te, window=(60, 150)) == 4.0
    assert rms_te(te, averaging_s=30.0) == pytest.approx(oracles.rms_of_minute_means(te, 30))
    with pytest.raises(KpiError):
        rms_te(te, window=(0, 30))
    with pytest.raises(KpiError):
        rms_te(te, window=(10, 500))


def test_mileage_examples():
    assert mileage([0, 1, 0.5, 0.5, 2]) == 3.0
    assert mileage(np.full(10, 4.2)) == 0.0
    assert mileage([0.0, 0.004, 0.008]) == 0.0
    x = np.random.default_rng(0).normal(size=200)
    assert mileage(x, eps=0.0) == pytest.approx(oracles.total_variation(x))
    assert mileage(x, eps=0.5) == pytest.approx(oracles.total_variation(x, eps=0.5))


def test_movements_examples():
    assert number_of_movements(np.linspace(0, 5, 50)) == 1
    assert number_of_movements(np.full(10, 1.0)) == 0
    for m in (1, 2, 5):
        tri = triangle(m)
        assert number_of_movements(tri) == 2 * m == oracles.movements(tri)


def test_movements_rest_restarts_count():
    x = np.concatenate([np.linspace(0, 1, 11), np.full(3, 1.0), np.linspace(1, 2, 11)])
    assert number_of_movements(x) == 2
    # a pause shorter than the rest time does not start a new movement
    assert number_of_movements(x, rest_s=10.0) == 1


def test_movements_rule_split():
    rng = np.random.default_rng(4)
    for x in [triangle(3), np.cumsum(rng.choice([-0.05, 0.0, 0.0, 0.05], size=300))]:
        on = number_of_movements(x, rule="onsets")
        rev = number_of_movements(x, rule="reversals")
        assert on + rev == number_of_movements(x)
    assert number_of_movements(triangle(3), rule="onsets") == 1
    assert number_of_movements(triangle(3), rule="reversals") == 5
    with pytest.raises(KpiError):
        number_of_movements(triangle(1), rule="peaks")


def test_movements_match_oracle_on_random_walks():
    rng = np.random.default_rng(9)
    for _ in range(50):
        x = np.cumsum(rng.choice([-0.05, 0.0, 0.0, 0.05], size=300))
        assert number_of_movements(x) == oracles.movements(x)


def test_rbt_cdf_examples():
    np.testing.assert_array_equal(rbt_derivative_cdf(np.full(20, 4.0)), np.zeros(20))
    np.testing.assert_allclose(rbt_derivative_cdf(0.3 * np.arange(20.0)), 0.3)
    signed = rbt_derivative_cdf(-2.0 * np.arange(5.0), absolute=False)
    np.testing.assert_allclose(signed, -2.0)
    cdf = rbt_derivative_cdf(np.sin(np.arange(100.0)))
    assert np.all(np.diff(cdf) >= 0)
    with pytest.raises(KpiError):
        rbt_derivative_cdf([1.0])


def test_efficiency_series():
    n = 100
    p_h = 1000 * 9.81 * 0.4 * 10.0
    tr = make_trace(n, p_m=np.full(n, 0.92 * p_h), p_pcc=np.full(n, 0.95 * 0.92 * p_h))
    eta_h, eta_g = efficiency_series(tr)
    np.testing.assert_allclose(eta_h, 0.92, atol=1e-6)
    np.testing.assert_allclose(eta_g / eta_h, 0.95)
    low = make_trace(n, Q=np.full(n, 0.005))
    assert np.all(np.isnan(efficiency_series(low)[0]))


def test_efficiency_excludes_battery_power():
    n = 100
    tr = make_trace(n, p_bess=np.full(n, 2_000.0), p_pcc=np.full(n, 29_000.0))
    _, eta_g = efficiency_series(tr)
    np.testing.assert_allclose(eta_g, 27_000.0 / (1000 * 9.81 * 0.4 * 10.0))


def test_trace_validation():
    with pytest.raises(KpiError):
        make_trace(10, gvo=np.zeros(9))
    with pytest.raises(KpiError):
        make_trace(3, time_s=np.array([0.0, 1.0, 3.0]))


def test_trace_csv_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    tr = make_trace(120, gvo=rng.uniform(5, 20, 120), soc=rng.uniform(0, 1, 120), n=rng.uniform(9, 25, 120))
    path = tmp_path / "trace.csv"
    tr.to_csv(path)
    header = path.read_text().splitlines()[0].split(",")
    assert header[:3] == ["time_s", "frequency", "power_setpoint"] and header[-1] == "hydraulic_efficiency"
    back = Trace.from_csv(path)
    np.testing.assert_allclose(back.gvo, tr.gvo, rtol=0, atol=0)
    np.testing.assert_allclose(back.soc, tr.soc, rtol=1e-15)
    np.testing.assert_allclose(back.n, tr.n, rtol=1e-15)


def test_report_and_json(tmp_path):
    rng = np.random.default_rng(2)
    tr = make_trace(600, p_pcc=27_000 + rng.normal(0, 50, 600), gvo=12 + np.cumsum(rng.normal(0, 0.02, 600)))
    rep = compute_report(tr, "only_hydro")
    assert rep.nom_rba == 0 and rep.mileage_rba == 0.0 and rep.mileage_gvo > 0
    doc = json.loads(rep.to_json())
    assert doc["schema_version"] == SCHEMA_VERSION
    for key in ("mode", "rms_te", "mileage_gvo", "mileage_rba", "nom_gvo", "nom_rba", "rbt_derivative_cdf",
                "rbt_p95", "mean_eta_h", "mean_eta_g", "percent_deltas"):
        assert key in doc
    back = KpiReport.from_json(rep.to_json())
    assert back.to_json() == rep.to_json()
    doc["schema_version"] = 2
    with pytest.raises(KpiError):
        KpiReport.from_dict(doc)


def test_percent_deltas():
    assert percent_delta(50.0, 100.0) == -50.0
    assert percent_delta(0.0, 0.0) == 0.0
    assert percent_delta(1.0, 0.0) is None
    tr = make_trace(600, p_pcc=np.full(600, 26_900.0))
    base = compute_report(tr, "a")
    assert all(v == 0.0 for v in base.relative_to(base).percent_deltas.values())


def test_report_is_pure():
    rng = np.random.default_rng(4)
    tr = make_trace(600, t_blade=rng.normal(3, 1, 600), rba=15 + np.cumsum(rng.normal(0, 0.05, 600)))
    assert compute_report(tr).to_json() == compute_report(tr).to_json()


def test_kpi_config_validation():
    with pytest.raises(ValueError):
        KpiConfig(averaging_s=0.0)
    with pytest.raises(ValueError):
        KpiConfig(eps_move=-1.0)
