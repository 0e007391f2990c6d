"""Frequency input, scenario configuration and batch orchestration.

A batch fits the efficiency surrogate once, builds both CAM tables, then
runs every requested test configuration against the same frequency series,
one thread per configuration.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kpi
from .cam import CamTable, SetpointMap, build_kaplan_cam, build_varspeed_cam
from .core import DroopConfig, TurbineGeometry
from .hillchart import GroundTruthHillChart, GridSpec, generate_training_set
from .kpi import KpiConfig, KpiReport, Trace, compute_report
from .simulate import (
    C_F, C_N, C_PBESS, C_PCC, C_PM, C_PSET, C_Q, C_GVO, C_H, C_RBA, C_RBT, C_SOC, C_TSHAFT,
    MODE_HYBRID, MODE_ONLY_HYDRO, MODE_VARSPEED, run_kernel,
)
from .surrogate import EfficiencySurrogate, FitConfig, fit_surrogate

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

FREQ_HEADER = ("time_s", "frequency_hz")
FREQ_BAND = (45.0, 55.0)

ONLY_HYDRO, BESS_5KW, BESS_9KW, VARSPEED = "only_hydro", "bess_5kw", "bess_9kw", "varspeed"
ALL_MODES = (ONLY_HYDRO, BESS_5KW, BESS_9KW, VARSPEED)
BASELINE = ONLY_HYDRO
# mode -> (kernel code, BESS power W, BESS energy Wh)
MODE_TABLE = {
    ONLY_HYDRO: (MODE_ONLY_HYDRO, 0.0, 0.0),
    BESS_5KW: (MODE_HYBRID, 5_000.0, 5_000.0),
    BESS_9KW: (MODE_HYBRID, 9_000.0, 9_000.0),
    VARSPEED: (MODE_VARSPEED, 0.0, 0.0),
}


class ScenarioError(ValueError):
    pass


class FrequencyParseError(ScenarioError):
    pass


# --------------------------------------------------------------------------- frequency


@dataclass(frozen=True, eq=False)
class FrequencySeries:
    time_s: np.ndarray
    frequency_hz: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.time_s, dtype=float)
        f = np.asarray(self.frequency_hz, dtype=float)
        if t.shape != f.shape or t.ndim != 1 or len(t) == 0:
            raise ScenarioError("time and frequency must be equal-length non-empty 1-D arrays")
        if len(t) > 1:
            steps = np.diff(t)
            if steps[0] <= 0 or not np.allclose(steps, steps[0], rtol=0, atol=1e-6):
                raise ScenarioError("frequency series step is not uniform")
        lo, hi = FREQ_BAND
        if np.any((f < lo) | (f > hi)) or not np.all(np.isfinite(f)):
            raise ScenarioError(f"frequency outside the [{lo}, {hi}] Hz sanity band")
        object.__setattr__(self, "time_s", t)
        object.__setattr__(self, "frequency_hz", f)

    def __len__(self):
        return len(self.time_s)

    @property
    def step(self):
        return float(self.time_s[1] - self.time_s[0]) if len(self) > 1 else 1.0

    @property
    def duration(self):
        return len(self) * self.step

    def resample(self, dt):
        """Zero-order hold onto a ``dt`` grid covering the same span."""
        n = int(math.floor(self.duration / dt + 1e-9))
        t = self.time_s[0] + dt * np.arange(n)
        idx = np.minimum(((t - self.time_s[0]) / self.step + 1e-9).astype(int), len(self) - 1)
        return FrequencySeries(t, self.frequency_hz[idx])

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(FREQ_HEADER)
            for t, f in zip(self.time_s, self.frequency_hz):
                w.writerow([repr(float(t)), repr(float(f))])


def load_frequency_csv(path, dt=None) -> FrequencySeries:
    """Parse and validate a ``time_s,frequency_hz`` file.

    Errors name the offending line.  With ``dt`` the series is resampled to
    that step by zero-order hold.
    """
    times, freqs = [], []
    lo, hi = FREQ_BAND
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != FREQ_HEADER:
            raise FrequencyParseError(f"{path}:1: expected header {','.join(FREQ_HEADER)}")
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 2:
                raise FrequencyParseError(f"{path}:{line}: expected 2 fields, got {len(row)}")
            try:
                t, f = float(row[0]), float(row[1])
            except ValueError:
                raise FrequencyParseError(f"{path}:{line}: non-numeric value in {row!r}") from None
            if not (math.isfinite(t) and math.isfinite(f)):
                raise FrequencyParseError(f"{path}:{line}: non-finite value")
            if not lo <= f <= hi:
                raise FrequencyParseError(f"{path}:{line}: frequency {f} Hz outside [{lo}, {hi}]")
            if len(times) >= 2 and abs((t - times[-1]) - (times[1] - times[0])) > 1e-6:
                raise FrequencyParseError(f"{path}:{line}: non-uniform time step at t={t}")
            if times and t <= times[-1]:
                raise FrequencyParseError(f"{path}:{line}: time does not increase")
            times.append(t)
            freqs.append(f)
    if not times:
        raise FrequencyParseError(f"{path}: no data rows")
    series = FrequencySeries(np.array(times), np.array(freqs))
    return series.resample(dt) if dt is not None else series


@dataclass(frozen=True)
class SyntheticFrequencyConfig:
    step_s: float = 1.0
    sd_hz: float = 0.020
    tau_s: float = 60.0
    event_step_hz: float = -0.15
    nadir_extra_hz: float = -0.05
    nadir_tau_s: float = 20.0
    recovery_fraction: float = 0.8
    recovery_tau_s: float = 300.0  # about three time constants within 15 min
    post_sd_hz: float = 0.030


def synthesize_frequency(seed=42, duration_s=43_200.0, split_at_s=28_800.0,
                         cfg: SyntheticFrequencyConfig = SyntheticFrequencyConfig()) -> FrequencySeries:
    """Two-regime synthetic grid frequency.

    Ornstein-Uhlenbeck noise around nominal until ``split_at_s``; then a
    step drop with a short extra nadir, partial exponential recovery, and
    noisier conditions afterwards.
    """
    if duration_s <= 0:
        raise ScenarioError("duration must be positive")
    rng = np.random.default_rng(seed)
    n = int(math.ceil(duration_s / cfg.step_s))
    t = cfg.step_s * np.arange(n)
    a = math.exp(-cfg.step_s / cfg.tau_s)
    b = math.sqrt(1.0 - a * a)
    z = rng.standard_normal(n)
    sd = np.where(t < split_at_s, cfg.sd_hz, cfg.post_sd_hz)
    x = np.empty(n)
    x[0] = cfg.sd_hz * z[0]
    for k in range(1, n):
        x[k] = a * x[k - 1] + b * sd[k] * z[k]
    s = np.clip(t - split_at_s, 0.0, None)
    after = t >= split_at_s
    recovery = 1.0 - cfg.recovery_fraction * (1.0 - np.exp(-s / cfg.recovery_tau_s))
    event = np.where(after, cfg.event_step_hz * recovery + cfg.nadir_extra_hz * np.exp(-s / cfg.nadir_tau_s), 0.0)
    f = np.clip(50.0 + x + event, *FREQ_BAND)
    return FrequencySeries(t, f)


# --------------------------------------------------------------------------- configuration


def _from_mapping(cls, data, where):
    """Build a config dataclass from a mapping, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ScenarioError(f"[{where}] must be a table")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ScenarioError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    kw = {}
    for k, v in data.items():
        sub = _NESTED.get((cls, k))
        if sub is not None:
            v = _from_mapping(sub, v, f"{where}.{k}")
        elif isinstance(v, list):
            v = tuple(v)
        kw[k] = v
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"[{where}]: {exc}") from None


@dataclass(frozen=True)
class PlantSection:
    gvo_rate: float = 2.0
    gvo_tc: float = 0.2
    rba_rate: float = 0.5
    rba_tc: float = 0.5
    speed_tc: float = 1.0
    speed_min_rpm: float = 500.0
    speed_max_rpm: float = 1500.0
    eta_gen: float = 0.95
    eta_conv: float = 0.97
    dt: float = 0.02


@dataclass(frozen=True)
class ControllerSection:
    kp: float = 2e-4
    ki: float = 5e-5
    lp_cutoff: float = 1.0 / 300.0
    soc_target: float = 0.5
    recenter_period: float = 300.0
    recenter_gain_per_rated: float = 2.0
    beta_fixed: float = 18.0


@dataclass(frozen=True)
class BessSection:
    eta_charge: float = 0.95
    eta_discharge: float = 0.95
    soc_init: float = 0.5


@dataclass(frozen=True)
class FrequencySection:
    source: str = "synthetic"
    split_at_s: float = 28_800.0


@dataclass(frozen=True)
class CamSection:
    alpha_step: float = 1.0
    smooth: bool = True  # optimise over the C1 (cubic-hinge) variant of the surrogate


@dataclass(frozen=True)
class ScenarioConfig:
    duration_s: float = 43_200.0
    p_disp: float = 27_000.0
    head: float = 10.0
    seed: int = 42
    warmup_s: float = 300.0
    log_dt: float = 1.0
    modes: tuple = ALL_MODES
    noise_sd: float = 0.003
    droop: DroopConfig = DroopConfig()
    plant: PlantSection = PlantSection()
    controller: ControllerSection = ControllerSection()
    bess: BessSection = BessSection()
    kpi: KpiConfig = KpiConfig()
    frequency: FrequencySection = FrequencySection()
    surrogate: FitConfig = FitConfig()
    cam: CamSection = CamSection()

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ScenarioError("duration must be positive")
        if self.head <= 0 or self.warmup_s < 0 or self.log_dt <= 0:
            raise ScenarioError("head and log step must be positive, warm-up non-negative")
        bad = [m for m in self.modes if m not in MODE_TABLE]
        if bad:
            raise ScenarioError(f"unknown mode(s): {', '.join(bad)}")
        ratio = self.log_dt / self.plant.dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ScenarioError("log step must be a whole number of simulation steps")

    @classmethod
    def from_dict(cls, data):
        return _from_mapping(cls, data, "root")

    @classmethod
    def from_toml(cls, path):
        with open(path, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ScenarioError(f"{path}: {exc}") from None
        return cls.from_dict(data)

    def with_seed(self, seed):
        return dataclasses.replace(self, seed=int(seed))


_NESTED = {
    (ScenarioConfig, "droop"): DroopConfig,
    (ScenarioConfig, "plant"): PlantSection,
    (ScenarioConfig, "controller"): ControllerSection,
    (ScenarioConfig, "bess"): BessSection,
    (ScenarioConfig, "kpi"): KpiConfig,
    (ScenarioConfig, "frequency"): FrequencySection,
    (ScenarioConfig, "surrogate"): FitConfig,
    (ScenarioConfig, "cam"): CamSection,
}


# --------------------------------------------------------------------------- assets


@dataclass(frozen=True)
class Assets:
    chart: GroundTruthHillChart
    surrogate: EfficiencySurrogate
    kaplan: CamTable
    varspeed: CamTable


def build_cams(surrogate, cfg: ScenarioConfig, chart=None, geometry=TurbineGeometry()):
    chart = chart or GroundTruthHillChart()
    p = cfg.plant
    if cfg.cam.smooth:
        surrogate = surrogate.with_smoothing()
    kaplan = build_kaplan_cam(surrogate, cfg.head, geometry.n_rated, cfg.cam.alpha_step, q_model=chart,
                              D=geometry.D, beta_limits=(chart.beta_min, chart.beta_max), alpha_max=chart.alpha_max)
    varspeed = build_varspeed_cam(surrogate, cfg.head, cfg.controller.beta_fixed, cfg.cam.alpha_step, q_model=chart,
                                  D=geometry.D, speed_limits_rpm=(p.speed_min_rpm, p.speed_max_rpm),
                                  alpha_max=chart.alpha_max)
    return kaplan, varspeed


def build_assets(cfg: ScenarioConfig = ScenarioConfig(), surrogate=None, chart=None) -> Assets:
    chart = chart or GroundTruthHillChart()
    if surrogate is None:
        ts = generate_training_set(chart, GridSpec(), cfg.noise_sd, cfg.seed)
        surrogate = fit_surrogate(ts, cfg.surrogate)
    kaplan, varspeed = build_cams(surrogate, cfg, chart)
    return Assets(chart, surrogate, kaplan, varspeed)


# --------------------------------------------------------------------------- running


def _chain_factor(cfg, code):
    p = cfg.plant
    return p.eta_gen * p.eta_conv if code == MODE_VARSPEED else p.eta_gen


def run_trace(cfg: ScenarioConfig, mode, freq: FrequencySeries, assets: Assets,
              geometry=TurbineGeometry()) -> Trace:
    """Step the plant/controller loop for one configuration and return the 1 Hz trace."""
    if mode not in MODE_TABLE:
        raise ScenarioError(f"unknown mode {mode!r}")
    code, bess_p, bess_e = MODE_TABLE[mode]
    p, c, chart = cfg.plant, cfg.controller, assets.chart
    n_log = int(round(cfg.duration_s / cfg.log_dt))
    if freq.duration + 1e-9 < cfg.duration_s:
        raise ScenarioError(f"frequency series covers {freq.duration} s, scenario needs {cfg.duration_s} s")
    log_every = int(round(cfg.log_dt / p.dt))
    n_warm = int(round(cfg.warmup_s / p.dt))
    cam = assets.varspeed if code == MODE_VARSPEED else assets.kaplan
    sp = SetpointMap.from_table(cam)
    chain = _chain_factor(cfg, code)
    alpha0 = float(sp(cfg.p_disp / chain))
    if code == MODE_VARSPEED:
        beta0, n0 = c.beta_fixed, float(cam.control_at(alpha0))
    else:
        beta0, n0 = float(cam.control_at(alpha0)), geometry.n_rated
    lp_alpha = 1.0 - math.exp(-2.0 * math.pi * c.lp_cutoff * p.dt)
    d = cfg.droop
    out = run_kernel(
        code, freq.frequency_hz, freq.step, p.dt, n_warm, n_log, log_every,
        float(cfg.p_disp), d.f_nom, d.dead_band, d.sigma_f,
        chart.params, geometry.D, float(cfg.head), geometry.n_rated, chain,
        p.gvo_rate, p.gvo_tc, p.rba_rate, p.rba_tc, min(chart.alpha_max, float(cam.alpha[-1])),
        chart.beta_min, chart.beta_max,
        p.speed_tc, p.speed_min_rpm / 60.0, p.speed_max_rpm / 60.0, c.kp, c.ki,
        sp.p, sp.alpha, cam.alpha, cam.control, c.beta_fixed,
        bess_p, bess_e, cfg.bess.eta_charge, cfg.bess.eta_discharge, cfg.bess.soc_init,
        lp_alpha, max(1, int(round(c.recenter_period / p.dt))), c.recenter_gain_per_rated * bess_p, c.soc_target,
        alpha0, beta0, n0,
    )
    return Trace(
        time_s=cfg.log_dt * np.arange(n_log), f=out[:, C_F], p_set=out[:, C_PSET], p_pcc=out[:, C_PCC],
        p_bess=out[:, C_PBESS], p_m=out[:, C_PM], Q=out[:, C_Q], n=out[:, C_N], H=out[:, C_H],
        T_shaft=out[:, C_TSHAFT], gvo=out[:, C_GVO], rba=out[:, C_RBA], t_blade=out[:, C_RBT], soc=out[:, C_SOC],
    )


def run_scenario(cfg: ScenarioConfig, freq: FrequencySeries, mode=None, assets: Assets | None = None):
    """Run one configuration; returns ``(trace, report)``."""
    mode = mode or cfg.modes[0]
    assets = assets or build_assets(cfg)
    trace = run_trace(cfg, mode, freq, assets)
    return trace, compute_report(trace, mode, cfg.kpi)


def run_batch(cfg: ScenarioConfig, freq: FrequencySeries, assets: Assets, modes=None, threads=None):
    """All modes on the identical frequency series, one thread each."""
    modes = tuple(modes or cfg.modes)
    with ThreadPoolExecutor(max_workers=threads or len(modes)) as pool:
        results = list(pool.map(lambda m: run_scenario(cfg, freq, m, assets), modes))
    return dict(zip(modes, results))


def compare_scenarios(reports: dict, baseline=BASELINE) -> dict:
    """Reports keyed by mode, each carrying percent deltas against the baseline."""
    if baseline not in reports:
        raise ScenarioError(f"baseline {baseline!r} missing from reports")
    base = reports[baseline]
    return {m: r.relative_to(base) for m, r in reports.items()}


COMPARISON_COLUMNS = ("mode",) + tuple(
    f"{k}{suffix}" for k in kpi._SCALAR_KPIS for suffix in ("", "_pct")
)


def comparison_rows(compared: dict):
    rows = []
    for m, r in compared.items():
        row = [m]
        for k, v in r.scalars().items():
            pct = r.percent_deltas.get(k)
            row += [v, pct]
        rows.append(row)
    return rows


def write_comparison_csv(compared: dict, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARISON_COLUMNS)
        for row in comparison_rows(compared):
            w.writerow([row[0]] + ["" if v is None else repr(float(v)) for v in row[1:]])


def format_comparison(compared: dict) -> str:
    head = f"{'KPI':<14}" + "".join(f"{m:>24}" for m in compared)
    lines = [head, "-" * len(head)]
    for k in kpi._SCALAR_KPIS:
        cells = []
        for r in compared.values():
            v, pct = getattr(r, k), r.percent_deltas.get(k)
            pct_s = "" if pct is None else f" ({pct:+.1f}%)"
            cells.append(f"{v:.4g}{pct_s}".rjust(24))
        lines.append(f"{k:<14}" + "".join(cells))
    return "\n".join(lines)


def load_reports(directory) -> dict:
    out = {}
    for path in sorted(Path(directory).glob("*.kpi.json")):
        r = KpiReport.from_json(path.read_text(encoding="utf-8"))
        out[r.mode or path.name.split(".")[0]] = r
    return out
