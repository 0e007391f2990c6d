"""Performance indicators computed from logged scenario traces.

FCR quality (tracking error and its minute-averaged RMS), actuator wear
(mileage, number of movements, blade-torque derivative distribution) and
hydraulic/global efficiency.  Everything here is a pure function of the
trace.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .core import CONSTANTS

SCHEMA_VERSION = 1

# (csv column, Trace attribute, csv = attr * scale)
TRACE_COLUMNS = (
    ("time_s", "time_s", 1.0),
    ("frequency", "f", 1.0),
    ("power_setpoint", "p_set", 1.0),
    ("active_power", "p_pcc", 1.0),
    ("bess_active_power", "p_bess", 1.0),
    ("mechanical_power", "p_m", 1.0),
    ("discharge", "Q", 1.0),
    ("turbine_speed", "n", 60.0),
    ("head", "H", 1.0),
    ("shaft_torque", "T_shaft", 1.0),
    ("guide_vanes_opening", "gvo", 1.0),
    ("runner_blade_angle", "rba", 1.0),
    ("runner_blade_torque", "t_blade", 1.0),
    ("state_of_charge", "soc", 100.0),
)


class KpiError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Trace:
    """Uniformly sampled scenario log.

    Units: W, m^3/s, m, N*m, deg; ``n`` in rev/s and ``soc`` as a fraction.
    """

    time_s: np.ndarray
    f: np.ndarray
    p_set: np.ndarray
    p_pcc: np.ndarray
    p_bess: np.ndarray
    p_m: np.ndarray
    Q: np.ndarray
    n: np.ndarray
    H: np.ndarray
    T_shaft: np.ndarray
    gvo: np.ndarray
    rba: np.ndarray
    t_blade: np.ndarray
    soc: np.ndarray

    def __post_init__(self):
        n = len(self.time_s)
        for fld in fields(self):
            arr = np.asarray(getattr(self, fld.name), dtype=float)
            if arr.shape != (n,):
                raise KpiError(f"trace column {fld.name} has shape {arr.shape}, expected ({n},)")
            object.__setattr__(self, fld.name, arr)
        if n >= 2:
            steps = np.diff(self.time_s)
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-9) or steps[0] <= 0:
                raise KpiError("trace timestep is not uniform")

    def __len__(self):
        return len(self.time_s)

    @property
    def dt(self):
        return float(self.time_s[1] - self.time_s[0]) if len(self) > 1 else 1.0

    @property
    def p_hydro(self):
        return self.p_pcc - self.p_bess

    def eta_h(self):
        return efficiency_series(self)[0]

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([c for c, _, _ in TRACE_COLUMNS] + ["hydraulic_efficiency"])
            cols = [getattr(self, a) * s for _, a, s in TRACE_COLUMNS]
            cols.append(100.0 * _eta_raw(self))
            for row in zip(*cols):
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            want = [c for c, _, _ in TRACE_COLUMNS]
            if header is None or header[: len(want)] != want:
                raise KpiError(f"{path}: unexpected trace header")
            data = np.array([[float(v) for v in row[: len(want)]] for row in reader], dtype=float)
        if data.size == 0:
            data = data.reshape(0, len(want))
        return cls(**{a: data[:, i] / s for i, (_, a, s) in enumerate(TRACE_COLUMNS)})


def tracking_error(p_set, p_pcc=None):
    """``p_set - p_pcc``; accepts a :class:`Trace` or two aligned sequences."""
    if isinstance(p_set, Trace):
        p_set, p_pcc = p_set.p_set, p_set.p_pcc
    a, b = np.asarray(p_set, dtype=float), np.asarray(p_pcc, dtype=float)
    if a.shape != b.shape:
        raise KpiError(f"length mismatch: {a.shape} vs {b.shape}")
    return a - b


def rms_te(te, window=None, averaging_s=60.0, dt=1.0):
    """RMS of bin-averaged tracking error; a trailing partial bin is dropped."""
    te = np.asarray(te, dtype=float)
    k1, k2 = (0, len(te)) if window is None else window
    if not 0 <= k1 <= k2 <= len(te):
        raise KpiError(f"window {window} outside trace of length {len(te)}")
    per_bin = int(round(averaging_s / dt))
    if per_bin < 1:
        raise KpiError("averaging interval shorter than the sample step")
    n_bins = (k2 - k1) // per_bin
    if n_bins == 0:
        raise KpiError("window holds no complete averaging bin")
    means = te[k1:k1 + n_bins * per_bin].reshape(n_bins, per_bin).mean(axis=1)
    return float(np.sqrt(np.mean(means * means)))


def mileage(position, eps=0.005):
    """Total variation of a position trace, ignoring increments below ``eps``."""
    d = np.abs(np.diff(np.asarray(position, dtype=float)))
    return float(d[d >= eps].sum()) if eps > 0 else float(d.sum())


NOM_RULES = ("both", "onsets", "reversals")


def number_of_movements(position, eps=0.01, rest_s=1.0, dt=1.0, rule="both"):
    """Count movement onsets and/or direction reversals.

    A step larger than ``eps`` starts a movement when the actuator has been
    at rest for at least ``rest_s`` (or has never moved), and counts as a
    reversal when it goes against the direction of the ongoing movement.
    ``rule`` picks which of the two events are counted; a step that is both
    counts once.
    """
    if rule not in NOM_RULES:
        raise KpiError(f"unknown NoM rule {rule!r}")
    d = np.diff(np.asarray(position, dtype=float))
    count = 0
    direction = 0
    rest = math.inf
    for step in d:
        if abs(step) <= eps:
            rest += dt
            continue
        sgn = 1 if step > 0 else -1
        onset = rest >= rest_s - 1e-12 or direction == 0
        reversal = direction != 0 and sgn != direction and not onset
        if (rule != "reversals" and onset) or (rule != "onsets" and reversal):
            count += 1
        direction = sgn
        rest = 0.0
    return count


def rbt_derivative_cdf(t_blade, dt=1.0, absolute=True):
    """Sorted samples of the blade-torque time derivative (central differences)."""
    t = np.asarray(t_blade, dtype=float)
    if len(t) < 2:
        raise KpiError("need at least two torque samples")
    g = np.gradient(t, dt)
    return np.sort(np.abs(g) if absolute else g)


def _eta_raw(trace: Trace, const=CONSTANTS):
    p_h = const.rho * const.g * trace.Q * trace.H
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p_h > 0, trace.p_m / p_h, np.nan)


def efficiency_series(trace: Trace, p_h_rated=80_000.0, min_fraction=0.01, const=CONSTANTS):
    """Per-sample hydraulic and global efficiency.

    Global efficiency uses the turbine's own electrical output (PCC power
    minus battery power).  Samples whose hydraulic power is below
    ``min_fraction * p_h_rated`` are returned as NaN.
    """
    p_h = const.rho * const.g * trace.Q * trace.H
    ok = p_h >= min_fraction * p_h_rated
    safe = np.where(ok, p_h, 1.0)
    eta_h = np.where(ok, trace.p_m / safe, np.nan)
    eta_g = np.where(ok, trace.p_hydro / safe, np.nan)
    return eta_h, eta_g


@dataclass(frozen=True)
class KpiConfig:
    averaging_s: float = 60.0
    eps_noise: float = 0.005
    eps_move: float = 0.01
    rest_s: float = 1.0
    nom_rule: str = "both"  # onsets, reversals or both
    absolute_rbt: bool = True
    p_h_rated: float = 80_000.0
    min_power_fraction: float = 0.01

    def __post_init__(self):
        if self.averaging_s <= 0:
            raise ValueError("averaging_s must be positive")
        if min(self.eps_noise, self.eps_move, self.rest_s) < 0:
            raise ValueError("KPI thresholds must be non-negative")
        if self.nom_rule not in NOM_RULES:
            raise ValueError(f"nom_rule must be one of {', '.join(NOM_RULES)}")


_SCALAR_KPIS = ("rms_te", "mileage_gvo", "mileage_rba", "nom_gvo", "nom_rba", "rbt_p95", "mean_eta_h", "mean_eta_g")


def percent_delta(value, base):
    if base == 0:
        return 0.0 if value == 0 else None
    return 100.0 * (value - base) / abs(base)


@dataclass(frozen=True, eq=False)
class KpiReport:
    mode: str
    rms_te: float
    mileage_gvo: float
    mileage_rba: float
    nom_gvo: int
    nom_rba: int
    rbt_derivative_cdf: np.ndarray
    mean_eta_h: float
    mean_eta_g: float
    percent_deltas: dict = field(default_factory=dict)

    @property
    def rbt_p95(self):
        return float(np.percentile(self.rbt_derivative_cdf, 95))

    def scalars(self):
        return {k: getattr(self, k) for k in _SCALAR_KPIS}

    def relative_to(self, baseline: "KpiReport") -> "KpiReport":
        base = baseline.scalars()
        deltas = {k: percent_delta(v, base[k]) for k, v in self.scalars().items()}
        return KpiReport(**{**self._fields(), "percent_deltas": deltas})

    def _fields(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_dict(self):
        d = self._fields()
        d["rbt_derivative_cdf"] = [float(v) for v in self.rbt_derivative_cdf]
        d["rbt_p95"] = self.rbt_p95
        return {"schema_version": SCHEMA_VERSION, **d}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, allow_nan=False)

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != SCHEMA_VERSION:
            raise KpiError(f"unsupported KpiReport schema_version {d.get('schema_version')!r}")
        kw = {f.name: d[f.name] for f in fields(cls) if f.name in d}
        kw["rbt_derivative_cdf"] = np.asarray(kw["rbt_derivative_cdf"], dtype=float)
        return cls(**kw)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def compute_report(trace: Trace, mode="", cfg: KpiConfig = KpiConfig(), window=None) -> KpiReport:
    te = tracking_error(trace)
    eta_h, eta_g = efficiency_series(trace, cfg.p_h_rated, cfg.min_power_fraction)
    valid = ~np.isnan(eta_h)
    return KpiReport(
        mode=mode,
        rms_te=rms_te(te, window, cfg.averaging_s, trace.dt),
        mileage_gvo=mileage(trace.gvo, cfg.eps_noise),
        mileage_rba=mileage(trace.rba, cfg.eps_noise),
        nom_gvo=number_of_movements(trace.gvo, cfg.eps_move, cfg.rest_s, trace.dt, cfg.nom_rule),
        nom_rba=number_of_movements(trace.rba, cfg.eps_move, cfg.rest_s, trace.dt, cfg.nom_rule),
        rbt_derivative_cdf=rbt_derivative_cdf(trace.t_blade, trace.dt, cfg.absolute_rbt),
        mean_eta_h=float(eta_h[valid].mean()) if valid.any() else float("nan"),
        mean_eta_g=float(eta_g[valid].mean()) if valid.any() else float("nan"),
    )


__all__ = [
    "KpiConfig", "KpiError", "KpiReport", "Trace", "compute_report", "efficiency_series", "mileage",
    "number_of_movements", "percent_delta", "rbt_derivative_cdf", "rms_te", "tracking_error",
]
