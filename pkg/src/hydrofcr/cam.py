"""CAM lookup tables from numerical optimisation of the efficiency surrogate.

Kaplan mode maps guide-vane opening to the blade angle maximising predicted
efficiency at fixed speed; VarSpeed mode maps it to the best rotational speed
with the blades locked.  Both use a coarse grid to bracket the maximum and a
golden-section refinement inside the bracket.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import CONSTANTS, speed_coefficient
from .hillchart import GroundTruthHillChart

KAPLAN = "kaplan"
VARSPEED = "varspeed"
CSV_HEADER = ("alpha_deg", "control", "eta_pred", "p_pred_w")

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class CamError(ValueError):
    pass


def golden_section_max(f, a, b, tol=1e-2):
    """Maximise a unimodal ``f`` on ``[a, b]``; returns the abscissa.

    Stops once the bracket is narrower than ``tol``.  Ties between the two
    interior probes move the bracket left, so flat stretches resolve toward
    the smaller argument.
    """
    a, b = min(a, b), max(a, b)
    if b - a <= tol:
        return 0.5 * (a + b)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return c if fc >= fd else d


def bracketed_argmax(f, lo, hi, coarse_step, tol):
    """Coarse-grid bracketing followed by golden-section refinement.

    ``f`` must accept arrays.  The returned point is never worse than the
    best coarse node; ties resolve toward the smaller argument.
    """
    if not hi > lo:
        raise CamError(f"empty search interval [{lo}, {hi}]")
    k = int(math.floor((hi - lo) / coarse_step + 1e-9))
    grid = lo + coarse_step * np.arange(k + 1)
    if grid[-1] < hi - 1e-12:
        grid = np.append(grid, hi)
    vals = np.asarray(f(grid), dtype=float)
    i = int(np.argmax(vals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, len(grid) - 1)]
    x = golden_section_max(lambda v: float(f(np.array([v]))[0]), a, b, tol)
    fx = float(f(np.array([x]))[0])
    if fx > vals[i] or (fx == vals[i] and x < grid[i]):
        return x, fx
    return float(grid[i]), float(vals[i])


@dataclass(frozen=True)
class CamTable:
    mode: str
    alpha: np.ndarray
    control: np.ndarray  # blade angle (deg) for Kaplan, speed (rev/s) for VarSpeed
    eta_pred: np.ndarray
    p_pred: np.ndarray  # predicted mechanical power, W
    head: float
    fixed_beta: float | None = None
    fixed_n: float | None = None

    def __post_init__(self):
        if self.mode not in (KAPLAN, VARSPEED):
            raise CamError(f"unknown CAM mode {self.mode!r}")
        if len(self.alpha) < 2 or np.any(np.diff(self.alpha) <= 0):
            raise CamError("CAM alphas must be strictly increasing")
        if np.any(np.diff(self.p_pred) < 0):
            raise CamError("predicted power is not monotone in guide-vane opening")

    def __len__(self):
        return len(self.alpha)

    def control_at(self, alpha):
        return np.interp(alpha, self.alpha, self.control)

    @property
    def p_max(self):
        return float(self.p_pred[-1])

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for row in zip(self.alpha, self.control, self.eta_pred, self.p_pred):
                w.writerow([repr(float(v)) for v in row])

    def metadata(self):
        return {
            "schema_version": 1,
            "mode": self.mode,
            "head_m": self.head,
            "fixed_beta_deg": self.fixed_beta,
            "fixed_speed_rps": self.fixed_n,
            "control_unit": "deg" if self.mode == KAPLAN else "rev/s",
        }

    def save(self, csv_path):
        csv_path = Path(csv_path)
        self.to_csv(csv_path)
        csv_path.with_suffix(".json").write_text(json.dumps(self.metadata(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, csv_path):
        csv_path = Path(csv_path)
        meta = json.loads(csv_path.with_suffix(".json").read_text(encoding="utf-8"))
        with open(csv_path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            if tuple(next(reader)) != CSV_HEADER:
                raise CamError(f"{csv_path}: expected header {','.join(CSV_HEADER)}")
            rows = np.array([[float(v) for v in r] for r in reader])
        return cls(
            meta["mode"], rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3], meta["head_m"],
            meta["fixed_beta_deg"], meta["fixed_speed_rps"],
        )


def _alpha_grid(model, step, alpha_max):
    lo, hi = model.input_ranges[0]
    if alpha_max is not None:
        hi = min(hi, alpha_max)
    k = int(math.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(k + 1)


def _predicted_power(eta, alpha, beta, n, H, q_model, D):
    n_ed = speed_coefficient(n, D, H)
    Q = q_model.discharge(alpha, beta, n_ed, H)
    return np.maximum(eta, 0.0) * CONSTANTS.rho * CONSTANTS.g * Q * H


def _up_to_power_peak(alphas, control, etas, p):
    """Drop rows past the first power maximum; opening further only loses power there."""
    drop = np.nonzero(np.diff(p) < 0)[0]
    k = len(p) if drop.size == 0 else int(drop[0]) + 1
    return alphas[:k], control[:k], etas[:k], p[:k]


def build_kaplan_cam(model, H=10.0, n_fixed=25.0, alpha_step=1.0, *, q_model=None, D=0.34,
                     beta_limits=None, alpha_max=None, coarse_step=0.5, tol=0.01):
    """GVO -> RBA table maximising surrogate efficiency at fixed speed ``n_fixed`` (rev/s)."""
    if H <= 0:
        raise CamError("head must be positive")
    q_model = q_model or GroundTruthHillChart()
    b_lo, b_hi = model.input_ranges[1]
    if beta_limits is not None:
        b_lo, b_hi = max(b_lo, beta_limits[0]), min(b_hi, beta_limits[1])
    n_ed = float(speed_coefficient(n_fixed, D, H))
    alphas = _alpha_grid(model, alpha_step, alpha_max)
    betas, etas = [], []
    for a in alphas:
        b, e = bracketed_argmax(lambda bb, a=a: model.eval(a, bb, n_ed), b_lo, b_hi, coarse_step, tol)
        betas.append(b)
        etas.append(e)
    betas, etas = np.array(betas), np.array(etas)
    p = _predicted_power(etas, alphas, betas, n_fixed, H, q_model, D)
    alphas, betas, etas, p = _up_to_power_peak(alphas, betas, etas, p)
    return CamTable(KAPLAN, alphas, betas, etas, p, float(H), fixed_n=float(n_fixed))


def build_varspeed_cam(model, H=10.0, beta_fixed=18.0, alpha_step=1.0, *, q_model=None, D=0.34,
                       speed_limits_rpm=(500.0, 1500.0), alpha_max=None, coarse_step_rpm=10.0, tol_rpm=0.1):
    """GVO -> speed (rev/s) table maximising surrogate efficiency with locked blades."""
    if H <= 0:
        raise CamError("head must be positive")
    q_model = q_model or GroundTruthHillChart()
    lo, hi = speed_limits_rpm
    alphas = _alpha_grid(model, alpha_step, alpha_max)
    speeds, etas = [], []
    for a in alphas:
        def f(n_rpm, a=a):
            return model.eval(a, beta_fixed, speed_coefficient(np.asarray(n_rpm) / 60.0, D, H))

        n_rpm, e = bracketed_argmax(f, lo, hi, coarse_step_rpm, tol_rpm)
        speeds.append(n_rpm / 60.0)
        etas.append(e)
    speeds, etas = np.array(speeds), np.array(etas)
    p = _predicted_power(etas, alphas, np.full_like(alphas, beta_fixed), speeds, H, q_model, D)
    alphas, speeds, etas, p = _up_to_power_peak(alphas, speeds, etas, p)
    return CamTable(VARSPEED, alphas, speeds, etas, p, float(H), fixed_beta=float(beta_fixed))


@dataclass(frozen=True)
class SetpointMap:
    """Monotone map from mechanical power set-point (W) to guide-vane opening."""

    p: np.ndarray
    alpha: np.ndarray

    @classmethod
    def from_table(cls, table: CamTable):
        p, a = np.asarray(table.p_pred, float), np.asarray(table.alpha, float)
        keep = np.concatenate([[True], np.diff(p) > 0])
        return cls(p[keep], a[keep])

    @property
    def p_max(self):
        return float(self.p[-1])

    def __call__(self, p_set):
        return np.interp(p_set, self.p, self.alpha)


def invert_power(table: CamTable, p_set, q_model=None, D=0.34):
    """Opening that yields mechanical power ``p_set`` along the CAM.

    Returns ``(alpha, clamped)``; set-points outside ``[0, p_max]`` are clamped.
    When ``q_model`` is given the predicted power column is recomputed with it.
    """
    if q_model is not None:
        if table.mode == KAPLAN:
            p = _predicted_power(table.eta_pred, table.alpha, table.control, table.fixed_n, table.head, q_model, D)
        else:
            p = _predicted_power(table.eta_pred, table.alpha, np.full_like(table.alpha, table.fixed_beta),
                                 table.control, table.head, q_model, D)
        table = CamTable(table.mode, table.alpha, table.control, table.eta_pred, p, table.head,
                         table.fixed_beta, table.fixed_n)
    sp = SetpointMap.from_table(table)
    p_arr = np.asarray(p_set, dtype=float)
    clamped = (p_arr < sp.p[0]) | (p_arr > sp.p_max)
    alpha = sp(np.clip(p_arr, sp.p[0], sp.p_max))
    return np.asarray(alpha)[()], np.asarray(clamped)[()]
