"""Synthetic ground-truth hill chart and surrogate training data.

The measured hill chart of the reduced-scale runner is not available, so the
machine is represented by a smooth analytic surface with a single best
efficiency point.  The surface, its discharge factor and the blade torque are
written as plain scalar/array math so the same source serves the vectorised
API here and the compiled simulation loop in :mod:`hydrofcr.plant`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba.extending import register_jitable

from .core import CONSTANTS, DomainError, speed_coefficient

N_ED_LOW = float(speed_coefficient(500.0 / 60.0, 0.34, 10.0))
N_ED_HIGH = float(speed_coefficient(1500.0 / 60.0, 0.34, 10.0))

CSV_HEADER = ("alpha_deg", "beta_deg", "n_ed", "eta", "q_ed")

# indices into the packed parameter vector shared with the compiled kernels
(
    P_ETA_PEAK,
    P_ALPHA_BEP,
    P_BETA_BEP,
    P_NED_BEP,
    P_ALPHA_WIDTH,
    P_ALPHA_SAT,
    P_ALPHA_CENTER,
    P_ALPHA_NORM,
    P_BETA_WIDTH,
    P_BETA_SLOPE,
    P_NED_WIDTH,
    P_NED_SLOPE,
    P_Q_SCALE,
    P_Q_BETA,
    P_Q_NED,
    P_TB_LOAD,
    P_TB_STIFF,
    P_TB_PEN,
    P_D,
    P_RHO_G,
    P_TAIL,
    P_FLOOR,
) = range(22)
N_PARAMS = 22


@register_jitable
def _alpha_shape(alpha, p):
    sat = 1.0 - np.exp(-alpha / p[P_ALPHA_SAT])
    u = (alpha - p[P_ALPHA_CENTER]) / p[P_ALPHA_WIDTH]
    return sat * np.exp(-u * u) / p[P_ALPHA_NORM]


@register_jitable
def _alpha_shape_deriv(alpha, p):
    e = np.exp(-alpha / p[P_ALPHA_SAT])
    u = (alpha - p[P_ALPHA_CENTER]) / p[P_ALPHA_WIDTH]
    gauss = np.exp(-u * u)
    dsat = e / p[P_ALPHA_SAT]
    return (dsat - (1.0 - e) * 2.0 * u / p[P_ALPHA_WIDTH]) * gauss / p[P_ALPHA_NORM]


@register_jitable
def beta_ridge(alpha, p):
    """Blade angle maximising efficiency at a given opening."""
    return p[P_BETA_BEP] + p[P_BETA_SLOPE] * (alpha - p[P_ALPHA_BEP])


@register_jitable
def ned_ridge(alpha, p):
    """Speed factor maximising efficiency at a given opening."""
    return p[P_NED_BEP] + p[P_NED_SLOPE] * (alpha - p[P_ALPHA_BEP])


@register_jitable
def _loss(u, k):
    # convex: quadratic within |u| < k of the ridge, growing like 2k|u| beyond
    return 2.0 * k * (np.sqrt(k * k + u * u) - k)


@register_jitable
def _loss_deriv(u, k):
    return 2.0 * k * u / np.sqrt(k * k + u * u)


@register_jitable
def _soft_floor(s, eps):
    # softplus: ~s well above zero, decays smoothly to 0 below; increasing and log-concave
    x = s / eps
    return eps * (np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x))))


@register_jitable
def _soft_floor_deriv(s, eps):
    return 0.5 * (1.0 + np.tanh(0.5 * s / eps))


@register_jitable
def eta_kernel(alpha, beta, n_ed, p):
    ub = (beta - beta_ridge(alpha, p)) / p[P_BETA_WIDTH]
    un = (n_ed - ned_ridge(alpha, p)) / p[P_NED_WIDTH]
    s = 1.0 - _loss(ub, p[P_TAIL]) - _loss(un, p[P_TAIL])
    return p[P_ETA_PEAK] * _alpha_shape(alpha, p) * _soft_floor(s, p[P_FLOOR])


@register_jitable
def eta_gradient_kernel(alpha, beta, n_ed, p):
    ub = (beta - beta_ridge(alpha, p)) / p[P_BETA_WIDTH]
    un = (n_ed - ned_ridge(alpha, p)) / p[P_NED_WIDTH]
    s = 1.0 - _loss(ub, p[P_TAIL]) - _loss(un, p[P_TAIL])
    ds = _soft_floor_deriv(s, p[P_FLOOR])
    lb = _loss_deriv(ub, p[P_TAIL]) * ds
    ln = _loss_deriv(un, p[P_TAIL]) * ds
    s = _soft_floor(s, p[P_FLOOR])
    a = _alpha_shape(alpha, p)
    da = _alpha_shape_deriv(alpha, p)
    coupling = lb * p[P_BETA_SLOPE] / p[P_BETA_WIDTH] + ln * p[P_NED_SLOPE] / p[P_NED_WIDTH]
    d_alpha = p[P_ETA_PEAK] * (da * s + a * coupling)
    d_beta = -p[P_ETA_PEAK] * a * lb / p[P_BETA_WIDTH]
    d_ned = -p[P_ETA_PEAK] * a * ln / p[P_NED_WIDTH]
    return d_alpha, d_beta, d_ned


@register_jitable
def q_ed_kernel(alpha, beta, n_ed, p):
    dn = n_ed - p[P_NED_BEP]
    return (
        p[P_Q_SCALE]
        * np.sin(np.deg2rad(alpha))
        * (1.0 + p[P_Q_BETA] * (beta - p[P_BETA_BEP]))
        * (1.0 - p[P_Q_NED] * dn * dn)
    )


@register_jitable
def discharge_kernel(alpha, beta, n_ed, H, p):
    """Discharge in m^3/s from the discharge factor Q_ED = Q / (D^2 sqrt(gH))."""
    g = p[P_RHO_G] / 1000.0
    return q_ed_kernel(alpha, beta, n_ed, p) * p[P_D] * p[P_D] * np.sqrt(g * H)


@register_jitable
def blade_torque_kernel(alpha, beta, n_ed, H, p):
    """Torque on one blade connecting rod, N*m.

    A load share of the shaft torque plus a hydraulic centring moment that
    grows with blade angle and with incidence off the efficiency ridge.
    """
    g = p[P_RHO_G] / 1000.0
    n = n_ed * np.sqrt(g * H) / p[P_D]
    omega = 2.0 * math.pi * n
    q = discharge_kernel(alpha, beta, n_ed, H, p)
    p_m = eta_kernel(alpha, beta, n_ed, p) * p[P_RHO_G] * q * H
    load = p[P_TB_LOAD] * p_m / (4.0 * np.maximum(omega, 1e-9))
    scale = p[P_RHO_G] * H * p[P_D] ** 3
    off = beta - beta_ridge(alpha, p)
    return load + scale * (p[P_TB_STIFF] * (beta - p[P_BETA_BEP]) + p[P_TB_PEN] * off * off)


@dataclass(frozen=True)
class GroundTruthHillChart:
    """Analytic stand-in for the measured efficiency map of the model runner.

    Efficiency is an opening factor (zero at closed vanes, log-concave,
    peaking at ``alpha_bep``) times one minus two convex losses, measured
    from ridges in blade angle and speed factor.  The losses are quadratic
    close to a ridge and grow linearly further out.  Far from both ridges the
    loss factor passes through a softplus, which leaves it unchanged near the
    ridges but keeps efficiency positive in the corners of the domain.  The
    softplus of a concave function is log-concave, and so is the product with
    the opening factor, so every slice through the surface is unimodal.  Both
    ridges drift
    linearly with the opening: the optimal blade angle rises with the opening
    and the optimal speed falls at part load.  The discharge factor is
    calibrated so the best efficiency point reproduces the runner's specific
    speed at the reference head.
    """

    eta_peak: float = 0.92
    alpha_bep: float = 20.0
    beta_bep: float = 18.0
    n_ed_bep: float = N_ED_HIGH
    alpha_width: float = 90.0
    alpha_sat: float = 0.5
    beta_width: float = 11.0
    beta_slope: float = 0.4
    n_ed_width: float = 0.5
    n_ed_slope: float = 0.018
    tail: float = 0.2
    floor: float = 0.02
    q_beta: float = 0.07
    q_ned: float = -2.0
    tb_load: float = 0.05
    tb_stiff: float = 0.01
    tb_pen: float = 5e-5
    specific_speed_bep: float = 1.53
    head_ref: float = 10.0
    D: float = 0.34
    alpha_max: float = 30.0
    beta_min: float = 5.0
    beta_max: float = 30.0
    n_ed_min: float = N_ED_LOW
    n_ed_max: float = N_ED_HIGH
    params: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        p = np.zeros(N_PARAMS)
        p[P_ETA_PEAK] = self.eta_peak
        p[P_ALPHA_BEP] = self.alpha_bep
        p[P_BETA_BEP] = self.beta_bep
        p[P_NED_BEP] = self.n_ed_bep
        p[P_ALPHA_WIDTH] = self.alpha_width
        p[P_ALPHA_SAT] = self.alpha_sat
        # shift the Gaussian so the product with the saturation peaks at alpha_bep
        e = math.exp(-self.alpha_bep / self.alpha_sat)
        slope = (e / self.alpha_sat) / (1.0 - e)
        p[P_ALPHA_CENTER] = self.alpha_bep + 0.5 * self.alpha_width**2 * slope
        p[P_ALPHA_NORM] = 1.0
        p[P_ALPHA_NORM] = float(_alpha_shape(self.alpha_bep, p))
        p[P_BETA_WIDTH] = self.beta_width
        p[P_BETA_SLOPE] = self.beta_slope
        p[P_NED_WIDTH] = self.n_ed_width
        p[P_NED_SLOPE] = self.n_ed_slope
        p[P_TAIL] = self.tail
        p[P_FLOOR] = self.floor
        p[P_Q_BETA] = self.q_beta
        p[P_Q_NED] = self.q_ned
        p[P_TB_LOAD] = self.tb_load
        p[P_TB_STIFF] = self.tb_stiff
        p[P_TB_PEN] = self.tb_pen
        p[P_D] = self.D
        p[P_RHO_G] = CONSTANTS.rho * CONSTANTS.g
        # calibrate discharge so the BEP reproduces the runner's specific speed
        g = CONSTANTS.g
        E = g * self.head_ref
        n_bep = self.n_ed_bep * math.sqrt(E) / self.D
        omega = 2.0 * math.pi * n_bep
        q_bep = (self.specific_speed_bep * math.sqrt(math.pi) * (2.0 * E) ** 0.75 / omega) ** 2
        q_ed_bep = q_bep / (self.D**2 * math.sqrt(E))
        p[P_Q_SCALE] = q_ed_bep / math.sin(math.radians(self.alpha_bep))
        p.setflags(write=False)
        object.__setattr__(self, "params", p)

    @property
    def q_bep(self):
        """Discharge at the best efficiency point under the reference head, m^3/s."""
        return float(discharge_kernel(self.alpha_bep, self.beta_bep, self.n_ed_bep, self.head_ref, self.params))

    def _check(self, alpha, beta, n_ed, tol=1e-9):
        a, b, n = (np.asarray(v, dtype=float) for v in (alpha, beta, n_ed))
        if (
            np.any(a < -tol)
            or np.any(a > self.alpha_max + tol)
            or np.any(b < self.beta_min - tol)
            or np.any(b > self.beta_max + tol)
            or np.any(n < self.n_ed_min - 1e-6)
            or np.any(n > self.n_ed_max + 1e-6)
            or not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(n)))
        ):
            raise DomainError(
                f"operating point outside hill chart domain: alpha in [0, {self.alpha_max}], "
                f"beta in [{self.beta_min}, {self.beta_max}], n_ED in [{self.n_ed_min:.4f}, {self.n_ed_max:.4f}]"
            )
        return a, b, n

    def eval(self, alpha, beta, n_ed):
        """Return ``(eta, q_ed)`` at the given point(s)."""
        a, b, n = self._check(alpha, beta, n_ed)
        eta = eta_kernel(a, b, n, self.params)
        q = q_ed_kernel(a, b, n, self.params)
        if eta.ndim == 0:
            return float(eta), float(q)
        return eta, q

    def efficiency(self, alpha, beta, n_ed):
        return self.eval(alpha, beta, n_ed)[0]

    def gradient(self, alpha, beta, n_ed):
        a, b, n = self._check(alpha, beta, n_ed)
        return tuple(np.asarray(d)[()] for d in eta_gradient_kernel(a, b, n, self.params))

    def discharge(self, alpha, beta, n_ed, H):
        a, b, n = self._check(alpha, beta, n_ed)
        out = discharge_kernel(a, b, n, H, self.params)
        return float(out) if np.ndim(out) == 0 else out

    def blade_torque(self, alpha, beta, n_ed, H):
        a, b, n = self._check(alpha, beta, n_ed)
        out = blade_torque_kernel(a, b, n, H, self.params)
        return float(out) if np.ndim(out) == 0 else out

    def beta_ridge(self, alpha):
        return beta_ridge(np.asarray(alpha, dtype=float), self.params)[()]

    def n_ed_ridge(self, alpha):
        return ned_ridge(np.asarray(alpha, dtype=float), self.params)[()]


eval_ground_truth = GroundTruthHillChart.eval


@dataclass(frozen=True)
class HillChartSample:
    alpha: float
    beta: float
    n_ed: float
    eta: float
    q_ed: float


@dataclass(frozen=True)
class GridSpec:
    """Full-factorial sampling grid: 1 degree steps in GVO and RBA, uniform speed factor."""

    alpha_min: float = 0.0
    alpha_max: float = 30.0
    alpha_step: float = 1.0
    beta_min: float = 5.0
    beta_max: float = 30.0
    beta_step: float = 1.0
    n_ed_min: float = N_ED_LOW
    n_ed_max: float = N_ED_HIGH
    n_ed_count: int = 11  # 500..1500 min^-1 in 100 min^-1 steps

    def axes(self):
        def ax(lo, hi, step):
            if step <= 0 or hi < lo:
                return np.empty(0)
            k = int(math.floor((hi - lo) / step + 1e-9))
            return lo + step * np.arange(k + 1)

        a = ax(self.alpha_min, self.alpha_max, self.alpha_step)
        b = ax(self.beta_min, self.beta_max, self.beta_step)
        n = np.linspace(self.n_ed_min, self.n_ed_max, self.n_ed_count) if self.n_ed_count > 0 else np.empty(0)
        return a, b, n


@dataclass
class TrainingSet:
    """Column store of hill chart samples, ordered alpha-major then beta then n_ED."""

    alpha: np.ndarray
    beta: np.ndarray
    n_ed: np.ndarray
    eta: np.ndarray
    q_ed: np.ndarray

    def __len__(self):
        return len(self.eta)

    def __getitem__(self, i):
        return HillChartSample(
            float(self.alpha[i]), float(self.beta[i]), float(self.n_ed[i]), float(self.eta[i]), float(self.q_ed[i])
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def X(self):
        return np.column_stack([self.alpha, self.beta, self.n_ed])

    @property
    def y(self):
        return self.eta

    @classmethod
    def from_samples(cls, samples):
        samples = list(samples)
        cols = zip(*((s.alpha, s.beta, s.n_ed, s.eta, s.q_ed) for s in samples)) if samples else [[]] * 5
        return cls(*(np.asarray(c, dtype=float) for c in cols))

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for row in zip(self.alpha, self.beta, self.n_ed, self.eta, self.q_ed):
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
                raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
            rows = []
            for lineno, row in enumerate(reader, start=2):
                try:
                    rows.append([float(v) for v in row])
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from None
                if len(row) != 5:
                    raise ValueError(f"{path}:{lineno}: expected 5 columns, got {len(row)}")
        arr = np.asarray(rows, dtype=float).reshape(-1, 5)
        return cls(*arr.T.copy())


def generate_training_set(chart: GroundTruthHillChart, grid: GridSpec = GridSpec(), noise_sd=0.003, seed=42):
    """Sample ``chart`` on a full-factorial grid, adding Gaussian noise to efficiency.

    The discharge factor is returned noise-free.  Output is bitwise
    reproducible for a given ``seed``.
    """
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    a, b, n = grid.axes()
    if a.size == 0 or b.size == 0 or n.size == 0:
        raise ValueError("sampling grid is empty")
    A, B, N = (m.ravel() for m in np.meshgrid(a, b, n, indexing="ij"))
    eta, q = chart.eval(A, B, N)
    if noise_sd > 0:
        rng = np.random.default_rng(seed)
        eta = eta + rng.normal(0.0, noise_sd, size=eta.shape)
    return TrainingSet(A, B, N, np.asarray(eta, dtype=float), np.asarray(q, dtype=float))


def write_training_csv(ts: TrainingSet, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    ts.to_csv(path)
