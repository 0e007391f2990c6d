"""Governors for standalone hydro, variable-speed hydro and BESS hybrids.

The hydro governor is a feed-forward CAM/set-point map plus a PI trim on the
measured power error.  The hybrid adds a two-layer split: a low-pass filter
hands the slow part of the FCR set-point to the turbine and the residual to
the battery, and a periodic SoC recentering bias steers the battery back to
its target charge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from numba import njit

from .cam import KAPLAN, VARSPEED as CAM_VARSPEED, CamTable, SetpointMap
from .core import DroopConfig, fcr_setpoint
from .plant import BessConfig, ElectricalChain, bess_limits

ONLY_HYDRO = "only_hydro"
VARSPEED = "varspeed"
HYBRID = "hybrid_bess"
MODE_CODES = {ONLY_HYDRO: 0, VARSPEED: 1, HYBRID: 2}


@njit(cache=True)
def pi_update(integ, err, ff, kp, ki, lo, hi, dt):
    """PI trim around feed-forward ``ff``; returns ``(ref, integ')``.

    Anti-windup: the integrator is frozen while the output is saturated in
    the direction the error pushes it.
    """
    raw = ff + kp * err + integ
    if not ((raw >= hi and err > 0.0) or (raw <= lo and err < 0.0)):
        integ = integ + ki * err * dt
        raw = ff + kp * err + integ
    if raw < lo:
        raw = lo
    elif raw > hi:
        raw = hi
    return raw, integ


@njit(cache=True)
def split_update(lp, p_set, bias, a_lp, p_dis, p_ch):
    """One step of the low-pass split; returns ``(p_hydro_ref, p_bess_ref, lp')``.

    The battery share is clipped to what the battery can deliver this step,
    the turbine takes the remainder, and the filter state follows the
    reference actually handed to the turbine.
    """
    lp = lp + a_lp * (p_set - lp)
    h = lp + bias
    b = p_set - h
    if b > p_dis:
        b = p_dis
    elif b < -p_ch:
        b = -p_ch
    h = p_set - b
    return h, b, h - bias


@njit(cache=True)
def interp1(x, xp, fp):
    """Scalar linear interpolation with end clamping (``np.interp`` for one point)."""
    n = xp.shape[0]
    if x <= xp[0]:
        return fp[0]
    if x >= xp[n - 1]:
        return fp[n - 1]
    lo, hi = 0, n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if xp[mid] <= x:
            lo = mid
        else:
            hi = mid
    w = (x - xp[lo]) / (xp[hi] - xp[lo])
    return fp[lo] + w * (fp[hi] - fp[lo])


@dataclass(frozen=True)
class HybridSplitConfig:
    lp_cutoff: float = 1.0 / 300.0  # Hz
    soc_target: float = 0.5
    recenter_period: float = 300.0  # s
    recenter_gain: float | None = None  # W per unit SoC; None means 2 * p_rated

    def __post_init__(self):
        if self.lp_cutoff <= 0:
            raise ValueError("lp_cutoff must be positive")
        if not 0 < self.soc_target < 1:
            raise ValueError("soc_target must lie in (0, 1)")
        if self.recenter_period <= 0:
            raise ValueError("recenter_period must be positive")

    def gain(self, p_rated):
        return 2.0 * p_rated if self.recenter_gain is None else self.recenter_gain

    def alpha(self, dt):
        """Discrete smoothing factor of the first-order low-pass."""
        return 1.0 - math.exp(-2.0 * math.pi * self.lp_cutoff * dt)


class HybridSplit:
    """Stateful two-layer power split.

    Call with the current set-point, SoC and time; returns
    ``(p_hydro_ref, p_bess_ref)`` whose sum equals ``p_set``.
    """

    def __init__(self, cfg: HybridSplitConfig = HybridSplitConfig(), bess: BessConfig = BessConfig(), dt=0.02,
                 p_init=None):
        self.cfg, self.bess, self.dt = cfg, bess, dt
        self.lp = p_init
        self.bias = 0.0
        self._next_recenter = 0.0

    def __call__(self, p_set, soc, t):
        if not 0.0 <= soc <= 1.0:
            raise ValueError(f"SoC {soc} outside [0, 1]")
        if self.lp is None:
            self.lp = float(p_set)
        if t >= self._next_recenter:
            self.bias = self.cfg.gain(self.bess.p_rated) * (self.cfg.soc_target - soc)
            self._next_recenter = t + self.cfg.recenter_period
        b = self.bess
        p_dis, p_ch = bess_limits(soc, b.p_rated, b.e_rated, b.eta_charge, b.eta_discharge, self.dt)
        h, p_b, self.lp = split_update(self.lp, float(p_set), self.bias, self.cfg.alpha(self.dt), p_dis, p_ch)
        return h, p_b


def hybrid_split(cfg: HybridSplitConfig, p_set, soc, t, state: HybridSplit | None = None):
    """Functional entry point; pass ``state`` to keep filter memory across calls."""
    state = state or HybridSplit(cfg)
    return state(p_set, soc, t)


class ActuatorRefs(NamedTuple):
    alpha: float
    beta: float
    n: float  # rev/s
    p_set: float
    p_hydro_ref: float
    p_bess_ref: float


@dataclass(frozen=True)
class GovernorConfig:
    mode: str
    cam: CamTable
    setpoint_map: SetpointMap | None = None
    droop: DroopConfig = DroopConfig()
    kp: float = 2e-4  # deg/W
    ki: float = 5e-5  # deg/(W s)
    chain: ElectricalChain = ElectricalChain()
    beta_fixed: float = 18.0
    n_rated: float = 25.0
    speed_limits: tuple = (500.0 / 60.0, 1500.0 / 60.0)  # rev/s
    alpha_max: float = 30.0
    split: HybridSplitConfig = field(default_factory=HybridSplitConfig)
    bess: BessConfig = field(default_factory=BessConfig)

    def __post_init__(self):
        if self.mode not in MODE_CODES:
            raise ValueError(f"unknown governor mode {self.mode!r}")
        want = CAM_VARSPEED if self.mode == VARSPEED else KAPLAN
        if self.cam.mode != want:
            raise ValueError(f"{self.mode} governor needs a {want} CAM, got {self.cam.mode}")
        if self.setpoint_map is None:
            object.__setattr__(self, "setpoint_map", SetpointMap.from_table(self.cam))

    @property
    def chain_factor(self):
        return self.chain.factor("varspeed" if self.mode == VARSPEED else "fixed")


class Governor:
    """Stateful governor; :meth:`step` is the per-sample control law."""

    def __init__(self, cfg: GovernorConfig, dt=0.02):
        self.cfg, self.dt = cfg, dt
        self.integ = 0.0
        self.split = HybridSplit(cfg.split, cfg.bess, dt) if cfg.mode == HYBRID else None

    def step(self, f, p_disp, p_hydro_meas, soc=0.5, t=0.0) -> ActuatorRefs:
        """``p_hydro_meas`` is the turbine's electrical output at the PCC."""
        c = self.cfg
        p_set = fcr_setpoint(p_disp, f, c.droop)
        if self.split is not None:
            if self.split.lp is None:
                self.split.lp = float(p_disp)  # filter starts settled on the dispatch
            h, b = self.split(p_set, soc, t)
        else:
            h, b = p_set, 0.0
        ff = float(c.setpoint_map(h / c.chain_factor))
        a_hi = min(c.alpha_max, float(c.cam.alpha[-1]))
        alpha, self.integ = pi_update(self.integ, h - p_hydro_meas, ff, c.kp, c.ki, 0.0, a_hi, self.dt)
        if c.mode == VARSPEED:
            lo, hi = c.speed_limits
            beta, n = c.beta_fixed, min(max(float(c.cam.control_at(alpha)), lo), hi)
        else:
            beta, n = float(c.cam.control_at(alpha)), c.n_rated
        return ActuatorRefs(alpha, beta, n, p_set, h, b)


def governor_step(gov: Governor, f, p_disp, plant, t=0.0) -> ActuatorRefs:
    """Control law against a :class:`~hydrofcr.plant.PlantState` measurement."""
    return gov.step(f, p_disp, plant.p_hydro, plant.soc, t)
