"""Discrete-time models of the physical assets.

Servo actuators, runner hydraulics, electrical conversion chain and battery.
The per-step updates are scalar functions compiled with numba; the same
functions back the dataclass API below and the scenario loop in
:mod:`hydrofcr.simulate`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from numba import njit

from .core import TurbineGeometry, speed_coefficient
from .hillchart import GroundTruthHillChart, blade_torque_kernel, discharge_kernel, eta_kernel

FIXED = "fixed"
VARSPEED = "varspeed"


@njit(cache=True)
def servo_update(pos, ref, time_constant, rate_limit, lo, hi, dt):
    """First-order lag toward ``ref``, then rate limit, then position clamp."""
    if time_constant > 0.0:
        move = (ref - pos) * (1.0 - math.exp(-dt / time_constant))
    else:
        move = ref - pos
    max_move = rate_limit * dt
    if move > max_move:
        move = max_move
    elif move < -max_move:
        move = -max_move
    new = pos + move
    if new < lo:
        new = lo
    elif new > hi:
        new = hi
    return new


@njit(cache=True)
def lag_update(x, ref, time_constant, dt):
    if time_constant <= 0.0:
        return ref
    return x + (ref - x) * (1.0 - math.exp(-dt / time_constant))


@njit(cache=True)
def bess_limits(soc, p_rated, e_rated_wh, eta_charge, eta_discharge, dt):
    """Feasible (discharge, charge) power magnitudes for one step."""
    if p_rated <= 0.0 or e_rated_wh <= 0.0:
        return 0.0, 0.0
    e_j = 3600.0 * e_rated_wh
    p_dis = min(p_rated, soc * e_j * eta_discharge / dt)
    p_ch = min(p_rated, (1.0 - soc) * e_j / (eta_charge * dt))
    return max(p_dis, 0.0), max(p_ch, 0.0)


@njit(cache=True)
def bess_update(soc, p_cmd, p_rated, e_rated_wh, eta_charge, eta_discharge, dt):
    """Returns ``(soc', p_actual, clamped)``; positive power discharges."""
    p_dis, p_ch = bess_limits(soc, p_rated, e_rated_wh, eta_charge, eta_discharge, dt)
    p = p_cmd
    clamped = False
    if p > p_dis:
        p = p_dis
        clamped = True
    elif p < -p_ch:
        p = -p_ch
        clamped = True
    if p == 0.0 or e_rated_wh <= 0.0:
        return soc, p, clamped
    e_j = 3600.0 * e_rated_wh
    if p > 0.0:
        soc_new = soc - p * dt / (e_j * eta_discharge)
    else:
        soc_new = soc - p * dt * eta_charge / e_j
    if soc_new < 0.0:
        soc_new = 0.0
    elif soc_new > 1.0:
        soc_new = 1.0
    return soc_new, p, clamped


@njit(cache=True)
def hydraulics(alpha, beta, n, H, D, chart_params):
    """Instantaneous hydraulic state: ``(Q, eta_h, p_m, T_shaft, T_blade)``."""
    g = chart_params[19] / 1000.0
    n_ed = n * D / math.sqrt(g * H)
    q = discharge_kernel(alpha, beta, n_ed, H, chart_params)
    if q < 0.0:
        q = 0.0
    eta = eta_kernel(alpha, beta, n_ed, chart_params)
    p_m = eta * chart_params[19] * q * H
    if p_m < 0.0:
        p_m = 0.0
    omega = 2.0 * math.pi * n
    t_shaft = p_m / omega if omega > 0.0 else 0.0
    t_blade = blade_torque_kernel(alpha, beta, n_ed, H, chart_params)
    return q, eta, p_m, t_shaft, t_blade


@dataclass(frozen=True)
class ServoState:
    position: float
    rate_limit: float  # deg/s
    time_constant: float  # s
    min: float
    max: float

    def __post_init__(self):
        if not self.min <= self.position <= self.max:
            raise ValueError(f"servo position {self.position} outside [{self.min}, {self.max}]")


def step_servo(s: ServoState, ref, dt) -> ServoState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    pos = servo_update(s.position, float(ref), s.time_constant, s.rate_limit, s.min, s.max, dt)
    return replace(s, position=pos)


@dataclass(frozen=True)
class BessConfig:
    p_rated: float = 5_000.0  # W
    e_rated: float = 5_000.0  # Wh
    eta_charge: float = 0.95
    eta_discharge: float = 0.95
    soc_init: float = 0.5

    def __post_init__(self):
        if self.p_rated < 0 or self.e_rated < 0:
            raise ValueError("BESS ratings must be non-negative")
        if not (0 < self.eta_charge <= 1 and 0 < self.eta_discharge <= 1):
            raise ValueError("BESS efficiencies must lie in (0, 1]")
        if not 0 <= self.soc_init <= 1:
            raise ValueError("initial SoC must lie in [0, 1]")


class BessStep(NamedTuple):
    soc: float
    p_actual: float
    clamped: bool


def step_bess(cfg: BessConfig, soc, p_cmd, dt) -> BessStep:
    if not 0.0 <= soc <= 1.0:
        raise ValueError(f"SoC {soc} outside [0, 1]")
    return BessStep(*bess_update(float(soc), float(p_cmd), cfg.p_rated, cfg.e_rated,
                                 cfg.eta_charge, cfg.eta_discharge, float(dt)))


@dataclass(frozen=True)
class ElectricalChain:
    eta_gen: float = 0.95
    eta_conv: float = 0.97

    def __post_init__(self):
        if not (0 < self.eta_gen <= 1 and 0 < self.eta_conv <= 1):
            raise ValueError("chain efficiencies must lie in (0, 1]")

    def factor(self, mode):
        return self.eta_gen * self.eta_conv if mode == VARSPEED else self.eta_gen


def electrical_power(p_m, mode, chain: ElectricalChain = ElectricalChain()):
    if np.any(np.asarray(p_m) < 0):
        raise ValueError("mechanical power must be non-negative")
    if mode not in (FIXED, VARSPEED):
        raise ValueError(f"unknown electrical mode {mode!r}")
    return p_m * chain.factor(mode)


@dataclass(frozen=True)
class PlantConfig:
    geometry: TurbineGeometry = TurbineGeometry()
    chart: GroundTruthHillChart = field(default_factory=GroundTruthHillChart)
    chain: ElectricalChain = ElectricalChain()
    head: float = 10.0
    gvo_rate: float = 2.0
    gvo_tc: float = 0.2
    rba_rate: float = 0.5
    rba_tc: float = 0.5
    speed_tc: float = 1.0
    speed_min_rpm: float = 500.0
    speed_max_rpm: float = 1500.0
    dt: float = 0.02


@dataclass(frozen=True)
class PlantState:
    gvo: ServoState
    rba: ServoState
    n: float  # rev/s
    H: float
    Q: float = 0.0
    T_shaft: float = 0.0
    T_blade: float = 0.0
    eta_h: float = 0.0
    p_m: float = 0.0
    p_hydro: float = 0.0
    p_pcc: float = 0.0
    soc: float = 0.5
    p_bess: float = 0.0

    @property
    def n_ed(self):
        return float(speed_coefficient(self.n, 0.34, self.H))


def initial_state(cfg: PlantConfig, alpha, beta, n=None, soc=0.5) -> PlantState:
    ch = cfg.chart
    gvo = ServoState(float(alpha), cfg.gvo_rate, cfg.gvo_tc, 0.0, ch.alpha_max)
    rba = ServoState(float(beta), cfg.rba_rate, cfg.rba_tc, ch.beta_min, ch.beta_max)
    return PlantState(gvo, rba, cfg.geometry.n_rated if n is None else float(n), cfg.head, soc=soc)


def step_hydraulics(state: PlantState, cfg: PlantConfig, mode=FIXED, n_ref=None, dt=None) -> PlantState:
    """Advance the shaft speed (VarSpeed lag or pinned) and evaluate the hydraulic state."""
    dt = cfg.dt if dt is None else dt
    if mode == VARSPEED:
        ref = state.n if n_ref is None else float(n_ref)
        n = lag_update(state.n, ref, cfg.speed_tc, dt)
    else:
        n = cfg.geometry.n_rated
    q, eta, p_m, t_shaft, t_blade = hydraulics(
        state.gvo.position, state.rba.position, n, state.H, cfg.geometry.D, cfg.chart.params
    )
    p_hydro = p_m * cfg.chain.factor(mode)
    return replace(state, n=n, Q=q, eta_h=eta, p_m=p_m, T_shaft=t_shaft, T_blade=t_blade,
                   p_hydro=p_hydro, p_pcc=p_hydro + state.p_bess)


__all__ = [
    "BessConfig", "BessStep", "ElectricalChain", "PlantConfig", "PlantState", "ServoState",
    "bess_update", "electrical_power", "hydraulics", "initial_state", "lag_update", "servo_update",
    "step_bess", "step_hydraulics", "step_servo",
]
