"""Physical constants, domain types and closed-form hydraulic relations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """Raised when a physical formula is evaluated outside its domain."""


@dataclass(frozen=True)
class PhysicalConstants:
    rho: float = 1000.0
    g: float = 9.81


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class TurbineGeometry:
    """Reduced-scale Kaplan runner. Speeds are in rev/s."""

    D: float = 0.34
    n_rated: float = 25.0
    p_rated: float = 50_000.0

    def __post_init__(self):
        if self.D <= 0:
            raise DomainError(f"runner diameter must be positive, got {self.D}")
        if self.n_rated <= 0:
            raise DomainError(f"rated speed must be positive, got {self.n_rated}")


@dataclass(frozen=True)
class OperatingPoint:
    alpha: float
    beta: float
    n: float
    H: float
    Q: float = 0.0

    def __post_init__(self):
        if self.H <= 0:
            raise DomainError(f"head must be positive, got {self.H}")
        if self.n < 0 or self.Q < 0:
            raise DomainError("speed and discharge must be non-negative")


@dataclass(frozen=True)
class DroopConfig:
    sigma_f: float = 125_000.0  # W/Hz
    dead_band: float = 0.002  # Hz
    f_nom: float = 50.0

    def __post_init__(self):
        if self.sigma_f <= 0:
            raise DomainError("droop must be positive")
        if self.dead_band < 0:
            raise DomainError("dead band must be non-negative")


def rpm_to_rps(n_rpm):
    return n_rpm / 60.0


def rps_to_rpm(n_rps):
    return n_rps * 60.0


def rps_to_rad(n_rps):
    return 2.0 * math.pi * n_rps


def speed_coefficient(n, D, H, g=CONSTANTS.g):
    """IEC speed factor n_ED = n*D/sqrt(g*H), with n in rev/s."""
    if np.any(np.asarray(H) <= 0) or np.any(np.asarray(D) <= 0):
        raise DomainError("head and diameter must be positive")
    return n * D / np.sqrt(g * H)


def speed_from_coefficient(n_ed, D, H, g=CONSTANTS.g):
    """Inverse of :func:`speed_coefficient`; returns rev/s."""
    if np.any(np.asarray(H) <= 0) or np.any(np.asarray(D) <= 0):
        raise DomainError("head and diameter must be positive")
    return n_ed * np.sqrt(g * H) / D


def specific_speed(omega, Q, E):
    """Dimensionless specific speed from angular speed (rad/s), discharge and specific energy (J/kg)."""
    if np.any(np.asarray(E) <= 0):
        raise DomainError(f"specific energy must be positive, got {E}")
    if np.any(np.asarray(Q) < 0):
        raise DomainError("discharge must be non-negative")
    return omega * np.sqrt(Q) / (math.sqrt(math.pi) * (2.0 * E) ** 0.75)


def discharge_for_specific_speed(v, omega, E):
    """Discharge giving specific speed ``v`` at ``omega`` and ``E`` (algebraic inversion)."""
    if E <= 0 or omega <= 0:
        raise DomainError("omega and specific energy must be positive")
    return (v * math.sqrt(math.pi) * (2.0 * E) ** 0.75 / omega) ** 2


# Slack on the dead-band edge so that e.g. 50 - 49.998 (which rounds to 0.0020000000000024)
# still counts as inside. Far below any measurable frequency step.
DEAD_BAND_EPS = 1e-9  # Hz


def fcr_setpoint(p_disp, f, droop: DroopConfig = DroopConfig()):
    """Expected plant output for dispatch ``p_disp`` under grid frequency ``f``.

    Deviations inside the closed dead band are zeroed; the droop product is
    unsaturated.
    """
    df = droop.f_nom - np.asarray(f, dtype=float)
    df = np.where(np.abs(df) <= droop.dead_band + DEAD_BAND_EPS, 0.0, df)
    out = p_disp + df * droop.sigma_f
    return float(out) if np.ndim(out) == 0 else out


def hydraulic_power(Q, H, const: PhysicalConstants = CONSTANTS):
    return const.rho * const.g * Q * H


def mechanical_power(T, omega):
    """Shaft power from torque (N*m) and angular speed (rad/s)."""
    return T * omega


def efficiency_ratios(p_pcc, p_m, p_h):
    """Return ``(eta_g, eta_h)`` relative to hydraulic power ``p_h``."""
    if np.any(np.asarray(p_h) <= 0):
        raise DomainError("hydraulic power must be positive")
    return p_pcc / p_h, p_m / p_h
