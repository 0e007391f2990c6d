"""Compiled plant/controller loop.

One call runs a whole scenario at the internal step and returns the 1 Hz
log.  Each logged row is the mean over its logging interval, the way a
1 Hz channel aggregates a faster measurement stream.  The step order
mirrors :class:`hydrofcr.control.Governor` followed by the plant updates
in :mod:`hydrofcr.plant`: governor on the previous measurement, servos,
shaft speed, hydraulics, battery.  The kernel releases the GIL so
independent scenarios can run on separate threads.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .control import interp1, pi_update, split_update
from .plant import bess_limits, bess_update, hydraulics, lag_update, servo_update

LOG_COLUMNS = (
    "frequency_hz", "p_set_w", "p_pcc_w", "p_hydro_w", "p_bess_w", "gvo_deg", "rba_deg", "rbt_nm",
    "discharge_m3s", "head_m", "shaft_torque_nm", "speed_rps", "soc", "p_mech_w",
)
(
    C_F, C_PSET, C_PCC, C_PHYDRO, C_PBESS, C_GVO, C_RBA, C_RBT, C_Q, C_H, C_TSHAFT, C_N, C_SOC, C_PM,
) = range(len(LOG_COLUMNS))

MODE_ONLY_HYDRO, MODE_VARSPEED, MODE_HYBRID = 0, 1, 2


@njit(cache=True, nogil=True)
def run_kernel(mode, freq, freq_dt, dt, n_warm, n_log, log_every,
               p_disp, f_nom, dead_band, sigma_f,
               chart, D, H, n_rated, chain_factor,
               gvo_rate, gvo_tc, rba_rate, rba_tc, alpha_max, beta_min, beta_max,
               speed_tc, n_min, n_max, kp, ki,
               sp_p, sp_a, cam_a, cam_c, beta_fixed,
               bess_p, bess_e, eta_c, eta_d, soc0,
               lp_alpha, recenter_steps, recenter_gain, soc_target,
               alpha0, beta0, n0):
    out = np.zeros((n_log, 14))
    alpha, beta, n = alpha0, beta0, n0
    soc = soc0
    integ = 0.0
    lp = p_disp
    bias = 0.0
    p_hydro = p_disp
    n_steps = n_warm + n_log * log_every
    n_freq = freq.shape[0]
    j = 0
    for k in range(n_steps):
        if k < n_warm:
            f = f_nom
        else:
            i = int((k - n_warm) * dt / freq_dt + 1e-9)
            if i >= n_freq:
                i = n_freq - 1
            f = freq[i]
        df = f_nom - f
        if abs(df) <= dead_band + 1e-9:
            df = 0.0
        p_set = p_disp + df * sigma_f

        # governor
        if mode == 2:
            if k >= n_warm and (k - n_warm) % recenter_steps == 0:
                bias = recenter_gain * (soc_target - soc)
            p_dis, p_ch = bess_limits(soc, bess_p, bess_e, eta_c, eta_d, dt)
            h, b_cmd, lp = split_update(lp, p_set, bias, lp_alpha, p_dis, p_ch)
        else:
            h, b_cmd = p_set, 0.0
        ff = interp1(h / chain_factor, sp_p, sp_a)
        a_ref, integ = pi_update(integ, h - p_hydro, ff, kp, ki, 0.0, alpha_max, dt)
        if mode == 1:
            b_ref = beta_fixed
            n_ref = interp1(a_ref, cam_a, cam_c)
            if n_ref < n_min:
                n_ref = n_min
            elif n_ref > n_max:
                n_ref = n_max
        else:
            b_ref = interp1(a_ref, cam_a, cam_c)
            n_ref = n_rated

        # plant
        alpha = servo_update(alpha, a_ref, gvo_tc, gvo_rate, 0.0, alpha_max, dt)
        if mode != 1:
            beta = servo_update(beta, b_ref, rba_tc, rba_rate, beta_min, beta_max, dt)
            n = n_rated
        else:
            n = lag_update(n, n_ref, speed_tc, dt)
        q, eta, p_m, t_shaft, t_blade = hydraulics(alpha, beta, n, H, D, chart)
        p_hydro = p_m * chain_factor
        soc, p_b, _ = bess_update(soc, b_cmd, bess_p, bess_e, eta_c, eta_d, dt)

        if k >= n_warm:
            row = out[j]
            row[C_F] += f
            row[C_PSET] += p_set
            row[C_PCC] += (p_hydro + p_b)
            row[C_PHYDRO] += p_hydro
            row[C_PBESS] += p_b
            row[C_GVO] += alpha
            row[C_RBA] += beta
            row[C_RBT] += t_blade
            row[C_Q] += q
            row[C_H] += H
            row[C_TSHAFT] += t_shaft
            row[C_N] += n
            row[C_SOC] += soc
            row[C_PM] += p_m
            if (k - n_warm + 1) % log_every == 0:
                j += 1
    return out / log_every
