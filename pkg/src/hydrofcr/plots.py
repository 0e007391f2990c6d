"""SVG figures for batch results.

Output is byte-stable across runs: the SVG hash salt is fixed and the
creation date is omitted.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .kpi import efficiency_series, tracking_error  # noqa: E402

plt.rcParams["svg.hashsalt"] = "hydrofcr"
_META = {"Date": None, "Creator": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return Path(path)


def plot_frequency(freq, path):
    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(freq.time_s / 3600.0, freq.frequency_hz, lw=0.5)
    ax.set_xlabel("time [h]")
    ax.set_ylabel("frequency [Hz]")
    return _save(fig, path)


def plot_tracking_error(traces: dict, path, averaging_s=60):
    fig, ax = plt.subplots(figsize=(8, 3))
    for mode, tr in traces.items():
        te = tracking_error(tr)
        k = len(te) // averaging_s * averaging_s
        means = te[:k].reshape(-1, averaging_s).mean(axis=1)
        ax.plot(np.arange(len(means)) * averaging_s / 3600.0, means, lw=0.6, label=mode)
    ax.set_xlabel("time [h]")
    ax.set_ylabel("mean TE per bin [W]")
    ax.legend(fontsize="small")
    return _save(fig, path)


def plot_rbt_cdf(reports: dict, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    for mode, r in reports.items():
        x = r.rbt_derivative_cdf
        ax.step(x, np.arange(1, len(x) + 1) / len(x), where="post", label=mode)
    ax.set_xscale("symlog", linthresh=1e-3)
    ax.set_xlabel("|dRBT/dt| [N m/s]")
    ax.set_ylabel("empirical CDF")
    ax.legend(fontsize="small")
    return _save(fig, path)


def plot_efficiency(traces: dict, path):
    fig, axes = plt.subplots(1, 2, figsize=(9, 4), sharey=True)
    for mode, tr in traces.items():
        eta_h, eta_g = efficiency_series(tr)
        p = tr.p_hydro / 1000.0
        axes[0].plot(p[::30], eta_h[::30], ".", ms=1.5, label=mode)
        axes[1].plot(p[::30], eta_g[::30], ".", ms=1.5, label=mode)
    axes[0].set_title("hydraulic efficiency")
    axes[1].set_title("global efficiency")
    for ax in axes:
        ax.set_xlabel("turbine power [kW]")
    axes[0].legend(fontsize="small", markerscale=5)
    return _save(fig, path)


def write_all(out_dir, freq=None, traces=None, reports=None):
    out = Path(out_dir)
    written = []
    if freq is not None:
        written.append(plot_frequency(freq, out / "frequency.svg"))
    if traces:
        written.append(plot_tracking_error(traces, out / "tracking_error.svg"))
        written.append(plot_efficiency(traces, out / "efficiency.svg"))
    if reports:
        written.append(plot_rbt_cdf(reports, out / "rbt_cdf.svg"))
    return written
