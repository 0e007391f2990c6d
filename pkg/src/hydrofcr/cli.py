"""Command-line entry point: ``hydrofcr <subcommand> [options]``.

Failures print one JSON object ``{"error": ..., "message": ...}`` on stderr
and exit nonzero (2 for bad input, 1 for anything unexpected).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import plots
from .core import DomainError
from .hillchart import GridSpec, GroundTruthHillChart, TrainingSet, generate_training_set
from .kpi import KpiError, Trace
from .scenario import (
    ALL_MODES, BASELINE, ScenarioConfig, ScenarioError, build_assets, build_cams, compare_scenarios,
    format_comparison, load_frequency_csv, load_reports, run_batch, synthesize_frequency, write_comparison_csv,
)
from .surrogate import EfficiencySurrogate, FitError, fit_surrogate

USER_ERRORS = (ScenarioError, KpiError, DomainError, FitError, FileNotFoundError, ValueError)


def _config(args) -> ScenarioConfig:
    cfg = ScenarioConfig.from_toml(args.config) if args.config else ScenarioConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "modes", None):
        cfg = dataclasses.replace(cfg, modes=tuple(m.strip() for m in args.modes.split(",") if m.strip()))
    return cfg


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _frequency(args, cfg):
    src = args.freq or cfg.frequency.source
    if src == "synthetic":
        return synthesize_frequency(cfg.seed, cfg.duration_s, cfg.frequency.split_at_s)
    return load_frequency_csv(src)


def _surrogate(args, cfg):
    if getattr(args, "surrogate", None):
        return EfficiencySurrogate.from_json(Path(args.surrogate).read_text(encoding="utf-8"))
    return None


def cmd_gen_hillchart(args):
    cfg = _config(args)
    ts = generate_training_set(GroundTruthHillChart(), GridSpec(), cfg.noise_sd, cfg.seed)
    path = _out(args) / "training.csv"
    ts.to_csv(path)
    return {"training": str(path), "rows": len(ts)}


def cmd_fit_surrogate(args):
    cfg = _config(args)
    if args.training:
        ts = TrainingSet.from_csv(args.training)
    else:
        ts = generate_training_set(GroundTruthHillChart(), GridSpec(), cfg.noise_sd, cfg.seed)
    sur = fit_surrogate(ts, cfg.surrogate)
    path = _out(args) / "surrogate.json"
    path.write_text(sur.to_json(), encoding="utf-8")
    return {"surrogate": str(path), **sur.fit_stats}


def cmd_gen_cam(args):
    cfg = _config(args)
    sur = _surrogate(args, cfg) or build_assets(cfg).surrogate
    kaplan, varspeed = build_cams(sur, cfg)
    out = _out(args)
    kaplan.save(out / "cam_kaplan.csv")
    varspeed.save(out / "cam_varspeed.csv")
    return {"cams": [str(out / "cam_kaplan.csv"), str(out / "cam_varspeed.csv")]}


def cmd_gen_frequency(args):
    cfg = _config(args)
    freq = synthesize_frequency(cfg.seed, cfg.duration_s, cfg.frequency.split_at_s)
    out = _out(args)
    freq.to_csv(out / "frequency.csv")
    plots.plot_frequency(freq, out / "frequency.svg")
    return {"frequency": str(out / "frequency.csv"), "samples": len(freq)}


def cmd_simulate(args):
    cfg = _config(args)
    freq = _frequency(args, cfg)
    assets = build_assets(cfg, surrogate=_surrogate(args, cfg))
    results = run_batch(cfg, freq, assets)
    out = _out(args)
    for mode, (trace, report) in results.items():
        trace.to_csv(out / f"{mode}.trace.csv")
    reports = {m: r for m, (_, r) in results.items()}
    if BASELINE in reports:
        reports = compare_scenarios(reports)
        write_comparison_csv(reports, out / "comparison.csv")
        (out / "comparison.txt").write_text(format_comparison(reports) + "\n", encoding="utf-8")
    for mode, report in reports.items():
        (out / f"{mode}.kpi.json").write_text(report.to_json() + "\n", encoding="utf-8")
    assets.kaplan.save(out / "cam_kaplan.csv")
    assets.varspeed.save(out / "cam_varspeed.csv")
    plots.write_all(out, freq, {m: t for m, (t, _) in results.items()}, reports)
    return {"out": str(out), "modes": list(results)}


def cmd_compare(args):
    reports = load_reports(args.input)
    compared = compare_scenarios(reports, args.baseline)
    out = _out(args)
    write_comparison_csv(compared, out / "comparison.csv")
    text = format_comparison(compared)
    (out / "comparison.txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    return {"comparison": str(out / "comparison.csv")}


def cmd_report(args):
    src = Path(args.input)
    traces = {p.name.split(".")[0]: Trace.from_csv(p) for p in sorted(src.glob("*.trace.csv"))}
    reports = load_reports(src)
    if not traces and not reports:
        raise ScenarioError(f"no traces or KPI reports found in {src}")
    written = plots.write_all(_out(args), None, traces, reports)
    return {"plots": [str(p) for p in written]}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(json.dumps({"error": "UsageError", "message": message}), file=sys.stderr)
        sys.exit(2)


def build_parser():
    p = _Parser(prog="hydrofcr", description="Hydro FCR hybridisation test bench")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="TOML scenario configuration")
        sp.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
        sp.add_argument("--out", default="out", help="output directory")
        sp.set_defaults(func=fn)
        return sp

    add("gen-hillchart", cmd_gen_hillchart, "write the noisy training grid")
    fs = add("fit-surrogate", cmd_fit_surrogate, "fit the MARS efficiency surrogate")
    fs.add_argument("--training", help="training CSV (default: regenerate)")
    gc = add("gen-cam", cmd_gen_cam, "build Kaplan and VarSpeed CAM tables")
    gc.add_argument("--surrogate", help="surrogate JSON (default: fit a new one)")
    add("gen-frequency", cmd_gen_frequency, "write the synthetic frequency series")
    sim = add("simulate", cmd_simulate, "run the scenario batch")
    sim.add_argument("--freq", help="frequency CSV path or 'synthetic'")
    sim.add_argument("--modes", help=f"comma-separated subset of {','.join(ALL_MODES)}")
    sim.add_argument("--surrogate", help="surrogate JSON (default: fit a new one)")
    cmp_ = add("compare", cmd_compare, "compare KPI reports against the baseline")
    cmp_.add_argument("--in", dest="input", required=True, help="directory with *.kpi.json")
    cmp_.add_argument("--baseline", default=BASELINE)
    rep = add("report", cmd_report, "render SVG plots from a results directory")
    rep.add_argument("--in", dest="input", required=True, help="directory with traces and KPI reports")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        result = args.func(args)
    except USER_ERRORS as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - last-resort reporting
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    print(json.dumps(result, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
