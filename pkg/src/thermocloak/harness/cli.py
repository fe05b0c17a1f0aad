"""Command line entry point: ``thermocloak <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from thermocloak.harness import report
from thermocloak.harness.config import ConfigError, load_config
from thermocloak.harness.fitting import fit_rate
from thermocloak.harness.sweep import make_grid, object_independence_check, object_tag, run_sweep

logger = logging.getLogger("thermocloak")


def _out_dir(cfg, args):
    return Path(args.out) if args.out else Path(cfg.out_dir)


def _spectral_outputs(cfg, out):
    """Frequency-synthesized visibility curves next to the time-stepped ones."""
    from thermocloak.heat import TimeGrid
    from thermocloak.medium import MaterialField, assemble_blownup_medium
    from thermocloak.spectral import omega_grid, visibility_via_frequency_integral
    from thermocloak.transform import BlowupMap

    written, bounds = [], {}
    tg = TimeGrid(cfg.t_final, cfg.dt)
    for obj in cfg.objects:
        tag = object_tag(obj)
        for eps in sorted(cfg.epsilons):
            grid = make_grid(cfg, eps)
            blown = assemble_blownup_medium(BlowupMap(eps, cfg.dimension), obj, grid)
            sv = visibility_via_frequency_integral(
                blown,
                MaterialField.homogeneous(grid),
                grid,
                cfg.source,
                np.zeros(grid.num_nodes),
                tg.times[1:],
                omega_grid(),
                cfg.r_obs,
            )
            p = out / f"spectrum_{tag}_eps{eps:g}.csv"
            report.write_spectrum_csv(p, sv.omegas, sv.spectrum_L2, sv.spectrum_H1)
            q = out / f"synth_{tag}_eps{eps:g}.csv"
            report.write_time_csv(q, sv.curve.times, sv.curve.errL2, sv.curve.errH1)
            fig = report.plot_spectrum(out / f"spectrum_{tag}_eps{eps:g}.png", sv.omegas, sv.spectrum_H1, tag)
            written += [p, q, fig]
            bounds[f"{tag}/eps={eps:g}"] = {"L2": sv.bound_L2, "H1": sv.bound_H1}
    return written, bounds


def cmd_time_run(args):
    cfg = load_config(args.config)
    if not cfg.has_time:
        raise ConfigError("time-run needs t_final and dt")
    t0 = time.perf_counter()
    result = run_sweep(cfg, time_domain=True, frequency_domain=False)
    out = _out_dir(cfg, args)
    extra = {"mode": "time"}
    written = report.write_sweep_outputs(result, cfg, out, extra)
    if cfg.spectral:
        more, bounds = _spectral_outputs(cfg, out)
        written += more
        extra["frequency_integral_bounds"] = bounds
        report.write_summary(out / "summary.json", {**json.loads((out / "summary.json").read_text()), **extra})
    _finish(written, result, t0)
    return 0 if not result.failures else 2


def cmd_freq_run(args):
    cfg = load_config(args.config)
    t0 = time.perf_counter()
    result = run_sweep(cfg, time_domain=False)
    written = report.write_sweep_outputs(result, cfg, _out_dir(cfg, args), {"mode": "frequency"})
    _finish(written, result, t0)
    return 0 if not result.failures else 2


def cmd_sweep(args):
    cfg = load_config(args.config)
    t0 = time.perf_counter()
    result = run_sweep(cfg)
    extra = {"mode": "sweep"}
    if len(cfg.objects) == 2 and len(cfg.epsilons) >= 3:
        try:
            rep = object_independence_check(cfg, time_domain=False)
            extra["object_independence"] = rep.as_dict()
        except ValueError as exc:
            extra["object_independence"] = {"error": str(exc)}
    written = report.write_sweep_outputs(result, cfg, _out_dir(cfg, args), extra)
    _finish(written, result, t0)
    return 0 if not result.failures else 2


def cmd_validate(args):
    from thermocloak.harness.validation import CHECKS, run_checks

    keys = [k.strip().upper() for k in args.only.split(",")] if args.only else None
    if keys:
        unknown = [k for k in keys if k not in CHECKS]
        if unknown:
            raise ConfigError(f"unknown checks: {', '.join(unknown)}")
    results = []
    for res in run_checks(keys, quick=args.quick):
        print(res.line, flush=True)
        results.append(res)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report.write_summary(
            out / "validation.json",
            {"checks": [r.as_dict() for r in results], "passed": all(r.passed for r in results)},
        )
    return 0 if all(r.passed for r in results) else 1


def cmd_rates(args):
    """Fit rates from ``freq_*.csv`` and ``time_*.csv`` files of earlier runs."""
    src = Path(args.directory)
    if not src.is_dir():
        raise ConfigError(f"{src} is not a directory")
    fits = {}
    for path in sorted(src.glob("freq_*.csv")):
        _, data = report.read_rows(path)
        for omega in sorted(set(data[:, 1])):
            rows = data[data[:, 1] == omega]
            pairs = list(zip(rows[:, 0], rows[:, 3]))
            fits[f"{path.stem}/omega={omega:g}"] = _fit_both(pairs, args.model)
    peaks = {}
    for path in sorted(src.glob("time_*_eps*.csv")):
        stem = path.stem[len("time_") :]
        tag, _, eps = stem.rpartition("_eps")
        _, data = report.read_rows(path)
        peaks.setdefault(tag, []).append((float(eps), float(data[:, 2].max())))
    for tag, pairs in sorted(peaks.items()):
        fits[f"time_{tag}/sup"] = _fit_both(sorted(pairs), args.model)
    if not fits:
        raise ConfigError(f"no freq_*.csv or time_*.csv files in {src}")
    for key, val in fits.items():
        print(f"{key}: " + ", ".join(f"{m}={v.get('value')}" for m, v in val.items()))
    out = Path(args.out) if args.out else src
    out.mkdir(parents=True, exist_ok=True)
    report.write_summary(out / "rates.json", fits)
    return 0


def _fit_both(pairs, model):
    models = ("power-law", "log-reciprocal") if model == "both" else (model,)
    out = {}
    for m in models:
        try:
            out[m] = fit_rate(pairs, m).as_dict()
        except ValueError as exc:
            out[m] = {"error": str(exc), "value": None}
    return out


def _finish(written, result, t0):
    for f in result.failures:
        logger.warning("failed point eps=%g (%s): %s", f.epsilon, f.medium, f.message)
    print(f"wrote {len(written)} files in {time.perf_counter() - t0:.1f}s")


def build_parser():
    p = argparse.ArgumentParser(prog="thermocloak", description="Visibility of approximate thermal cloaks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (
        ("time-run", cmd_time_run, "time-domain visibility curves"),
        ("freq-run", cmd_freq_run, "frequency-domain visibility records"),
        ("sweep", cmd_sweep, "full sweep with rate fits and object comparison"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("config", help="flat key = value configuration file")
        s.add_argument("--out", help="output directory (overrides out_dir)")
        s.set_defaults(func=fn)
    s = sub.add_parser("validate", help="run the acceptance checks")
    s.add_argument("--quick", action="store_true", help="skip the slow 2D checks")
    s.add_argument("--only", help="comma separated check ids, e.g. C1,C7")
    s.add_argument("--out", help="directory for validation.json")
    s.set_defaults(func=cmd_validate)
    s = sub.add_parser("rates", help="fit rates from CSVs of earlier runs")
    s.add_argument("directory")
    s.add_argument("--model", choices=("power-law", "log-reciprocal", "both"), default="both")
    s.add_argument("--out", help="directory for rates.json (defaults to the input directory)")
    s.set_defaults(func=cmd_rates)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
