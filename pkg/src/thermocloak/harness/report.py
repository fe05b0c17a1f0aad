"""CSV, JSON and figure output for harness runs."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from thermocloak.fem import write_field_csv  # noqa: E402
from thermocloak.grids import Grid2D  # noqa: E402

FREQ_HEADER = ["epsilon", "omega", "errL2", "errH1", "envelope"]
TIME_HEADER = ["time", "normL2", "normH1"]
SPECTRUM_HEADER = ["omega", "errL2", "errH1"]


def _fmt(x):
    return repr(float(x))


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_rows(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = np.array([[float(v) for v in row] for row in r], dtype=float).reshape(-1, len(header))
    return header, data


def write_frequency_csv(path, records):
    rows = sorted(((r.epsilon, r.omega, r.errL2, r.errH1, r.envelope) for r in records), key=lambda t: (t[0], t[1]))
    write_rows(path, FREQ_HEADER, rows)


def write_time_csv(path, times, norm_l2, norm_h1):
    write_rows(path, TIME_HEADER, zip(times, norm_l2, norm_h1))


def write_spectrum_csv(path, omegas, err_l2, err_h1):
    write_rows(path, SPECTRUM_HEADER, zip(omegas, err_l2, err_h1))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_summary(path, summary):
    with open(path, "w") as fh:
        json.dump(_clean(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# figures


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_rates(path, records_by_tag, dimension):
    """errH1 against epsilon per object and omega, with the reference envelope slope."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for tag, recs in sorted(records_by_tag.items()):
        eps = np.array([r.epsilon for r in recs])
        err = np.array([r.errH1 for r in recs])
        order = np.argsort(eps)
        ax.loglog(eps[order], err[order], "o-", label=tag)
        ref = np.array([r.envelope for r in recs])[order]
        if err.size and ref[-1] > 0:
            ax.loglog(eps[order], ref * err[order][-1] / ref[-1], "k--", lw=0.8)
    ax.set_xlabel(r"$\varepsilon$")
    ax.set_ylabel(r"exterior $H^1$ visibility")
    ax.set_title(f"d = {dimension}; dashed: envelope shape")
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_time_curves(path, curves):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for label, (times, h1) in sorted(curves.items()):
        ax.semilogy(times[1:], np.maximum(h1[1:], 1e-300), label=label)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\|u_c - u\|_{H^1}$ outside $B_{r}$")
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_spectrum(path, omegas, err_h1, label=None):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    mask = omegas > 0
    ax.loglog(omegas[mask], np.maximum(err_h1[mask], 1e-300), label=label)
    ax.set_xlabel(r"$\omega$")
    ax.set_ylabel(r"exterior $H^1$ norm of $\hat v$")
    if label:
        ax.legend(fontsize=7)
    return _save(fig, path)


def plot_field(path, grid, values, title=""):
    values = np.asarray(values)
    fig, ax = plt.subplots(figsize=(5, 4))
    if isinstance(grid, Grid2D):
        img = np.abs(values).reshape(grid.ny + 1, grid.nx + 1)
        x0, x1, y0, y1 = grid.bounds
        im = ax.imshow(img, origin="lower", extent=(x0, x1, y0, y1), cmap="viridis")
        fig.colorbar(im, ax=ax, label="modulus")
        ax.set_aspect("equal")
    else:
        ax.plot(grid.radii, values.real, label="real part")
        if np.iscomplexobj(values):
            ax.plot(grid.radii, values.imag, label="imaginary part")
        ax.set_xlabel("r")
        ax.legend(fontsize=7)
    ax.set_title(title, fontsize=9)
    return _save(fig, path)


def write_sweep_outputs(result, cfg, out_dir, extra_summary=None, figures=True):
    """Write CSVs, field files, figures and ``summary.json``; return the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    tags = sorted({r.medium for r in result.records})
    freq_by_tag = {}
    for tag in tags:
        recs = [r for r in result.records if r.medium == tag and r.omega is not None]
        if recs:
            p = out / f"freq_{tag}.csv"
            write_frequency_csv(p, recs)
            written.append(p)
            for omega in sorted({r.omega for r in recs}):
                freq_by_tag[f"{tag}, omega={omega:g}"] = [r for r in recs if r.omega == omega]
    curves = {}
    for (tag, eps), curve in sorted(result.curves.items()):
        p = out / f"time_{tag}_eps{eps:g}.csv"
        write_time_csv(p, curve.times, curve.errL2, curve.errH1)
        written.append(p)
        curves[f"{tag}, eps={eps:g}"] = (curve.times, curve.errH1)
    for name, grid, values in result.fields:
        p = out / name
        write_field_csv(p, grid, values)
        written.append(p)
        if figures:
            written.append(plot_field(out / (Path(name).stem + ".png"), grid, values, Path(name).stem))
    if figures:
        if freq_by_tag:
            written.append(plot_rates(out / "rates_frequency.png", freq_by_tag, cfg.dimension))
        if curves:
            written.append(plot_time_curves(out / "time_curves.png", curves))
            peaks = {}
            for tag in tags:
                recs = result.peak_time_records(tag)
                if recs:
                    peaks[f"{tag}, sup over t"] = recs
            if peaks:
                written.append(plot_rates(out / "rates_time.png", peaks, cfg.dimension))
    summary = dict(result.summary)
    summary.pop("runtime_s", None)
    summary["failure_messages"] = [f"eps={f.epsilon:g} {f.medium}: {f.message}" for f in result.failures]
    if extra_summary:
        summary.update(extra_summary)
    p = out / "summary.json"
    write_summary(p, summary)
    written.append(p)
    return written
