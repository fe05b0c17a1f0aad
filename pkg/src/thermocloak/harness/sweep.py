"""Epsilon/omega sweeps of exterior visibility."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from thermocloak import special
from thermocloak.grids import Grid2D, RadialGrid
from thermocloak.heat import TimeGrid, solve_parabolic, visibility_time_domain
from thermocloak.fem import exterior_norms, norm_L2
from thermocloak.helmholtz import solve_frequency
from thermocloak.medium import MaterialField, assemble_blownup_medium
from thermocloak.transform import BlowupMap
from thermocloak.harness.fitting import calibrate_constant, fit_rate

logger = logging.getLogger(__name__)


@dataclass
class VisibilityRecord:
    epsilon: float
    omega: float | None
    time: float | None
    errL2: float
    errH1: float
    envelope: float
    medium: str
    source: str
    g_norm: float = 1.0

    def __post_init__(self):
        if not (self.errL2 >= 0 and self.errH1 >= self.errL2 * (1 - 1e-12)):
            raise ValueError(f"inconsistent norms errL2={self.errL2}, errH1={self.errH1}")

    @property
    def bound_factor(self):
        if self.omega is None:
            return self.envelope * self.g_norm
        return self.envelope * (1.0 + self.omega**-0.5) * self.g_norm


@dataclass
class TaskFailure:
    epsilon: float
    medium: str
    message: str


@dataclass
class SweepResult:
    records: list
    summary: dict
    failures: list = field(default_factory=list)
    fields: list = field(default_factory=list)
    curves: dict = field(default_factory=dict)

    def frequency_records(self, medium=None, omega=None):
        return [
            r
            for r in self.records
            if r.omega is not None
            and (medium is None or r.medium == medium)
            and (omega is None or r.omega == omega)
        ]

    def peak_time_records(self, medium=None):
        """Per epsilon, the time record with the largest ``errH1``."""
        best = {}
        for r in self.records:
            if r.time is None or (medium is not None and r.medium != medium):
                continue
            if r.epsilon not in best or r.errH1 > best[r.epsilon].errH1:
                best[r.epsilon] = r
        return [best[e] for e in sorted(best)]


def object_tag(obj):
    """``a<conductivity>_rho<density>`` for constant objects, ``custom`` otherwise."""
    if callable(obj.tensor_fn) or callable(obj.density_fn):
        return "custom"
    return f"a{float(obj.tensor_fn):g}_rho{float(obj.density_fn):g}"


def make_grid(cfg, epsilon):
    if cfg.radial:
        return RadialGrid.for_blowup(epsilon, outer=4.0, dimension=3, h_max=cfg.h)
    return Grid2D.square(4.0, cfg.nx)


def _media(cfg, grid, epsilon, obj):
    blown = assemble_blownup_medium(BlowupMap(epsilon, cfg.dimension), obj, grid)
    return blown, MaterialField.homogeneous(grid)


def _frequency_task(args):
    cfg, epsilon, obj, homog_cache = args
    grid = make_grid(cfg, epsilon)
    g = cfg.source.nodal(grid)
    blown, homog = _media(cfg, grid, epsilon, obj)
    tag = object_tag(obj)
    records, field_out = [], None
    g_norm = norm_L2(g, grid)
    for k, omega in enumerate(cfg.omegas):
        v_h = homog_cache.get(omega) if homog_cache else None
        if v_h is None:
            v_h = solve_frequency(homog, grid, omega, g)
        diff = solve_frequency(blown, grid, omega, g) - v_h
        l2, h1 = exterior_norms(diff, grid, cfg.r_obs)
        env = special.rate_frequency(epsilon, omega, cfg.dimension)
        records.append(VisibilityRecord(epsilon, omega, None, l2, h1, env, tag, cfg.source.tag, g_norm))
        if k == 0 and cfg.write_fields:
            field_out = (f"field_{tag}_eps{epsilon:g}_omega{omega:g}.csv", grid, diff)
    return records, field_out


def _time_task(args):
    cfg, epsilon, obj, reference = args
    grid = make_grid(cfg, epsilon)
    blown, homog = _media(cfg, grid, epsilon, obj)
    tg = TimeGrid(cfg.t_final, cfg.dt)
    u0 = np.zeros(grid.num_nodes)
    if reference is None:
        reference = solve_parabolic(homog, grid, tg, cfg.source, u0, cfg.scheme)
    curve = visibility_time_domain(blown, homog, grid, tg, cfg.source, u0, cfg.r_obs, cfg.scheme, reference)
    tag = object_tag(obj)
    env = special.rate_time(epsilon, cfg.dimension)
    g_norm = norm_L2(cfg.source.nodal(grid), grid)
    records = [
        VisibilityRecord(epsilon, None, float(t), float(a), float(b), env, tag, cfg.source.tag, g_norm)
        for t, a, b in curve.rows()
    ]
    field_out = None
    if cfg.write_fields:
        field_out = (f"field_{tag}_eps{epsilon:g}_t{cfg.t_final:g}.csv", grid, curve.final_difference)
    return records, field_out, curve


def _run_tasks(fn, tasks, workers):
    """Evaluate tasks in order; failures are returned as exceptions, not raised."""

    def guarded(task):
        try:
            return fn(task)
        except Exception as exc:  # noqa: BLE001 - a failed sweep point must not stop the sweep
            return exc

    if workers <= 1 or len(tasks) <= 1:
        return [guarded(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, t) for t in tasks]
        out = []
        for f in futures:
            try:
                out.append(f.result())
            except Exception as exc:  # noqa: BLE001
                out.append(exc)
        return out


def _summarize_fits(records_by_key, dimension):
    out = {}
    for key, recs in records_by_key.items():
        entry = {}
        for model in ("power-law", "log-reciprocal"):
            try:
                entry[model] = fit_rate(recs, model).as_dict()
            except ValueError as exc:
                entry[model] = {"error": str(exc)}
        entry["primary"] = "power-law" if dimension == 3 else "log-reciprocal"
        out[key] = entry
    return out


def run_sweep(cfg, time_domain=None, frequency_domain=True):
    """Frequency records for every (object, epsilon, omega) and, if the config
    has ``t_final``/``dt`` (or ``time_domain`` is True), time records for every
    (object, epsilon, step).  Failed points are listed in ``failures``."""
    t_start = time.perf_counter()
    do_time = cfg.has_time if time_domain is None else time_domain
    records, failures, fields, curves = [], [], [], {}
    shared_2d = not cfg.radial

    freq_cache = {}
    if shared_2d and frequency_domain and cfg.omegas:
        grid = make_grid(cfg, cfg.epsilons[0])
        g = cfg.source.nodal(grid)
        homog = MaterialField.homogeneous(grid)
        for omega in cfg.omegas:
            freq_cache[omega] = solve_frequency(homog, grid, omega, g)

    tasks = [(cfg, e, obj, freq_cache) for obj in cfg.objects for e in sorted(cfg.epsilons)]
    if not frequency_domain:
        tasks = []
    for task, res in zip(tasks, _run_tasks(_frequency_task, tasks, cfg.workers)):
        if isinstance(res, Exception):
            failures.append(TaskFailure(task[1], object_tag(task[2]), f"{type(res).__name__}: {res}"))
            logger.warning("frequency task eps=%g failed: %s", task[1], res)
            continue
        recs, fld = res
        records.extend(recs)
        if fld is not None:
            fields.append(fld)

    if do_time:
        reference = None
        if shared_2d:
            grid = make_grid(cfg, cfg.epsilons[0])
            tg = TimeGrid(cfg.t_final, cfg.dt)
            reference = solve_parabolic(
                MaterialField.homogeneous(grid), grid, tg, cfg.source, np.zeros(grid.num_nodes), cfg.scheme
            )
        tasks = [(cfg, e, obj, reference) for obj in cfg.objects for e in sorted(cfg.epsilons)]
        for task, res in zip(tasks, _run_tasks(_time_task, tasks, cfg.workers)):
            if isinstance(res, Exception):
                failures.append(TaskFailure(task[1], object_tag(task[2]), f"{type(res).__name__}: {res}"))
                logger.warning("time task eps=%g failed: %s", task[1], res)
                continue
            recs, fld, curve = res
            records.extend(recs)
            curves[(object_tag(task[2]), task[1])] = curve
            if fld is not None:
                fields.append(fld)

    summary = summarize(records, cfg)
    summary["failures"] = len(failures)
    summary["runtime_s"] = round(time.perf_counter() - t_start, 3)
    return SweepResult(records, summary, failures, fields, curves)


def summarize(records, cfg):
    """Fitted rates per (object, omega) and for the time-domain peaks, plus envelope constants."""
    summary = {
        "dimension": cfg.dimension,
        "epsilons": sorted(cfg.epsilons),
        "omegas": list(cfg.omegas),
        "r_obs": cfg.r_obs,
        "fits": {},
        "envelope_constants": {},
    }
    tags = sorted({r.medium for r in records})
    by_key = {}
    for tag in tags:
        for omega in cfg.omegas:
            recs = [r for r in records if r.medium == tag and r.omega == omega]
            if recs:
                by_key[f"{tag}/omega={omega:g}"] = recs
        peaks = {}
        for r in records:
            if r.medium == tag and r.time is not None:
                if r.epsilon not in peaks or r.errH1 > peaks[r.epsilon].errH1:
                    peaks[r.epsilon] = r
        if peaks:
            by_key[f"{tag}/time-sup"] = [peaks[e] for e in sorted(peaks)]
    summary["fits"] = _summarize_fits(by_key, cfg.dimension)
    for key, recs in by_key.items():
        bounds = [r.bound_factor for r in recs]
        summary["envelope_constants"][key] = calibrate_constant([r.errH1 for r in recs], bounds)
    return summary


@dataclass
class IndependenceReport:
    tags: tuple
    slopes: dict
    slope_difference: float
    envelope_constants: dict
    envelope_divergence: float
    result: SweepResult
    tolerance: float = 0.2

    @property
    def passed(self):
        return math.isfinite(self.slope_difference) and self.slope_difference <= self.tolerance

    def as_dict(self):
        return {
            "tags": list(self.tags),
            "slopes": self.slopes,
            "slope_difference": self.slope_difference,
            "envelope_constants": self.envelope_constants,
            "envelope_divergence": self.envelope_divergence,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def _contrast(a, b):
    pt = np.zeros((1, 3))
    ratios = []
    for fa, fb in ((a.tensor(pt)[0, 0, 0], b.tensor(pt)[0, 0, 0]), (a.density(pt)[0], b.density(pt)[0])):
        ratios.append(max(fa / fb, fb / fa))
    return max(ratios)


def object_independence_check(cfg, objects=None, omega=None, time_domain=False, tolerance=0.2, min_contrast=10.0):
    """Sweep two contrasting objects and compare their fitted epsilon-slopes.

    The slope is the power-law fit of ``errH1`` against epsilon (largest
    epsilon excluded when four or more are given); for time-domain runs the
    peak over t is used.  Also reports the relative divergence of the fitted
    envelope constants.
    """
    objs = list(objects) if objects is not None else list(cfg.objects)
    if len(objs) != 2:
        raise ValueError("object independence needs exactly two object specs")
    if _contrast(*objs) < min_contrast * (1 - 1e-12):
        raise ValueError(f"objects must differ by at least {min_contrast:g}x in some coefficient")
    omega = cfg.omegas[0] if omega is None else omega
    run_cfg = cfg.with_objects(objs)
    if not time_domain:
        run_cfg.omegas = [omega]
    result = run_sweep(run_cfg, time_domain=time_domain, frequency_domain=not time_domain)
    tags = tuple(object_tag(o) for o in objs)
    slopes, consts = {}, {}
    for tag in tags:
        if time_domain:
            recs = result.peak_time_records(tag)
        else:
            recs = result.frequency_records(tag, omega)
        fit = fit_rate(recs, "power-law")
        slopes[tag] = fit.value
        consts[tag] = calibrate_constant([r.errH1 for r in recs], [r.bound_factor for r in recs])
    s = list(slopes.values())
    c = list(consts.values())
    return IndependenceReport(
        tags,
        slopes,
        abs(s[0] - s[1]),
        consts,
        abs(c[0] - c[1]) / max(c),
        result,
        tolerance,
    )
