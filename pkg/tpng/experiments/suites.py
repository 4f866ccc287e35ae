"""
Monte-Carlo experiments, one per acceptance check.

Every experiment fans its replicas out through ``run_replicas``. Replica ``k``
draws only from ``streams.replica(k)``, so a report depends on the seed and
the replica count and never on how the replicas were scheduled. Replica
functions live at module level and receive their settings through
``functools.partial`` so they pickle into worker processes.
"""

from __future__ import annotations

import inspect
import math
import time
from functools import partial
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from tpng.core import config
from tpng.core.errors import (
    ConfigError,
    DomainError,
    InsufficientSamples,
    InvariantViolation,
    ParticleExited,
    WindowOverflow,
)
from tpng.experiments import stats
from tpng.experiments.oracle import chain_below
from tpng.experiments.runner import finish_report, log_exclusion, run_replicas, split_excluded
from tpng.model.diagram import Point, increment_counts, rect_flux, validate_diagram
from tpng.model.schemas import Box, Criterion, ExperimentReport, ModelParams
from tpng.sampling.poisson import thinning_marks
from tpng.sampling.streams import RngStreams, log_streams
from tpng.services.chains import BlockingParams, coupled_step, reversibility_check, u_init_above, v_init
from tpng.services.coupling import bounded_difference_audit, couple_pair, layer_flux, sandwich, tagged_position
from tpng.services.height import char_lambda, height, height_dual, mean_function, shape
from tpng.services.sweep import build_diagram, coslice
from tpng.services.sweep import slice as slice_
from tpng.services.triple import h_slope_profile, triple_run, x0_at

ALPHA = 0.01

# (50, 50), (100, 100) and (200, 200) along the diagonal
DIAGONAL_RADII = tuple(r * math.sqrt(2.0) for r in (50.0, 100.0, 200.0))
TAIL_BOX = Box(width=300.0, height=150.0)

Interval = Tuple[float, float]


# --- shared helpers ---------------------------------------------------------

def _prepare(replicas: int, seed: Optional[int]) -> Tuple[float, int, RngStreams]:
    if replicas < 1:
        raise DomainError("an experiment needs at least one replica")
    seed = config.DEFAULT_SEED if seed is None else int(seed)
    streams = RngStreams.from_seed(seed)
    log_streams(streams, "experiment")
    return time.perf_counter(), seed, streams


def _unit(direction: Sequence[float]) -> Tuple[float, float]:
    x, y = float(direction[0]), float(direction[1])
    if x < 0 or y < 0 or (x == 0 and y == 0):
        raise DomainError(f"direction {tuple(direction)} must be non-negative and non-zero")
    n = math.hypot(x, y)
    return x / n, y / n


def _covering_box(u: Tuple[float, float], radius: float, margin: float = 0.0) -> Box:
    return Box(width=max(radius * u[0] + margin, 1.0), height=max(radius * u[1] + margin, 1.0))


def _exact(name: str, failures: int, checked: int) -> Criterion:
    return Criterion(name=name, estimate=float(failures), target=0.0, passed=failures == 0, note=f"{checked} checked")


def _gof(name: str, counts, mean: float, power_ok: bool) -> Criterion:
    counts = np.asarray(counts, dtype=int)
    estimate = float(counts.mean()) if len(counts) else None
    if not power_ok:
        return Criterion(name=name, estimate=estimate, target=mean, passed=False,
                         note="insufficient samples for goodness of fit")
    try:
        statistic, p = stats.poisson_gof(counts, mean)
    except InsufficientSamples as exc:
        return Criterion(name=name, estimate=estimate, target=mean, passed=False, note=str(exc))
    return Criterion(name=name, estimate=estimate, target=mean, statistic=statistic, p_value=p, passed=p >= ALPHA)


def _no_rows() -> List[Criterion]:
    return [Criterion(name="replicas", estimate=0.0, passed=False, note="every replica was excluded")]


def _box_params(box: Box) -> Dict[str, float]:
    return box.model_dump()


def _check_intervals(intervals: Sequence[Interval], kind: str) -> List[Interval]:
    out = [(float(a), float(b)) for a, b in intervals]
    for a, b in out:
        if not 0.0 <= a < b:
            raise DomainError(f"{kind} interval [{a}, {b}] must be non-empty with a non-negative offset")
    ordered = sorted(out)
    for (_, b0), (a1, _) in zip(ordered, ordered[1:]):
        if a1 <= b0:
            raise DomainError(f"{kind} intervals overlap")
    return out


# --- diagram conservation and the t = 0 oracle -----------------------------

def _conservation_replica(k: int, streams: RngStreams, *, t_grid, box: Box, lam: float) -> dict:
    t = t_grid[k % len(t_grid)]
    d = build_diagram(ModelParams.stationary(lam, t, box, seed=streams.master_seed), streams)
    return {
        "replica": k,
        "t": t,
        "corners": d.corner_count,
        "crossings": d.crossing_count,
        "top_ok": len(d.bulk) + len(d.sources) - d.exits_top == d.corner_count,
        "right_ok": len(d.bulk) + len(d.sinks) - d.exits_right == d.corner_count,
        "coins_ok": d.coins_drawn == d.corner_count + d.crossing_count,
        "violations": len(validate_diagram(d)),
    }


def conservation_check(
    replicas: int = 10_000,
    t_grid: Sequence[float] = (0.0, 0.3, 0.5, 0.7),
    box: Optional[Box] = None,
    lam: float = 1.0,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
) -> ExperimentReport:
    """Ray conservation, the coin audit and structural validity on stationary diagrams, cycling through ``t_grid``."""
    started, seed, streams = _prepare(replicas, seed)
    box = box or Box(width=20.0, height=20.0)
    fn = partial(_conservation_replica, t_grid=tuple(float(t) for t in t_grid), box=box, lam=lam)
    table, excluded = split_excluded(run_replicas(fn, replicas, streams, workers))
    n = len(table)
    criteria = [
        _exact("conservation-top", int((~table["top_ok"].astype(bool)).sum()), n),
        _exact("conservation-right", int((~table["right_ok"].astype(bool)).sum()), n),
        _exact("coin-audit", int((~table["coins_ok"].astype(bool)).sum()), n),
        _exact("structure", int(table["violations"].sum()), n),
    ]
    params = {"t_grid": list(t_grid), "box": _box_params(box), "lam": lam}
    return finish_report("conservation", params, criteria, replicas, excluded, seed, started, table=table)


def _oracle_replica(k: int, streams: RngStreams, *, box: Box, queries: int) -> dict:
    d = build_diagram(ModelParams(t=0.0, box=box, seed=streams.master_seed), streams)
    bulk = [(p[0], p[1]) for p in d.bulk]
    rng = streams.geometry("queries")
    xs = rng.uniform(0.0, box.width, queries)
    ys = rng.uniform(0.0, box.height, queries)
    mismatches = dual = 0
    for x, y in zip(xs, ys):
        v = Point(float(x), float(y))
        h = height(d, v)
        if h != chain_below(bulk, v.x, v.y):
            mismatches += 1
        if h != height_dual(d, v):
            dual += 1
    return {"replica": k, "bulk": len(bulk), "mismatches": mismatches, "dual_mismatches": dual}


def oracle_check(
    replicas: int = 1000,
    queries: int = 20,
    box: Optional[Box] = None,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
) -> ExperimentReport:
    """At t = 0 with empty boundaries the height is the longest up-right chain of bulk points, pathwise."""
    started, seed, streams = _prepare(replicas, seed)
    box = box or Box(width=10.0, height=10.0)
    fn = partial(_oracle_replica, box=box, queries=queries)
    table, excluded = split_excluded(run_replicas(fn, replicas, streams, workers))
    checked = len(table) * queries
    criteria = [
        _exact("longest-chain", int(table["mismatches"].sum()), checked),
        _exact("height-decompositions", int(table["dual_mismatches"].sum()), checked),
    ]
    params = {"queries": queries, "box": _box_params(box)}
    return finish_report("oracle", params, criteria, replicas, excluded, seed, started, table=table)


# --- stationarity and laws of large numbers --------------------------------

def _slice_replica(k: int, streams: RngStreams, *, params: ModelParams, ordinates, abscissas) -> dict:
    d = build_diagram(params, streams)
    row: Dict[str, Any] = {"replica": k}
    for i, tau in enumerate(ordinates):
        row[f"slice_{i}"] = len(slice_(d, tau))
    for i, tau in enumerate(abscissas):
        row[f"coslice_{i}"] = len(coslice(d, tau))
    return row


def stationarity_experiment(
    lam: float = 1.0,
    t: float = 0.5,
    fractions: Sequence[float] = (0.1, 0.3, 0.5, 0.7, 0.9),
    box: Optional[Box] = None,
    replicas: int = 500,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
) -> ExperimentReport:
    """Slices at ordinates ``f * height`` and coslices at abscissas ``f * width`` of a stationary diagram.

    Slice counts should be Poisson(lam * width), coslice counts Poisson(height / (lam * (1 - t))).
    """
    started, seed, streams = _prepare(replicas, seed)
    box = box or Box(width=50.0, height=50.0)
    if any(not 0.0 < f < 1.0 for f in fractions):
        raise DomainError("fractions must lie strictly inside (0, 1)")
    params = ModelParams.stationary(lam, t, box, seed=seed)
    ordinates = [f * box.height for f in fractions]
    abscissas = [f * box.width for f in fractions]
    fn = partial(_slice_replica, params=params, ordinates=ordinates, abscissas=abscissas)
    table, excluded = split_excluded(run_replicas(fn, replicas, streams, workers))
    power_ok = len(table) >= config.MIN_GOF_SAMPLES

    slice_mean = lam * box.width
    coslice_mean = box.height / (lam * (1.0 - t))
    criteria = [_gof(f"slice@y={tau:g}", table[f"slice_{i}"], slice_mean, power_ok) for i, tau in enumerate(ordinates)]
    criteria += [_gof(f"coslice@x={tau:g}", table[f"coslice_{i}"], coslice_mean, power_ok) for i, tau in enumerate(abscissas)]
    report_params = {"lam": lam, "t": t, "fractions": list(fractions), "box": _box_params(box)}
    return finish_report("stationarity", report_params, criteria, replicas, excluded, seed, started,
                         table=table, power_ok=power_ok)


def _height_ratio_replica(k: int, streams: RngStreams, *, setups) -> dict:
    row: Dict[str, Any] = {"replica": k}
    for tag, params, anchors in setups:
        d = build_diagram(params, streams)
        for r, (x, y) in anchors:
            row[f"{tag}r{r:g}"] = height(d, Point(x, y)) / r
    return row


def _lln_criterion(name: str, values, target: float, tolerance: float) -> Criterion:
    est, half = stats.mean_ci(values)
    return Criterion(
        name=name,
        estimate=est,
        target=target,
        tolerance=tolerance,
        passed=abs(est - target) <= tolerance * target,
        note=f"95% half-width {half:.4g}",
    )


def _radius_trend(table: pd.DataFrame, tag: str, radii: Sequence[float], target: float) -> Dict[str, Any]:
    errors = [abs(float(table[f"{tag}r{r:g}"].mean()) - target) / target for r in radii]
    return {
        "radius_errors": {f"{r:g}": e for r, e in zip(radii, errors)},
        "trend_non_increasing": stats.trend_non_increasing(errors) if len(errors) >= 3 else None,
    }


def lln_height_experiment(
    lam: float = 1.0,
    t: float = 0.0,
    direction: Sequence[float] = (1.0, 1.0),
    radii: Sequence[float] = DIAGONAL_RADII,
    replicas: int = 200,
    tolerance: float = 0.03,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
) -> ExperimentReport:
    """Mean of height(r u) / r for the stationary process against mean_function(u, lam, t)."""
    started, seed, streams = _prepare(replicas, seed)
    u = _unit(direction)
    radii = sorted(float(r) for r in radii)
    box = _covering_box(u, radii[-1])
    params = ModelParams.stationary(lam, t, box, seed=seed)
    anchors = [(r, (r * u[0], r * u[1])) for r in radii]
    fn = partial(_height_ratio_replica, setups=[("", params, anchors)])
    table, excluded = split_excluded(run_replicas(fn, replicas, streams, workers))

    target = mean_function(u, lam, t)
    criteria = [_lln_criterion(f"lln@r={radii[-1]:g}", table[f"r{radii[-1]:g}"], target, tolerance)]
    report_params = {"lam": lam, "t": t, "direction": list(direction), "radii": radii, "tolerance": tolerance}
    return finish_report("lln-height", report_params, criteria, replicas, excluded, seed, started, table=table,
                         diagnostics=_radius_trend(table, "", radii, target))


def one_sided_lln_experiment(
    lam: float = 1.0,
    t: float = 0.5,
    slopes: Sequence[float] = (2.0, 0.125),
    radii: Sequence[float] = (100.0, 200.0, 300.0),
    replicas: int = 200,
    tolerance: float = 0.05,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
) -> ExperimentReport:
    """Height per unit length with sources only.

    Directions steeper than lam^2 (1 - t) follow the shape function; flatter
    ones follow the mean function of the source rate.
    """
    started, seed, streams = _prepare(replicas, seed)
    radii = sorted(float(r) for r in radii)
    critical = lam ** 2 * (1.0 - t)
    setups, targets = [], []
    for s in slopes:
        if s < 0:
            raise DomainError(f"slope {s} must be non-negative")
        u = _unit((1.0, s))
        box = _covering_box(u, radii[-1])
        params = ModelParams(t=t, source_rate=lam, sink_rate=0.0, box=box, seed=seed)
        setups.append((f"s{s:g}_", params, [(r, (r * u[0], r * u[1])) for r in radii]))
        if s >= critical:
            targets.append((shape(u, t), "shape"))
        else:
            targets.append((mean_function(u, lam, t), "mean"))
    fn = partial(_height_ratio_replica, setups=setups)
    table, excluded = split_excluded(run_replicas(fn, replicas, streams, workers))

    criteria, diagnostics = [], {"critical_slope": critical}
    for (tag, _, _), (target, regime) in zip(setups, targets):
        c = _lln_criterion(f"{tag}lln@r={radii[-1]:g}", table[f"{tag}r{radii[-1]:g}"], target, tolerance)
        criteria.append(c.model_copy(update={"note": f"{regime} regime; {c.note}"}))
        diagnostics[tag.rstrip("_")] = _radius_trend(table, tag, radii, target)
    report_params = {"lam": lam, "t": t, "slopes": list(slopes), "radii": radii, "tolerance": tolerance}
    return finish_report("one-sided-lln", report_params, criteria, replicas, excluded, seed, started,
                         table=table, diagnostics=diagnostics)


# --- second-class particles -------------------------------------------------

def _scp_replica(k: int, streams: RngStreams, *, phi: ModelParams, psi: ModelParams, labels, tau: float) -> Optional[dict]:
    _, layer = couple_pair(phi, psi, streams)
    row: Dict[str, Any] = {"replica": k}
    for n in labels:
        try:
            q = tagged_position(layer, n, tau)
        except ParticleExited:
            log_exclusion("scp-slope", k, f"particle {n} left the box before ordinate {tau}")
            return None
        except DomainError as exc:
            log_exclusion("scp-slope", k, str(exc))
            return None
        if q <= 0.0:
            log_exclusion("scp-slope", k, f"particle {n} still on the left edge at ordinate {tau}")
            return None
        row[f"slope_{n}"] = tau / q
    return row


def scp_slope_experiment(
    p: float = 0.8,
    r: float = 1.2,
    t: float = 0.5,
    labels: Sequence[int] = (-2, 0, 3),
    tau: float = 400.0,
    box: Optional[Box] = None,
    replicas: int = 100,
    tolerance: float = 0.10,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
) -> ExperimentReport:
    """tau / Q^n_tau for second-class particles between stationary(p) and one-sided(r); target p r (1 - t)."""
    if not 0.0 < p < r:
        raise DomainError("need 0 < p < r")
    started, seed, streams = _prepare(replicas, seed)
    target = p * r * (1.0 - t)
    box = box or Box(width=2.0 * tau / target, height=tau)
    if tau > box.height:
        raise DomainError(f"tau {tau} above the box")
    phi = ModelParams.stationary(p, t, box, seed=seed)
    psi = ModelParams(t=t, source_rate=r, sink_rate=0.0, box=box, seed=seed)
    labels = [int(n) for n in labels]
    fn = partial(_scp_replica, phi=phi, psi=psi, labels=labels, tau=tau)
    table, excluded = split_excluded(run_replicas(fn, replicas, streams, workers))

    report_params = {"p": p, "r": r, "t": t, "labels": labels, "tau": tau, "box": _box_params(box), "tolerance": tolerance}
    if table.empty:
        return finish_report("scp-slope", report_params, _no_rows(), replicas, excluded, seed, started, power_ok=False)

    criteria, spread = [], {}
    for n in labels:
        col = table[f"slope_{n}"]
        med = float(col.median())
        q1, q3 = (float(v) for v in col.quantile([0.25, 0.75]))
        spread[str(n)] = {"median": med, "iqr": q3 - q1}
        criteria.append(Criterion(
            name=f"slope[{n}]",
            estimate=med,
            target=target,
            tolerance=tolerance,
            passed=abs(med - target) <= tolerance * target,
            note=f"IQR {q3 - q1:.4g}",
        ))
    if len(labels) >= 2:
        try:
            f_stat, f_p = stats.anova([table[f"slope_{n}"] for n in labels])
            criteria.append(Criterion(name="label-independence", statistic=f_stat, p_value=f_p, passed=f_p > ALPHA))
        except InsufficientSamples as exc:
            criteria.append(Criterion(name="label-independence", passed=False, note=str(exc)))
    return finish_report("scp-slope", report_params, criteria, replicas, excluded, seed, started,
                         table=table, diagnostics={"labels": spread})


def _bounded_difference_replica(k: int, streams: RngStreams, *, phi: ModelParams, psi: ModelParams, rectangles: int) -> dict:
    base, layer = couple_pair(phi, psi, streams)
    violations = checked = 0
    worst = None
    for n in layer.labels:
        audit = bounded_difference_audit(layer, n)
        checked += len(audit.records)
        if audit.max_excess > 0:
            violations += 1
        worst = audit.max_excess if worst is None else max(worst, audit.max_excess)

    box = base.box
    rng = streams.geometry("queries")
    flux_errors = 0
    for _ in range(rectangles):
        xs = np.sort(rng.uniform(0.0, box.width, 2))
        ys = np.sort(rng.uniform(0.0, box.height, 2))
        lo, hi = Point(float(xs[0]), float(ys[0])), Point(float(xs[1]), float(ys[1]))
        lower, upper, scp = rect_flux(base, lo, hi), rect_flux(layer.psi, lo, hi), layer_flux(layer, lo, hi)
        if upper.a_v - lower.a_v != scp.a_v or lower.a_h - upper.a_h != scp.a_h:
            flux_errors += 1
        if lower.total != height(base, hi) - height(base, lo):
            flux_errors += 1
    return {
        "replica": k,
        "particles": len(layer.paths),
        "vertices": checked,
        "violations": violations,
        "max_excess": worst,
        "flux_errors": flux_errors,
    }


def bounded_difference_experiment(
    p: float = 0.8,
    r: float = 1.2,
    t: float = 0.5,
    box: Optional[Box] = None,
    replicas: int = 100,
    rectangles: int = 20,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
) -> ExperimentReport:
    """Along every second-class path the upper and lower heights differ by at most |initial| + 1.

    Also checks the flux bookkeeping on random rectangles: the upper diagram
    gains the second-class verticals and loses the second-class horizontals.
    """
    if not 0.0 < p < r:
        raise DomainError("need 0 < p < r")
    started, seed, streams = _prepare(replicas, seed)
    box = box or Box(width=40.0, height=40.0)
    phi = ModelParams.stationary(p, t, box, seed=seed)
    psi = ModelParams(t=t, source_rate=r, sink_rate=0.0, box=box, seed=seed)
    fn = partial(_bounded_difference_replica, phi=phi, psi=psi, rectangles=rectangles)
    table, excluded = split_excluded(run_replicas(fn, replicas, streams, workers))
    worst = table["max_excess"].dropna()
    criteria = [
        _exact("bounded-difference", int(table["violations"].sum()), int(table["vertices"].sum())),
        _exact("flux-identity", int(table["flux_errors"].sum()), len(table) * rectangles),
    ]
    params = {"p": p, "r": r, "t": t, "box": _box_params(box), "rectangles": rectangles}
    return finish_report("bounded-difference", params, criteria, replicas, excluded, seed, started, table=table,
                         diagnostics={"max_excess": int(worst.max()) if len(worst) else None})


# --- local statistics near a direction -------------------------------------

def _interval_row(d, anchors, h_intervals, v_intervals, prefix: str = "") -> Dict[str, int]:
    row = {}
    for r, (x, y) in anchors:
        hs = increment_counts(d, [(x + a, x + b) for a, b in h_intervals], y, axis="horizontal")
        vs = increment_counts(d, [(y + a, y + b) for a, b in v_intervals], x, axis="vertical")
        for i, c in enumerate(hs):
            row[f"{prefix}h{i}_r{r:g}"] = c
        for j, c in enumerate(vs):
            row[f"{prefix}v{j}_r{r:g}"] = c
    return row


def _interval_replica(k: int, streams: RngStreams, *, params: ModelParams, anchors, h_intervals, v_intervals,
                      bracket: Optional[Tuple[ModelParams, ModelParams]] = None) -> dict:
    row: Dict[str, Any] = {"replica": k}
    if bracket is None:
        d = build_diagram(params, streams)
        row.update(_interval_row(d, anchors, h_intervals, v_intervals))
        return row
    low, high = bracket
    sw = sandwich(low, params, high, streams)
    mid = _interval_row(sw.mid, anchors, h_intervals, v_intervals)
    lo = _interval_row(sw.low, anchors, h_intervals, v_intervals)
    hi = _interval_row(sw.high, anchors, h_intervals, v_intervals)
    disorder = 0
    for key, c in mid.items():
        if key.startswith("h") and not lo[key] <= c <= hi[key]:
            disorder += 1
        if key.startswith("v") and not hi[key] <= c <= lo[key]:
            disorder += 1
    row.update(mid)
    row["sandwich_disorder"] = disorder
    return row


def _interval_setup(u, radii, h_intervals, v_intervals) -> Tuple[Box, list]:
    margin = max([b for _, b in h_intervals] + [b for _, b in v_intervals] + [0.0]) + 1.0
    box = _covering_box(u, radii[-1], margin)
    anchors = [(r, (r * u[0], r * u[1])) for r in radii]
    return box, anchors


def _interval_criteria(table, radii, h_intervals, v_intervals, h_rate, v_rate, power_ok) -> Tuple[List[Criterion], dict]:
    r_max = radii[-1]
    criteria = []
    columns = {}
    for i, (a, b) in enumerate(h_intervals):
        col = f"h{i}_r{r_max:g}"
        columns[col] = table[col]
        criteria.append(_gof(f"horizontal[{a:g},{b:g}]", table[col], h_rate * (b - a), power_ok))
    for j, (a, b) in enumerate(v_intervals):
        col = f"v{j}_r{r_max:g}"
        columns[col] = table[col]
        criteria.append(_gof(f"vertical[{a:g},{b:g}]", table[col], v_rate * (b - a), power_ok))

    if len(columns) >= 2 and len(table) >= 3:
        pairs = stats.pairwise_correlations(columns)
        worst_pair, (worst_r, se) = max(pairs.items(), key=lambda kv: abs(kv[1][0]))
        criteria.append(Criterion(
            name="independence",
            estimate=worst_r,
            target=0.0,
            tolerance=3.0 * se,
            passed=abs(worst_r) <= 3.0 * se,
            note=f"largest |r| between {worst_pair[0]} and {worst_pair[1]}",
        ))

    errors = []
    for r in radii:
        rel = [abs(float(table[f"h{i}_r{r:g}"].mean()) - h_rate * (b - a)) / (h_rate * (b - a))
               for i, (a, b) in enumerate(h_intervals)]
        rel += [abs(float(table[f"v{j}_r{r:g}"].mean()) - v_rate * (b - a)) / (v_rate * (b - a))
                for j, (a, b) in enumerate(v_intervals)]
        errors.append(float(np.mean(rel)) if rel else 0.0)
    diagnostics = {
        "radius_errors": {f"{r:g}": e for r, e in zip(radii, errors)},
        "trend_non_increasing": stats.trend_non_increasing(errors) if len(errors) >= 3 else None,
    }
    return criteria, diagnostics


def local_convergence_experiment(
    t: float = 0.0,
    slope: Optional[float] = None,
    h_intervals: Sequence[Interval] = ((0.0, 1.0), (2.0, 3.0), (4.0, 5.0)),
    v_intervals: Sequence[Interval] = ((0.0, 1.0), (2.0, 3.0)),
    radii: Sequence[float] = (100.0, 200.0, 300.0),
    replicas: int = 1000,
    with_sandwich: bool = False,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
) -> ExperimentReport:
    """Interval counts of the empty-boundary process far out along a direction.

    With lam = sqrt(slope / (1 - t)), counts on a horizontal interval of
    length m should be Poisson(lam m) and on a vertical interval of length n
    Poisson(n / (lam (1 - t))), independently across disjoint intervals.
    ``slope`` defaults to 1 - t, the characteristic slope of lam = 1.
    """
    started, seed, streams = _prepare(replicas, seed)
    slope = (1.0 - t) if slope is None else float(slope)
    if slope <= 0:
        raise DomainError("slope must be positive")
    lam = char_lambda((1.0, slope), t)
    h_iv, v_iv = _check_intervals(h_intervals, "horizontal"), _check_intervals(v_intervals, "vertical")
    radii = sorted(float(r) for r in radii)
    box, anchors = _interval_setup(_unit((1.0, slope)), radii, h_iv, v_iv)
    params = ModelParams(t=t, box=box, seed=seed)
    bracket = None
    if with_sandwich:
        low = ModelParams(t=t, sink_rate=1.0 / (lam * (1.0 - t)), box=box, seed=seed)
        high = ModelParams(t=t, source_rate=lam, box=box, seed=seed)
        bracket = (low, high)
    fn = partial(_interval_replica, params=params, anchors=anchors, h_intervals=h_iv, v_intervals=v_iv, bracket=bracket)
    table, excluded = split_excluded(run_replicas(fn, replicas, streams, workers))
    power_ok = len(table) >= config.MIN_GOF_SAMPLES

    criteria, diagnostics = _interval_criteria(table, radii, h_iv, v_iv, lam, 1.0 / (lam * (1.0 - t)), power_ok)
    if with_sandwich:
        criteria.append(_exact("sandwich-order", int(table["sandwich_disorder"].sum()), len(table)))
    diagnostics["lam"] = lam
    report_params = {
        "t": t, "slope": slope, "h_intervals": [list(iv) for iv in h_iv], "v_intervals": [list(iv) for iv in v_iv],
        "radii": radii, "with_sandwich": with_sandwich,
    }
    return finish_report("local-conv", report_params, criteria, replicas, excluded, seed, started,
                         table=table, power_ok=power_ok, diagnostics=diagnostics)


def omega_convergence_experiment(
    lam: float = 1.0,
    eps: float = 0.25,
    t: float = 0.5,
    h_intervals: Sequence[Interval] = ((0.0, 1.0), (2.0, 3.0)),
    v_intervals: Sequence[Interval] = ((0.0, 1.0),),
    radius: float = 300.0,
    replicas: int = 1000,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
) -> ExperimentReport:
    """Sources-only process of rate lam + eps seen along the characteristic direction of lam.

    Horizontal counts should be Poisson(lam + eps) per unit length and vertical
    counts Poisson(1 / ((lam + eps) (1 - t))) per unit length.
    """
    if lam <= 0 or eps <= 0:
        raise DomainError("lam and eps must be positive")
    started, seed, streams = _prepare(replicas, seed)
    rate = lam + eps
    slope = lam ** 2 * (1.0 - t)
    h_iv, v_iv = _check_intervals(h_intervals, "horizontal"), _check_intervals(v_intervals, "vertical")
    radii = [float(radius)]
    box, anchors = _interval_setup(_unit((1.0, slope)), radii, h_iv, v_iv)
    params = ModelParams(t=t, source_rate=rate, box=box, seed=seed)
    fn = partial(_interval_replica, params=params, anchors=anchors, h_intervals=h_iv, v_intervals=v_iv)
    table, excluded = split_excluded(run_replicas(fn, replicas, streams, workers))
    power_ok = len(table) >= config.MIN_GOF_SAMPLES

    criteria, diagnostics = _interval_criteria(table, radii, h_iv, v_iv, rate, 1.0 / (rate * (1.0 - t)), power_ok)
    report_params = {
        "lam": lam, "eps": eps, "t": t, "h_intervals": [list(iv) for iv in h_iv],
        "v_intervals": [list(iv) for iv in v_iv], "radius": radius,
    }
    return finish_report("omega-conv", report_params, criteria, replicas, excluded, seed, started,
                         table=table, power_ok=power_ok, diagnostics=diagnostics)


# --- indicator chains and the triple coupling -------------------------------

def _blocking_replica(k: int, streams: RngStreams, *, t: float, lam: float, eps: float, half_width: int, steps: int) -> dict:
    params = BlockingParams.from_rates(t, lam, eps)
    keep = lam / (lam + eps)
    marks = thinning_marks(half_width + 1, keep, streams.geometry("eta-sinks"))
    v = v_init([bool(b) for b in marks], half_width)
    u = u_init_above(v, params, keep, streams.geometry("chain-coupling"))
    rng = streams.chain()
    rows: Dict[str, int] = {}
    violations = 0
    done = 0
    for m in rng.integers(v.j_min, v.j_max, size=steps):
        try:
            cs = coupled_step(u, v, int(m), rng, t)
        except InvariantViolation:
            violations += 1
            break
        u, v = cs.u, cs.v
        rows[cs.row] = rows.get(cs.row, 0) + 1
        done += 1
    out: Dict[str, Any] = {"replica": k, "steps": done, "violations": violations}
    out.update({f"u{j}": bit for j, bit in zip(range(u.j_min, u.j_max + 1), u.bits)})
    out.update({f"row_{key}": n for key, n in rows.items()})
    return out


def blocking_chain_experiment(
    t: float = 0.5,
    lam: float = 1.0,
    eps: float = 0.25,
    steps: int = 100_000,
    half_width: int = 10,
    replicas: int = 200,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
) -> ExperimentReport:
    """Reversibility of the blocking measure, stationarity of U and the coupled order U >= V.

    Each replica runs one coupled pair for ``steps`` meetings at uniformly
    drawn positions of the window [-half_width, half_width].
    """
    if not 0.0 < t < 1.0:
        raise DomainError("blocking chains need t in (0, 1)")
    started, seed, streams = _prepare(replicas, seed)

    residual = 0.0
    for tt in sorted({0.3, 0.5, 0.7, t}):
        for e in (0.1, eps, 1.0):
            bp = BlockingParams.from_rates(tt, lam, e)
            for m in range(-half_width, half_width):
                residual = max(residual, reversibility_check(bp, m))

    fn = partial(_blocking_replica, t=t, lam=lam, eps=eps, half_width=half_width, steps=steps)
    table, excluded = split_excluded(run_replicas(fn, replicas, streams, workers))
    table = table.fillna(0)

    params = BlockingParams.from_rates(t, lam, eps)
    js = list(range(-half_width, half_width + 1))
    q = params.marginal(js)
    n = len(table)
    z = []
    for j, qj in zip(js, q):
        sd = math.sqrt(qj * (1.0 - qj) / n) if n else 0.0
        if sd > 0:
            z.append(abs(float(table[f"u{j}"].mean()) - qj) / sd)
    criteria = [
        Criterion(name="reversibility", estimate=residual, target=0.0, tolerance=1e-12, passed=residual <= 1e-12),
        Criterion(name="u-marginals", estimate=max(z, default=0.0), target=0.0, tolerance=3.0,
                  passed=max(z, default=0.0) <= 3.0, note="largest |z| over the window"),
        _exact("coupled-dominance", int(table["violations"].sum()), int(table["steps"].sum())),
    ]
    row_cols = [c for c in table.columns if c.startswith("row_")]
    diagnostics = {"rows": {c[4:]: int(table[c].sum()) for c in row_cols}, "c": params.c}
    report_params = {"t": t, "lam": lam, "eps": eps, "steps": steps, "half_width": half_width}
    return finish_report("blocking-chain", report_params, criteria, replicas, excluded, seed, started,
                         table=table, diagnostics=diagnostics)


def _tail_replica(k: int, streams: RngStreams, *, lam: float, eps: float, t: float, box: Box, checkpoints) -> Optional[dict]:
    try:
        run = triple_run(lam, eps, t, box, streams.master_seed, streams=streams, with_blocking=False)
    except WindowOverflow as exc:
        log_exclusion("tail-bound", k, str(exc))
        return None
    row: Dict[str, Any] = {"replica": k, "meetings": len(run.trace)}
    for i, sigma in enumerate(checkpoints):
        x = x0_at(run, sigma)
        row[f"x0_{i}"] = np.nan if x is None else float(x)
    return row


def tail_bound_experiment(
    lam: float = 1.0,
    eps: float = 0.25,
    t: float = 0.5,
    box: Optional[Box] = None,
    replicas: int = 500,
    checkpoints: Optional[Sequence[float]] = None,
    ns: Sequence[int] = tuple(range(2, 9)),
    seed: Optional[int] = None,
    workers: Optional[int] = None,
) -> ExperimentReport:
    """Empirical P{X^0(sigma) >= n} against t^(n+c) / (1 - t), pooled over runs and checkpoints.

    Checkpoints default to a quarter, a half and three quarters of the largest
    product time width * height.
    """
    if not 0.0 < t < 1.0:
        raise DomainError("the tail bound needs t in (0, 1)")
    started, seed, streams = _prepare(replicas, seed)
    box = box or TAIL_BOX
    sigma_max = box.width * box.height
    checkpoints = [f * sigma_max for f in (0.25, 0.5, 0.75)] if checkpoints is None else [float(s) for s in checkpoints]
    fn = partial(_tail_replica, lam=lam, eps=eps, t=t, box=box, checkpoints=checkpoints)
    table, excluded = split_excluded(run_replicas(fn, replicas, streams, workers))
    report_params = {"lam": lam, "eps": eps, "t": t, "box": _box_params(box), "checkpoints": checkpoints, "ns": list(ns)}
    if table.empty:
        return finish_report("tail-bound", report_params, _no_rows(), replicas, excluded, seed, started, power_ok=False)

    samples = table[[f"x0_{i}" for i in range(len(checkpoints))]].to_numpy().ravel()
    samples = samples[~np.isnan(samples)]
    power_ok = len(samples) >= config.MIN_GOF_SAMPLES
    c = BlockingParams.from_rates(t, lam, eps).c
    tail = stats.empirical_tail(samples)
    criteria = []
    for n in ns:
        bound = t ** (n + c) / (1.0 - t)
        if len(tail) == 0:
            criteria.append(Criterion(name=f"tail[{n}]", target=bound, passed=False, note="no samples"))
            continue
        p = stats.exceeds_bound(tail.count(n), len(tail), min(bound, 1.0))
        criteria.append(Criterion(name=f"tail[{n}]", estimate=tail(n), target=bound, p_value=p, passed=p > ALPHA))
    return finish_report("tail-bound", report_params, criteria, replicas, excluded, seed, started, table=table,
                         power_ok=power_ok, diagnostics={"c": c, "samples": int(len(samples))})


def _h_slope_replica(k: int, streams: RngStreams, *, lam: float, eps: float, t: float, box: Box, y_grid) -> Optional[dict]:
    try:
        run = triple_run(lam, eps, t, box, streams.master_seed, streams=streams, with_blocking=False)
    except WindowOverflow as exc:
        log_exclusion("h-slope", k, str(exc))
        return None
    profile = h_slope_profile(run, y_grid)
    row: Dict[str, Any] = {"replica": k}
    row.update({f"h_y{y:g}": float(x) for y, x in zip(y_grid, profile)})
    return row


def h_slope_experiment(
    lam: float = 1.0,
    eps: float = 0.25,
    t: float = 0.5,
    y_grid: Optional[Sequence[float]] = None,
    delta: float = 0.1,
    box: Optional[Box] = None,
    replicas: int = 200,
    threshold: float = 0.1,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
) -> ExperimentReport:
    """Fraction of runs with y < (lam (lam + eps) (1 - t) - delta) H^0_y at each ordinate of ``y_grid``.

    The fraction should shrink with y; the check is at the largest ordinate
    where H^0 is defined in some replica.
    """
    if not 0.0 < t < 1.0:
        raise DomainError("the slope check needs t in (0, 1)")
    started, seed, streams = _prepare(replicas, seed)
    box = box or Box(width=64.0, height=40.0)
    y_grid = [box.height * f for f in (0.25, 0.5, 0.75, 1.0)] if y_grid is None else [float(y) for y in y_grid]
    fn = partial(_h_slope_replica, lam=lam, eps=eps, t=t, box=box, y_grid=y_grid)
    table, excluded = split_excluded(run_replicas(fn, replicas, streams, workers))
    report_params = {"lam": lam, "eps": eps, "t": t, "y_grid": y_grid, "delta": delta,
                     "box": _box_params(box), "threshold": threshold}
    if table.empty:
        return finish_report("h-slope", report_params, _no_rows(), replicas, excluded, seed, started, power_ok=False)

    slope = lam * (lam + eps) * (1.0 - t) - delta
    fractions: Dict[str, Optional[float]] = {}
    last: Optional[Tuple[float, float, int]] = None
    for y in y_grid:
        h = table[f"h_y{y:g}"].dropna().to_numpy()
        if len(h) == 0:
            fractions[f"{y:g}"] = None
            continue
        frac = float(np.mean(y < slope * h))
        fractions[f"{y:g}"] = frac
        last = (y, frac, len(h))
    if last is None:
        criteria = [Criterion(name="slope-bound", passed=False, note="H^0 undefined at every ordinate")]
        return finish_report("h-slope", report_params, criteria, replicas, excluded, seed, started,
                             table=table, power_ok=False)
    y, frac, n = last
    criteria = [Criterion(name=f"slope-bound@y={y:g}", estimate=frac, target=0.0, tolerance=threshold,
                          passed=frac <= threshold, note=f"{n} runs with H^0 defined")]
    defined = [v for v in fractions.values() if v is not None]
    diagnostics = {
        "fractions": fractions,
        "trend_non_increasing": stats.trend_non_increasing(defined) if len(defined) >= 3 else None,
    }
    return finish_report("h-slope", report_params, criteria, replicas, excluded, seed, started,
                         table=table, diagnostics=diagnostics)


EXPERIMENTS: Dict[str, Callable[..., ExperimentReport]] = {
    "conservation": conservation_check,
    "oracle": oracle_check,
    "stationarity": stationarity_experiment,
    "lln-height": lln_height_experiment,
    "one-sided-lln": one_sided_lln_experiment,
    "scp-slope": scp_slope_experiment,
    "bounded-difference": bounded_difference_experiment,
    "local-conv": local_convergence_experiment,
    "omega-conv": omega_convergence_experiment,
    "blocking-chain": blocking_chain_experiment,
    "tail-bound": tail_bound_experiment,
    "h-slope": h_slope_experiment,
}


def check_params(name: str, params: Mapping[str, Any]) -> None:
    """Raise ConfigError naming ``params.<key>`` for the first key ``name`` does not accept."""
    accepted = inspect.signature(EXPERIMENTS[name]).parameters
    for key in params:
        if key not in accepted:
            raise ConfigError(f"params.{key}", f"not a parameter of {name}; accepted: {', '.join(accepted)}")


def run_experiment(name: str, params: Optional[dict] = None, **overrides) -> ExperimentReport:
    """Look up ``name`` and call it; a ``box`` table in ``params`` becomes a Box."""
    try:
        fn = EXPERIMENTS[name]
    except KeyError as exc:
        raise DomainError(f"unknown experiment {name!r}; choose from {', '.join(sorted(EXPERIMENTS))}") from exc
    check_params(name, params or {})
    kwargs = dict(params or {})
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    if isinstance(kwargs.get("box"), dict):
        kwargs["box"] = Box(**kwargs["box"])
    return fn(**kwargs)
