"""
Triple coupling alpha <= eta <= omega and the carrier maps derived from it.

alpha is stationary with rate lam, omega is one-sided with rate lam + eps.
Every alpha sink starts an omega/alpha second-class particle; eta keeps each
alpha sink with probability lam/(lam + eps). eta is never swept: its particles
are tracked through the indicator chain V and the carrier maps X^k.
"""

from __future__ import annotations

import bisect
import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from tpng.core.errors import DomainError, InvariantViolation, WindowOverflow
from tpng.model.diagram import Diagram, Point
from tpng.model.schemas import Box, ModelParams
from tpng.sampling.poisson import thinning_marks
from tpng.sampling.streams import RngStreams
from tpng.services.chains import (
    BlockingParams,
    IndicatorChain,
    classify,
    coupled_step,
    log_overflow,
    rightmost_one,
    u_init_above,
    v_init,
    v_step,
)
from tpng.services.coupling import ScpLayer, Swap, couple_pair, meeting_sequence

logger = logging.getLogger("tpng.chains")


@dataclass(frozen=True)
class TraceRow:
    """State after one meeting.

    ``x0`` is the rightmost one of V. eta particles keep their order, so it is
    also X^0(sigma), the carrier of eta particle 0; ``u_rightmost`` is R, the
    rightmost one of U.
    """

    step: int
    sigma: float
    m: int
    case: str
    jump: bool
    x0: Optional[int]
    u_rightmost: Optional[int] = None
    u_row: Optional[str] = None


@dataclass(frozen=True)
class CarrierMap:
    """Right-continuous step function sigma -> X^k(sigma)."""

    label: int
    sigmas: Tuple[float, ...]
    values: Tuple[int, ...]

    def __call__(self, sigma: float) -> int:
        if sigma < 0:
            raise DomainError("sigma must be non-negative")
        return self.values[bisect.bisect_right(self.sigmas, sigma) - 1]

    def change_points(self) -> Tuple[float, ...]:
        return self.sigmas[1:]


@dataclass(frozen=True)
class TripleRun:
    lam: float
    eps: float
    t: float
    alpha: Diagram
    layer: ScpLayer
    eta_marks: Tuple[bool, ...]
    swaps: Tuple[Swap, ...]
    v0: IndicatorChain
    v_final: IndicatorChain
    trace: Tuple[TraceRow, ...]
    carriers: Dict[int, CarrierMap] = field(compare=False)
    u0: Optional[IndicatorChain] = None
    u_final: Optional[IndicatorChain] = None

    @property
    def meetings(self) -> List[Tuple[float, int]]:
        return [(r.sigma, r.m) for r in self.trace]


def _sorted_swaps(layer: ScpLayer) -> Tuple[Swap, ...]:
    return tuple(sorted(layer.swaps, key=lambda s: s.sigma))


def _carrier_maps(marks: Sequence[bool], steps: Sequence[Tuple[float, int, bool]]) -> Dict[int, CarrierMap]:
    """Follow each eta particle from its starting carrier through the recorded meetings.

    eta particle k (k = 0, -1, ...) starts on the lower-layer particle of the
    (|k|+1)-th kept sink from the bottom.
    """
    kept_labels = [-i for i, keep in enumerate(marks) if keep]
    occupant: Dict[int, int] = {}
    history: Dict[int, Tuple[List[float], List[int]]] = {}
    for k, j in enumerate(kept_labels):
        occupant[j] = -k
        history[-k] = ([0.0], [j])
    for sigma, m, jump in steps:
        lo, hi = occupant.get(m), occupant.get(m + 1)
        if hi is not None and lo is None:
            moved, dest = hi, m
            del occupant[m + 1]
        elif lo is not None and hi is None and jump:
            moved, dest = lo, m + 1
            del occupant[m]
        else:
            continue
        occupant[dest] = moved
        history[moved][0].append(sigma)
        history[moved][1].append(dest)
    return {k: CarrierMap(k, tuple(s), tuple(v)) for k, (s, v) in history.items()}


def triple_run(
    lam: float,
    eps: float,
    t: float,
    box: Box,
    seed: int,
    streams: Optional[RngStreams] = None,
    with_blocking: bool = True,
    bulk_intensity: float = 1.0,
) -> TripleRun:
    """Build alpha and the omega/alpha layer, then drive V (and optionally U) through the meetings."""
    if lam <= 0 or eps < 0:
        raise DomainError("need lam > 0 and eps >= 0")
    streams = streams or RngStreams.from_seed(seed)
    alpha_params = ModelParams.stationary(lam, t, box, seed=seed, bulk_intensity=bulk_intensity)
    omega_params = ModelParams(t=t, source_rate=lam + eps, sink_rate=0.0, bulk_intensity=bulk_intensity, box=box, seed=seed)
    alpha, layer = couple_pair(alpha_params, omega_params, streams)

    keep = lam / (lam + eps)
    marks = tuple(bool(b) for b in thinning_marks(len(layer.dropped_sinks), keep, streams.geometry("eta-sinks")))
    v = v_init(marks, len(layer.extra_sources))
    v0 = v

    u = u0 = None
    if with_blocking and eps > 0 and 0.0 < t < 1.0:
        u = u0 = u_init_above(v, BlockingParams.from_rates(t, lam, eps), keep, streams.geometry("chain-coupling"))

    rng = streams.chain()
    swaps = _sorted_swaps(layer)
    meetings = meeting_sequence(layer)
    rows: List[TraceRow] = []
    steps: List[Tuple[float, int, bool]] = []
    try:
        for i, (sigma, m) in enumerate(meetings):
            case = classify(v.pair(m))
            if u is None:
                new_v = v_step(v, m, rng, t)
                u_row = None
            else:
                cs = coupled_step(u, v, m, rng, t)
                new_v, u, u_row = cs.v, cs.u, cs.row
            jump = new_v.bits != v.bits
            v = new_v
            steps.append((sigma, m, jump))
            rows.append(TraceRow(
                step=i + 1,
                sigma=sigma,
                m=m,
                case=case,
                jump=jump,
                x0=rightmost_one(v),
                u_rightmost=None if u is None else rightmost_one(u),
                u_row=u_row,
            ))
    except WindowOverflow as exc:
        log_overflow(exc.m, exc.window, f"triple_run seed={streams.master_seed}")
        raise

    carriers = _carrier_maps(marks, steps)
    logger.debug(json.dumps({
        "event": "triple_built",
        "seed": streams.master_seed,
        "meetings": len(rows),
        "eta_particles": len(carriers),
        "window": list(v.window),
    }))
    return TripleRun(
        lam=lam, eps=eps, t=t, alpha=alpha, layer=layer, eta_marks=marks, swaps=swaps,
        v0=v0, v_final=v, trace=tuple(rows), carriers=carriers, u0=u0, u_final=u,
    )


def carrier_index(run: TripleRun, k: int, sigma: float) -> int:
    try:
        return run.carriers[k](sigma)
    except KeyError as exc:
        raise DomainError(f"no eta particle with label {k}") from exc


def carrier_inverse(run: TripleRun, m: int, sigma: float) -> Optional[int]:
    """Label of the eta particle riding lower-layer particle ``m`` at ``sigma``; None where nobody does."""
    for k, cmap in run.carriers.items():
        if cmap(sigma) == m:
            return k
    return None


def occupancy_audit(run: TripleRun) -> List[str]:
    """Replay V from its start and compare its ones with the carrier maps after each meeting."""
    problems = []
    v = run.v0
    for row in run.trace:
        pair = v.pair(row.m)
        if row.jump:
            pair = (pair[1], pair[0])
        v = v.with_pair(row.m, pair)
        carried = sorted(cmap(row.sigma) for cmap in run.carriers.values())
        if carried != v.ones():
            problems.append(f"step {row.step}: V ones {v.ones()} != carriers {carried}")
    return problems


def x0_at(run: TripleRun, sigma: float) -> Optional[int]:
    """X^0(sigma) if the carrying path still lies inside the box at ``sigma``, else None."""
    if 0 not in run.carriers:
        return None
    j = run.carriers[0](sigma)
    _, hi = run.layer.path(j).sigma_range()
    return j if sigma <= hi else None


def export_trace(run: TripleRun) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "step": r.step,
                "sigma": r.sigma,
                "m": r.m,
                "case": r.case,
                "jump": r.jump,
                "x0": r.x0,
                "u_rightmost": r.u_rightmost,
                "u_row": r.u_row,
            }
            for r in run.trace
        ],
        columns=["step", "sigma", "m", "case", "jump", "x0", "u_rightmost", "u_row"],
    )


def h0_polyline(run: TripleRun) -> Tuple[Point, ...]:
    """Path of eta particle 0 stitched from the lower-layer paths that carry it."""
    cmap = run.carriers.get(0)
    if cmap is None:
        return ()
    by_sigma = {s.sigma: s.point for s in run.swaps}
    pts: List[Point] = []
    carriers = list(cmap.values)
    bounds = list(cmap.sigmas[1:]) + [None]
    start: Optional[Point] = None
    for j, end_sigma in zip(carriers, bounds):
        path = run.layer.path(j).points
        i0 = 0 if start is None else path.index(start)
        if end_sigma is None:
            piece = path[i0:]
        else:
            end = by_sigma[end_sigma]
            i1 = path.index(end)
            piece = path[i0:i1 + 1]
            start = end
        if pts and piece and pts[-1] == piece[0]:
            piece = piece[1:]
        pts.extend(piece)
    for a, b in zip(pts, pts[1:]):
        if b.x < a.x or b.y < a.y:
            raise InvariantViolation("stitched path is not up-right")
    return tuple(pts)


def h_slope_profile(run: TripleRun, y_grid: Sequence[float]) -> np.ndarray:
    """Abscissa of eta particle 0 at each ordinate; NaN before it enters or after it leaves the box."""
    pts = h0_polyline(run)
    out = np.full(len(y_grid), np.nan)
    if not pts:
        return out
    ys = [p.y for p in pts]
    width = run.alpha.box.width
    exited_right = pts[-1].x >= width
    for i, y in enumerate(y_grid):
        if y < pts[0].y or y > pts[-1].y or (exited_right and y >= pts[-1].y):
            continue
        out[i] = pts[bisect.bisect_right(ys, y) - 1].x
    return out
