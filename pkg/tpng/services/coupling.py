"""
Monotone coupling of two diagrams through labelled second-class particles.

A layer is built by a second upward sweep over the frozen base diagram
(the lower process). Second-class particles (SCPs) enter from the left edge
at dropped base sinks and from the bottom edge at extra sources. Along a
base horizontal they obey four rules:

- a vertical SCP meeting an unridden horizontal turns right with probability
  1 - t and otherwise continues up;
- a vertical SCP meeting a horizontal already ridden by another SCP swaps
  with it: the rider turns up, the vertical one rides on;
- a rider reaching the corner that ends its horizontal turns up there;
- a rider reaching the right edge exits.

The upper diagram is the base with SCP verticals added and SCP horizontals
removed.
"""

from __future__ import annotations

import bisect
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

from sortedcontainers import SortedDict

from tpng.core.errors import DomainError, InvariantViolation, ParticleExited, StructuralError
from tpng.model.diagram import (
    Diagram,
    HorizontalSegment,
    Point,
    RectFlux,
    VerticalSegment,
    Vertex,
    VertexKind,
    reflect,
    validate_diagram,
)
from tpng.model.schemas import ModelParams
from tpng.sampling.poisson import sample_poisson_1d, sample_poisson_2d, thin
from tpng.sampling.streams import CoinSource, RngStreams, SequentialCoins, StreamCoins
from tpng.services.height import height
from tpng.services.sweep import build_diagram_from_points

logger = logging.getLogger("tpng.coupling")


@dataclass(frozen=True)
class ScpPath:
    """Up-right staircase of one second-class particle, as its turning points."""

    label: int
    entry: str  # "left" or "bottom"
    terminus: str  # "top" or "right"
    points: Tuple[Point, ...]

    @cached_property
    def ys(self) -> List[float]:
        return [p.y for p in self.points]

    @property
    def start(self) -> Point:
        return self.points[0]

    @property
    def end(self) -> Point:
        return self.points[-1]

    def sigma_range(self) -> Tuple[float, float]:
        return self.start.x * self.start.y, self.end.x * self.end.y


@dataclass(frozen=True)
class Swap:
    point: Point
    lower: int
    upper: int

    @property
    def sigma(self) -> float:
        return self.point.x * self.point.y


@dataclass(frozen=True)
class ScpLayer:
    base: Diagram
    psi: Diagram
    paths: Tuple[ScpPath, ...]
    swaps: Tuple[Swap, ...]
    extra_sources: Tuple[float, ...]
    dropped_sinks: Tuple[float, ...]
    t: float
    stats: Dict[str, int] = field(default_factory=dict, compare=False)

    @cached_property
    def _by_label(self) -> Dict[int, ScpPath]:
        return {p.label: p for p in self.paths}

    @property
    def labels(self) -> List[int]:
        return [p.label for p in self.paths]

    def path(self, label: int) -> ScpPath:
        try:
            return self._by_label[label]
        except KeyError as exc:
            raise DomainError(f"no second-class particle with label {label}") from exc

    @cached_property
    def vertical_pieces(self) -> Tuple[VerticalSegment, ...]:
        out = []
        for p in self.paths:
            for a, b in zip(p.points, p.points[1:]):
                if a.x == b.x and b.y > a.y:
                    out.append(VerticalSegment(a.x, a.y, b.y, p.label))
        return tuple(out)

    @cached_property
    def horizontal_pieces(self) -> Tuple[HorizontalSegment, ...]:
        out = []
        for p in self.paths:
            for a, b in zip(p.points, p.points[1:]):
                if a.y == b.y and b.x > a.x:
                    out.append(HorizontalSegment(a.y, a.x, b.x, p.label))
        return tuple(out)


class _LayerSweep:
    """One pass over the base horizontals in increasing ordinate."""

    def __init__(self, base: Diagram, extra: Sequence[float], dropped: Sequence[float], t: float, coins: CoinSource):
        self.base = base
        self.t = t
        self.coins = coins
        self.extra = list(extra)
        self.dropped = set(dropped)
        self.points: List[List[Point]] = []
        self.entries: List[Tuple[str, float]] = []
        self.terminus: Dict[int, str] = {}
        self.vertical: SortedDict = SortedDict()
        self.ridden_from: Dict[float, float] = {}
        self.vertices: List[Vertex] = []
        self.swaps: List[Tuple[Point, int, int]] = []
        self.ordinal: Dict[int, int] = defaultdict(int)
        self.stats = {"rule_d": 0, "turn_right": 0, "swaps": 0, "turn_up_at_corner": 0, "exits_right": 0, "exits_top": 0}

    def _spawn(self, start: Point, entry: Tuple[str, float]) -> int:
        self.points.append([start])
        self.entries.append(entry)
        return len(self.points) - 1

    def run(self) -> None:
        W, H = self.base.box.width, self.base.box.height
        for x in self.extra:
            self.vertical[x] = self._spawn(Point(x, 0.0), ("bottom", x))

        for h in self.base.horizontals:
            y = h.y
            rider: Optional[int] = None
            if h.x_lo == 0.0 and y in self.dropped:
                rider = self._spawn(Point(0.0, y), ("left", y))
                self.ridden_from[y] = 0.0
            for x in list(self.vertical.irange(h.x_lo, h.x_hi, inclusive=(False, False))):
                a = self.vertical[x]
                p = Point(x, y)
                if rider is None:
                    self.stats["rule_d"] += 1
                    turn = self.coins.corner(a, self.ordinal[a], p, self.t)
                    self.ordinal[a] += 1
                    if turn:
                        self.points[a].append(p)
                        del self.vertical[x]
                        rider = a
                        self.ridden_from[y] = x
                        self.vertices.append(Vertex(p, VertexKind.CORNER))
                        self.stats["turn_right"] += 1
                    else:
                        self.vertices.append(Vertex(p, VertexKind.CROSSING))
                else:
                    self.points[a].append(p)
                    self.points[rider].append(p)
                    self.vertical[x] = rider
                    self.swaps.append((p, rider, a))
                    self.vertices.append(Vertex(p, VertexKind.SCP_SWAP))
                    self.stats["swaps"] += 1
                    rider = a
            if rider is None:
                continue
            if h.x_hi < W:
                if h.x_hi in self.vertical:
                    raise StructuralError("two second-class particles on one vertical", h)
                self.points[rider].append(Point(h.x_hi, y))
                self.vertical[h.x_hi] = rider
                self.stats["turn_up_at_corner"] += 1
            else:
                self.points[rider].append(Point(W, y))
                self.terminus[rider] = "right"
                self.stats["exits_right"] += 1

        for x, a in self.vertical.items():
            self.points[a].append(Point(x, H))
            self.terminus[a] = "top"
            self.stats["exits_top"] += 1

    def labels(self) -> List[int]:
        left = sorted((v, i) for i, (kind, v) in enumerate(self.entries) if kind == "left")
        bottom = sorted((v, i) for i, (kind, v) in enumerate(self.entries) if kind == "bottom")
        out = [0] * len(self.entries)
        for rank, (_, i) in enumerate(left):
            out[i] = -rank
        for rank, (_, i) in enumerate(bottom):
            out[i] = rank + 1
        return out


def _psi_diagram(base: Diagram, sweep: _LayerSweep, paths: Sequence[ScpPath], extra: Sequence[float]) -> Diagram:
    ridden = sweep.ridden_from

    horizontals = []
    for h in base.horizontals:
        r = ridden.get(h.y)
        if r is None:
            horizontals.append(h)
        elif r > h.x_lo:
            horizontals.append(HorizontalSegment(h.y, h.x_lo, r, h.origin_id))

    next_id = 1 + max(
        [s.origin_id for s in base.verticals] + [s.origin_id for s in base.horizontals] + [-1]
    )
    extra_ids = {x: next_id + k for k, x in enumerate(sorted(extra))}
    pieces: Dict[float, List[VerticalSegment]] = defaultdict(list)
    for s in base.verticals:
        pieces[s.x].append(s)
    for p in paths:
        for a, b in zip(p.points, p.points[1:]):
            if a.x == b.x and b.y > a.y:
                origin = extra_ids[a.x] if a.y == 0.0 and a.x in extra_ids else -1
                pieces[a.x].append(VerticalSegment(a.x, a.y, b.y, origin))
    verticals = []
    for x, segs in pieces.items():
        segs.sort(key=lambda s: s.y_lo)
        cur = segs[0]
        for s in segs[1:]:
            if s.y_lo == cur.y_hi:
                cur = VerticalSegment(x, cur.y_lo, s.y_hi, cur.origin_id)
            else:
                verticals.append(cur)
                cur = s
        verticals.append(cur)

    vertices = []
    for v in base.vertices:
        r = ridden.get(v.point.y)
        if v.kind is VertexKind.CORNER and r is not None:
            continue
        if v.kind is VertexKind.CROSSING and r is not None and v.point.x >= r:
            continue
        vertices.append(v)
    vertices.extend(sweep.vertices)

    return Diagram.canonical(
        box=base.box,
        t=base.t,
        verticals=verticals,
        horizontals=horizontals,
        vertices=vertices,
        sources=list(base.sources) + list(extra),
        sinks=[y for y in base.sinks if y not in sweep.dropped],
        bulk=base.bulk,
        coins_drawn=base.coins_drawn,
    )


def build_layer(
    base: Diagram,
    extra_sources: Sequence[float],
    dropped_sinks: Sequence[float],
    t: float,
    coins: CoinSource,
) -> ScpLayer:
    """Layer second-class particles over ``base`` and assemble the upper diagram.

    ``dropped_sinks`` must be base sinks; they become left-edge particles.
    ``extra_sources`` must avoid every base abscissa; they become bottom-edge particles.
    """
    W = base.box.width
    extra = sorted(float(x) for x in extra_sources)
    dropped = sorted(float(y) for y in dropped_sinks)
    if len(set(extra)) != len(extra):
        raise DomainError("duplicate extra sources")
    taken = set(base.sources) | {p.x for p in base.bulk}
    for x in extra:
        if not 0.0 < x < W:
            raise DomainError(f"extra source {x} outside (0, {W})")
        if x in taken:
            raise DomainError(f"extra source {x} coincides with a base abscissa")
    sinks = set(base.sinks)
    for y in dropped:
        if y not in sinks:
            raise DomainError(f"dropped sink {y} is not a base sink")

    sweep = _LayerSweep(base, extra, dropped, t, coins)
    sweep.run()
    labels = sweep.labels()
    paths = tuple(sorted(
        (
            ScpPath(labels[i], sweep.entries[i][0], sweep.terminus[i], tuple(sweep.points[i]))
            for i in range(len(sweep.points))
        ),
        key=lambda p: p.label,
    ))
    swaps = tuple(
        Swap(point=p, lower=labels[rider], upper=labels[vert]) for p, rider, vert in sweep.swaps
    )
    psi = _psi_diagram(base, sweep, paths, extra)
    violations = validate_diagram(psi)
    if violations:
        raise StructuralError(f"upper diagram failed validation: {violations[0].message}")
    logger.debug(json.dumps({"event": "layer_built", "particles": len(paths), **sweep.stats}))
    return ScpLayer(
        base=base,
        psi=psi,
        paths=paths,
        swaps=swaps,
        extra_sources=tuple(extra),
        dropped_sinks=tuple(dropped),
        t=t,
        stats=dict(sweep.stats),
    )


def _keep_prob(numerator: float, denominator: float) -> float:
    return 1.0 if denominator == 0 else numerator / denominator


def couple_pair(params_phi: ModelParams, params_psi: ModelParams, streams: RngStreams) -> Tuple[Diagram, ScpLayer]:
    """Sample phi <= psi on shared bulk; psi sources and phi sinks are the thinned supersets."""
    if (params_phi.t, params_phi.box, params_phi.bulk_intensity) != (params_psi.t, params_psi.box, params_psi.bulk_intensity):
        raise DomainError("coupled processes must share t, box and bulk intensity")
    if params_phi.source_rate > params_psi.source_rate:
        raise DomainError("the lower process needs the smaller source rate")
    if params_phi.sink_rate < params_psi.sink_rate:
        raise DomainError("the lower process needs the larger sink rate")
    box, t = params_phi.box, params_phi.t

    all_sources = sample_poisson_1d(params_psi.source_rate, box.width, streams.geometry("sources"))
    phi_sources, extra = thin(
        all_sources, _keep_prob(params_phi.source_rate, params_psi.source_rate), streams.geometry("source-thinning")
    )
    all_sinks = sample_poisson_1d(params_phi.sink_rate, box.height, streams.geometry("sinks"))
    _, dropped = thin(
        all_sinks, _keep_prob(params_psi.sink_rate, params_phi.sink_rate), streams.geometry("sink-thinning")
    )
    bulk = sample_poisson_2d(params_phi.bulk_intensity, box, streams.geometry("bulk"))

    n_rays = len(phi_sources) + len(all_sinks) + len(bulk)
    phi = build_diagram_from_points(box, t, phi_sources, all_sinks, bulk, StreamCoins(streams.interaction_seed, n_rays))
    layer = build_layer(phi, extra, dropped, t, SequentialCoins(streams.layer(0)))
    return phi, layer


def tagged_position(layer: ScpLayer, label: int, tau: float) -> float:
    """Abscissa of particle ``label`` at ordinate ``tau``; at a horizontal run, its right end."""
    path = layer.path(label)
    if tau < path.start.y:
        raise DomainError(f"particle {label} enters at ordinate {path.start.y} > {tau}")
    if tau > layer.base.box.height:
        raise DomainError(f"ordinate {tau} above the box")
    if path.terminus == "right" and tau >= path.end.y:
        raise ParticleExited(f"particle {label} left through the right edge at ordinate {path.end.y}")
    idx = bisect.bisect_right(path.ys, tau) - 1
    return path.points[idx].x


def meeting_sequence(layer: ScpLayer) -> List[Tuple[float, int]]:
    """Swap times in the product chart sigma = x*y with the lower label of each pair."""
    out = sorted((s.sigma, s.lower, s.upper) for s in layer.swaps)
    for i, (sigma, lower, upper) in enumerate(out):
        if upper != lower + 1:
            raise InvariantViolation(f"swap at sigma={sigma} between non-adjacent labels {lower}, {upper}")
        if i and sigma <= out[i - 1][0]:
            raise InvariantViolation(f"meeting times not strictly increasing at sigma={sigma}")
    return [(sigma, lower) for sigma, lower, _ in out]


def layer_flux(layer: ScpLayer, lo: Point, hi: Point) -> RectFlux:
    """Second-class flux into [lo, hi]: SCP verticals through the bottom, SCP horizontals through the right."""
    box = layer.base.box
    if hi.x < lo.x or hi.y < lo.y:
        raise DomainError("rectangle corners are not ordered")
    if not (box.contains(*lo) and box.contains(*hi)):
        raise DomainError("rectangle leaves the box")
    a_v = sum(
        1 for s in layer.vertical_pieces
        if lo.x < s.x <= hi.x and s.y_lo <= lo.y and (s.y_hi > lo.y or s.y_hi >= box.height)
    )
    a_h = sum(
        1 for s in layer.horizontal_pieces
        if lo.y < s.y <= hi.y and s.x_lo <= hi.x and (s.x_hi > hi.x or s.x_hi >= box.width)
    )
    return RectFlux(a_v=a_v, a_h=a_h)


@dataclass(frozen=True)
class BoundedDifferenceAudit:
    label: int
    initial: int
    records: Tuple[Tuple[Point, int], ...]

    @property
    def max_excess(self) -> int:
        """Largest amount by which |upper - lower| exceeds |initial| + 1 (non-positive when the bound holds)."""
        bound = abs(self.initial) + 1
        return max((abs(diff) - bound for _, diff in self.records), default=-bound)


def initial_difference(label: int) -> int:
    return label if label >= 1 else -(abs(label) + 1)


def bounded_difference_audit(layer: ScpLayer, label: int) -> BoundedDifferenceAudit:
    """Height difference between the upper and lower diagrams at every turning point of one path."""
    path = layer.path(label)
    box = layer.base.box
    records = []
    for p in path.points:
        q = Point(min(p.x, box.width), min(p.y, box.height))
        records.append((q, height(layer.psi, q) - height(layer.base, q)))
    return BoundedDifferenceAudit(label=label, initial=initial_difference(label), records=tuple(records))


# --- three-level sandwich ---------------------------------------------------

@dataclass(frozen=True)
class Sandwich:
    low: Diagram
    mid: Diagram
    high: Diagram
    upper_layer: ScpLayer
    lower_layer: ScpLayer  # built in the reflected frame


def sandwich(params_low: ModelParams, params_mid: ModelParams, params_high: ModelParams, streams: RngStreams) -> Sandwich:
    """Three coupled diagrams low <= mid <= high on shared bulk.

    The upper diagram adds sources (superposed) and drops sinks (thinned) from
    the middle one. The lower diagram is built in the reflected frame, where
    adding sinks and dropping sources becomes the same kind of layer.
    """
    shared = (params_mid.t, params_mid.box, params_mid.bulk_intensity)
    for p in (params_low, params_high):
        if (p.t, p.box, p.bulk_intensity) != shared:
            raise DomainError("sandwiched processes must share t, box and bulk intensity")
    if not params_low.source_rate <= params_mid.source_rate <= params_high.source_rate:
        raise DomainError("source rates must increase from low to high")
    if not params_low.sink_rate >= params_mid.sink_rate >= params_high.sink_rate:
        raise DomainError("sink rates must decrease from low to high")
    box, t = params_mid.box, params_mid.t

    sources = sample_poisson_1d(params_mid.source_rate, box.width, streams.geometry("sources"))
    sinks = sample_poisson_1d(params_mid.sink_rate, box.height, streams.geometry("sinks"))
    bulk = sample_poisson_2d(params_mid.bulk_intensity, box, streams.geometry("bulk"))
    n_rays = len(sources) + len(sinks) + len(bulk)
    mid = build_diagram_from_points(box, t, sources, sinks, bulk, StreamCoins(streams.interaction_seed, n_rays))

    added_sources = sample_poisson_1d(
        params_high.source_rate - params_mid.source_rate, box.width, streams.geometry("upper-sources")
    )
    _, dropped = thin(sinks, _keep_prob(params_high.sink_rate, params_mid.sink_rate), streams.geometry("sink-thinning"))
    upper = build_layer(mid, added_sources, dropped, t, SequentialCoins(streams.layer(0)))

    added_sinks = sample_poisson_1d(
        params_low.sink_rate - params_mid.sink_rate, box.height, streams.geometry("lower-sinks")
    )
    _, dropped_sources = thin(
        sources, _keep_prob(params_low.source_rate, params_mid.source_rate), streams.geometry("source-thinning")
    )
    lower = build_layer(reflect(mid), added_sinks, dropped_sources, t, SequentialCoins(streams.layer(1)))
    return Sandwich(low=reflect(lower.psi), mid=mid, high=upper.psi, upper_layer=upper, lower_layer=lower)
