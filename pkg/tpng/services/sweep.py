"""
Upward sweep that turns sampled nucleations into a t-PNG diagram.

Events are processed in increasing ordinate. The active front holds the
vertical rays currently alive, keyed by abscissa. Each horizontal ray is
resolved the moment it is emitted by scanning the front to its right:

1. every contact draws one interaction coin,
2. a corner (probability 1 - t) ends both rays at the contact,
3. a crossing lets both continue,
4. a ray that survives every contact exits through the right edge.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from sortedcontainers import SortedDict

from tpng.core.errors import SamplingError, StructuralError
from tpng.model.diagram import (
    Diagram,
    HorizontalSegment,
    Point,
    VerticalSegment,
    Vertex,
    VertexKind,
    coslice_at,
    slice_at,
)
from tpng.model.schemas import Box, ModelParams
from tpng.sampling.poisson import sample_poisson_1d, sample_poisson_2d
from tpng.sampling.streams import CoinSource, RngStreams, StreamCoins

logger = logging.getLogger("tpng.sweep")


class ActiveFront:
    """Vertical rays alive at the current sweep ordinate: abscissa -> (origin_id, y_lo)."""

    def __init__(self):
        self._rays: SortedDict = SortedDict()

    def __len__(self) -> int:
        return len(self._rays)

    def insert(self, x: float, origin_id: int, y_lo: float) -> None:
        if x in self._rays:
            raise SamplingError(f"two vertical rays at abscissa {x}")
        self._rays[x] = (origin_id, y_lo)

    def pop(self, x: float) -> Tuple[int, float]:
        return self._rays.pop(x)

    def first_right_of(self, x: float) -> int:
        return self._rays.bisect_right(x)

    def key_at(self, index: int) -> float:
        return self._rays.peekitem(index)[0]

    def items(self):
        return self._rays.items()

    def abscissas(self) -> List[float]:
        return list(self._rays.keys())


class DiagramBuilder:
    """Accumulates segments and vertices during one sweep."""

    def __init__(self, box: Box, t: float):
        self.box = box
        self.t = t
        self.verticals: List[VerticalSegment] = []
        self.horizontals: List[HorizontalSegment] = []
        self.vertices: List[Vertex] = []
        self.stats = {"corners": 0, "crossings": 0}

    def corner(self, x: float, y: float) -> None:
        self.vertices.append(Vertex(Point(x, y), VertexKind.CORNER))
        self.stats["corners"] += 1

    def crossing(self, x: float, y: float) -> None:
        self.vertices.append(Vertex(Point(x, y), VertexKind.CROSSING))
        self.stats["crossings"] += 1

    def nucleation(self, x: float, y: float) -> None:
        self.vertices.append(Vertex(Point(x, y), VertexKind.NUCLEATION))


def resolve_horizontal_ray(
    front: ActiveFront,
    start_x: float,
    y: float,
    t: float,
    coins: CoinSource,
    builder: DiagramBuilder,
    ray_id: int,
) -> float:
    """Resolve the horizontal ray emitted at (start_x, y); return where it ends.

    A corner removes the met vertical from the front and closes it at ``y``.
    The returned abscissa equals the box width when the ray exits right.
    """
    idx = front.first_right_of(start_x)
    ordinal = 0
    while idx < len(front):
        x = front.key_at(idx)
        if coins.corner(ray_id, ordinal, (x, y), t):
            origin_id, y_lo = front.pop(x)
            builder.verticals.append(VerticalSegment(x, y_lo, y, origin_id))
            builder.horizontals.append(HorizontalSegment(y, start_x, x, ray_id))
            builder.corner(x, y)
            return x
        builder.crossing(x, y)
        ordinal += 1
        idx += 1
    builder.horizontals.append(HorizontalSegment(y, start_x, builder.box.width, ray_id))
    return builder.box.width


def build_diagram_from_points(
    box: Box,
    t: float,
    sources: Sequence[float],
    sinks: Sequence[float],
    bulk: Iterable[Tuple[float, float]],
    coins: CoinSource,
) -> Diagram:
    """Sweep fixed nucleations into a diagram.

    Origin ids are dense: sources first (by abscissa), then sinks (by ordinate),
    then bulk points (by ordinate).
    """
    sources = sorted(float(x) for x in sources)
    sinks = sorted(float(y) for y in sinks)
    bulk = sorted(((float(x), float(y)) for x, y in bulk), key=lambda p: p[1])

    ys = [y for _, y in bulk] + sinks
    if len(set(ys)) != len(ys):
        raise SamplingError("two horizontal rays share an ordinate")
    xs = [x for x, _ in bulk] + sources
    if len(set(xs)) != len(xs):
        raise SamplingError("two vertical rays share an abscissa")

    n_src, n_snk = len(sources), len(sinks)
    events: List[Tuple[float, int, Optional[float]]] = []
    for j, y in enumerate(sinks):
        events.append((y, n_src + j, None))
    for k, (x, y) in enumerate(bulk):
        events.append((y, n_src + n_snk + k, x))
    events.sort(key=lambda e: e[0])

    builder = DiagramBuilder(box, t)
    front = ActiveFront()
    for i, x in enumerate(sources):
        front.insert(x, i, 0.0)

    for y, origin_id, x in events:
        if x is None:
            resolve_horizontal_ray(front, 0.0, y, t, coins, builder, origin_id)
        else:
            builder.nucleation(x, y)
            resolve_horizontal_ray(front, x, y, t, coins, builder, origin_id)
            front.insert(x, origin_id, y)

    for x, (origin_id, y_lo) in front.items():
        builder.verticals.append(VerticalSegment(x, y_lo, box.height, origin_id))

    if coins.drawn and coins.drawn != builder.stats["corners"] + builder.stats["crossings"]:
        raise StructuralError(
            f"coin audit failed: {coins.drawn} coins for "
            f"{builder.stats['corners'] + builder.stats['crossings']} contacts"
        )

    return Diagram.canonical(
        box=box,
        t=t,
        verticals=builder.verticals,
        horizontals=builder.horizontals,
        vertices=builder.vertices,
        sources=sources,
        sinks=sinks,
        bulk=bulk,
        coins_drawn=builder.stats["corners"] + builder.stats["crossings"],
    )


@dataclass(frozen=True)
class SampledPoints:
    sources: np.ndarray
    sinks: np.ndarray
    bulk: np.ndarray


def sample_points(params: ModelParams, streams: RngStreams) -> SampledPoints:
    box = params.box
    return SampledPoints(
        sources=sample_poisson_1d(params.source_rate, box.width, streams.geometry("sources")),
        sinks=sample_poisson_1d(params.sink_rate, box.height, streams.geometry("sinks")),
        bulk=sample_poisson_2d(params.bulk_intensity, box, streams.geometry("bulk")),
    )


def build_diagram(params: ModelParams, streams: Optional[RngStreams] = None) -> Diagram:
    """Sample every nucleation for ``params`` and sweep it into a diagram."""
    streams = streams or RngStreams.from_seed(params.seed)
    pts = sample_points(params, streams)
    n_rays = len(pts.sources) + len(pts.sinks) + len(pts.bulk)
    coins = StreamCoins(streams.interaction_seed, n_rays)
    d = build_diagram_from_points(params.box, params.t, pts.sources, pts.sinks, pts.bulk, coins)
    logger.debug(json.dumps({
        "event": "diagram_built",
        "seed": streams.master_seed,
        "bulk": len(d.bulk),
        "corners": d.corner_count,
        "crossings": d.crossing_count,
        "exits_top": d.exits_top,
        "exits_right": d.exits_right,
    }))
    return d


# --- trajectories -----------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """One connected path read in the particle's direction: up the verticals,
    left along the horizontals.

    ``entry`` is "source" (bottom edge) or "right" (enters at the right edge);
    ``terminus`` is "top" or "sink" (left edge).
    """

    entry: str
    terminus: str
    points: Tuple[Point, ...]
    segments: Tuple[Tuple[str, int], ...]


def extract_trajectories(d: Diagram) -> List[Trajectory]:
    W, H = d.box.width, d.box.height
    vertical_ending_at = {}
    for i, s in enumerate(d.verticals):
        if s.y_hi < H:
            vertical_ending_at[Point(s.x, s.y_hi)] = i
    horizontal_ending_at = {}
    for i, s in enumerate(d.horizontals):
        if s.x_hi < W:
            horizontal_ending_at[Point(s.x_hi, s.y)] = i
    vertical_from = {Point(s.x, s.y_lo): i for i, s in enumerate(d.verticals)}

    corners = set(d.vertices_of(VertexKind.CORNER))
    bulk = set(d.bulk)
    used_v = [False] * len(d.verticals)
    used_h = [False] * len(d.horizontals)
    out: List[Trajectory] = []

    def walk_from_vertical(i: int, entry: str, points: List[Point], segs: List[Tuple[str, int]]) -> Trajectory:
        while True:
            if used_v[i]:
                raise StructuralError("vertical reached twice", d.verticals[i])
            used_v[i] = True
            s = d.verticals[i]
            segs.append(("v", i))
            top = Point(s.x, s.y_hi)
            points.append(top)
            if s.y_hi >= H:
                return Trajectory(entry, "top", tuple(points), tuple(segs))
            if top not in corners:
                raise StructuralError("vertical ends away from a corner", s)
            j = horizontal_ending_at.get(top)
            if j is None:
                raise StructuralError("corner without a horizontal", top)
            term = walk_horizontal(j, points, segs)
            if term is not None:
                return Trajectory(entry, term, tuple(points), tuple(segs))
            i = vertical_from[points[-1]]

    def walk_horizontal(j: int, points: List[Point], segs: List[Tuple[str, int]]) -> Optional[str]:
        if used_h[j]:
            raise StructuralError("horizontal reached twice", d.horizontals[j])
        used_h[j] = True
        s = d.horizontals[j]
        segs.append(("h", j))
        left = Point(s.x_lo, s.y)
        points.append(left)
        if s.x_lo == 0.0 and left not in bulk:
            return "sink"
        if left not in vertical_from:
            raise StructuralError("horizontal starts at no nucleation", s)
        return None

    for i, s in enumerate(d.verticals):
        if s.y_lo == 0.0:
            out.append(walk_from_vertical(i, "source", [Point(s.x, 0.0)], []))
    for j, s in enumerate(d.horizontals):
        if s.x_hi >= W:
            points = [Point(W, s.y)]
            segs: List[Tuple[str, int]] = []
            term = walk_horizontal(j, points, segs)
            if term is not None:
                out.append(Trajectory("right", term, tuple(points), tuple(segs)))
            else:
                out.append(walk_from_vertical(vertical_from[points[-1]], "right", points, segs))

    for i, flag in enumerate(used_v):
        if not flag:
            raise StructuralError("orphan segment", d.verticals[i])
    for j, flag in enumerate(used_h):
        if not flag:
            raise StructuralError("orphan segment", d.horizontals[j])
    return out


def slice(d: Diagram, tau: float) -> np.ndarray:  # noqa: A001
    """Particle configuration at time ``tau``: abscissas of alive verticals."""
    return slice_at(d, tau)


def coslice(d: Diagram, tau: float) -> np.ndarray:
    """Hole configuration at position ``tau``: ordinates of alive horizontals."""
    return coslice_at(d, tau)
