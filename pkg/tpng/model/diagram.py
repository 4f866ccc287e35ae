"""Immutable diagram types and the structural queries built on them.

A diagram is the finished output of one sweep: maximal vertical and horizontal
segments, the vertices where they meet, and the nucleations they started from.
Segments keep the integer ``origin_id`` of the ray that produced them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from tpng.core.errors import DomainError
from tpng.model.schemas import Box, DiagramDocument, VertexRecord


class Point(NamedTuple):
    x: float
    y: float


class VerticalSegment(NamedTuple):
    x: float
    y_lo: float
    y_hi: float
    origin_id: int


class HorizontalSegment(NamedTuple):
    y: float
    x_lo: float
    x_hi: float
    origin_id: int


class VertexKind(str, Enum):
    CORNER = "corner"
    CROSSING = "crossing"
    NUCLEATION = "nucleation"
    SCP_SWAP = "scp-swap"


class Vertex(NamedTuple):
    point: Point
    kind: VertexKind


@dataclass(frozen=True)
class RectFlux:
    """Paths entering a rectangle: verticals through its bottom side, horizontals through its right side."""

    a_v: int
    a_h: int

    @property
    def total(self) -> int:
        return self.a_v + self.a_h


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass(frozen=True)
class Diagram:
    box: Box
    t: float
    verticals: Tuple[VerticalSegment, ...]
    horizontals: Tuple[HorizontalSegment, ...]
    vertices: Tuple[Vertex, ...]
    sources: Tuple[float, ...]
    sinks: Tuple[float, ...]
    bulk: Tuple[Point, ...]
    exits_top: int
    exits_right: int
    coins_drawn: int = field(default=0, compare=False)

    @classmethod
    def canonical(cls, box: Box, t: float, verticals, horizontals, vertices, sources, sinks, bulk,
                  coins_drawn: int = 0) -> "Diagram":
        """Sort every collection into canonical order and derive the exit counts."""
        verticals = tuple(sorted(verticals, key=lambda s: (s.x, s.y_lo)))
        horizontals = tuple(sorted(horizontals, key=lambda s: (s.y, s.x_lo)))
        vertices = tuple(sorted(vertices, key=lambda v: (v.point.y, v.point.x, v.kind.value)))
        return cls(
            box=box,
            t=t,
            verticals=verticals,
            horizontals=horizontals,
            vertices=vertices,
            sources=tuple(sorted(sources)),
            sinks=tuple(sorted(sinks)),
            bulk=tuple(sorted((Point(*p) for p in bulk), key=lambda p: (p.y, p.x))),
            exits_top=sum(1 for s in verticals if s.y_hi >= box.height),
            exits_right=sum(1 for s in horizontals if s.x_hi >= box.width),
            coins_drawn=coins_drawn,
        )

    def vertices_of(self, kind: VertexKind) -> List[Point]:
        return [v.point for v in self.vertices if v.kind is kind]

    @property
    def corner_count(self) -> int:
        return sum(1 for v in self.vertices if v.kind is VertexKind.CORNER)

    @property
    def crossing_count(self) -> int:
        return sum(1 for v in self.vertices if v.kind is VertexKind.CROSSING)

    # columnar views used by the height and slice queries
    @cached_property
    def vertical_array(self) -> np.ndarray:
        arr = np.array([(s.x, s.y_lo, s.y_hi) for s in self.verticals], dtype=float)
        return arr.reshape(-1, 3)

    @cached_property
    def horizontal_array(self) -> np.ndarray:
        arr = np.array([(s.y, s.x_lo, s.x_hi) for s in self.horizontals], dtype=float)
        return arr.reshape(-1, 3)


# --- queries ----------------------------------------------------------------

def slice_at(d: Diagram, tau: float) -> np.ndarray:
    """Abscissas of vertical segments alive at ordinate ``tau`` (right-continuous)."""
    if not 0.0 <= tau <= d.box.height:
        raise DomainError(f"ordinate {tau} outside [0, {d.box.height}]")
    v = d.vertical_array
    alive = (v[:, 1] <= tau) & ((v[:, 2] > tau) | (v[:, 2] >= d.box.height))
    return np.sort(v[alive, 0])


def coslice_at(d: Diagram, tau: float) -> np.ndarray:
    """Ordinates of horizontal segments alive at abscissa ``tau`` (right-continuous)."""
    if not 0.0 <= tau <= d.box.width:
        raise DomainError(f"abscissa {tau} outside [0, {d.box.width}]")
    h = d.horizontal_array
    alive = (h[:, 1] <= tau) & ((h[:, 2] > tau) | (h[:, 2] >= d.box.width))
    return np.sort(h[alive, 0])


def increment_counts(d: Diagram, intervals: List[Tuple[float, float]], at: float, axis: str = "horizontal") -> List[int]:
    """Segments crossing each closed interval laid on a horizontal line ``y=at``
    (vertical segments counted) or a vertical line ``x=at`` (horizontals counted)."""
    if axis == "horizontal":
        alive = slice_at(d, at)
    elif axis == "vertical":
        alive = coslice_at(d, at)
    else:
        raise DomainError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")
    counts = []
    for a, b in intervals:
        if b < a:
            raise DomainError(f"interval [{a}, {b}] is reversed")
        lo = np.searchsorted(alive, a, side="left")
        hi = np.searchsorted(alive, b, side="right")
        counts.append(int(hi - lo))
    return counts


def rect_flux(
    d: Diagram,
    lo: Point,
    hi: Point,
    segment_filter: Optional[Callable[[object], bool]] = None,
) -> RectFlux:
    """Count the paths that enter the rectangle [lo, hi] from below or from the right.

    ``a_v`` counts verticals with ``lo.x < x <= hi.x`` alive at ordinate ``lo.y``;
    ``a_h`` counts horizontals with ``lo.y < y <= hi.y`` alive at abscissa ``hi.x``.
    With these conventions ``a_v + a_h == height(hi) - height(lo)``.
    """
    if hi.x < lo.x or hi.y < lo.y:
        raise DomainError("rectangle corners are not ordered")
    if not (d.box.contains(*lo) and d.box.contains(*hi)):
        raise DomainError("rectangle leaves the box")
    a_v = 0
    for s in d.verticals:
        if lo.x < s.x <= hi.x and s.y_lo <= lo.y and (s.y_hi > lo.y or s.y_hi >= d.box.height):
            if segment_filter is None or segment_filter(s):
                a_v += 1
    a_h = 0
    for s in d.horizontals:
        if lo.y < s.y <= hi.y and s.x_lo <= hi.x and (s.x_hi > hi.x or s.x_hi >= d.box.width):
            if segment_filter is None or segment_filter(s):
                a_h += 1
    return RectFlux(a_v=a_v, a_h=a_h)


def validate_diagram(d: Diagram) -> List[Violation]:
    """Return every structural violation found; an empty list means the diagram is sound."""
    out: List[Violation] = []
    W, H = d.box.width, d.box.height

    corners = set(d.vertices_of(VertexKind.CORNER))
    bulk = set(d.bulk)
    sources = set(d.sources)
    sinks = set(d.sinks)

    for s in d.verticals:
        if not (0.0 <= s.x <= W and 0.0 <= s.y_lo < s.y_hi <= H):
            out.append(Violation("vertical-out-of-box", f"{s} leaves the box"))
            continue
        start = Point(s.x, s.y_lo)
        if not ((s.y_lo == 0.0 and s.x in sources) or start in bulk or start in corners):
            out.append(Violation("vertical-orphan-start", f"{s} starts at no source, nucleation or corner"))
        if s.y_hi < H and Point(s.x, s.y_hi) not in corners:
            out.append(Violation("vertical-open-end", f"{s} ends at no corner below the top edge"))

    for s in d.horizontals:
        if not (0.0 <= s.y <= H and 0.0 <= s.x_lo < s.x_hi <= W):
            out.append(Violation("horizontal-out-of-box", f"{s} leaves the box"))
            continue
        start = Point(s.x_lo, s.y)
        if not ((s.x_lo == 0.0 and s.y in sinks) or start in bulk or start in corners):
            out.append(Violation("horizontal-orphan-start", f"{s} starts at no sink, nucleation or corner"))
        if s.x_hi < W and Point(s.x_hi, s.y) not in corners:
            out.append(Violation("horizontal-open-end", f"{s} ends at no corner left of the right edge"))

    ends_v = {Point(s.x, s.y_hi) for s in d.verticals if s.y_hi < H}
    ends_h = {Point(s.x_hi, s.y) for s in d.horizontals if s.x_hi < W}
    for c in corners:
        if c not in ends_v or c not in ends_h:
            out.append(Violation("corner-unmatched", f"corner {tuple(c)} does not end one vertical and one horizontal"))

    n_corner = len(corners)
    if len(d.bulk) + len(d.sources) - d.exits_top != n_corner:
        out.append(Violation(
            "conservation-vertical",
            f"bulk {len(d.bulk)} + sources {len(d.sources)} - exits_top {d.exits_top} != corners {n_corner}",
        ))
    if len(d.bulk) + len(d.sinks) - d.exits_right != n_corner:
        out.append(Violation(
            "conservation-horizontal",
            f"bulk {len(d.bulk)} + sinks {len(d.sinks)} - exits_right {d.exits_right} != corners {n_corner}",
        ))
    if d.t == 0.0 and d.crossing_count:
        out.append(Violation("crossing-at-t0", f"{d.crossing_count} crossings with t=0"))

    ys = [s.y for s in d.horizontals]
    if len(set(ys)) != len(ys):
        out.append(Violation("ordinate-collision", "two horizontal segments share an ordinate"))
    return out


def reflect(d: Diagram) -> Diagram:
    """Mirror the diagram through the diagonal, exchanging sources and sinks."""

    def flip(v: Vertex) -> Vertex:
        return Vertex(Point(v.point.y, v.point.x), v.kind)

    return Diagram.canonical(
        box=d.box.reflected(),
        t=d.t,
        verticals=[VerticalSegment(h.y, h.x_lo, h.x_hi, h.origin_id) for h in d.horizontals],
        horizontals=[HorizontalSegment(v.x, v.y_lo, v.y_hi, v.origin_id) for v in d.verticals],
        vertices=[flip(v) for v in d.vertices],
        sources=d.sinks,
        sinks=d.sources,
        bulk=[Point(p.y, p.x) for p in d.bulk],
        coins_drawn=d.coins_drawn,
    )


def diagram_summary(d: Diagram) -> Dict[str, float]:
    return {
        "width": d.box.width,
        "height": d.box.height,
        "t": d.t,
        "sources": len(d.sources),
        "sinks": len(d.sinks),
        "bulk": len(d.bulk),
        "corners": d.corner_count,
        "crossings": d.crossing_count,
        "swaps": sum(1 for v in d.vertices if v.kind is VertexKind.SCP_SWAP),
        "exits_top": d.exits_top,
        "exits_right": d.exits_right,
        "verticals": len(d.verticals),
        "horizontals": len(d.horizontals),
    }


# --- documents ----------------------------------------------------------------

def to_document(d: Diagram) -> DiagramDocument:
    return DiagramDocument(
        width=d.box.width,
        height=d.box.height,
        t=d.t,
        verticals=[tuple(s) for s in d.verticals],
        horizontals=[tuple(s) for s in d.horizontals],
        vertices=[VertexRecord(x=v.point.x, y=v.point.y, kind=v.kind.value) for v in d.vertices],
        sources=list(d.sources),
        sinks=list(d.sinks),
        bulk=[tuple(p) for p in d.bulk],
        exits_top=d.exits_top,
        exits_right=d.exits_right,
    )


def from_document(doc: DiagramDocument) -> Diagram:
    d = Diagram.canonical(
        box=Box(width=doc.width, height=doc.height),
        t=doc.t,
        verticals=[VerticalSegment(x, lo, hi, int(o)) for x, lo, hi, o in doc.verticals],
        horizontals=[HorizontalSegment(y, lo, hi, int(o)) for y, lo, hi, o in doc.horizontals],
        vertices=[Vertex(Point(v.x, v.y), VertexKind(v.kind)) for v in doc.vertices],
        sources=doc.sources,
        sinks=doc.sinks,
        bulk=doc.bulk,
    )
    if (d.exits_top, d.exits_right) != (doc.exits_top, doc.exits_right):
        raise DomainError("exit counts in the document disagree with its segments")
    return d


def canonical_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def diagram_digest(d: Diagram) -> str:
    doc = to_document(d).model_dump(mode="json", by_alias=True)
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()
