"""SVG drawings of diagrams and layers.

Colours: lower (base) diagram red, upper diagram blue, second-class paths
black. Corners are drawn as squares, crossings as plus signs, nucleations
as dots and second-class swaps as crosses.
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import Iterable, Optional, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402

from tpng.cli.serialization import LoadedLayer, write_text  # noqa: E402
from tpng.model.diagram import Diagram, VertexKind  # noqa: E402

BASE_COLOR = "#c0392b"
UPPER_COLOR = "#2e86c1"
SCP_COLOR = "black"

GLYPHS = {
    VertexKind.CORNER: ("s", 18),
    VertexKind.CROSSING: ("+", 40),
    VertexKind.NUCLEATION: ("o", 10),
    VertexKind.SCP_SWAP: ("x", 30),
}

plt.rcParams.update({"svg.hashsalt": "tpng", "svg.fonttype": "none"})


def _frame(d: Diagram, title: Optional[str]):
    w, h = d.box.width, d.box.height
    scale = 6.0 / max(w, h)
    fig, ax = plt.subplots(figsize=(max(w * scale, 1.0), max(h * scale, 1.0)))
    ax.set_xlim(0, w)
    ax.set_ylim(0, h)
    ax.set_aspect("equal")
    ax.set_xticks([])
    ax.set_yticks([])
    for spine in ax.spines.values():
        spine.set_linewidth(1.2)
    if title:
        ax.set_title(title, fontsize=9)
    return fig, ax


def _segments(ax, d: Diagram, color: str, width: float, alpha: float = 1.0) -> None:
    lines = [((s.x, s.y_lo), (s.x, s.y_hi)) for s in d.verticals]
    lines += [((s.x_lo, s.y), (s.x_hi, s.y)) for s in d.horizontals]
    if lines:
        ax.add_collection(LineCollection(lines, colors=color, linewidths=width, alpha=alpha))


def _glyphs(ax, d: Diagram, color: str, kinds: Iterable[VertexKind]) -> None:
    for kind in kinds:
        pts = d.vertices_of(kind)
        if not pts:
            continue
        marker, size = GLYPHS[kind]
        facecolor = "none" if marker == "s" else color
        ax.scatter([p.x for p in pts], [p.y for p in pts], marker=marker, s=size,
                   facecolors=facecolor, edgecolors=color, linewidths=0.8, zorder=3)


def _to_svg(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def diagram_svg(d: Diagram, title: Optional[str] = None) -> str:
    fig, ax = _frame(d, title)
    _segments(ax, d, BASE_COLOR, 1.0)
    _glyphs(ax, d, BASE_COLOR, (VertexKind.CORNER, VertexKind.CROSSING, VertexKind.NUCLEATION))
    return _to_svg(fig)


def layer_svg(layer: LoadedLayer, title: Optional[str] = None) -> str:
    fig, ax = _frame(layer.base, title)
    _segments(ax, layer.base, BASE_COLOR, 1.0, alpha=0.8)
    _segments(ax, layer.psi, UPPER_COLOR, 0.8, alpha=0.6)
    paths = [[tuple(p) for p in rec.points] for rec in layer.paths if len(rec.points) > 1]
    if paths:
        ax.add_collection(LineCollection(paths, colors=SCP_COLOR, linewidths=1.8, zorder=2))
    _glyphs(ax, layer.base, BASE_COLOR, (VertexKind.CORNER, VertexKind.CROSSING))
    if layer.swaps:
        marker, size = GLYPHS[VertexKind.SCP_SWAP]
        ax.scatter([s.x for s in layer.swaps], [s.y for s in layer.swaps], marker=marker, s=size,
                   color=SCP_COLOR, zorder=4)
    return _to_svg(fig)


def render(document: Union[Diagram, LoadedLayer], path: Union[str, Path], title: Optional[str] = None) -> Path:
    svg = layer_svg(document, title) if isinstance(document, LoadedLayer) else diagram_svg(document, title)
    return write_text(path, svg)
