"""Height function, its closed-form mean and the limit shape."""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from tpng.core.errors import DomainError
from tpng.model.diagram import Diagram, Point


def height(d: Diagram, v: Point) -> int:
    """Number of paths passing weakly below-right of ``v``, taken right-continuously.

    Counted as sources at or left of ``v.x`` plus horizontals at or below
    ``v.y`` that are alive at abscissa ``v.x``. A segment that reaches the box
    edge counts as alive at the edge.
    """
    x, y = float(v[0]), float(v[1])
    if not d.box.contains(x, y):
        raise DomainError(f"point {(x, y)} outside the box")
    n_sources = int(np.searchsorted(np.asarray(d.sources), x, side="right"))
    h = d.horizontal_array
    if len(h) == 0:
        return n_sources
    # horizontal_array rows follow canonical order, sorted by ordinate
    upto = int(np.searchsorted(h[:, 0], y, side="right"))
    rows = h[:upto]
    alive = (rows[:, 1] <= x) & ((rows[:, 2] > x) | (rows[:, 2] >= d.box.width))
    return n_sources + int(alive.sum())


def height_dual(d: Diagram, v: Point) -> int:
    """The same height counted through the left edge: sinks at or below ``v.y``
    plus verticals at or left of ``v.x`` alive at ordinate ``v.y``."""
    x, y = float(v[0]), float(v[1])
    if not d.box.contains(x, y):
        raise DomainError(f"point {(x, y)} outside the box")
    n_sinks = int(np.searchsorted(np.asarray(d.sinks), y, side="right"))
    w = d.vertical_array
    if len(w) == 0:
        return n_sinks
    left = w[w[:, 0] <= x]
    alive = (left[:, 1] <= y) & ((left[:, 2] > y) | (left[:, 2] >= d.box.height))
    return n_sinks + int(alive.sum())



def _check_t(t: float) -> None:
    if not 0.0 <= t < 1.0:
        raise DomainError(f"t must lie in [0, 1), got {t}")


def mean_function(v: Point, lam: float, t: float) -> float:
    """Expected stationary height at ``v`` for boundary rates (lam, 1/(lam*(1-t)))."""
    _check_t(t)
    if lam <= 0:
        raise DomainError("lam must be positive")
    x, y = float(v[0]), float(v[1])
    return x * lam + y / (lam * (1.0 - t))


def char_lambda(v: Point, t: float) -> float:
    """Minimiser of ``mean_function(v, ., t)``: the characteristic rate for direction ``v``."""
    _check_t(t)
    x, y = float(v[0]), float(v[1])
    if x <= 0:
        raise DomainError("direction needs x > 0")
    if y < 0:
        raise DomainError("direction needs y >= 0")
    return math.sqrt(y / (x * (1.0 - t)))


def shape(v: Point, t: float) -> float:
    """Limit shape 2*sqrt(x*y/(1-t)), the minimum of the mean function over lam."""
    _check_t(t)
    x, y = float(v[0]), float(v[1])
    if x <= 0:
        raise DomainError("direction needs x > 0")
    if y < 0:
        raise DomainError("direction needs y >= 0")
    return 2.0 * math.sqrt(x * y / (1.0 - t))


def heights(d: Diagram, points: Iterable[Point]) -> np.ndarray:
    return np.array([height(d, p) for p in points], dtype=int)
