import numpy as np
import pytest

from tpng.model.diagram import HorizontalSegment, Point, VertexKind, diagram_summary
from tpng.model.schemas import Box
from tpng.sampling.streams import SequentialCoins, StreamCoins
from tpng.services.sweep import (
    ActiveFront,
    DiagramBuilder,
    build_diagram_from_points,
    resolve_horizontal_ray,
)


def _front(*xs):
    front = ActiveFront()
    for i, x in enumerate(xs):
        front.insert(float(x), i, 0.0)
    return front


# --- resolve_horizontal_ray -------------------------------------------------

def test_ray_over_an_empty_front_exits_right():
    builder = DiagramBuilder(Box(width=4, height=4), t=0.5)
    coins = SequentialCoins(np.random.default_rng(0))
    end = resolve_horizontal_ray(ActiveFront(), 0.0, 1.0, 0.5, coins, builder, ray_id=0)
    assert end == 4.0
    assert builder.vertices == []
    assert builder.horizontals == [HorizontalSegment(1.0, 0.0, 4.0, 0)]
    assert coins.drawn == 0


def test_first_contact_annihilates_at_t_zero():
    front = _front(1, 2, 3)
    builder = DiagramBuilder(Box(width=4, height=4), t=0.0)
    end = resolve_horizontal_ray(front, 0.5, 1.0, 0.0, SequentialCoins(np.random.default_rng(0)), builder, ray_id=9)
    assert end == 1.0
    assert front.abscissas() == [2.0, 3.0]
    assert builder.stats == {"corners": 1, "crossings": 0}
    assert [(s.x, s.y_lo, s.y_hi) for s in builder.verticals] == [(1.0, 0.0, 1.0)]
    assert builder.horizontals == [HorizontalSegment(1.0, 0.5, 1.0, 9)]


def test_ray_passes_k_verticals_with_probability_t_to_the_k():
    t, k, trials = 0.5, 3, 10_000
    coins = SequentialCoins(np.random.default_rng(31))
    stops = np.zeros(k + 1, dtype=int)
    for _ in range(trials):
        front = _front(1, 2, 3)
        builder = DiagramBuilder(Box(width=4, height=4), t=t)
        end = resolve_horizontal_ray(front, 0.0, 1.0, t, coins, builder, ray_id=k)
        stops[int(end) - 1] += 1
    passed = stops[k] / trials
    assert abs(passed - t ** k) < 3 * np.sqrt(t ** k * (1 - t ** k) / trials)
    # the first vertical is met on every trial
    assert stops[0] / trials == pytest.approx(1 - t, abs=0.02)


# --- build_diagram ----------------------------------------------------------

def test_two_bulk_points_at_t_zero():
    d = build_diagram_from_points(
        Box(width=4, height=4), 0.0, [], [], [(2, 1), (1, 2)], SequentialCoins(np.random.default_rng(0)),
    )
    assert d.vertices_of(VertexKind.CORNER) == [Point(2.0, 2.0)]
    assert {(s.x, s.y_lo, s.y_hi) for s in d.verticals} == {(2.0, 1.0, 2.0), (1.0, 2.0, 4.0)}
    assert {(s.y, s.x_lo, s.x_hi) for s in d.horizontals} == {(1.0, 2.0, 4.0), (2.0, 1.0, 2.0)}
    summary = diagram_summary(d)
    assert (summary["corners"], summary["exits_top"], summary["exits_right"]) == (1, 1, 1)


def test_empty_diagram():
    d = build_diagram_from_points(Box(width=3, height=3), 0.5, [], [], [], StreamCoins(1, n_rays=0))
    assert len(d.vertices) == len(d.verticals) == len(d.horizontals) == 0


def test_corner_frequency_is_one_minus_t():
    corners = 0
    seeds = 10_000
    for seed in range(seeds):
        d = build_diagram_from_points(Box(width=2, height=2), 0.5, [1.0], [1.0], [], StreamCoins(seed, n_rays=2))
        corners += d.corner_count
    assert corners / seeds == pytest.approx(0.5, abs=0.02)
