import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpng.core.errors import DomainError
from tpng.model.diagram import Point, rect_flux
from tpng.model.schemas import Box, ModelParams
from tpng.services.height import char_lambda, height, height_dual, heights, mean_function, shape
from tpng.services.sweep import build_diagram


@pytest.mark.parametrize(
    "point, expected",
    [
        ((0, 0), 0),
        ((3, 1), 1),
        ((4.5, 2.2), 2),
        ((6, 4.2), 5),
        ((9, 4.2), 5),
        ((12, 8), 7),
    ],
)
def test_reference_diagram_heights(reference_diagram, point, expected):
    assert height(reference_diagram, Point(*point)) == expected
    assert height_dual(reference_diagram, Point(*point)) == expected


def test_height_counts_every_source_and_sink_at_the_far_corner(reference_diagram):
    d = reference_diagram
    assert height(d, Point(12, 8)) == len(d.sources) + d.exits_right
    assert height_dual(d, Point(12, 8)) == len(d.sinks) + d.exits_top


def test_heights_vectorised(reference_diagram):
    np.testing.assert_array_equal(heights(reference_diagram, [Point(0, 0), Point(12, 8)]), [0, 7])


def test_height_outside_box_is_rejected(reference_diagram):
    with pytest.raises(DomainError):
        height(reference_diagram, Point(13, 1))
    with pytest.raises(DomainError):
        height_dual(reference_diagram, Point(1, -0.1))


def test_mean_function_and_shape():
    assert mean_function(Point(2, 3), lam=1.0, t=0.5) == pytest.approx(2 + 6)
    assert shape(Point(1, 1), t=0.0) == pytest.approx(2.0)
    assert shape(Point(4, 1), t=0.75) == pytest.approx(8.0)
    lam = char_lambda(Point(4, 1), t=0.75)
    assert lam == pytest.approx(1.0)
    # the characteristic rate minimises the mean function
    assert mean_function(Point(4, 1), lam, 0.75) == pytest.approx(shape(Point(4, 1), 0.75))
    for other in (0.5, 0.9, 1.1, 2.0):
        assert mean_function(Point(4, 1), other, 0.75) > mean_function(Point(4, 1), lam, 0.75)


@pytest.mark.parametrize("t", [-0.1, 1.0])
def test_analytics_reject_bad_t(t):
    with pytest.raises(DomainError):
        shape(Point(1, 1), t)
    with pytest.raises(DomainError):
        mean_function(Point(1, 1), 1.0, t)


def test_char_lambda_needs_positive_direction():
    with pytest.raises(DomainError):
        char_lambda(Point(0, 1), 0.5)
    assert char_lambda(Point(1, 0), 0.5) == 0.0
    assert math.isclose(shape(Point(1, 0), 0.5), 0.0)


@settings(deadline=None, max_examples=25)
@given(
    seed=st.integers(min_value=0, max_value=2**32),
    t=st.sampled_from([0.0, 0.5, 0.9]),
    qx=st.floats(min_value=0.0, max_value=1.0),
    qy=st.floats(min_value=0.0, max_value=1.0),
    rx=st.floats(min_value=0.0, max_value=1.0),
    ry=st.floats(min_value=0.0, max_value=1.0),
)
def test_height_identities_on_sampled_diagrams(seed, t, qx, qy, rx, ry):
    box = Box(width=8, height=6)
    d = build_diagram(ModelParams(t=t, source_rate=1.0, sink_rate=1.0, box=box, seed=seed))
    lo = Point(8 * min(qx, rx), 6 * min(qy, ry))
    hi = Point(8 * max(qx, rx), 6 * max(qy, ry))
    assert height(d, lo) == height_dual(d, lo)
    assert height(d, hi) == height_dual(d, hi)
    assert height(d, lo) <= height(d, hi)
    assert rect_flux(d, lo, hi).total == height(d, hi) - height(d, lo)
