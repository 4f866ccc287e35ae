import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpng.experiments.oracle import chain_below, longest_chain, longest_chain_dp
from tpng.model.diagram import Point
from tpng.model.schemas import Box, ModelParams
from tpng.services.height import height
from tpng.services.sweep import build_diagram


@pytest.mark.parametrize(
    "points, expected",
    [
        ([], 0),
        ([(1, 1)], 1),
        ([(1, 1), (2, 2), (3, 3)], 3),
        ([(1, 3), (2, 2), (3, 1)], 1),
        ([(1, 1), (1, 2), (2, 3)], 2),
        ([(1, 1), (2, 1), (3, 2)], 2),
    ],
)
def test_longest_chain_examples(points, expected):
    assert longest_chain(points) == expected
    assert longest_chain_dp(points) == expected


@settings(deadline=None, max_examples=60)
@given(st.lists(st.tuples(st.integers(0, 12), st.integers(0, 12)), max_size=40))
def test_patience_sorting_matches_dp(points):
    assert longest_chain(points) == longest_chain_dp(points)


@settings(deadline=None, max_examples=20)
@given(
    seed=st.integers(min_value=0, max_value=2**32),
    qx=st.floats(min_value=0.0, max_value=1.0),
    qy=st.floats(min_value=0.0, max_value=1.0),
)
def test_t_zero_height_is_the_longest_chain(seed, qx, qy):
    d = build_diagram(ModelParams(t=0.0, box=Box(width=7, height=7), seed=seed))
    x, y = 7 * qx, 7 * qy
    assert height(d, Point(x, y)) == chain_below(d.bulk, x, y)
