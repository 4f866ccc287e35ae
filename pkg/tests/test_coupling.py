import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpng.core.errors import DomainError, ParticleExited
from tpng.experiments.stats import two_sample_counts
from tpng.model.diagram import Point, rect_flux, validate_diagram
from tpng.model.schemas import Box, ModelParams
from tpng.sampling.streams import RngStreams, ScriptedCoins
from tpng.services.coupling import (
    build_layer,
    bounded_difference_audit,
    couple_pair,
    initial_difference,
    layer_flux,
    meeting_sequence,
    sandwich,
    tagged_position,
)
from tpng.services.height import height
from tpng.services.sweep import build_diagram, coslice, extract_trajectories, slice


def test_layer_labels_and_swaps(reference_layer):
    layer = reference_layer
    assert layer.labels == [-1, 0, 1, 2, 3]
    assert len(layer.swaps) == 4
    assert {(s.lower, s.upper) for s in layer.swaps} == {(2, 3), (0, 1), (-1, 0)}


def test_layer_paths(reference_layer):
    layer = reference_layer
    assert layer.path(1).points == (
        Point(1.5, 0), Point(1.5, 4), Point(2.4, 4), Point(2.4, 7.5), Point(2.8, 7.5), Point(2.8, 8),
    )
    assert layer.path(2).points == (Point(6.3, 0), Point(6.3, 0.5), Point(10, 0.5), Point(10, 8))
    assert layer.path(3).terminus == "right"
    assert layer.path(3).end == Point(12, 0.5)
    assert layer.path(0).start == Point(0, 4)
    assert layer.path(-1).points == (Point(0, 7.5), Point(2, 7.5), Point(2, 8))
    with pytest.raises(DomainError):
        layer.path(7)


def test_upper_diagram(reference_layer):
    psi = reference_layer.psi
    assert validate_diagram(psi) == []
    assert psi.corner_count == 11
    assert len(extract_trajectories(psi)) == 9
    assert (psi.exits_top, psi.exits_right) == (6, 2)
    assert psi.sinks == (1.0, 3.0, 6.0)
    assert len(psi.sources) == 7


def test_meeting_sequence_is_ordered_in_sigma(reference_layer):
    seq = meeting_sequence(reference_layer)
    assert [m for _, m in seq] == [2, 0, -1, 0]
    assert [s for s, _ in seq] == pytest.approx([5.0, 6.0, 15.0, 18.0])


def test_tagged_position(reference_layer):
    layer = reference_layer
    assert tagged_position(layer, 1, 0.0) == 1.5
    assert tagged_position(layer, 1, 4.0) == 2.4
    assert tagged_position(layer, 1, 5.0) == 2.4
    assert tagged_position(layer, 3, 0.2) == 10.0
    with pytest.raises(ParticleExited):
        tagged_position(layer, 3, 0.5)
    with pytest.raises(DomainError):
        tagged_position(layer, 0, 1.0)


def test_layer_flux(reference_layer):
    flux = layer_flux(reference_layer, Point(0.5, 0.2), Point(11, 3))
    assert (flux.a_v, flux.a_h) == (3, 1)


def test_layer_flux_is_the_difference_of_diagram_fluxes(reference_layer):
    layer = reference_layer
    for lo, hi in [(Point(0.5, 0.2), Point(11, 3)), (Point(1, 3.5), Point(3, 7.8)), (Point(0, 0), Point(12, 8))]:
        upper, lower = rect_flux(layer.psi, lo, hi), rect_flux(layer.base, lo, hi)
        flux = layer_flux(layer, lo, hi)
        assert upper.a_v - lower.a_v == flux.a_v
        assert lower.a_h - upper.a_h == flux.a_h


def test_bounded_difference_on_fixture(reference_layer):
    for label in reference_layer.labels:
        audit = bounded_difference_audit(reference_layer, label)
        assert audit.initial == initial_difference(label)
        assert audit.max_excess <= 0
    start = bounded_difference_audit(reference_layer, 0).records[0]
    assert start == (Point(0, 4), -1)


def test_initial_difference():
    assert [initial_difference(k) for k in (3, 1, 0, -1, -4)] == [3, 1, -1, -2, -5]


def test_build_layer_input_checks(reference_diagram):
    with pytest.raises(DomainError):
        build_layer(reference_diagram, [3.0], [], 0.5, ScriptedCoins())
    with pytest.raises(DomainError):
        build_layer(reference_diagram, [], [2.0], 0.5, ScriptedCoins())
    with pytest.raises(DomainError):
        build_layer(reference_diagram, [12.5], [], 0.5, ScriptedCoins())


def test_empty_layer_reproduces_the_base(reference_diagram):
    layer = build_layer(reference_diagram, [], [], 0.5, ScriptedCoins())
    assert layer.paths == ()
    assert layer.psi.verticals == reference_diagram.verticals
    assert layer.psi.horizontals == reference_diagram.horizontals


def test_couple_pair_orders_rates(make_params):
    lower = make_params(source_rate=1.0, sink_rate=2.0)
    with pytest.raises(DomainError):
        couple_pair(lower, lower.with_boundary(0.5, 2.0), RngStreams.from_seed(1))
    with pytest.raises(DomainError):
        couple_pair(lower, lower.with_boundary(1.0, 3.0), RngStreams.from_seed(1))
    with pytest.raises(DomainError):
        couple_pair(lower, make_params(t=0.3, source_rate=2.0), RngStreams.from_seed(1))


def test_couple_pair_is_deterministic(make_params):
    lower = make_params()
    a = couple_pair(lower, lower.with_boundary(1.5, 1.0), RngStreams.from_seed(8))
    b = couple_pair(lower, lower.with_boundary(1.5, 1.0), RngStreams.from_seed(8))
    assert a[0] == b[0]
    assert a[1].psi == b[1].psi
    assert a[1].paths == b[1].paths


@settings(deadline=None, max_examples=20)
@given(
    seed=st.integers(min_value=0, max_value=2**32),
    t=st.sampled_from([0.0, 0.4, 0.8]),
    tau=st.floats(min_value=0.0, max_value=9.0),
)
def test_coupled_pairs_are_ordered(seed, t, tau):
    box = Box(width=9, height=9)
    lower = ModelParams(t=t, source_rate=0.8, sink_rate=1.6, box=box, seed=seed)
    phi, layer = couple_pair(lower, lower.with_boundary(1.4, 0.7), RngStreams.from_seed(seed))
    assert validate_diagram(layer.psi) == []
    for x, y in [(2.0, 3.0), (4.5, 4.5), (9.0, 9.0), (7.0, 1.0)]:
        assert height(layer.psi, Point(x, y)) - height(phi, Point(x, y)) <= len(layer.extra_sources)
    for label in layer.labels:
        assert bounded_difference_audit(layer, label).max_excess <= 0
    meeting_sequence(layer)
    assert set(slice(phi, tau)) <= set(slice(layer.psi, tau))
    assert set(coslice(phi, tau)) >= set(coslice(layer.psi, tau))


def test_sandwich_brackets_the_middle_diagram(make_params):
    mid = make_params(source_rate=1.0, sink_rate=1.0)
    s = sandwich(mid.with_boundary(0.6, 1.6), mid, mid.with_boundary(1.6, 0.6), RngStreams.from_seed(4))
    assert s.upper_layer.base == s.mid
    assert validate_diagram(s.low) == []
    assert validate_diagram(s.high) == []
    assert s.low.bulk == s.mid.bulk == s.high.bulk
    assert set(s.low.sources) <= set(s.mid.sources) <= set(s.high.sources)
    assert set(s.high.sinks) <= set(s.mid.sinks) <= set(s.low.sinks)


def test_rule_d_turns_right_with_probability_one_minus_t():
    t = 0.5
    encounters = turns = 0
    seed = 0
    while encounters < 10_000:
        lower = ModelParams(t=t, source_rate=0.5, sink_rate=1.5, box=Box(width=30, height=30), seed=seed)
        _, layer = couple_pair(lower, lower.with_boundary(1.5, 1.5), RngStreams.from_seed(seed))
        encounters += layer.stats["rule_d"]
        turns += layer.stats["turn_right"]
        seed += 1
    assert turns / encounters == pytest.approx(1 - t, abs=0.02)


def test_tagged_positions_never_decrease(make_params):
    lower = make_params(t=0.4, source_rate=0.6, sink_rate=1.8)
    _, layer = couple_pair(lower, lower.with_boundary(1.6, 0.5), RngStreams.from_seed(17))
    assert layer.labels
    for label in layer.labels:
        start = layer.path(label).start.y
        previous = -1.0
        for tau in np.linspace(start, layer.base.box.height, 60):
            try:
                x = tagged_position(layer, label, tau)
            except ParticleExited:
                break
            assert x >= previous
            previous = x


def test_coupled_upper_diagram_matches_a_direct_sweep():
    box = Box(width=8, height=8)
    lower = ModelParams(t=0.5, source_rate=0.7, sink_rate=1.6, box=box)
    upper = lower.with_boundary(1.3, 0.9)
    coupled, direct = [], []
    for k in range(200):
        _, layer = couple_pair(lower, upper, RngStreams.from_seed(k))
        coupled.append(len(slice(layer.psi, 4.0)))
        direct.append(len(slice(build_diagram(upper, RngStreams.from_seed(10_000 + k)), 4.0)))
    _, p = two_sample_counts(coupled, direct)
    assert p > 0.01
