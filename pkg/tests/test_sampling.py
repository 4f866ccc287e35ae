import numpy as np
import pytest

from tpng.core.errors import DomainError
from tpng.experiments.stats import poisson_gof
from tpng.model.schemas import Box, ModelParams
from tpng.sampling.poisson import sample_poisson_1d, sample_poisson_2d, thin, thinning_marks
from tpng.sampling.streams import (
    COIN_BLOCK,
    RngStreams,
    ScriptedCoins,
    SequentialCoins,
    StreamCoins,
    parse_seed,
)
from tpng.services.sweep import sample_points


def test_parse_seed_accepts_decimal_and_hex():
    assert parse_seed("42") == 42
    assert parse_seed("0x2A") == 42
    assert parse_seed(" 7 ") == 7


@pytest.mark.parametrize("text", ["abc", "-1", str(2**64), "1.5"])
def test_parse_seed_rejects_bad_values(text):
    with pytest.raises(DomainError):
        parse_seed(text)


def test_streams_are_deterministic_and_independent():
    a, b = RngStreams.from_seed(5), RngStreams.from_seed(5)
    assert a == b
    assert len({a.geometry_seed, a.interaction_seed, a.layer_seed, a.chain_seed}) == 4
    np.testing.assert_array_equal(a.geometry("bulk").random(4), b.geometry("bulk").random(4))
    assert not np.array_equal(a.geometry("bulk").random(4), a.geometry("sinks").random(4))
    assert a.replica(0) != a.replica(1)
    assert a.replica(3) == b.replica(3)


def test_unknown_family_is_rejected():
    with pytest.raises(DomainError):
        RngStreams.from_seed(1).geometry("nope")


def test_changing_one_rate_keeps_other_families(make_params):
    s = RngStreams.from_seed(99)
    p1 = make_params(source_rate=1.0, sink_rate=2.0)
    p2 = make_params(source_rate=3.0, sink_rate=2.0)
    a, b = sample_points(p1, s), sample_points(p2, s)
    np.testing.assert_array_equal(a.sinks, b.sinks)
    np.testing.assert_array_equal(a.bulk, b.bulk)


def test_poisson_1d_points_are_sorted_inside_interval():
    pts = sample_poisson_1d(3.0, 10.0, np.random.default_rng(0))
    assert np.all(np.diff(pts) > 0)
    assert pts.min() > 0 and pts.max() < 10.0
    assert len(sample_poisson_1d(0.0, 10.0, np.random.default_rng(0))) == 0


def test_poisson_1d_on_an_empty_interval_is_empty():
    assert len(sample_poisson_1d(1.0, 0.0, np.random.default_rng(0))) == 0
    with pytest.raises(DomainError):
        sample_poisson_1d(1.0, -0.5, np.random.default_rng(0))


def test_poisson_1d_mean_count():
    rng = np.random.default_rng(21)
    counts = np.array([len(sample_poisson_1d(2.0, 5.0, rng)) for _ in range(10_000)])
    assert abs(counts.mean() - 10.0) < 3 * np.sqrt(10.0 / len(counts))


def test_poisson_2d_points_have_distinct_coordinates():
    pts = sample_poisson_2d(2.0, Box(width=5, height=4), np.random.default_rng(1))
    assert pts.shape[1] == 2
    assert np.all(np.diff(pts[:, 1]) > 0)
    assert len(np.unique(pts[:, 0])) == len(pts)


def test_poisson_counts_match_intensity():
    rng = np.random.default_rng(2)
    counts = [len(sample_poisson_2d(1.5, Box(width=4, height=2), rng)) for _ in range(400)]
    # mean 12, standard error sqrt(12/400) ~ 0.17
    assert abs(np.mean(counts) - 12.0) < 0.7


def test_poisson_2d_counts_are_equidispersed():
    rng = np.random.default_rng(22)
    counts = np.array([len(sample_poisson_2d(1.0, Box(width=10, height=10), rng)) for _ in range(10_000)])
    assert abs(counts.mean() - 100.0) < 3 * np.sqrt(100.0 / len(counts))
    assert counts.var(ddof=1) == pytest.approx(counts.mean(), rel=0.05)


@pytest.mark.parametrize("rate", [-1.0, float("nan"), float("inf")])
def test_bad_rates_are_rejected(rate):
    with pytest.raises(DomainError):
        sample_poisson_1d(rate, 1.0, np.random.default_rng(0))


def test_thin_partitions_points():
    pts = np.arange(1.0, 101.0)
    kept, dropped = thin(pts, 0.3, np.random.default_rng(3))
    assert len(kept) + len(dropped) == 100
    assert set(kept).isdisjoint(dropped)
    assert np.all(np.diff(kept) > 0)
    with pytest.raises(DomainError):
        thin(pts, 1.5, np.random.default_rng(3))
    assert thinning_marks(10, 1.0, np.random.default_rng(0)).all()


def test_thin_keeps_the_expected_fraction():
    pts = np.sort(np.random.default_rng(23).uniform(0.0, 1.0, 100_000))
    kept, _ = thin(pts, 1.0 / 1.5, np.random.default_rng(24))
    assert len(kept) / len(pts) == pytest.approx(2.0 / 3.0, abs=0.02)
    everything, nothing = thin(pts[:10], 1.0, np.random.default_rng(0))
    np.testing.assert_array_equal(everything, pts[:10])
    assert len(nothing) == 0
    assert len(thin(pts[:10], 0.0, np.random.default_rng(0))[0]) == 0


def test_thinned_poisson_counts_stay_poisson():
    rng = np.random.default_rng(25)
    keep = 2.0 / 3.0
    counts = [len(thin(sample_poisson_1d(5.0, 2.0, rng), keep, rng)[0]) for _ in range(1_000)]
    _, p = poisson_gof(counts, keep * 10.0)
    assert p > 0.01


def test_stream_coins_depend_only_on_ray_and_ordinal():
    a = StreamCoins(123, n_rays=4)
    b = StreamCoins(123, n_rays=4)
    forward = [a.uniform(2, j) for j in range(COIN_BLOCK + 3)]
    # reading another ray first does not shift ray 2
    b.uniform(0, 0)
    b.uniform(3, COIN_BLOCK + 1)
    backward = [b.uniform(2, j) for j in range(COIN_BLOCK + 3)]
    assert forward == backward
    assert a.corner(1, 0, (0, 0), t=0.0) is True
    assert a.drawn == 1


def test_sequential_and_scripted_coins_count_draws():
    seq = SequentialCoins(np.random.default_rng(0))
    assert all(seq.corner(0, j, (0, 0), t=0.0) for j in range(5))
    assert seq.drawn == 5

    scripted = ScriptedCoins(corners=[(1.0, 2.0)])
    assert scripted.corner(0, 0, (1.0000000001, 2.0), t=0.9) is True
    assert scripted.corner(0, 1, (1.5, 2.0), t=0.1) is False
    assert scripted.drawn == 2
    assert scripted.log[1] == ((1.5, 2.0), False)


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(t=1.0, box=Box(width=1, height=1))
    with pytest.raises(ValueError):
        Box(width=0, height=1)
    p = ModelParams.stationary(2.0, 0.5, Box(width=1, height=1))
    assert p.sink_rate == pytest.approx(1.0)
    assert p.digest() == ModelParams.stationary(2.0, 0.5, Box(width=1, height=1)).digest()
