import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from efleet.netmodel import StochasticParams
from efleet.stochastic import (
    RandomStreams,
    ReplayDivergence,
    rush_overlap_fraction,
    sample_energy_coeff,
    sample_travel_time,
    sample_unloading,
    substream,
)

WINDOWS = ((7.0, 9.0), (16.0, 19.0))


def test_rush_overlap_fully_inside():
    assert rush_overlap_fraction(7.0, 1.0, [(7, 9)]) == pytest.approx(1.0)


def test_rush_overlap_half():
    assert rush_overlap_fraction(6.5, 1.0, [(7, 9)]) == pytest.approx(0.5)


def test_rush_overlap_none():
    assert rush_overlap_fraction(10.0, 2.0, WINDOWS) == pytest.approx(0.0)


def test_rush_overlap_wraps_midnight():
    # departs 23:30 for 8 h, ends 7:30, catching half an hour of the window
    assert rush_overlap_fraction(23.5, 8.0, [(7, 9)]) == pytest.approx(0.5 / 8.0)


def test_rush_overlap_multi_day():
    frac = rush_overlap_fraction(0.0, 48.0, WINDOWS)
    assert frac == pytest.approx(2 * 5.0 / 48.0)


def test_travel_deterministic_mode():
    params = StochasticParams(deterministic=True)
    streams = RandomStreams(0)
    assert sample_travel_time(2.0, 0.0, params, streams) == 2.0
    assert streams.take_log() == []


def test_travel_zero_variance():
    params = StochasticParams(travel_std_factor=0.0)
    streams = RandomStreams(0)
    assert sample_travel_time(3.5, 0.0, params, streams) == 3.5


def test_travel_monte_carlo_moments():
    params = StochasticParams()
    streams = RandomStreams(123)
    tau = 1.0
    draws = np.array([sample_travel_time(tau, 10.0, params, streams) for _ in range(100_000)])
    assert abs(draws.mean() - 1.0) < 0.01
    assert 0.13 < draws.std() < 0.16
    assert draws.min() >= 0.5 * tau and draws.max() <= 2.0 * tau


def test_travel_rush_widens_sigma():
    params = StochasticParams()
    a = RandomStreams(9)
    b = RandomStreams(9)
    offpeak = np.array([sample_travel_time(1.0, 11.0, params, a) for _ in range(20_000)])
    rush = np.array([sample_travel_time(1.0, 7.0, params, b) for _ in range(20_000)])
    assert rush.std() > 1.5 * offpeak.std()


def test_energy_coeff_identity():
    params = StochasticParams(energy_noise_std=0.0)
    assert sample_energy_coeff(2.0, 2.0, params, RandomStreams(0)) == pytest.approx(1.0)


def test_energy_coeff_high_clip():
    params = StochasticParams(energy_noise_std=0.0)
    assert sample_energy_coeff(1.4, 1.0, params, RandomStreams(0)) == pytest.approx(1.20)


def test_energy_coeff_low_clip():
    params = StochasticParams(energy_noise_std=0.0)
    assert sample_energy_coeff(0.5, 1.0, params, RandomStreams(0)) == pytest.approx(0.90)


def test_energy_coeff_deterministic():
    params = StochasticParams(deterministic=True)
    assert sample_energy_coeff(1.4, 1.0, params, RandomStreams(0)) == 1.0


def test_unloading_fixed():
    assert sample_unloading(StochasticParams(), RandomStreams(0)) == 0.2


def test_unloading_stochastic_clipped():
    params = StochasticParams(unloading=(0.2, 0.1, (0.05, 0.6)))
    streams = RandomStreams(4)
    for _ in range(500):
        assert 0.05 <= sample_unloading(params, streams) <= 0.6


def test_unloading_deterministic_override():
    params = StochasticParams(unloading=(0.2, 0.1, (0.05, 0.6)), deterministic=True)
    assert sample_unloading(params, RandomStreams(0)) == 0.2


def test_substreams_reproducible_and_independent():
    a = substream(42, "travel")
    b = substream(42, "travel")
    c = substream(42, "energy")
    xs = a.random(10)
    assert np.array_equal(xs, b.random(10))
    assert not np.array_equal(xs, c.random(10))


def test_draw_log_records_stream_index_value():
    streams = RandomStreams(5)
    v = streams.normal("travel", 0.0, 1.0)
    u = streams.uniform("tiebreak")
    log = streams.take_log()
    assert log == [("travel", 0, v), ("tiebreak", 0, u)]
    assert streams.take_log() == []


def test_replay_injection_round_trip():
    streams = RandomStreams(5)
    values = [streams.normal("travel", 1.0, 0.1) for _ in range(5)]
    log = streams.take_log()

    rep = RandomStreams(5, replay=True)
    rep.inject(log)
    replayed = [rep.normal("travel", 1.0, 0.1) for _ in range(5)]
    assert replayed == values


def test_replay_divergence_on_exhausted_stream():
    rep = RandomStreams(5, replay=True)
    with pytest.raises(ReplayDivergence):
        rep.normal("travel", 0.0, 1.0)


def test_replay_divergence_on_wrong_index():
    rep = RandomStreams(5, replay=True)
    rep.inject([("travel", 3, 0.5)])
    with pytest.raises(ReplayDivergence):
        rep.normal("travel", 0.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(
    tau=st.floats(min_value=0.01, max_value=30.0),
    depart=st.floats(min_value=0.0, max_value=200.0),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_travel_always_within_clip(tau, depart, seed):
    params = StochasticParams()
    value = sample_travel_time(tau, depart, params, RandomStreams(seed))
    lo, hi = params.travel_clip
    assert lo * tau <= value <= hi * tau


@settings(max_examples=200, deadline=None)
@given(
    ratio=st.floats(min_value=0.5, max_value=2.0),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_energy_coeff_always_within_clip(ratio, seed):
    params = StochasticParams()
    xi = sample_energy_coeff(ratio * 2.0, 2.0, params, RandomStreams(seed))
    lo, hi = params.energy_clip
    assert lo <= xi <= hi
