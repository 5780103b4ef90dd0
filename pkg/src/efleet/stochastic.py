"""Seeded random models for travel time, energy coefficient and unloading.

Every draw goes through a named substream of a RandomStreams object.  The
PRNG is numpy's PCG64 seeded with SeedSequence([master_seed, blake2b(name)]),
which is reproducible across platforms.  Each draw is logged with its stream
name and draw index so an episode trace can be replayed bit-exactly by
injecting the recorded values.
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass

import numpy as np

from .netmodel import StochasticParams

STREAM_NAMES = ("travel", "energy", "unloading", "tiebreak", "generator")


class ReplayDivergence(RuntimeError):
    """Injected draws ran out or did not match the requested stream/index."""


def _stream_key(name: str) -> int:
    return int.from_bytes(hashlib.blake2b(name.encode(), digest_size=8).digest(), "big")


def substream(master_seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed & (2**64 - 1), _stream_key(name)]))


class RandomStreams:
    """Named, independently seeded substreams with draw logging and replay."""

    def __init__(self, master_seed: int, replay: bool = False):
        self.master_seed = master_seed
        self.replay = replay
        self._rngs = {name: substream(master_seed, name) for name in STREAM_NAMES}
        self._counters = {name: 0 for name in STREAM_NAMES}
        self._log: list[tuple[str, int, float]] = []
        self._injected: dict[str, deque[tuple[int, float]]] = {name: deque() for name in STREAM_NAMES}

    def inject(self, draws) -> None:
        """Queue recorded (stream, index, value) triples for replay."""
        for stream, index, value in draws:
            self._injected[stream].append((int(index), float(value)))

    def take_log(self) -> list[tuple[str, int, float]]:
        log, self._log = self._log, []
        return log

    def _emit(self, stream: str, value: float) -> float:
        index = self._counters[stream]
        self._counters[stream] = index + 1
        if self.replay:
            if not self._injected[stream]:
                raise ReplayDivergence(f"no injected draw for stream {stream!r} at index {index}")
            rec_index, rec_value = self._injected[stream].popleft()
            if rec_index != index:
                raise ReplayDivergence(
                    f"stream {stream!r}: expected draw index {rec_index}, engine requested {index}"
                )
            value = rec_value
        self._log.append((stream, index, value))
        return value

    def replay_consume(self, stream: str) -> float:
        """Consume one injected draw on behalf of the original caller."""
        if not self.replay:
            raise RuntimeError("replay_consume is only valid in replay mode")
        return self._emit(stream, 0.0)

    def normal(self, stream: str, mean: float, std: float) -> float:
        if self.replay:
            return self._emit(stream, 0.0)
        return self._emit(stream, float(self._rngs[stream].normal(mean, std)))

    def uniform(self, stream: str) -> float:
        if self.replay:
            return self._emit(stream, 0.0)
        return self._emit(stream, float(self._rngs[stream].random()))

    def integers(self, stream: str, n: int) -> int:
        """Uniform integer in [0, n); drawn via a logged uniform for replayability."""
        u = self.uniform(stream)
        return min(int(u * n), n - 1)


def rush_overlap_fraction(depart_hour_of_day: float, nominal_duration: float, windows) -> float:
    """Fraction of [depart, depart+duration] covered by rush windows (mod 24 h)."""
    if nominal_duration <= 0:
        raise ValueError("nominal_duration must be positive")
    win_total = sum(e - s for s, e in windows)
    full_days = int(nominal_duration // 24.0)
    rem = nominal_duration - 24.0 * full_days
    overlap = full_days * win_total
    a = depart_hour_of_day % 24.0
    for s, e in windows:
        for shift in (0.0, 24.0):
            overlap += max(0.0, min(a + rem, e + shift) - max(a, s + shift))
    return min(1.0, overlap / nominal_duration)


def sample_travel_time(
    tau_nominal: float,
    depart_time: float,
    params: StochasticParams,
    streams: RandomStreams,
) -> float:
    """Clipped-Gaussian realized travel time with rush-hour widened sigma."""
    if tau_nominal <= 0:
        raise ValueError("tau_nominal must be positive")
    if params.deterministic:
        return tau_nominal
    frac = rush_overlap_fraction(depart_time % 24.0, tau_nominal, params.rush_windows)
    sigma = tau_nominal * params.travel_std_factor * (1.0 + (params.rush_multiplier - 1.0) * frac)
    if sigma == 0.0:
        return tau_nominal
    draw = streams.normal("travel", tau_nominal, sigma)
    lo, hi = params.travel_clip
    return min(max(draw, lo * tau_nominal), hi * tau_nominal)


def sample_energy_coeff(
    realized_tau: float,
    nominal_tau: float,
    params: StochasticParams,
    streams: RandomStreams,
) -> float:
    """Traffic-coupled energy multiplier, clipped to the configured bounds."""
    if nominal_tau <= 0:
        raise ValueError("nominal_tau must be positive")
    if params.deterministic:
        return 1.0
    eps = streams.normal("energy", 0.0, params.energy_noise_std) if params.energy_noise_std > 0 else 0.0
    xi = 1.0 + 0.5 * (realized_tau / nominal_tau - 1.0) + eps
    lo, hi = params.energy_clip
    return min(max(xi, lo), hi)


def sample_unloading(params: StochasticParams, streams: RandomStreams) -> float:
    if isinstance(params.unloading, (int, float)):
        return float(params.unloading)
    mean, std, (lo, hi) = params.unloading
    if params.deterministic or std == 0:
        return float(mean)
    draw = streams.normal("unloading", mean, std)
    return min(max(draw, lo), hi)
