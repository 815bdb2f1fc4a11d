"""Seeded random streams with a recorded draw trace.

Trial streams derive from (master seed, trial index) so trials are
reproducible and embarrassingly parallel: the result of trial i never
depends on the schedule of the other trials.
"""
from __future__ import annotations

import numpy as np


def trial_seed(master_seed: int, trial_index: int) -> np.random.SeedSequence:
    """Independent substream key for one trial of an ensemble."""
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(trial_index),))


class TraceRng:
    """Uniform [0,1) stream that records every draw it hands out.

    The recorded trace is what MeasurementRecord stores and what the
    interaction log's decision entries reference.
    """

    __slots__ = ("_gen", "draws", "seed_key")

    def __init__(self, seed: int | tuple[int, int] | np.random.SeedSequence):
        if isinstance(seed, np.random.SeedSequence):
            ss = seed
            key = (tuple(np.atleast_1d(ss.entropy).tolist()), tuple(ss.spawn_key))
        elif isinstance(seed, tuple):
            ss = trial_seed(*seed)
            key = seed
        else:
            ss = np.random.SeedSequence(int(seed))
            key = (int(seed),)
        self._gen = np.random.default_rng(ss)
        self.seed_key = key
        self.draws: list[float] = []

    def random(self) -> float:
        u = float(self._gen.random())
        self.draws.append(u)
        return u

    def __len__(self) -> int:
        return len(self.draws)


def batch_generator(master_seed: int, stream_index: int = 0) -> np.random.Generator:
    """Raw vectorized generator for scenarios that sample in bulk (untraced)."""
    return np.random.default_rng(trial_seed(master_seed, stream_index))
