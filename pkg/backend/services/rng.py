"""
Seeded random streams for reproducible episodes.

Every episode is a pure function of its integer seed. The seed feeds a numpy
SeedSequence which is spawned into three independent PCG64 streams:

    seed
      ├── initial   (fictitious joint action before t=0)
      ├── agent_m   (exploration / tie-break / Random strategy of player M)
      └── agent_o   (same for player O)

Run seeds of a matchup come from derive_seed(base_seed, run_index), so a run can be
re-executed on its own, in any process, and produce identical draws.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from services.errors import ConfigurationError

PRNG_NAME = "numpy.PCG64/SeedSequence"

_CHUNK = 4096


def _check_seed(value: int, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ConfigurationError(f"{what} must be an integer, got {value!r}")
    if value < 0:
        raise ConfigurationError(f"{what} must be non-negative, got {value}")
    return int(value)


def derive_seed(base_seed: int, index: int) -> int:
    """Counter-based child seed: first 64-bit word of SeedSequence([base_seed, index])"""
    base_seed = _check_seed(base_seed, "base_seed")
    index = _check_seed(index, "run index")
    state = np.random.SeedSequence([base_seed, index]).generate_state(1, dtype=np.uint64)
    return int(state[0])


class RandomStream:
    """
    Buffered scalar draws from one PCG64 generator.

    Uniforms and coin flips are drawn in chunks and handed out one at a time, which
    keeps the per-step cost of the simulation loop low. The sequence of values is a
    pure function of the seed and the order of calls.
    """

    def __init__(self, seed):
        if isinstance(seed, np.random.SeedSequence):
            self._gen = np.random.default_rng(seed)
        else:
            self._gen = np.random.default_rng(_check_seed(seed, "seed"))
        self._uniforms: List[float] = []
        self._u_pos = 0
        self._coins: List[int] = []
        self._c_pos = 0

    def random(self) -> float:
        """Uniform draw in [0, 1)"""
        if self._u_pos >= len(self._uniforms):
            self._uniforms = self._gen.random(_CHUNK).tolist()
            self._u_pos = 0
        value = self._uniforms[self._u_pos]
        self._u_pos += 1
        return value

    def coin(self) -> int:
        """Fair 0/1 draw"""
        if self._c_pos >= len(self._coins):
            self._coins = self._gen.integers(0, 2, size=_CHUNK).tolist()
            self._c_pos = 0
        value = self._coins[self._c_pos]
        self._c_pos += 1
        return value

    def choice_index(self, n: int) -> int:
        """Uniform integer in [0, n)"""
        return int(self._gen.integers(0, n))


@dataclass(frozen=True)
class EpisodeStreams:
    initial: RandomStream
    agent_m: RandomStream
    agent_o: RandomStream


def make_streams(seed: int) -> EpisodeStreams:
    root = np.random.SeedSequence(_check_seed(seed, "seed"))
    ss_initial, ss_m, ss_o = root.spawn(3)
    return EpisodeStreams(
        initial=RandomStream(ss_initial),
        agent_m=RandomStream(ss_m),
        agent_o=RandomStream(ss_o),
    )
