"""
Non-learning baseline opponents from classic iterated-game tournaments
"""
from __future__ import annotations

from enum import Enum
from typing import List

from services.errors import ConfigurationError
from services.game_core import Action


class StaticStrategy(str, Enum):
    ALWAYS_COOPERATE = "AC"
    ALWAYS_DEFECT = "AD"
    TIT_FOR_TAT = "TFT"
    RANDOM = "Random"

    @property
    def label(self) -> str:
        return self.value

    @property
    def is_deterministic(self) -> bool:
        return self != StaticStrategy.RANDOM

    @classmethod
    def parse(cls, value) -> "StaticStrategy":
        if isinstance(value, StaticStrategy):
            return value
        key = str(value).strip().lower().replace(" ", "").replace("_", "").replace("-", "")
        aliases = {
            "ac": cls.ALWAYS_COOPERATE, "alwayscooperate": cls.ALWAYS_COOPERATE,
            "ad": cls.ALWAYS_DEFECT, "alwaysdefect": cls.ALWAYS_DEFECT,
            "tft": cls.TIT_FOR_TAT, "titfortat": cls.TIT_FOR_TAT,
            "random": cls.RANDOM, "rand": cls.RANDOM,
        }
        if key not in aliases:
            raise ConfigurationError(f"Unknown static strategy: {value!r}")
        return aliases[key]


def static_action(strategy: StaticStrategy, opp_prev: Action, rng) -> Action:
    if strategy == StaticStrategy.ALWAYS_COOPERATE:
        return Action.C
    if strategy == StaticStrategy.ALWAYS_DEFECT:
        return Action.D
    if strategy == StaticStrategy.TIT_FOR_TAT:
        return Action.parse(opp_prev)
    return Action(rng.coin())


class StaticAgent:
    """Same surface as QLearner so the engine can drive either; learning is a no-op"""

    table = None
    framework = None

    def __init__(self, strategy: StaticStrategy, rng):
        self.strategy = strategy
        self.rng = rng

    def epsilon(self, t: int, T: int) -> float:
        return 0.0

    def epsilons(self, T: int) -> List[float]:
        return [0.0] * T

    def act(self, state: int, eps: float) -> int:
        # static_action on raw indices; state index is 2 * opp_prev + self_prev
        strategy = self.strategy
        if strategy is StaticStrategy.ALWAYS_COOPERATE:
            return 0
        if strategy is StaticStrategy.ALWAYS_DEFECT:
            return 1
        if strategy is StaticStrategy.TIT_FOR_TAT:
            return state >> 1
        return self.rng.coin()

    def learn(self, state: int, action: int, reward: float, next_state: int) -> None:
        return None
