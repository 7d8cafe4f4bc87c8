"""
Tabular Q-learning over the four "previous joint action" states.

A state is (opponent's previous action, own previous action). States are indexed
2 * opp_prev + self_prev, giving the order CC, CD, DC, DD; the engine works on these
indices and the dataclass views are used at the API boundary.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Sequence

import numpy as np

from services.errors import ConfigurationError
from services.game_core import Action
from services.moral_reward import MoralFramework

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObservedState:
    opp_prev: Action
    self_prev: Action

    def __post_init__(self):
        object.__setattr__(self, "opp_prev", Action.parse(self.opp_prev))
        object.__setattr__(self, "self_prev", Action.parse(self.self_prev))

    @property
    def index(self) -> int:
        return 2 * int(self.opp_prev) + int(self.self_prev)

    @property
    def key(self) -> str:
        return f"{self.opp_prev.label},{self.self_prev.label}"

    def flipped(self) -> "ObservedState":
        """The same joint history seen from the other player"""
        return ObservedState(opp_prev=self.self_prev, self_prev=self.opp_prev)

    @classmethod
    def from_index(cls, index: int) -> "ObservedState":
        return ALL_STATES[index]

    @classmethod
    def parse(cls, key: str) -> "ObservedState":
        parts = [p for p in str(key).replace(" ", "").split(",") if p]
        if len(parts) != 2:
            raise ConfigurationError(f"State key must look like 'C,D', got {key!r}")
        return cls(Action.parse(parts[0]), Action.parse(parts[1]))


ALL_STATES = tuple(ObservedState(o, s) for o in Action for s in Action)


def state_index(opp_prev: int, self_prev: int) -> int:
    return 2 * opp_prev + self_prev


class QTable:
    """4 x 2 action values, all zero at construction"""

    def __init__(self, values: Optional[Sequence[Sequence[float]]] = None):
        if values is None:
            self.values: List[List[float]] = [[0.0, 0.0] for _ in ALL_STATES]
        else:
            rows = [[float(v) for v in row] for row in values]
            if len(rows) != len(ALL_STATES) or any(len(row) != 2 for row in rows):
                raise ConfigurationError("QTable needs exactly 4 rows of 2 values")
            self.values = rows

    def get(self, state: ObservedState, action: Action) -> float:
        return self.values[state.index][int(action)]

    def set(self, state: ObservedState, action: Action, value: float) -> None:
        self.values[state.index][int(action)] = float(value)

    def row(self, state: ObservedState) -> Dict[Action, float]:
        c, d = self.values[state.index]
        return {Action.C: c, Action.D: d}

    def copy(self) -> "QTable":
        return QTable(self.values)

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)

    def max_abs(self) -> float:
        return max(abs(v) for row in self.values for v in row)

    def to_dict(self) -> Dict[str, Dict[str, float]]:
        return {
            state.key: {Action.C.label: self.values[state.index][0], Action.D.label: self.values[state.index][1]}
            for state in ALL_STATES
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Dict[str, float]]) -> "QTable":
        table = cls()
        for key, entry in data.items():
            state = ObservedState.parse(key)
            for action_label, value in entry.items():
                table.set(state, Action.parse(action_label), value)
        return table

    def __eq__(self, other) -> bool:
        return isinstance(other, QTable) and self.values == other.values

    def __repr__(self) -> str:
        return f"QTable({self.to_dict()})"


class ScheduleKind(str, Enum):
    LINEAR = "linear"
    CONSTANT = "constant"


@dataclass(frozen=True)
class ExplorationSchedule:
    kind: ScheduleKind = ScheduleKind.LINEAR
    start: float = 1.0
    end: float = 0.0
    eps: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "kind", ScheduleKind(self.kind))
        for name in ("start", "end", "eps"):
            value = float(getattr(self, name))
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"exploration {name} must be in [0, 1], got {value}")
            object.__setattr__(self, name, value)
        if self.kind == ScheduleKind.LINEAR:
            object.__setattr__(self, "eps", 0.05)
        else:
            object.__setattr__(self, "start", 1.0)
            object.__setattr__(self, "end", 0.0)

    @classmethod
    def linear_decay(cls, start: float = 1.0, end: float = 0.0) -> "ExplorationSchedule":
        return cls(ScheduleKind.LINEAR, start=start, end=end)

    @classmethod
    def constant(cls, eps: float) -> "ExplorationSchedule":
        return cls(ScheduleKind.CONSTANT, eps=eps)

    @property
    def label(self) -> str:
        if self.kind == ScheduleKind.CONSTANT:
            return f"constant:{self.eps:g}"
        if (self.start, self.end) == (1.0, 0.0):
            return "linear"
        return f"linear:{self.start:g}-{self.end:g}"

    @classmethod
    def parse(cls, text: str) -> "ExplorationSchedule":
        kind, _, rest = str(text).strip().lower().partition(":")
        try:
            if kind == "linear":
                if not rest:
                    return cls.linear_decay()
                start, _, end = rest.partition("-")
                return cls.linear_decay(float(start), float(end))
            if kind == "constant":
                return cls.constant(float(rest))
        except ValueError:
            pass
        raise ConfigurationError(f"Unknown exploration schedule: {text!r}")

    def to_dict(self) -> Dict[str, object]:
        if self.kind == ScheduleKind.CONSTANT:
            return {"kind": self.kind.value, "eps": self.eps}
        return {"kind": self.kind.value, "start": self.start, "end": self.end}


def epsilon_at(schedule: ExplorationSchedule, t: int, T: int) -> float:
    if T < 2:
        raise ConfigurationError(f"need at least 2 iterations, got T={T}")
    if not 0 <= t < T:
        raise ConfigurationError(f"iteration {t} outside [0, {T})")
    if schedule.kind == ScheduleKind.CONSTANT:
        return schedule.eps
    eps = schedule.start + (schedule.end - schedule.start) * (t / (T - 1))
    return min(1.0, max(0.0, eps))


def epsilon_series(schedule: ExplorationSchedule, T: int) -> List[float]:
    """epsilon_at for every t in [0, T), computed in one pass"""
    if T < 2:
        raise ConfigurationError(f"need at least 2 iterations, got T={T}")
    if schedule.kind == ScheduleKind.CONSTANT:
        return [schedule.eps] * T
    eps = schedule.start + (schedule.end - schedule.start) * (np.arange(T) / (T - 1))
    return np.clip(eps, 0.0, 1.0).tolist()


@dataclass(frozen=True)
class LearnerParams:
    alpha: float = 0.01
    gamma: float = 0.90
    schedule: ExplorationSchedule = field(default_factory=ExplorationSchedule.linear_decay)
    framework: MoralFramework = field(default_factory=MoralFramework.selfish)

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigurationError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigurationError(f"gamma must be in [0, 1), got {self.gamma}")

    def to_dict(self) -> Dict[str, object]:
        return {
            **self.framework.to_dict(),
            "alpha": self.alpha,
            "gamma": self.gamma,
            "schedule": self.schedule.to_dict(),
        }


def _choose(row: List[float], eps: float, rng) -> int:
    if rng.random() < eps:
        return rng.coin()
    c, d = row
    if c > d:
        return 0
    if d > c:
        return 1
    return rng.coin()


def _td_update(values: List[List[float]], s: int, a: int, r: float, s_next: int, alpha: float, gamma: float) -> None:
    current = values[s][a]
    target = r + gamma * max(values[s_next])
    values[s][a] = current + alpha * (target - current)


def select_action(q: QTable, s: ObservedState, eps: float, rng) -> Action:
    """
    Epsilon-greedy: a uniformly random action with probability eps, otherwise the
    highest-valued action with ties broken uniformly at random.
    """
    if not 0.0 <= eps <= 1.0:
        raise ConfigurationError(f"eps must be in [0, 1], got {eps}")
    return Action(_choose(q.values[s.index], eps, rng))


def q_update(q: QTable, s: ObservedState, a: Action, r: float, s_next: ObservedState, params: LearnerParams) -> QTable:
    """One Bellman step on q[s][a]; the table is updated in place and returned"""
    _td_update(q.values, s.index, int(a), float(r), s_next.index, params.alpha, params.gamma)
    return q


def greedy_policy(q: QTable) -> Dict[ObservedState, FrozenSet[Action]]:
    """Maximising actions per state; a tied state maps to both actions"""
    policy = {}
    for state in ALL_STATES:
        c, d = q.values[state.index]
        if c > d:
            policy[state] = frozenset({Action.C})
        elif d > c:
            policy[state] = frozenset({Action.D})
        else:
            policy[state] = frozenset(Action)
    return policy


class QLearner:
    """One learning player: its table, its parameters and its own random stream"""

    def __init__(self, params: LearnerParams, rng, table: Optional[QTable] = None):
        self.params = params
        self.rng = rng
        self.table = table if table is not None else QTable()
        self._alpha = params.alpha
        self._gamma = params.gamma

    @property
    def framework(self) -> MoralFramework:
        return self.params.framework

    def epsilon(self, t: int, T: int) -> float:
        return epsilon_at(self.params.schedule, t, T)

    def epsilons(self, T: int) -> List[float]:
        return epsilon_series(self.params.schedule, T)

    # act/learn are _choose/_td_update inlined for the episode loop; same draws, same arithmetic
    def act(self, state: int, eps: float) -> int:
        rng = self.rng
        if rng.random() < eps:
            return rng.coin()
        c, d = self.table.values[state]
        if c > d:
            return 0
        if d > c:
            return 1
        return rng.coin()

    def learn(self, state: int, action: int, reward: float, next_state: int) -> None:
        values = self.table.values
        row = values[state]
        nxt = values[next_state]
        best = nxt[0] if nxt[0] >= nxt[1] else nxt[1]
        current = row[action]
        row[action] = current + self._alpha * (reward + self._gamma * best - current)
