"""
Episode engine: one seeded run of T simultaneous-move iterations between two agents,
and repeated runs of a matchup.

Per iteration both agents choose from their own state (neither sees the other's
current move), extrinsic payoffs come from the game matrix, intrinsic rewards from
each agent's framework, and each learner updates its own table with its own reward
and its own successor state (opponent action first, own action second).
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Iterator, List, NamedTuple, Optional, Union

import numpy as np

from services.errors import ConfigurationError
from services.game_core import Action, GameKind, JointAction, payoff_matrix
from services.moral_reward import MoralFramework, gini_pair, intrinsic_reward_table
from services.qlearner import ALL_STATES, LearnerParams, ObservedState, QLearner, QTable
from services.rng import derive_seed, make_streams
from services.static_agents import StaticAgent, StaticStrategy

logger = logging.getLogger(__name__)

# steps at the end of an episode that are always logged in full
TRACE_TAIL = 20


@dataclass(frozen=True)
class LearnerSpec:
    params: LearnerParams = field(default_factory=LearnerParams)

    is_learner = True

    @property
    def framework(self) -> MoralFramework:
        return self.params.framework

    @property
    def label(self) -> str:
        return self.params.framework.label

    def to_dict(self) -> Dict[str, object]:
        return {"type": "learner", **self.params.to_dict()}


@dataclass(frozen=True)
class StaticSpec:
    strategy: StaticStrategy

    is_learner = False

    def __post_init__(self):
        object.__setattr__(self, "strategy", StaticStrategy.parse(self.strategy))

    @property
    def framework(self) -> MoralFramework:
        # static players are scored on the game payoff
        return MoralFramework.selfish()

    @property
    def label(self) -> str:
        return self.strategy.label

    def to_dict(self) -> Dict[str, object]:
        return {"type": "static", "strategy": self.strategy.value}


AgentSpec = Union[LearnerSpec, StaticSpec]


def learner(framework: MoralFramework, **params) -> LearnerSpec:
    return LearnerSpec(LearnerParams(framework=framework, **params))


def parse_agent_spec(text: str, defaults: Optional[LearnerParams] = None) -> AgentSpec:
    """'AD', 'TFT', ... become static players; framework labels become learners"""
    try:
        return StaticSpec(StaticStrategy.parse(text))
    except ConfigurationError:
        pass
    framework = MoralFramework.parse(text)
    return LearnerSpec(replace(defaults or LearnerParams(), framework=framework))


class StepRecord(NamedTuple):
    t: int
    state_m: ObservedState
    state_o: ObservedState
    a_m: Action
    a_o: Action
    r_m_extr: int
    r_o_extr: int
    r_m_intr: float
    r_o_intr: float
    eps: float


@dataclass(frozen=True)
class CumulativeTotals:
    collective: float
    gini: float
    min: float
    r_m_extr: float
    r_o_extr: float
    r_m_intr: float
    r_o_intr: float

    def as_dict(self) -> Dict[str, float]:
        return {
            "collective": self.collective,
            "gini": self.gini,
            "min": self.min,
            "r_m_extr": self.r_m_extr,
            "r_o_extr": self.r_o_extr,
            "r_m_intr": self.r_m_intr,
            "r_o_intr": self.r_o_intr,
        }


@dataclass(eq=False)
class EpisodeResult:
    game: GameKind
    seed: int
    spec_m: AgentSpec
    spec_o: AgentSpec
    iterations: int
    initial_pair: JointAction
    steps: List[StepRecord]
    final_pair: JointAction
    cumulative: CumulativeTotals
    joint_actions: np.ndarray
    final_q_m: Optional[QTable] = None
    final_q_o: Optional[QTable] = None
    log_every: Optional[int] = 1

    @property
    def full_log(self) -> bool:
        return self.log_every == 1

    @property
    def final_qtables(self) -> Dict[str, Optional[QTable]]:
        return {"M": self.final_q_m, "O": self.final_q_o}

    @property
    def configuration(self) -> tuple:
        return (self.game, self.spec_m, self.spec_o, self.iterations)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EpisodeResult):
            return NotImplemented
        return (
            self.configuration == other.configuration
            and self.seed == other.seed
            and self.initial_pair == other.initial_pair
            and self.steps == other.steps
            and self.final_pair == other.final_pair
            and self.cumulative == other.cumulative
            and np.array_equal(self.joint_actions, other.joint_actions)
            and self.final_q_m == other.final_q_m
            and self.final_q_o == other.final_q_o
            and self.log_every == other.log_every
        )


def _make_player(spec: AgentSpec, rng):
    if isinstance(spec, LearnerSpec):
        return QLearner(spec.params, rng)
    if isinstance(spec, StaticSpec):
        return StaticAgent(spec.strategy, rng)
    raise ConfigurationError(f"Unknown agent spec: {spec!r}")


def run_episode(
    spec_m: AgentSpec,
    spec_o: AgentSpec,
    game: GameKind,
    iterations: int,
    seed: int,
    log_every: Optional[int] = 1,
    tail: int = TRACE_TAIL,
) -> EpisodeResult:
    """
    Play one episode. With log_every=k > 1 only every k-th step and the final `tail`
    steps are kept in `steps`; log_every=None keeps the tail only. Cumulative totals
    and the joint action array always cover all iterations.
    """
    game = GameKind.parse(game)
    T = int(iterations)
    if T < 2:
        raise ConfigurationError(f"an episode needs at least 2 iterations, got {iterations}")
    if log_every is not None and log_every < 1:
        raise ConfigurationError(f"log_every must be >= 1, got {log_every}")

    streams = make_streams(seed)
    initial = JointAction.from_index(streams.initial.choice_index(4))
    player_m = _make_player(spec_m, streams.agent_m)
    player_o = _make_player(spec_o, streams.agent_o)

    matrix = payoff_matrix(game)
    payoffs = [[matrix.payoff(a, b) for b in Action] for a in Action]
    gini = [[gini_pair(*payoffs[a][b]) for b in Action] for a in Action]
    reward_m = intrinsic_reward_table(spec_m.framework, game)
    reward_o = intrinsic_reward_table(spec_o.framework, game)
    eps_from_o = not spec_m.is_learner and spec_o.is_learner
    actions = (Action.C, Action.D)

    # state index = 2 * opp_prev + self_prev
    s_m = 2 * int(initial.a_o) + int(initial.a_m)
    s_o = 2 * int(initial.a_m) + int(initial.a_o)

    collective = gini_sum = min_sum = 0.0
    rm_extr = ro_extr = rm_intr = ro_intr = 0.0
    joint = bytearray(2 * T)
    steps: List[StepRecord] = []
    tail_start = T - tail

    eps_series_m = player_m.epsilons(T)
    eps_series_o = player_o.epsilons(T)
    act_m, act_o = player_m.act, player_o.act
    learn_m, learn_o = player_m.learn, player_o.learn

    for t in range(T):
        eps_m = eps_series_m[t]
        eps_o = eps_series_o[t]
        a_m = act_m(s_m, eps_m)
        a_o = act_o(s_o, eps_o)

        r_m, r_o = payoffs[a_m][a_o]
        ri_m = reward_m[s_m >> 1][a_m][a_o]
        ri_o = reward_o[s_o >> 1][a_o][a_m]

        n_m = 2 * a_o + a_m
        n_o = 2 * a_m + a_o
        learn_m(s_m, a_m, ri_m, n_m)
        learn_o(s_o, a_o, ri_o, n_o)

        collective += r_m + r_o
        gini_sum += gini[a_m][a_o]
        min_sum += r_m if r_m < r_o else r_o
        rm_extr += r_m
        ro_extr += r_o
        rm_intr += ri_m
        ro_intr += ri_o
        joint[2 * t] = a_m
        joint[2 * t + 1] = a_o

        if t >= tail_start or (log_every is not None and t % log_every == 0):
            steps.append(StepRecord(
                t, ALL_STATES[s_m], ALL_STATES[s_o], actions[a_m], actions[a_o],
                r_m, r_o, ri_m, ri_o, eps_o if eps_from_o else eps_m,
            ))

        s_m, s_o = n_m, n_o

    joint_actions = np.frombuffer(bytes(joint), dtype=np.int8).reshape(T, 2).copy()
    final_pair = JointAction(Action(int(joint_actions[-1, 0])), Action(int(joint_actions[-1, 1])))
    logger.debug(
        "episode %s %s vs %s seed=%d T=%d final=%s",
        game.value, spec_m.label, spec_o.label, seed, T, final_pair.label,
    )
    return EpisodeResult(
        game=game,
        seed=seed,
        spec_m=spec_m,
        spec_o=spec_o,
        iterations=T,
        initial_pair=initial,
        steps=steps,
        final_pair=final_pair,
        cumulative=CumulativeTotals(
            collective=collective,
            gini=gini_sum,
            min=min_sum,
            r_m_extr=rm_extr,
            r_o_extr=ro_extr,
            r_m_intr=rm_intr,
            r_o_intr=ro_intr,
        ),
        joint_actions=joint_actions,
        final_q_m=player_m.table.copy() if player_m.table is not None else None,
        final_q_o=player_o.table.copy() if player_o.table is not None else None,
        log_every=log_every,
    )


class EpisodeTask(NamedTuple):
    spec_m: AgentSpec
    spec_o: AgentSpec
    game: GameKind
    iterations: int
    seed: int
    log_every: Optional[int] = 1


def _run_task(task: EpisodeTask) -> EpisodeResult:
    return run_episode(task.spec_m, task.spec_o, task.game, task.iterations, task.seed, task.log_every)


def run_many(tasks: Iterable[EpisodeTask], workers: int = 1) -> Iterator[EpisodeResult]:
    """Run tasks and yield results in task order, serially or on a process pool"""
    if workers < 1:
        raise ConfigurationError(f"workers must be >= 1, got {workers}")
    tasks = list(tasks)
    if workers == 1 or len(tasks) <= 1:
        for task in tasks:
            yield _run_task(task)
        return
    chunksize = max(1, len(tasks) // (workers * 8))
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        yield from pool.map(_run_task, tasks, chunksize=chunksize)


def matchup_tasks(
    spec_m: AgentSpec,
    spec_o: AgentSpec,
    game: GameKind,
    iterations: int,
    n_runs: int,
    base_seed: int,
    log_every: Optional[int] = 1,
) -> List[EpisodeTask]:
    if n_runs < 1:
        raise ConfigurationError(f"n_runs must be >= 1, got {n_runs}")
    if iterations < 2:
        raise ConfigurationError(f"an episode needs at least 2 iterations, got {iterations}")
    game = GameKind.parse(game)
    return [
        EpisodeTask(spec_m, spec_o, game, iterations, derive_seed(base_seed, i), log_every)
        for i in range(n_runs)
    ]


def run_matchup(
    spec_m: AgentSpec,
    spec_o: AgentSpec,
    game: GameKind,
    iterations: int,
    n_runs: int,
    base_seed: int,
    workers: int = 1,
    log_every: Optional[int] = 1,
) -> List[EpisodeResult]:
    """Run i uses seed derive_seed(base_seed, i); results are in run order for any worker count"""
    tasks = matchup_tasks(spec_m, spec_o, game, iterations, n_runs, base_seed, log_every)
    logger.info(
        "matchup %s: %s vs %s, %d runs x %d iterations, %d worker(s)",
        GameKind.parse(game).value, spec_m.label, spec_o.label, n_runs, iterations, workers,
    )
    return list(run_many(tasks, workers))
