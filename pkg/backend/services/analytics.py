"""
Social-outcome metrics, action-pair statistics, traces and the best-response oracle.

Metrics over a step log (all from the game payoffs, not the moral rewards):

    collective  sum_t (r_M + r_O)
    gini        sum_t (1 - |r_M - r_O| / (r_M + r_O))
    min         sum_t min(r_M, r_O)
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, FrozenSet, List, Sequence, Tuple

import numpy as np
import pandas as pd

from services.episode_engine import AgentSpec, EpisodeResult, StepRecord
from services.errors import (
    ConfigurationError,
    EmptyInputError,
    HeterogeneousResultsError,
    OracleError,
)
from services.game_core import Action, GameKind, JointAction, payoff_matrix
from services.moral_reward import MoralFramework, RewardContext, gini_pair, intrinsic_reward, intrinsic_reward_table
from services.qlearner import ALL_STATES, ObservedState, state_index
from services.static_agents import StaticStrategy, static_action

logger = logging.getLogger(__name__)

Z_95 = 1.96

# metric name -> CumulativeTotals attribute
METRICS: Dict[str, str] = {
    "collective": "collective",
    "gini": "gini",
    "min": "min",
    "rm_extr": "r_m_extr",
    "rm_intr": "r_m_intr",
    "ro_extr": "r_o_extr",
    "ro_intr": "r_o_intr",
}


class PairClass(str, Enum):
    CC = "CC"  # mutual cooperation
    CD = "CD"  # M exploited
    DC = "DC"  # M exploits
    DD = "DD"  # mutual defection

    @classmethod
    def from_joint(cls, joint: JointAction) -> "PairClass":
        return cls(joint.label)


def _require_steps(steps: Sequence[StepRecord]) -> Sequence[StepRecord]:
    if not steps:
        raise EmptyInputError("metric needs at least one step")
    return steps


def collective_return(steps: Sequence[StepRecord]) -> float:
    total = 0.0
    for step in _require_steps(steps):
        total += step.r_m_extr + step.r_o_extr
    return total


def gini_return(steps: Sequence[StepRecord]) -> float:
    total = 0.0
    for step in _require_steps(steps):
        total += gini_pair(step.r_m_extr, step.r_o_extr)
    return total


def min_return(steps: Sequence[StepRecord]) -> float:
    total = 0.0
    for step in _require_steps(steps):
        total += min(step.r_m_extr, step.r_o_extr)
    return total


def classify_final_pair(result: EpisodeResult) -> PairClass:
    return PairClass.from_joint(result.final_pair)


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    ci95: float

    @property
    def low(self) -> float:
        return self.mean - self.ci95

    @property
    def high(self) -> float:
        return self.mean + self.ci95


def mean_ci(values: Sequence[float]) -> MetricSummary:
    """Mean with a normal-approximation 95% half-width, 1.96 * sd / sqrt(n)"""
    if len(values) == 0:
        raise EmptyInputError("cannot summarise an empty sample")
    arr = np.asarray(values, dtype=float)
    mean = math.fsum(arr.tolist()) / len(arr)
    if len(arr) < 2 or arr.min() == arr.max():
        return MetricSummary(mean=mean, ci95=0.0)
    sd = float(np.std(arr, ddof=1))
    return MetricSummary(mean=mean, ci95=Z_95 * sd / math.sqrt(len(arr)))


@dataclass
class MatchupSummary:
    game: GameKind
    spec_m: AgentSpec
    spec_o: AgentSpec
    n_runs: int
    iterations: int
    counts: Dict[PairClass, int]
    outcomes: Dict[str, MetricSummary]
    variant: str = "base"

    @property
    def pct_exact(self) -> Dict[PairClass, Fraction]:
        return {cls: Fraction(100 * self.counts[cls], self.n_runs) for cls in PairClass}

    @property
    def pct(self) -> Dict[PairClass, float]:
        return {cls: float(value) for cls, value in self.pct_exact.items()}

    def as_row(self) -> Dict[str, object]:
        """Field mapping used by the summary CSV and JSON emitters"""
        row: Dict[str, object] = {
            "game": self.game.value,
            "agent_m": self.spec_m.label,
            "agent_o": self.spec_o.label,
            "variant": self.variant,
            "n_runs": self.n_runs,
        }
        for cls in PairClass:
            row[f"pct_{cls.value.lower()}"] = self.pct[cls]
        for name in METRICS:
            row[f"mean_{name}"] = self.outcomes[name].mean
            row[f"ci_{name}"] = self.outcomes[name].ci95
        return row


def _check_homogeneous(results: Sequence[EpisodeResult]) -> None:
    if not results:
        raise EmptyInputError("no episode results to summarise")
    first = results[0].configuration
    for result in results[1:]:
        if result.configuration != first:
            raise HeterogeneousResultsError(
                f"results mix configurations: {result.game.value} {result.spec_m.label} vs "
                f"{result.spec_o.label} (T={result.iterations}) differs from the first run"
            )


def summarize_matchup(results: Sequence[EpisodeResult], variant: str = "base") -> MatchupSummary:
    _check_homogeneous(results)
    counts = {cls: 0 for cls in PairClass}
    for result in results:
        counts[classify_final_pair(result)] += 1
    outcomes = {
        name: mean_ci([getattr(r.cumulative, attr) for r in results])
        for name, attr in METRICS.items()
    }
    first = results[0]
    return MatchupSummary(
        game=first.game,
        spec_m=first.spec_m,
        spec_o=first.spec_o,
        n_runs=len(results),
        iterations=first.iterations,
        counts=counts,
        outcomes=outcomes,
        variant=variant,
    )


@dataclass(frozen=True)
class Trace:
    t_start: int
    m: List[Tuple[ObservedState, Action]] = field(default_factory=list)
    o: List[Tuple[ObservedState, Action]] = field(default_factory=list)


def last_k_trace(result: EpisodeResult, k: int) -> Trace:
    """Final k (state, action) pairs of each player, rebuilt from the joint action log"""
    T = result.iterations
    if k < 0 or k > T:
        raise ConfigurationError(f"trace length k={k} outside [0, {T}]")
    joint = result.joint_actions
    m: List[Tuple[ObservedState, Action]] = []
    o: List[Tuple[ObservedState, Action]] = []
    for t in range(T - k, T):
        if t == 0:
            prev_m, prev_o = int(result.initial_pair.a_m), int(result.initial_pair.a_o)
        else:
            prev_m, prev_o = int(joint[t - 1, 0]), int(joint[t - 1, 1])
        a_m, a_o = Action(int(joint[t, 0])), Action(int(joint[t, 1]))
        m.append((ALL_STATES[state_index(prev_o, prev_m)], a_m))
        o.append((ALL_STATES[state_index(prev_m, prev_o)], a_o))
    return Trace(t_start=T - k, m=m, o=o)


def action_pair_timeline(results: Sequence[EpisodeResult], bins: int = 100) -> pd.DataFrame:
    """Share of each joint action over all runs, per time bin"""
    _check_homogeneous(results)
    if bins < 1:
        raise ConfigurationError(f"bins must be >= 1, got {bins}")
    T = results[0].iterations
    stacked = np.stack([r.joint_actions for r in results]).astype(np.int64)
    classes = 2 * stacked[:, :, 0] + stacked[:, :, 1]
    edges = np.unique(np.linspace(0, T, min(bins, T) + 1).round().astype(int))
    rows = []
    for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        segment = classes[:, lo:hi]
        counts = np.bincount(segment.ravel(), minlength=4)
        pct = 100.0 * counts / segment.size
        rows.append({
            "bin": i,
            "t_start": int(lo),
            "t_end": int(hi),
            "pct_cc": pct[0],
            "pct_cd": pct[1],
            "pct_dc": pct[2],
            "pct_dd": pct[3],
        })
    return pd.DataFrame(rows, columns=["bin", "t_start", "t_end", "pct_cc", "pct_cd", "pct_dc", "pct_dd"])


def _per_step_rewards(result: EpisodeResult) -> Dict[str, np.ndarray]:
    matrix = payoff_matrix(result.game)
    cells = np.array([[matrix.payoff(a, b) for b in Action] for a in Action], dtype=float)
    table_m = np.array(intrinsic_reward_table(result.spec_m.framework, result.game))
    table_o = np.array(intrinsic_reward_table(result.spec_o.framework, result.game))
    a_m = result.joint_actions[:, 0].astype(np.int64)
    a_o = result.joint_actions[:, 1].astype(np.int64)
    prev_m = np.concatenate(([int(result.initial_pair.a_m)], a_m[:-1]))
    prev_o = np.concatenate(([int(result.initial_pair.a_o)], a_o[:-1]))
    return {
        "rm_extr": cells[a_m, a_o, 0],
        "ro_extr": cells[a_m, a_o, 1],
        "rm_intr": table_m[prev_o, a_m, a_o],
        "ro_intr": table_o[prev_m, a_o, a_m],
    }


def reward_timeline(results: Sequence[EpisodeResult], points: int = 100) -> pd.DataFrame:
    """Run-averaged cumulative extrinsic and intrinsic rewards at evenly spaced checkpoints"""
    _check_homogeneous(results)
    if points < 1:
        raise ConfigurationError(f"points must be >= 1, got {points}")
    T = results[0].iterations
    checkpoints = np.unique(np.linspace(0, T - 1, min(points, T)).round().astype(int))
    columns = ["rm_extr", "ro_extr", "rm_intr", "ro_intr"]
    totals = {name: np.zeros(len(checkpoints)) for name in columns}
    for result in results:
        rewards = _per_step_rewards(result)
        for name in columns:
            totals[name] += np.cumsum(rewards[name])[checkpoints]
    frame = pd.DataFrame({"t": checkpoints + 1})
    for name in columns:
        frame[name] = totals[name] / len(results)
    return frame


Policy = Dict[ObservedState, FrozenSet[Action]]


def _induced_mdp(strategy: StaticStrategy, game: GameKind, framework: MoralFramework):
    matrix = payoff_matrix(game)
    rewards = np.zeros((len(ALL_STATES), 2))
    successors = np.zeros((len(ALL_STATES), 2), dtype=int)
    for state in ALL_STATES:
        for a in Action:
            # the opponent's "previous opponent action" is our own previous action
            b = static_action(strategy, state.self_prev, None)
            r_self, r_opp = matrix.payoff(a, b)
            ctx = RewardContext(state.opp_prev, a, r_self, r_opp)
            rewards[state.index, a] = intrinsic_reward(framework, ctx)
            successors[state.index, a] = state_index(int(b), int(a))
    return rewards, successors


def oracle_q_values(
    strategy: StaticStrategy,
    game: GameKind,
    framework: MoralFramework,
    gamma: float = 0.9,
    tol: float = 1e-10,
    max_sweeps: int = 10 ** 6,
) -> np.ndarray:
    """Optimal action values (4 x 2) of the MDP a deterministic static opponent induces"""
    strategy = StaticStrategy.parse(strategy)
    if not strategy.is_deterministic:
        raise OracleError(f"{strategy.value} is stochastic; the oracle only solves deterministic opponents")
    if not 0.0 <= gamma < 1.0:
        raise ConfigurationError(f"gamma must be in [0, 1), got {gamma}")
    rewards, successors = _induced_mdp(strategy, GameKind.parse(game), framework)
    q = np.zeros_like(rewards)
    for sweep in range(1, max_sweeps + 1):
        values = q.max(axis=1)
        updated = rewards + gamma * values[successors]
        delta = float(np.abs(updated - q).max())
        q = updated
        if delta < tol:
            logger.debug("value iteration converged after %d sweeps", sweep)
            return q
    raise OracleError(f"value iteration did not converge within {max_sweeps} sweeps")


def oracle_best_response(
    strategy: StaticStrategy,
    game: GameKind,
    framework: MoralFramework,
    gamma: float = 0.9,
    tie_tol: float = 1e-6,
) -> Policy:
    """Optimal deterministic policy per state; states whose actions tie map to both"""
    q = oracle_q_values(strategy, game, framework, gamma)
    policy: Policy = {}
    for state in ALL_STATES:
        c, d = q[state.index]
        if abs(c - d) <= tie_tol:
            policy[state] = frozenset(Action)
        else:
            policy[state] = frozenset({Action.C if c > d else Action.D})
    return policy


def policy_agreement(learned: Policy, oracle: Policy) -> bool:
    """True when the learned policy picks the oracle's action on every state the oracle does not tie"""
    for state, best in oracle.items():
        if len(best) == 1 and learned.get(state) != best:
            return False
    return True


def describe_policy(policy: Policy) -> str:
    """'all states -> D' for uniform untied policies, otherwise one 'state -> action' per line"""
    choices = {frozenset(v) for v in policy.values()}
    if len(choices) == 1:
        only = next(iter(choices))
        if len(only) == 1:
            return f"all states -> {next(iter(only)).label}"
    lines = []
    for state in ALL_STATES:
        best = policy[state]
        text = "tie" if len(best) > 1 else next(iter(best)).label
        lines.append(f"{state.key} -> {text}")
    return "\n".join(lines)
