"""
Config-driven experiment orchestration.

A plan (JSON, validated against models.schemas.PlanConfig) names games, agents and a
pairing rule. Every (game, pairing, variant) becomes one matchup of n_runs seeded
episodes; matchups are summarised in order and written out as CSV/JSON.
"""
from __future__ import annotations

import io
import json
import logging
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import pandas as pd
from pydantic import ValidationError

from models.schemas import AgentConfig, PlanConfig, ScheduleConfig
from services import __version__
from services.analytics import MatchupSummary, action_pair_timeline, reward_timeline, summarize_matchup
from services.episode_engine import (
    AgentSpec,
    EpisodeResult,
    LearnerSpec,
    StaticSpec,
    matchup_tasks,
    run_many,
)
from services.errors import ConfigurationError, EmptyInputError, PlanParseError, PlanValidationError
from services.game_core import GameKind
from services.moral_reward import FrameworkKind, MoralFramework
from services.qlearner import ExplorationSchedule, LearnerParams
from services.rng import PRNG_NAME
from services.static_agents import StaticStrategy
from utils.helpers import (
    StagedOutputs,
    atomic_write_text,
    format_pct,
    format_real,
    generate_run_id,
    get_output_dir,
)

logger = logging.getLogger(__name__)

PAIRINGS = ("all_unordered_pairs_with_self", "learners_vs_statics", "explicit")

SUMMARY_COLUMNS = [
    "game", "agent_m", "agent_o", "variant", "n_runs",
    "pct_cc", "pct_cd", "pct_dc", "pct_dd",
    "mean_collective", "ci_collective", "mean_gini", "ci_gini", "mean_min", "ci_min",
    "mean_rm_extr", "ci_rm_extr", "mean_rm_intr", "ci_rm_intr",
    "mean_ro_extr", "ci_ro_extr", "mean_ro_intr", "ci_ro_intr",
]

STEP_COLUMNS = [
    "game", "agent_m", "agent_o", "variant", "run", "seed", "t",
    "state_m", "state_o", "a_m", "a_o",
    "r_m_extr", "r_o_extr", "r_m_intr", "r_o_intr", "eps",
]


@dataclass(frozen=True)
class PlanVariants:
    long_run: Optional[int] = None
    beta_sweep: Tuple[float, ...] = ()
    schedule_override: Optional[ExplorationSchedule] = None


@dataclass(frozen=True)
class PlanOutputs:
    summary_csv: Optional[str] = "summary.csv"
    steps_csv: Optional[str] = None
    steps_thinning: int = 10
    json: Optional[str] = None
    timeline_csv: Optional[str] = None
    timeline_bins: int = 100
    reward_timeline_csv: Optional[str] = None
    reward_timeline_points: int = 100


@dataclass(frozen=True)
class ExperimentPlan:
    name: str
    games: Tuple[GameKind, ...]
    agents: Tuple[AgentSpec, ...]
    pairing: str = "all_unordered_pairs_with_self"
    pairs: Tuple[Tuple[AgentSpec, AgentSpec], ...] = ()
    iterations: int = 10000
    n_runs: int = 100
    base_seed: int = 0
    variants: PlanVariants = field(default_factory=PlanVariants)
    outputs: PlanOutputs = field(default_factory=PlanOutputs)
    output_dir: Path = field(default_factory=get_output_dir)

    def __post_init__(self):
        if not self.games:
            raise ConfigurationError("plan needs at least one game")
        if self.pairing not in PAIRINGS:
            raise ConfigurationError(f"unknown pairing {self.pairing!r}")
        if self.pairing == "explicit" and not self.pairs:
            raise ConfigurationError("explicit pairing needs at least one pair")
        if self.pairing != "explicit" and not self.agents:
            raise ConfigurationError("plan needs at least one agent")
        if self.iterations < 2 or self.n_runs < 1 or self.base_seed < 0:
            raise ConfigurationError("iterations >= 2, n_runs >= 1 and base_seed >= 0 are required")

    def with_overrides(self, base_seed: Optional[int] = None, output_dir=None) -> "ExperimentPlan":
        changes = {}
        if base_seed is not None:
            changes["base_seed"] = base_seed
        if output_dir is not None:
            changes["output_dir"] = Path(output_dir)
        return replace(self, **changes)

    def resolve(self, name: Optional[str]) -> Optional[Path]:
        if name is None:
            return None
        path = Path(name)
        return path if path.is_absolute() else self.output_dir / path

    def to_dict(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "games": [g.value for g in self.games],
            "agents": [a.to_dict() for a in self.agents],
            "pairing": self.pairing,
            "pairs": [[m.to_dict(), o.to_dict()] for m, o in self.pairs],
            "iterations": self.iterations,
            "n_runs": self.n_runs,
            "base_seed": self.base_seed,
            "variants": {
                "long_run": self.variants.long_run,
                "beta_sweep": list(self.variants.beta_sweep),
                "schedule_override": self.variants.schedule_override.to_dict() if self.variants.schedule_override else None,
            },
            "outputs": {
                "summary_csv": self.outputs.summary_csv,
                "steps_csv": self.outputs.steps_csv,
                "steps_thinning": self.outputs.steps_thinning,
                "json": self.outputs.json,
                "timeline_csv": self.outputs.timeline_csv,
                "timeline_bins": self.outputs.timeline_bins,
                "reward_timeline_csv": self.outputs.reward_timeline_csv,
                "reward_timeline_points": self.outputs.reward_timeline_points,
            },
        }


@dataclass(frozen=True)
class MatchupPlan:
    game: GameKind
    spec_m: AgentSpec
    spec_o: AgentSpec
    variant: str
    iterations: int


@dataclass
class ResultBundle:
    plan: ExperimentPlan
    summaries: List[MatchupSummary]
    provenance: Dict[str, object]
    timeline: Optional[pd.DataFrame] = None
    reward_timeline: Optional[pd.DataFrame] = None
    # per summary, per run: {"M": table dict or None, "O": ...}
    final_qtables: List[List[Dict[str, Optional[Dict[str, Dict[str, float]]]]]] = field(default_factory=list)


# ---------------- Plan loading ----------------

def _schedule(config: Optional[ScheduleConfig]) -> Optional[ExplorationSchedule]:
    if config is None:
        return None
    if config.kind == "constant":
        return ExplorationSchedule.constant(config.eps)
    return ExplorationSchedule.linear_decay(config.start, config.end)


def _agent(entry, defaults: LearnerParams, xi: float, beta: float) -> AgentSpec:
    if isinstance(entry, str):
        entry = _agent_from_label(entry)
    if entry.strategy is not None:
        return StaticSpec(StaticStrategy.parse(entry.strategy))
    kind = FrameworkKind.parse(entry.framework)
    framework = MoralFramework(
        kind,
        xi=entry.xi if entry.xi is not None else xi,
        beta=entry.beta if entry.beta is not None else beta,
        xi_hat=entry.xi_hat if entry.xi_hat is not None else 1.0,
    )
    params = LearnerParams(
        alpha=entry.alpha if entry.alpha is not None else defaults.alpha,
        gamma=entry.gamma if entry.gamma is not None else defaults.gamma,
        schedule=_schedule(entry.schedule) or defaults.schedule,
        framework=framework,
    )
    return LearnerSpec(params)


def _agent_from_label(label: str) -> AgentConfig:
    try:
        return AgentConfig(strategy=StaticStrategy.parse(label).value)
    except ConfigurationError:
        pass
    framework = MoralFramework.parse(label)
    # only parameters written in the label override the plan defaults
    explicit = {k: v for k, v in framework.params().items() if re.search(rf"\b{k}\s*=", label)}
    return AgentConfig(framework=framework.name, **explicit)


def build_plan(config: PlanConfig, output_dir=None) -> ExperimentPlan:
    defaults = LearnerParams(alpha=config.alpha, gamma=config.gamma, schedule=_schedule(config.schedule))
    agents = tuple(_agent(entry, defaults, config.xi, config.beta) for entry in config.agents)
    pairs = tuple(
        (_agent(m, defaults, config.xi, config.beta), _agent(o, defaults, config.xi, config.beta))
        for m, o in config.pairs
    )
    outputs = config.outputs
    return ExperimentPlan(
        name=config.name,
        games=tuple(GameKind.parse(g) for g in config.game_names()),
        agents=agents,
        pairing=config.pairing,
        pairs=pairs,
        iterations=config.iterations,
        n_runs=config.n_runs,
        base_seed=config.base_seed,
        variants=PlanVariants(
            long_run=config.variants.long_run,
            beta_sweep=tuple(config.variants.beta_sweep),
            schedule_override=_schedule(config.variants.schedule_override),
        ),
        outputs=PlanOutputs(
            summary_csv=outputs.summary_csv,
            steps_csv=outputs.steps_csv,
            steps_thinning=outputs.steps_thinning,
            json=outputs.json_path,
            timeline_csv=outputs.timeline_csv,
            timeline_bins=outputs.timeline_bins,
            reward_timeline_csv=outputs.reward_timeline_csv,
            reward_timeline_points=outputs.reward_timeline_points,
        ),
        output_dir=Path(output_dir) if output_dir is not None else get_output_dir(),
    )


def _validation_message(path: Path, error: ValidationError) -> PlanValidationError:
    fields = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<plan>"
        fields.append(f"{location}: {item['msg']}")
    return PlanValidationError(f"{path}: invalid plan\n  " + "\n  ".join(fields), fields)


def load_plan(path) -> ExperimentPlan:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise PlanParseError(f"{path}: cannot read plan ({e.strerror or e})") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise PlanParseError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e
    try:
        config = PlanConfig.model_validate(data)
    except ValidationError as e:
        raise _validation_message(path, e) from e
    try:
        plan = build_plan(config)
    except ConfigurationError as e:
        raise PlanValidationError(f"{path}: {e}", [str(e)]) from e
    logger.info("loaded plan %r from %s", plan.name, path)
    return plan


# ---------------- Matchup expansion ----------------

def enumerate_pairings(plan: ExperimentPlan) -> List[Tuple[AgentSpec, AgentSpec]]:
    if plan.pairing == "explicit":
        return list(plan.pairs)
    if plan.pairing == "learners_vs_statics":
        learners = [a for a in plan.agents if a.is_learner]
        statics = [a for a in plan.agents if not a.is_learner]
        if not learners or not statics:
            raise ConfigurationError("learners_vs_statics pairing needs at least one learner and one static agent")
        return [(m, o) for m in learners for o in statics]
    agents = plan.agents
    return [(agents[i], agents[j]) for i in range(len(agents)) for j in range(i, len(agents))]


def _is_mixed(spec: AgentSpec) -> bool:
    return isinstance(spec, LearnerSpec) and spec.framework.kind == FrameworkKind.VIRTUE_MIXED


def _with_beta(spec: AgentSpec, beta: float) -> AgentSpec:
    if not _is_mixed(spec):
        return spec
    return LearnerSpec(replace(spec.params, framework=spec.framework.with_params(beta=beta)))


def _with_schedule(spec: AgentSpec, schedule: ExplorationSchedule) -> AgentSpec:
    if not isinstance(spec, LearnerSpec):
        return spec
    return LearnerSpec(replace(spec.params, schedule=schedule))


def _variants(plan: ExperimentPlan, m: AgentSpec, o: AgentSpec) -> Iterator[Tuple[str, AgentSpec, AgentSpec, int]]:
    variants = plan.variants
    iterations = variants.long_run or plan.iterations
    parts = []
    if variants.long_run:
        parts.append(f"T={iterations}")
    if variants.schedule_override is not None:
        m = _with_schedule(m, variants.schedule_override)
        o = _with_schedule(o, variants.schedule_override)
        parts.append(f"eps={variants.schedule_override.label}")
    if variants.beta_sweep and (_is_mixed(m) or _is_mixed(o)):
        for beta in variants.beta_sweep:
            label = ";".join(parts + [f"beta={beta:g}"])
            yield label, _with_beta(m, beta), _with_beta(o, beta), iterations
        return
    yield (";".join(parts) or "base"), m, o, iterations


def expand_matchups(plan: ExperimentPlan) -> List[MatchupPlan]:
    matchups = []
    pairings = enumerate_pairings(plan)
    for game in plan.games:
        for m, o in pairings:
            for variant, spec_m, spec_o, iterations in _variants(plan, m, o):
                matchups.append(MatchupPlan(game, spec_m, spec_o, variant, iterations))
    return matchups


# ---------------- Emission ----------------

def summary_frame(summaries: Sequence[MatchupSummary]) -> pd.DataFrame:
    if not summaries:
        raise EmptyInputError("result bundle has no summaries")
    rows = []
    for summary in summaries:
        raw = summary.as_row()
        row = {}
        for column in SUMMARY_COLUMNS:
            value = raw[column]
            if column.startswith("pct_"):
                row[column] = format_pct(value)
            elif column.startswith(("mean_", "ci_")):
                row[column] = format_real(value)
            else:
                row[column] = str(value)
        rows.append(row)
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def summary_csv_text(bundle: ResultBundle) -> str:
    return summary_frame(bundle.summaries).to_csv(index=False, lineterminator="\n")


def emit_summary_csv(bundle: ResultBundle, path) -> Path:
    return atomic_write_text(path, summary_csv_text(bundle))


def bundle_json_text(bundle: ResultBundle) -> str:
    if not bundle.summaries:
        raise EmptyInputError("result bundle has no summaries")
    summaries = []
    for index, summary in enumerate(bundle.summaries):
        entry = summary.as_row()
        entry["counts"] = {cls.value: count for cls, count in summary.counts.items()}
        entry["iterations"] = summary.iterations
        entry["spec_m"] = summary.spec_m.to_dict()
        entry["spec_o"] = summary.spec_o.to_dict()
        if index < len(bundle.final_qtables):
            entry["final_q"] = bundle.final_qtables[index]
        summaries.append(entry)
    payload = {"plan": bundle.plan.to_dict(), "provenance": bundle.provenance, "summaries": summaries}
    return json.dumps(payload, indent=2, default=str) + "\n"


def emit_json(bundle: ResultBundle, path) -> Path:
    return atomic_write_text(path, bundle_json_text(bundle))


def _step_rows(matchup: MatchupPlan, results: Sequence[EpisodeResult]) -> pd.DataFrame:
    rows = []
    for run, result in enumerate(results):
        for step in result.steps:
            rows.append((
                matchup.game.value, matchup.spec_m.label, matchup.spec_o.label, matchup.variant,
                run, result.seed, step.t, step.state_m.key, step.state_o.key,
                step.a_m.label, step.a_o.label, step.r_m_extr, step.r_o_extr,
                format_real(step.r_m_intr), format_real(step.r_o_intr), format_real(step.eps),
            ))
    return pd.DataFrame(rows, columns=STEP_COLUMNS)


def _q_snapshots(results: Sequence[EpisodeResult]) -> List[Dict[str, Optional[Dict[str, Dict[str, float]]]]]:
    return [
        {player: (table.to_dict() if table is not None else None) for player, table in result.final_qtables.items()}
        for result in results
    ]


def _with_matchup_columns(matchup: MatchupPlan, frame: pd.DataFrame) -> pd.DataFrame:
    frame.insert(0, "variant", matchup.variant)
    frame.insert(0, "agent_o", matchup.spec_o.label)
    frame.insert(0, "agent_m", matchup.spec_m.label)
    frame.insert(0, "game", matchup.game.value)
    return frame


def _frame_csv_text(frame: pd.DataFrame) -> str:
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, lineterminator="\n", float_format="%.6g")
    return buffer.getvalue()


# ---------------- Execution ----------------

def run_plan(plan: ExperimentPlan, workers: int = 1, write: bool = True) -> ResultBundle:
    """
    Execute every (game, pairing, variant) matchup. Results are identical for any
    worker count; outputs are staged as temporaries and renamed only when all of
    them are complete.
    """
    if workers < 1:
        raise ConfigurationError(f"workers must be >= 1, got {workers}")
    matchups = expand_matchups(plan)
    outputs = plan.outputs
    steps_path = plan.resolve(outputs.steps_csv) if write else None
    log_every = outputs.steps_thinning if steps_path is not None else None
    tasks = [
        task
        for mp in matchups
        for task in matchup_tasks(mp.spec_m, mp.spec_o, mp.game, mp.iterations, plan.n_runs, plan.base_seed, log_every)
    ]
    logger.info(
        "plan %r: %d matchups x %d runs (%d episodes), %d worker(s)",
        plan.name, len(matchups), plan.n_runs, len(tasks), workers,
    )

    staged = StagedOutputs()
    steps_handle = staged.open(steps_path) if steps_path is not None else None
    timelines: List[pd.DataFrame] = []
    reward_timelines: List[pd.DataFrame] = []
    snapshots = []
    summaries: List[MatchupSummary] = []
    stream = run_many(tasks, workers)
    try:
        for index, matchup in enumerate(matchups, start=1):
            results = [next(stream) for _ in range(plan.n_runs)]
            summary = summarize_matchup(results, matchup.variant)
            summaries.append(summary)
            snapshots.append(_q_snapshots(results))
            if outputs.timeline_csv is not None:
                timelines.append(_with_matchup_columns(matchup, action_pair_timeline(results, outputs.timeline_bins)))
            if outputs.reward_timeline_csv is not None:
                reward_timelines.append(
                    _with_matchup_columns(matchup, reward_timeline(results, outputs.reward_timeline_points))
                )
            if steps_handle is not None:
                _step_rows(matchup, results).to_csv(
                    steps_handle, header=(index == 1), index=False, lineterminator="\n"
                )
            logger.info(
                "[%d/%d] %s %s vs %s (%s): CC %.1f%% CD %.1f%% DC %.1f%% DD %.1f%%",
                index, len(matchups), matchup.game.value, matchup.spec_m.label, matchup.spec_o.label,
                matchup.variant, *summary.pct.values(),
            )

        bundle = ResultBundle(
            plan=plan,
            summaries=summaries,
            provenance={
                "version": __version__,
                "prng": PRNG_NAME,
                "timestamp": datetime.now(timezone.utc).isoformat(),
                "run_id": generate_run_id(),
            },
            timeline=pd.concat(timelines, ignore_index=True) if timelines else None,
            reward_timeline=pd.concat(reward_timelines, ignore_index=True) if reward_timelines else None,
            final_qtables=snapshots,
        )
        if write:
            if outputs.summary_csv is not None:
                staged.write_text(plan.resolve(outputs.summary_csv), summary_csv_text(bundle))
            if outputs.json is not None:
                staged.write_text(plan.resolve(outputs.json), bundle_json_text(bundle))
            if bundle.timeline is not None:
                staged.write_text(plan.resolve(outputs.timeline_csv), _frame_csv_text(bundle.timeline))
            if bundle.reward_timeline is not None:
                staged.write_text(plan.resolve(outputs.reward_timeline_csv), _frame_csv_text(bundle.reward_timeline))
            for path in staged.commit():
                logger.info("wrote %s", path)
        else:
            staged.discard()
        return bundle
    except BaseException:
        staged.discard()
        raise
    finally:
        stream.close()
