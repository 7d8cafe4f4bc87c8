#!/usr/bin/env python3
"""
Tests for plan loading, matchup expansion and result emission
"""
import sys
import os
import json
import tempfile
from pathlib import Path

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from services.episode_engine import LearnerSpec, StaticSpec, run_episode
from services.errors import ConfigurationError, EmptyInputError, OutputError, PlanParseError, PlanValidationError
from services.experiment_runner import (
    SUMMARY_COLUMNS,
    ExperimentPlan,
    ResultBundle,
    emit_summary_csv,
    enumerate_pairings,
    expand_matchups,
    load_plan,
    run_plan,
)
from services.game_core import GameKind
from services.moral_reward import FrameworkKind, MoralFramework
from services.qlearner import ExplorationSchedule
from services.rng import derive_seed
from services.static_agents import StaticStrategy
from utils.testing import expect_error, run_test_functions

CONFIG_DIR = Path(os.path.dirname(os.path.abspath(__file__))) / "configs"

EXPECTED_HEADER = (
    "game,agent_m,agent_o,variant,n_runs,pct_cc,pct_cd,pct_dc,pct_dd,mean_collective,ci_collective,"
    "mean_gini,ci_gini,mean_min,ci_min,mean_rm_extr,ci_rm_extr,mean_rm_intr,ci_rm_intr,"
    "mean_ro_extr,ci_ro_extr,mean_ro_intr,ci_ro_intr"
)


def _write_plan(directory, data, name="plan.json"):
    path = Path(directory) / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def _small_plan(directory, **overrides):
    data = {
        "name": "small",
        "games": ["IPD", "ISH"],
        "agents": ["AC", "AD", "Random"],
        "iterations": 30,
        "n_runs": 3,
        "base_seed": 5,
    }
    data.update(overrides)
    plan = load_plan(_write_plan(directory, data))
    return plan.with_overrides(output_dir=Path(directory) / "out")


def test_minimal_plan_gets_defaults():
    with tempfile.TemporaryDirectory() as tmp:
        plan = load_plan(_write_plan(tmp, {"game": "IPD", "agents": ["Selfish", "Utilitarian"]}))
    assert plan.games == (GameKind.IPD,)
    assert plan.iterations == 10000 and plan.n_runs == 100 and plan.base_seed == 0
    spec = plan.agents[0]
    assert isinstance(spec, LearnerSpec)
    assert spec.params.alpha == 0.01 and spec.params.gamma == 0.9
    assert spec.params.schedule == ExplorationSchedule.linear_decay()
    assert plan.outputs.summary_csv == "summary.csv"
    assert len(expand_matchups(plan)) == 3


def test_plan_level_parameters_reach_learners():
    with tempfile.TemporaryDirectory() as tmp:
        plan = load_plan(_write_plan(tmp, {
            "game": "IPD",
            "agents": ["Deontological", "VirtueMixed(beta=0.9)", {"framework": "VirtueKindness", "xi": 2}, {"strategy": "TFT"}],
            "xi": 3, "beta": 0.2, "alpha": 0.05,
            "schedule": {"kind": "constant", "eps": 0.1},
        }))
    deon, mixed, kind, tft = plan.agents
    assert deon.framework == MoralFramework.deontological(xi=3)
    assert mixed.framework == MoralFramework.virtue_mixed(beta=0.9)
    assert kind.framework == MoralFramework.virtue_kindness(xi=2)
    assert deon.params.alpha == 0.05
    assert deon.params.schedule == ExplorationSchedule.constant(0.1)
    assert tft == StaticSpec(StaticStrategy.TIT_FOR_TAT)


def test_beta_sweep_expands_mixed_pairings():
    with tempfile.TemporaryDirectory() as tmp:
        plan = load_plan(_write_plan(tmp, {
            "game": "IPD",
            "agents": ["VirtueMixed", "Selfish"],
            "variants": {"beta_sweep": [0, 0.2, 0.4, 0.6, 0.8, 1.0]},
        }))
    matchups = expand_matchups(plan)
    # mixed-mixed and mixed-selfish sweep, selfish-selfish runs once
    assert len(matchups) == 13
    labels = [m.variant for m in matchups if m.spec_o.label == "Selfish" and m.spec_m.framework.kind == FrameworkKind.VIRTUE_MIXED]
    assert labels == ["beta=0", "beta=0.2", "beta=0.4", "beta=0.6", "beta=0.8", "beta=1"]
    swept = [m for m in matchups if m.variant == "beta=0.2"]
    assert all(m.spec_m.framework.beta == 0.2 for m in swept)


def test_variant_labels_combine():
    with tempfile.TemporaryDirectory() as tmp:
        plan = load_plan(_write_plan(tmp, {
            "game": "IVD",
            "agents": ["Selfish"],
            "variants": {"long_run": 50000, "schedule_override": {"kind": "constant", "eps": 0.05}},
        }))
    (matchup,) = expand_matchups(plan)
    assert matchup.variant == "T=50000;eps=constant:0.05"
    assert matchup.iterations == 50000
    assert matchup.spec_m.params.schedule == ExplorationSchedule.constant(0.05)


def test_invalid_plans_report_fields():
    with tempfile.TemporaryDirectory() as tmp:
        error = expect_error(PlanValidationError, load_plan, _write_plan(tmp, {"game": "IPD", "agents": ["Selfish"], "alpha": -1}))
        assert any(field.startswith("alpha") for field in error.fields)
        error = expect_error(PlanValidationError, load_plan, _write_plan(tmp, {
            "game": "IPD", "agents": ["Selfish"], "variants": {"beta_sweep": [0.5, 1.2]},
        }))
        assert "beta" in str(error)
        expect_error(PlanValidationError, load_plan, _write_plan(tmp, {"game": "IPD", "agents": ["Selfish"], "colour": "red"}))
        expect_error(PlanValidationError, load_plan, _write_plan(tmp, {"game": "IPD", "agents": ["Hedonist"]}))
        expect_error(PlanValidationError, load_plan, _write_plan(tmp, {"agents": ["Selfish"]}))
        expect_error(PlanValidationError, load_plan, _write_plan(tmp, {"game": "IPD", "agents": [{"strategy": "AD", "xi": 2}]}))


def test_parse_errors_carry_position():
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "broken.json"
        path.write_text('{\n  "game": "IPD",\n  "agents": [Selfish]\n}', encoding="utf-8")
        error = expect_error(PlanParseError, load_plan, path)
        assert "line 3" in str(error)
        missing = expect_error(PlanParseError, load_plan, Path(tmp) / "missing.cfg")
        assert "missing.cfg" in str(missing)


def test_pairing_modes():
    with tempfile.TemporaryDirectory() as tmp:
        unordered = load_plan(_write_plan(tmp, {"game": "IPD", "agents": ["Selfish", "Utilitarian", "AD"]}))
        versus = load_plan(_write_plan(tmp, {"game": "IPD", "agents": ["Selfish", "Utilitarian", "AD", "TFT"], "pairing": "learners_vs_statics"}))
        explicit = load_plan(_write_plan(tmp, {"game": "IPD", "pairing": "explicit", "pairs": [["TFT", "Selfish"]]}))
        lonely = load_plan(_write_plan(tmp, {"game": "IPD", "agents": ["Selfish"], "pairing": "learners_vs_statics"}))
    assert [(m.label, o.label) for m, o in enumerate_pairings(unordered)] == [
        ("Selfish", "Selfish"), ("Selfish", "Utilitarian"), ("Selfish", "AD"),
        ("Utilitarian", "Utilitarian"), ("Utilitarian", "AD"), ("AD", "AD"),
    ]
    assert [(m.label, o.label) for m, o in enumerate_pairings(versus)] == [
        ("Selfish", "AD"), ("Selfish", "TFT"), ("Utilitarian", "AD"), ("Utilitarian", "TFT"),
    ]
    assert [(m.label, o.label) for m, o in enumerate_pairings(explicit)] == [("TFT", "Selfish")]
    expect_error(ConfigurationError, enumerate_pairings, lonely)


def test_shipped_plans_cover_the_experiment_grid():
    grid = expand_matchups(load_plan(CONFIG_DIR / "full_grid.json"))
    assert len(grid) == 63
    per_game = {(m.spec_m.label, m.spec_o.label) for m in grid if m.game == GameKind.IPD}
    assert len(per_game) == 21
    assert len(expand_matchups(load_plan(CONFIG_DIR / "static_benchmark.json"))) == 72
    assert len(expand_matchups(load_plan(CONFIG_DIR / "beta_sweep.json"))) == 36
    long_run = expand_matchups(load_plan(CONFIG_DIR / "long_run.json"))
    assert len(long_run) == 63 and all(m.variant == "T=50000" for m in long_run)
    constant = expand_matchups(load_plan(CONFIG_DIR / "constant_exploration.json"))
    assert {m.variant for m in constant} == {"eps=constant:0.05"}


def test_run_plan_writes_summary_csv():
    with tempfile.TemporaryDirectory() as tmp:
        plan = _small_plan(tmp, outputs={"summary_csv": "summary.csv", "json": "summary.json"})
        bundle = run_plan(plan)
        text = (plan.output_dir / "summary.csv").read_text(encoding="utf-8")
        payload = json.loads((plan.output_dir / "summary.json").read_text(encoding="utf-8"))
    lines = text.split("\n")
    assert lines[0] == EXPECTED_HEADER
    assert text.endswith("\n") and "\r" not in text
    assert len(bundle.summaries) == 12 and len(lines) == 14
    rows = [dict(zip(SUMMARY_COLUMNS, line.split(","))) for line in lines[1:-1]]
    ad_vs_ad = next(r for r in rows if r["game"] == "IPD" and r["agent_m"] == "AD" and r["agent_o"] == "AD")
    assert ad_vs_ad["pct_dd"] == "100.0" and ad_vs_ad["mean_collective"] == "120"
    assert ad_vs_ad["ci_collective"] == "0"
    for row in rows:
        total = sum(float(row[c]) for c in ("pct_cc", "pct_cd", "pct_dc", "pct_dd"))
        assert abs(total - 100.0) <= 0.1
    assert payload["provenance"]["prng"] == "numpy.PCG64/SeedSequence"
    assert len(payload["summaries"]) == 12


def test_identical_plans_give_identical_csv_for_any_worker_count():
    # 2 games x 6 pairings x 90 runs = 1080 seeded episodes per execution
    with tempfile.TemporaryDirectory() as tmp:
        plan = _small_plan(
            tmp, agents=["Selfish", "VirtueMixed", "Random"], iterations=40, n_runs=90, base_seed=2024,
            outputs={"summary_csv": "summary.csv", "json": "bundle.json"},
        )
        assert len(expand_matchups(plan)) * plan.n_runs >= 1000
        run_plan(plan, workers=1)
        serial = (plan.output_dir / "summary.csv").read_bytes()
        serial_q = json.loads((plan.output_dir / "bundle.json").read_text(encoding="utf-8"))["summaries"]
        run_plan(plan, workers=1)
        again = (plan.output_dir / "summary.csv").read_bytes()
        run_plan(plan, workers=3)
        parallel = (plan.output_dir / "summary.csv").read_bytes()
        parallel_q = json.loads((plan.output_dir / "bundle.json").read_text(encoding="utf-8"))["summaries"]
    assert serial == again == parallel
    assert [s["final_q"] for s in serial_q] == [s["final_q"] for s in parallel_q]


def test_steps_and_timeline_outputs():
    with tempfile.TemporaryDirectory() as tmp:
        plan = _small_plan(tmp, games=["IPD"], agents=["AC", "TFT"], outputs={
            "summary_csv": "summary.csv", "steps_csv": "steps.csv", "steps_thinning": 5,
            "timeline_csv": "timeline.csv", "timeline_bins": 3,
        })
        bundle = run_plan(plan)
        steps = (plan.output_dir / "steps.csv").read_text(encoding="utf-8").split("\n")
        timeline = (plan.output_dir / "timeline.csv").read_text(encoding="utf-8").split("\n")
    assert steps[0] == "game,agent_m,agent_o,variant,run,seed,t,state_m,state_o,a_m,a_o,r_m_extr,r_o_extr,r_m_intr,r_o_intr,eps"
    # 3 matchups x 3 runs x (t = 0, 5 and the 20-step tail 10..29)
    assert len(steps) - 2 == 3 * 3 * 22
    assert timeline[0] == "game,agent_m,agent_o,variant,bin,t_start,t_end,pct_cc,pct_cd,pct_dc,pct_dd"
    assert len(timeline) - 2 == 3 * 3
    assert len(bundle.timeline) == 9


def test_reward_timeline_and_q_snapshots_are_written():
    with tempfile.TemporaryDirectory() as tmp:
        plan = _small_plan(tmp, games=["IPD"], agents=["Selfish", "AC"], outputs={
            "summary_csv": None, "json": "bundle.json",
            "reward_timeline_csv": "rewards.csv", "reward_timeline_points": 5,
        })
        bundle = run_plan(plan)
        rewards = (plan.output_dir / "rewards.csv").read_text(encoding="utf-8").split("\n")
        payload = json.loads((plan.output_dir / "bundle.json").read_text(encoding="utf-8"))
    assert rewards[0] == "game,agent_m,agent_o,variant,t,rm_extr,ro_extr,rm_intr,ro_intr"
    # 3 matchups x 5 checkpoints
    assert len(rewards) - 2 == 15
    assert rewards[-2] == "IPD,AC,AC,base,30,90,90,90,90"
    assert len(bundle.reward_timeline) == 15

    selfish_vs_ac = payload["summaries"][1]
    assert selfish_vs_ac["agent_m"] == "Selfish" and selfish_vs_ac["agent_o"] == "AC"
    assert len(selfish_vs_ac["final_q"]) == 3
    assert all(run["O"] is None for run in selfish_vs_ac["final_q"])
    replay = run_episode(bundle.summaries[1].spec_m, bundle.summaries[1].spec_o, GameKind.IPD, 30, derive_seed(5, 0))
    assert selfish_vs_ac["final_q"][0]["M"] == replay.final_q_m.to_dict()
    assert set(selfish_vs_ac["final_q"][0]["M"]) == {"C,C", "C,D", "D,C", "D,D"}


def test_failed_output_leaves_nothing_behind():
    with tempfile.TemporaryDirectory() as tmp:
        blocker = Path(tmp) / "out"
        blocker.write_text("not a directory", encoding="utf-8")
        plan = _small_plan(tmp, games=["IPD"], agents=["AC"])
        error = expect_error(OutputError, run_plan, plan)
        assert "out" in error.path
        assert sorted(p.name for p in Path(tmp).iterdir()) == ["out", "plan.json"]


def test_empty_bundle_is_rejected():
    with tempfile.TemporaryDirectory() as tmp:
        plan = _small_plan(tmp)
        bundle = ResultBundle(plan=plan, summaries=[], provenance={})
        expect_error(EmptyInputError, emit_summary_csv, bundle, Path(tmp) / "empty.csv")
        assert not (Path(tmp) / "empty.csv").exists()


def test_plan_dataclass_validation():
    expect_error(ConfigurationError, ExperimentPlan, "x", (), (StaticSpec("AC"),))
    expect_error(ConfigurationError, ExperimentPlan, "x", (GameKind.IPD,), (StaticSpec("AC"),), "round_robin")
    expect_error(ConfigurationError, ExperimentPlan, "x", (GameKind.IPD,), (StaticSpec("AC"),), iterations=1)
    expect_error(ConfigurationError, run_plan, ExperimentPlan("x", (GameKind.IPD,), (StaticSpec("AC"),)), 0)


if __name__ == "__main__":
    run_test_functions(globals())
