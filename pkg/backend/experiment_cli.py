#!/usr/bin/env python3
"""
Command-line entry point for Dilemmalab experiments.

    python experiment_cli.py run configs/full_grid.json --workers 8
    python experiment_cli.py pair --game IPD --m Selfish --o TFT --runs 100
    python experiment_cli.py oracle --game IPD --opponent AD --framework Selfish
    python experiment_cli.py trace --game ISH --m Utilitarian --o Selfish --seed 3 --last 20
"""
import argparse
import logging
import os
import sys
from typing import List, Optional

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from services.analytics import describe_policy, last_k_trace, oracle_best_response, oracle_q_values, summarize_matchup
from services.episode_engine import TRACE_TAIL, parse_agent_spec, run_episode, run_matchup
from services.errors import DilemmaLabError
from services.experiment_runner import load_plan, run_plan, summary_frame
from services.game_core import Action, GameKind
from services.moral_reward import MoralFramework
from services.qlearner import ALL_STATES
from services.static_agents import StaticStrategy
from utils.helpers import get_default_workers, get_log_level

logger = logging.getLogger("experiment_cli")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dilemmalab",
        description="Moral Q-learning agents in iterated social dilemmas",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Execute an experiment plan (JSON)")
    run.add_argument("config", help="Path to the plan file")
    run.add_argument("--workers", type=int, default=None, help="Worker processes (default: DILEMMALAB_WORKERS or 1)")
    run.add_argument("--seed", type=int, default=None, help="Override the plan's base seed")
    run.add_argument("--out", default=None, help="Output directory (default: DILEMMALAB_OUTPUT_DIR or results)")

    pair = sub.add_parser("pair", help="Run one matchup and print its summary row")
    pair.add_argument("--game", required=True)
    pair.add_argument("--m", required=True, help="Agent M, e.g. Selfish, VirtueMixed(beta=0.2) or TFT")
    pair.add_argument("--o", required=True, help="Agent O")
    pair.add_argument("--runs", type=int, default=100)
    pair.add_argument("--iters", type=int, default=10000)
    pair.add_argument("--seed", type=int, default=0)
    pair.add_argument("--workers", type=int, default=None)

    oracle = sub.add_parser("oracle", help="Best response against a deterministic static opponent")
    oracle.add_argument("--game", required=True)
    oracle.add_argument("--opponent", required=True, help="AC, AD or TFT")
    oracle.add_argument("--framework", required=True)
    oracle.add_argument("--gamma", type=float, default=0.9)
    oracle.add_argument("--show-q", action="store_true", help="Also print the converged action values")

    trace = sub.add_parser("trace", help="Print the last K (state, action) pairs of one episode")
    trace.add_argument("--game", required=True)
    trace.add_argument("--m", required=True)
    trace.add_argument("--o", required=True)
    trace.add_argument("--seed", type=int, required=True)
    trace.add_argument("--last", type=int, default=TRACE_TAIL)
    trace.add_argument("--iters", type=int, default=10000)
    return parser


def _workers(value: Optional[int]) -> int:
    return value if value is not None else get_default_workers()


def cmd_run(args) -> int:
    plan = load_plan(args.config).with_overrides(base_seed=args.seed, output_dir=args.out)
    print(f"🚀 Running plan '{plan.name}' -> {plan.output_dir}")
    bundle = run_plan(plan, workers=_workers(args.workers))
    print(f"✅ {len(bundle.summaries)} matchup summaries written")
    return 0


def cmd_pair(args) -> int:
    spec_m = parse_agent_spec(args.m)
    spec_o = parse_agent_spec(args.o)
    results = run_matchup(
        spec_m, spec_o, GameKind.parse(args.game), args.iters, args.runs, args.seed,
        workers=_workers(args.workers), log_every=None,
    )
    frame = summary_frame([summarize_matchup(results)])
    sys.stdout.write(frame.to_csv(index=False, lineterminator="\n"))
    return 0


def cmd_oracle(args) -> int:
    strategy = StaticStrategy.parse(args.opponent)
    game = GameKind.parse(args.game)
    framework = MoralFramework.parse(args.framework)
    policy = oracle_best_response(strategy, game, framework, args.gamma)
    print(f"{framework.label} vs {strategy.label} in {game.value} (gamma={args.gamma:g})")
    print(describe_policy(policy))
    if args.show_q:
        q = oracle_q_values(strategy, game, framework, args.gamma)
        print("state   Q(C)        Q(D)")
        for state in ALL_STATES:
            print(f"{state.key:<7} {q[state.index, Action.C]:<11.6g} {q[state.index, Action.D]:.6g}")
    return 0


def cmd_trace(args) -> int:
    result = run_episode(
        parse_agent_spec(args.m), parse_agent_spec(args.o), GameKind.parse(args.game),
        args.iters, args.seed, log_every=None,
    )
    trace = last_k_trace(result, args.last)
    print(f"{result.spec_m.label} vs {result.spec_o.label} in {result.game.value}, seed {result.seed}")
    print("t       M state  M  O state  O")
    for offset, ((s_m, a_m), (s_o, a_o)) in enumerate(zip(trace.m, trace.o)):
        print(f"{trace.t_start + offset:<7} {s_m.key:<8} {a_m.label}  {s_o.key:<8} {a_o.label}")
    print(f"final pair: {result.final_pair.label}")
    return 0


COMMANDS = {"run": cmd_run, "pair": cmd_pair, "oracle": cmd_oracle, "trace": cmd_trace}


def cli_main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        code = int(e.code or 0)
        if code:
            parser.print_help(sys.stderr)
        return code

    logging.basicConfig(
        level=get_log_level(),
        format="%(asctime)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except (DilemmaLabError, OSError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("❌ interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(cli_main())
