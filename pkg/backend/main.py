from datetime import datetime
import logging
import os

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.concurrency import run_in_threadpool

from models.schemas import (
    OracleResponse, PairRequest, PairResponse,
    TraceRequest, TraceResponse, TraceStep,
)
from services import __version__
from services.analytics import last_k_trace, oracle_best_response, oracle_q_values, summarize_matchup
from services.episode_engine import parse_agent_spec, run_episode, run_matchup
from services.errors import DilemmaLabError
from services.game_core import Action, GameKind, payoff_matrix
from services.moral_reward import MoralFramework
from services.qlearner import ALL_STATES
from services.static_agents import StaticStrategy
from utils.helpers import get_default_workers

logger = logging.getLogger(__name__)

app = FastAPI(
    title="Dilemmalab API",
    description="Moral Q-learning agents in iterated social dilemmas",
    version=__version__,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=[
        "http://localhost:3000",
        "http://localhost:8080",
    ],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


def _bad_request(e: DilemmaLabError) -> HTTPException:
    return HTTPException(status_code=400, detail=str(e))


@app.get("/")
async def root():
    return {"message": "Dilemmalab API is running", "version": __version__}


@app.get("/health")
async def health_check():
    return {"status": "healthy", "timestamp": datetime.now().isoformat()}


@app.get("/games/{game}")
async def get_game(game: str):
    """Payoff matrix of one game, keyed by joint action"""
    try:
        kind = GameKind.parse(game)
    except DilemmaLabError as e:
        raise _bad_request(e)
    matrix = payoff_matrix(kind)
    return {"game": kind.value, "payoffs": matrix.as_rows(), "collective_range": list(matrix.collective_range())}


@app.post("/pair", response_model=PairResponse)
async def run_pair(request: PairRequest):
    """Run one matchup of seeded episodes and return its summary row"""
    try:
        spec_m = parse_agent_spec(request.m)
        spec_o = parse_agent_spec(request.o)
        game = GameKind.parse(request.game)
        results = await run_in_threadpool(
            run_matchup, spec_m, spec_o, game, request.iterations, request.runs, request.seed,
            get_default_workers(), None,
        )
        summary = summarize_matchup(results)
        return PairResponse(success=True, summary=summary.as_row())
    except DilemmaLabError as e:
        raise _bad_request(e)
    except Exception as e:
        logger.exception("pair request failed")
        raise HTTPException(status_code=500, detail=f"Matchup failed: {str(e)}")


@app.get("/oracle", response_model=OracleResponse)
async def get_oracle(game: str, opponent: str, framework: str, gamma: float = 0.9):
    try:
        strategy = StaticStrategy.parse(opponent)
        kind = GameKind.parse(game)
        moral = MoralFramework.parse(framework)
        policy = oracle_best_response(strategy, kind, moral, gamma)
        q = oracle_q_values(strategy, kind, moral, gamma)
    except DilemmaLabError as e:
        raise _bad_request(e)
    return OracleResponse(
        game=kind.value,
        opponent=strategy.label,
        framework=moral.label,
        gamma=gamma,
        policy={s.key: sorted(a.label for a in policy[s]) for s in ALL_STATES},
        q_values={s.key: {a.label: float(q[s.index, a]) for a in Action} for s in ALL_STATES},
    )


@app.post("/trace", response_model=TraceResponse)
async def get_trace(request: TraceRequest):
    try:
        result = await run_in_threadpool(
            run_episode, parse_agent_spec(request.m), parse_agent_spec(request.o),
            GameKind.parse(request.game), request.iterations, request.seed, None,
        )
        trace = last_k_trace(result, request.last)
    except DilemmaLabError as e:
        raise _bad_request(e)
    except Exception as e:
        logger.exception("trace request failed")
        raise HTTPException(status_code=500, detail=f"Trace failed: {str(e)}")
    steps = [
        TraceStep(t=trace.t_start + i, state_m=s_m.key, action_m=a_m.label, state_o=s_o.key, action_o=a_o.label)
        for i, ((s_m, a_m), (s_o, a_o)) in enumerate(zip(trace.m, trace.o))
    ]
    return TraceResponse(
        game=result.game.value,
        agent_m=result.spec_m.label,
        agent_o=result.spec_o.label,
        seed=result.seed,
        final_pair=result.final_pair.label,
        steps=steps,
    )


if __name__ == "__main__":
    import uvicorn

    port = int(os.environ.get("PORT", 8080))
    print(f"Starting server on port {port}")
    uvicorn.run(app, host="0.0.0.0", port=port)
