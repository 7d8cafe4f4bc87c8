#!/usr/bin/env python3
"""
Tests for the HTTP endpoints, called directly as coroutines
"""
import sys
import os
import asyncio

from fastapi import HTTPException

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from main import get_game, get_oracle, get_trace, health_check, root, run_pair
from models.schemas import PairRequest, TraceRequest
from utils.testing import run_test_functions


def _status(coro):
    try:
        asyncio.run(coro)
    except HTTPException as e:
        return e.status_code
    return 200


def test_root_and_health():
    assert "running" in asyncio.run(root())["message"]
    assert asyncio.run(health_check())["status"] == "healthy"


def test_game_payoffs():
    body = asyncio.run(get_game("staghunt"))
    assert body["game"] == "ISH"
    assert body["payoffs"]["CC"] == [5, 5]
    assert _status(get_game("chicken")) == 400


def test_pair_endpoint():
    response = asyncio.run(run_pair(PairRequest(game="IPD", m="AC", o="AD", runs=2, iterations=10, seed=1)))
    assert response.success
    assert response.summary["pct_cd"] == 100.0
    assert response.summary["mean_ro_extr"] == 40.0
    assert _status(run_pair(PairRequest(game="IPD", m="Hermit", o="AD", runs=2, iterations=10))) == 400


def test_oracle_endpoint():
    body = asyncio.run(get_oracle(game="IPD", opponent="TFT", framework="Selfish", gamma=0.9))
    assert body.policy == {"C,C": ["C"], "C,D": ["C"], "D,C": ["C"], "D,D": ["C"]}
    assert body.q_values["C,C"]["C"] > body.q_values["C,C"]["D"]
    assert _status(get_oracle(game="IPD", opponent="Random", framework="Selfish")) == 400


def test_trace_endpoint():
    body = asyncio.run(get_trace(TraceRequest(game="IVD", m="VirtueKindness", o="AD", seed=4, last=3, iterations=50)))
    assert [step.t for step in body.steps] == [47, 48, 49]
    assert all(step.action_o == "D" for step in body.steps)
    assert body.final_pair.endswith("D")
    assert _status(get_trace(TraceRequest(game="IVD", m="AC", o="AD", seed=0, last=60, iterations=50))) == 400


if __name__ == "__main__":
    run_test_functions(globals())
