#!/usr/bin/env python3
"""
Tests for actions, games and payoff matrices
"""
import sys
import os

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from services.errors import ConfigurationError
from services.game_core import Action, GameKind, JointAction, PayoffMatrix, extrinsic_rewards, payoff_matrix
from utils.testing import expect_error, run_test_functions


def test_action_parse_accepts_short_and_long_names():
    assert Action.parse("c") == Action.C
    assert Action.parse("Defect") == Action.D
    assert Action.parse(Action.D) == Action.D
    expect_error(ConfigurationError, Action.parse, "X")


def test_game_kind_aliases():
    assert GameKind.parse("ipd") == GameKind.IPD
    assert GameKind.parse("StagHunt") == GameKind.ISH
    assert GameKind.parse("Volunteer's Dilemma") == GameKind.IVD
    expect_error(ConfigurationError, GameKind.parse, "chicken")


def test_prisoners_dilemma_payoffs():
    assert extrinsic_rewards(GameKind.IPD, JointAction(Action.C, Action.C)) == (3, 3)
    assert extrinsic_rewards(GameKind.IPD, JointAction(Action.C, Action.D)) == (1, 4)
    assert extrinsic_rewards(GameKind.IPD, JointAction(Action.D, Action.C)) == (4, 1)
    assert extrinsic_rewards(GameKind.IPD, JointAction(Action.D, Action.D)) == (2, 2)


def test_volunteers_dilemma_and_stag_hunt_payoffs():
    assert extrinsic_rewards(GameKind.IVD, JointAction(Action.C, Action.C)) == (4, 4)
    assert extrinsic_rewards(GameKind.IVD, JointAction(Action.D, Action.C)) == (5, 2)
    assert extrinsic_rewards(GameKind.IVD, JointAction(Action.D, Action.D)) == (1, 1)
    assert extrinsic_rewards(GameKind.ISH, JointAction(Action.C, Action.C)) == (5, 5)
    assert extrinsic_rewards(GameKind.ISH, JointAction(Action.C, Action.D)) == (1, 4)
    assert extrinsic_rewards("ISH", JointAction("D", "D")) == (2, 2)


def test_matrices_are_symmetric_and_positive():
    for game in GameKind:
        matrix = payoff_matrix(game)
        for a in Action:
            for b in Action:
                r_row, r_col = matrix.payoff(a, b)
                assert r_row > 0 and r_col > 0
                assert matrix.payoff(b, a) == (r_col, r_row)


def test_asymmetric_matrix_is_rejected():
    cells = (((3, 3), (1, 4)), ((4, 2), (2, 2)))
    expect_error(ConfigurationError, PayoffMatrix, GameKind.IPD, cells)
    zero = (((3, 3), (0, 4)), ((4, 0), (2, 2)))
    expect_error(ConfigurationError, PayoffMatrix, GameKind.IPD, zero)


def test_joint_action_helpers():
    joint = JointAction.from_index(1)
    assert joint.label == "CD"
    assert joint.swapped().label == "DC"
    assert [JointAction.from_index(i).label for i in range(4)] == ["CC", "CD", "DC", "DD"]


def test_collective_range_and_rows():
    assert payoff_matrix(GameKind.IPD).collective_range() == (4, 6)
    assert payoff_matrix(GameKind.IVD).collective_range() == (2, 8)
    assert payoff_matrix(GameKind.ISH).collective_range() == (4, 10)
    assert payoff_matrix(GameKind.IPD).as_rows()["DC"] == [4, 1]


def test_greed_and_fear_orderings():
    # greed: T > R, fear: P > S
    expected = {GameKind.IPD: (True, True), GameKind.IVD: (True, False), GameKind.ISH: (False, True)}
    for game, (greed, fear) in expected.items():
        matrix = payoff_matrix(game)
        R = matrix.payoff(Action.C, Action.C)[0]
        S = matrix.payoff(Action.C, Action.D)[0]
        T = matrix.payoff(Action.D, Action.C)[0]
        P = matrix.payoff(Action.D, Action.D)[0]
        assert (T > R) == greed, game
        assert (P > S) == fear, game
        # mutual cooperation always beats mutual defection
        assert R > P, game


if __name__ == "__main__":
    run_test_functions(globals())
