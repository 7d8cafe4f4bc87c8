"""
Actions, the three iterated dilemmas and their payoff matrices.

Payoffs are stored as integers from the row player's point of view; the column
player's entry is the second element of each cell. Every agent sees itself as the
row player, the episode engine flips perspectives.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Dict, List, Tuple

from services.errors import ConfigurationError


class Action(IntEnum):
    C = 0
    D = 1

    @property
    def label(self) -> str:
        return self.name

    @classmethod
    def parse(cls, value) -> "Action":
        if isinstance(value, Action):
            return value
        text = str(value).strip().lower()
        if text in ("c", "cooperate"):
            return cls.C
        if text in ("d", "defect"):
            return cls.D
        raise ConfigurationError(f"Unknown action: {value!r} (expected C or D)")


class GameKind(str, Enum):
    IPD = "IPD"
    IVD = "IVD"
    ISH = "ISH"

    @classmethod
    def parse(cls, value) -> "GameKind":
        if isinstance(value, GameKind):
            return value
        key = str(value).strip().lower().replace("'", "").replace(" ", "").replace("_", "")
        aliases = {
            "ipd": cls.IPD, "prisonersdilemma": cls.IPD,
            "ivd": cls.IVD, "volunteersdilemma": cls.IVD,
            "ish": cls.ISH, "staghunt": cls.ISH,
        }
        if key not in aliases:
            raise ConfigurationError(f"Unknown game: {value!r} (expected IPD, IVD or ISH)")
        return aliases[key]


@dataclass(frozen=True)
class JointAction:
    a_m: Action
    a_o: Action

    def __post_init__(self):
        object.__setattr__(self, "a_m", Action.parse(self.a_m))
        object.__setattr__(self, "a_o", Action.parse(self.a_o))

    @property
    def label(self) -> str:
        return f"{self.a_m.label}{self.a_o.label}"

    def swapped(self) -> "JointAction":
        return JointAction(self.a_o, self.a_m)

    @classmethod
    def from_index(cls, index: int) -> "JointAction":
        """Index 0..3 in the order CC, CD, DC, DD"""
        return cls(Action(index // 2), Action(index % 2))


Cell = Tuple[int, int]


@dataclass(frozen=True)
class PayoffMatrix:
    game: GameKind
    cells: Tuple[Tuple[Cell, Cell], Tuple[Cell, Cell]]

    def __post_init__(self):
        for a in Action:
            for b in Action:
                r_row, r_col = self.cells[a][b]
                if r_row <= 0 or r_col <= 0:
                    raise ConfigurationError(
                        f"{self.game.value}: payoffs must be strictly positive, got {self.cells[a][b]} at {a.label}{b.label}"
                    )
                if r_row != self.cells[b][a][1]:
                    raise ConfigurationError(
                        f"{self.game.value}: matrix is not symmetric at {a.label}{b.label}"
                    )

    def __getitem__(self, joint: JointAction) -> Cell:
        return self.cells[joint.a_m][joint.a_o]

    def payoff(self, a_row: Action, a_col: Action) -> Cell:
        return self.cells[a_row][a_col]

    def collective_range(self) -> Tuple[int, int]:
        sums = [sum(self.cells[a][b]) for a in Action for b in Action]
        return min(sums), max(sums)

    def as_rows(self) -> Dict[str, List[int]]:
        return {
            f"{a.label}{b.label}": list(self.cells[a][b])
            for a in Action
            for b in Action
        }


def _matrix(game: GameKind, cc: Cell, cd: Cell, dc: Cell, dd: Cell) -> PayoffMatrix:
    return PayoffMatrix(game=game, cells=((cc, cd), (dc, dd)))


_MATRICES: Dict[GameKind, PayoffMatrix] = {
    GameKind.IPD: _matrix(GameKind.IPD, (3, 3), (1, 4), (4, 1), (2, 2)),
    GameKind.IVD: _matrix(GameKind.IVD, (4, 4), (2, 5), (5, 2), (1, 1)),
    GameKind.ISH: _matrix(GameKind.ISH, (5, 5), (1, 4), (4, 1), (2, 2)),
}


def payoff_matrix(game: GameKind) -> PayoffMatrix:
    return _MATRICES[GameKind.parse(game)]


def extrinsic_rewards(game: GameKind, joint: JointAction) -> Tuple[int, int]:
    """(r_M, r_O) for the joint action, M as row player"""
    return payoff_matrix(game)[joint]
