"""
Intrinsic moral rewards.

Each framework maps the current joint outcome (and, for the deontological norm, the
opponent's previous action) to the reward that the learner optimises instead of the
game payoff.

    Selfish         R_extr(self)
    Utilitarian     R_extr(self) + R_extr(opp)
    Deontological   -xi when defecting on an opponent who cooperated last step, else 0
    VirtueEquality  1 - |r1 - r2| / (r1 + r2)
    VirtueKindness  xi when cooperating, else 0
    VirtueMixed     beta * equality + (1 - beta) * xi_hat when cooperating,
                    beta * equality otherwise
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List

from services.errors import ConfigurationError, DegenerateDenominatorError
from services.game_core import Action, GameKind, payoff_matrix

DEFAULT_XI = 5.0
DEFAULT_BETA = 0.5
DEFAULT_XI_HAT = 1.0


class FrameworkKind(str, Enum):
    SELFISH = "Selfish"
    UTILITARIAN = "Utilitarian"
    DEONTOLOGICAL = "Deontological"
    VIRTUE_EQUALITY = "VirtueEquality"
    VIRTUE_KINDNESS = "VirtueKindness"
    VIRTUE_MIXED = "VirtueMixed"

    @classmethod
    def parse(cls, value) -> "FrameworkKind":
        if isinstance(value, FrameworkKind):
            return value
        key = re.sub(r"[\s_\-]", "", str(value)).lower()
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise ConfigurationError(f"Unknown moral framework: {value!r}")


_PARAMS_BY_KIND = {
    FrameworkKind.SELFISH: (),
    FrameworkKind.UTILITARIAN: (),
    FrameworkKind.DEONTOLOGICAL: ("xi",),
    FrameworkKind.VIRTUE_EQUALITY: (),
    FrameworkKind.VIRTUE_KINDNESS: ("xi",),
    FrameworkKind.VIRTUE_MIXED: ("beta", "xi_hat"),
}

_DEFAULTS = {"xi": DEFAULT_XI, "beta": DEFAULT_BETA, "xi_hat": DEFAULT_XI_HAT}

_LABEL_RE = re.compile(r"^\s*([A-Za-z_\- ]+?)\s*(?:\((.*)\))?\s*$")


@dataclass(frozen=True)
class MoralFramework:
    kind: FrameworkKind
    xi: float = DEFAULT_XI
    beta: float = DEFAULT_BETA
    xi_hat: float = DEFAULT_XI_HAT

    def __post_init__(self):
        kind = FrameworkKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        used = _PARAMS_BY_KIND[kind]
        # parameters a variant does not read are pinned to defaults
        for name, default in _DEFAULTS.items():
            value = float(getattr(self, name)) if name in used else default
            object.__setattr__(self, name, value)
        if not self.xi > 0:
            raise ConfigurationError(f"xi must be > 0, got {self.xi}")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigurationError(f"beta must be in [0, 1], got {self.beta}")
        if not 0.0 <= self.xi_hat <= 1.0:
            raise ConfigurationError(f"xi_hat must be in [0, 1], got {self.xi_hat}")

    @classmethod
    def selfish(cls) -> "MoralFramework":
        return cls(FrameworkKind.SELFISH)

    @classmethod
    def utilitarian(cls) -> "MoralFramework":
        return cls(FrameworkKind.UTILITARIAN)

    @classmethod
    def deontological(cls, xi: float = DEFAULT_XI) -> "MoralFramework":
        return cls(FrameworkKind.DEONTOLOGICAL, xi=xi)

    @classmethod
    def virtue_equality(cls) -> "MoralFramework":
        return cls(FrameworkKind.VIRTUE_EQUALITY)

    @classmethod
    def virtue_kindness(cls, xi: float = DEFAULT_XI) -> "MoralFramework":
        return cls(FrameworkKind.VIRTUE_KINDNESS, xi=xi)

    @classmethod
    def virtue_mixed(cls, beta: float = DEFAULT_BETA, xi_hat: float = DEFAULT_XI_HAT) -> "MoralFramework":
        return cls(FrameworkKind.VIRTUE_MIXED, beta=beta, xi_hat=xi_hat)

    @property
    def name(self) -> str:
        return self.kind.value

    def params(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in _PARAMS_BY_KIND[self.kind]}

    @property
    def label(self) -> str:
        """Framework name, with any non-default parameter appended"""
        changed = [
            f"{name}={getattr(self, name):g}"
            for name in _PARAMS_BY_KIND[self.kind]
            if getattr(self, name) != _DEFAULTS[name]
        ]
        return f"{self.name}({','.join(changed)})" if changed else self.name

    def with_params(self, **params) -> "MoralFramework":
        values = {"xi": self.xi, "beta": self.beta, "xi_hat": self.xi_hat}
        values.update(params)
        return MoralFramework(self.kind, **values)

    def to_dict(self) -> Dict[str, object]:
        return {"framework": self.name, **self.params()}

    @classmethod
    def parse(cls, text: str) -> "MoralFramework":
        """Accept 'Name' or 'Name(key=value,...)', e.g. 'VirtueMixed(beta=0.2)'"""
        match = _LABEL_RE.match(str(text))
        if not match:
            raise ConfigurationError(f"Cannot parse moral framework: {text!r}")
        kind = FrameworkKind.parse(match.group(1))
        params: Dict[str, float] = {}
        if match.group(2):
            for item in match.group(2).split(","):
                if not item.strip():
                    continue
                key, sep, value = item.partition("=")
                key = key.strip()
                if not sep or key not in _PARAMS_BY_KIND[kind]:
                    raise ConfigurationError(f"{kind.value} does not take parameter {item.strip()!r}")
                try:
                    params[key] = float(value)
                except ValueError:
                    raise ConfigurationError(f"Parameter {key} must be a number, got {value.strip()!r}")
        return cls(kind, **params)


@dataclass(frozen=True)
class RewardContext:
    prev_opponent_action: Action
    own_action: Action
    r_self_extr: float
    r_opp_extr: float


def gini_pair(r1: float, r2: float) -> float:
    """Two-player Gini equality: 1 for equal payoffs, approaching 0 as they diverge"""
    total = r1 + r2
    if total <= 0:
        raise DegenerateDenominatorError(f"gini_pair needs r1 + r2 > 0, got {r1} + {r2}")
    return 1.0 - abs(r1 - r2) / total


def intrinsic_reward(framework: MoralFramework, ctx: RewardContext) -> float:
    kind = framework.kind
    cooperated = ctx.own_action == Action.C

    if kind == FrameworkKind.SELFISH:
        return float(ctx.r_self_extr)
    if kind == FrameworkKind.UTILITARIAN:
        return float(ctx.r_self_extr + ctx.r_opp_extr)
    if kind == FrameworkKind.DEONTOLOGICAL:
        if ctx.own_action == Action.D and ctx.prev_opponent_action == Action.C:
            return -framework.xi
        return 0.0
    if kind == FrameworkKind.VIRTUE_EQUALITY:
        return gini_pair(ctx.r_self_extr, ctx.r_opp_extr)
    if kind == FrameworkKind.VIRTUE_KINDNESS:
        return framework.xi if cooperated else 0.0
    if kind == FrameworkKind.VIRTUE_MIXED:
        equality = framework.beta * gini_pair(ctx.r_self_extr, ctx.r_opp_extr)
        if cooperated:
            return equality + (1.0 - framework.beta) * framework.xi_hat
        return equality
    raise ConfigurationError(f"Unhandled framework {kind}")


def intrinsic_reward_table(framework: MoralFramework, game: GameKind) -> List[List[List[float]]]:
    """
    Rewards for every (prev_opponent_action, own_action, opponent_action) in a game,
    indexed table[prev_opp][own][opp].
    """
    matrix = payoff_matrix(game)
    table = []
    for prev_opp in Action:
        by_own = []
        for own in Action:
            row = []
            for opp in Action:
                r_self, r_opp = matrix.payoff(own, opp)
                row.append(intrinsic_reward(framework, RewardContext(prev_opp, own, r_self, r_opp)))
            by_own.append(row)
        table.append(by_own)
    return table
