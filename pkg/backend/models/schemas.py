from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Optional, List, Dict, Any, Literal, Tuple, Union
from datetime import datetime


class ScheduleConfig(BaseModel):
    """Exploration schedule: linear decay (default 1.0 -> 0) or constant eps"""
    model_config = ConfigDict(extra="forbid")

    kind: Literal["linear", "constant"] = "linear"
    start: float = Field(1.0, ge=0, le=1, description="Linear decay start")
    end: float = Field(0.0, ge=0, le=1, description="Linear decay end")
    eps: Optional[float] = Field(None, ge=0, le=1, description="Constant exploration rate")

    @model_validator(mode="after")
    def _constant_needs_eps(self):
        if self.kind == "constant" and self.eps is None:
            raise ValueError("constant schedule needs eps")
        return self


class AgentConfig(BaseModel):
    """One agent: a learner (framework) or a static opponent (strategy)"""
    model_config = ConfigDict(extra="forbid")

    framework: Optional[str] = Field(None, description="Selfish, Utilitarian, Deontological, VirtueEquality, VirtueKindness, VirtueMixed")
    strategy: Optional[str] = Field(None, description="AC, AD, TFT, Random")
    xi: Optional[float] = Field(None, gt=0)
    beta: Optional[float] = Field(None, ge=0, le=1)
    xi_hat: Optional[float] = Field(None, ge=0, le=1)
    alpha: Optional[float] = Field(None, gt=0, le=1)
    gamma: Optional[float] = Field(None, ge=0, lt=1)
    schedule: Optional[ScheduleConfig] = None

    @model_validator(mode="after")
    def _exactly_one_kind(self):
        if (self.framework is None) == (self.strategy is None):
            raise ValueError("agent needs exactly one of 'framework' or 'strategy'")
        if self.strategy is not None:
            learner_fields = [
                name for name in ("xi", "beta", "xi_hat", "alpha", "gamma", "schedule")
                if getattr(self, name) is not None
            ]
            if learner_fields:
                raise ValueError(f"static strategy does not take {', '.join(learner_fields)}")
        return self


AgentEntry = Union[str, AgentConfig]


class VariantsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    long_run: Optional[int] = Field(None, ge=2, description="Iteration override, e.g. 50000")
    beta_sweep: List[float] = Field(default_factory=list, description="VirtueMixed beta values")
    schedule_override: Optional[ScheduleConfig] = None

    @field_validator("beta_sweep")
    @classmethod
    def _betas_in_range(cls, values: List[float]) -> List[float]:
        for value in values:
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"beta must be in [0, 1], got {value}")
        return values


class OutputsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    summary_csv: Optional[str] = "summary.csv"
    steps_csv: Optional[str] = None
    steps_thinning: int = Field(10, ge=1)
    json_path: Optional[str] = Field(None, alias="json")
    timeline_csv: Optional[str] = None
    timeline_bins: int = Field(100, ge=1)
    reward_timeline_csv: Optional[str] = None
    reward_timeline_points: int = Field(100, ge=1)


class PlanConfig(BaseModel):
    """Experiment plan file schema (JSON)"""
    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    game: Optional[str] = None
    games: Optional[List[str]] = None
    agents: List[AgentEntry] = Field(default_factory=list)
    pairing: Literal["all_unordered_pairs_with_self", "learners_vs_statics", "explicit"] = "all_unordered_pairs_with_self"
    pairs: List[Tuple[AgentEntry, AgentEntry]] = Field(default_factory=list)
    iterations: int = Field(10000, ge=2)
    n_runs: int = Field(100, ge=1)
    base_seed: int = Field(0, ge=0)
    alpha: float = Field(0.01, gt=0, le=1, description="Learning rate")
    gamma: float = Field(0.90, ge=0, lt=1, description="Discount factor")
    xi: float = Field(5.0, gt=0, description="Norm reward magnitude")
    beta: float = Field(0.5, ge=0, le=1, description="VirtueMixed equality weight")
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    variants: VariantsConfig = Field(default_factory=VariantsConfig)
    outputs: OutputsConfig = Field(default_factory=OutputsConfig)

    @model_validator(mode="after")
    def _check_shape(self):
        if self.game is not None and self.games is not None:
            raise ValueError("give either 'game' or 'games', not both")
        if not self.game_names():
            raise ValueError("plan needs at least one game")
        if self.pairing == "explicit":
            if not self.pairs:
                raise ValueError("explicit pairing needs a non-empty 'pairs' list")
        elif not self.agents:
            raise ValueError("plan needs at least one agent")
        return self

    def game_names(self) -> List[str]:
        if self.games is not None:
            return list(self.games)
        return [self.game] if self.game is not None else []


class PairRequest(BaseModel):
    """Single matchup request"""
    game: str = Field(..., description="IPD, IVD or ISH")
    m: str = Field(..., description="Agent M label, e.g. Selfish or TFT")
    o: str = Field(..., description="Agent O label")
    runs: int = Field(100, ge=1)
    iterations: int = Field(10000, ge=2)
    seed: int = Field(0, ge=0)


class TraceRequest(BaseModel):
    """Last-K trace of one seeded episode"""
    game: str
    m: str
    o: str
    seed: int = Field(0, ge=0)
    last: int = Field(20, ge=0)
    iterations: int = Field(10000, ge=2)


class TraceStep(BaseModel):
    t: int
    state_m: str
    action_m: str
    state_o: str
    action_o: str


class TraceResponse(BaseModel):
    game: str
    agent_m: str
    agent_o: str
    seed: int
    final_pair: str
    steps: List[TraceStep]


class OracleResponse(BaseModel):
    game: str
    opponent: str
    framework: str
    gamma: float
    policy: Dict[str, List[str]] = Field(..., description="State key -> optimal action(s); two entries mean a tie")
    q_values: Dict[str, Dict[str, float]]


class PairResponse(BaseModel):
    success: bool
    summary: Dict[str, Any]
    generated_at: datetime = Field(default_factory=datetime.now)
