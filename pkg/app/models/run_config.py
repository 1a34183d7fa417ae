from enum import Enum
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.config import settings
from app.core.random_cluster import selfdual_coupling
from app.models.chain import MIN_BATCHES, BoundaryMode, ChainConfig, Kernel, StartState


class Command(str, Enum):
    ENUMERATE = "enumerate"
    SAMPLE = "sample"
    ROBUSTNESS = "robustness"
    DIAGONAL = "diagonal"
    FKG_CHECK = "fkg-check"
    CONTOURS = "contours"
    BKL_CHECK = "bkl-check"


SCAN_COMMANDS = (Command.ROBUSTNESS, Command.DIAGONAL)


def _unit_interval(value: Optional[float]) -> Optional[float]:
    if value is not None and not 0.0 <= value <= 1.0:
        raise ValueError("ε must lie in [0,1]")
    return value


class ModelSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    d: int = Field(default=2, ge=1, description="Lattice dimension")
    L: Optional[int] = Field(None, ge=1, description="Side length for single-lattice commands")
    L_list: Optional[List[int]] = Field(None, description="Side lengths of a scan")
    q: int = Field(default=2, ge=1, description="Number of Potts states")
    J: Union[float, Literal["selfdual"]] = Field(default="selfdual", description="Base coupling or 'selfdual'")
    J_factor: float = Field(default=1.0, gt=0, description="Multiplier applied to the resolved coupling")
    epsilon: Optional[float] = Field(None, description="Weakening factor on Γ")
    epsilon_list: Optional[List[float]] = Field(None, description="Weakening factors, one curve each")
    r: Optional[int] = Field(None, ge=0, description="Cutset radius (default: one site inside the boundary)")
    mode: BoundaryMode = Field(default=BoundaryMode.WEAKLY_WIRED_GHOST, description="Boundary mode")
    annulus_width: Optional[int] = Field(None, ge=0, description="Annulus width w")
    use_exact: bool = Field(default=False, description="Use the exact oracle where the cap allows")
    peierls_constants: List[float] = Field(default=[1.0, 2.0, 3.0], description="C values of the census bound")
    bkl_epsilon: Optional[float] = Field(None, description="Independent ε for the site-class bound")

    @field_validator("epsilon", "bkl_epsilon")
    @classmethod
    def check_epsilon(cls, value: Optional[float]) -> Optional[float]:
        return _unit_interval(value)

    @field_validator("epsilon_list")
    @classmethod
    def check_epsilon_list(cls, values: Optional[List[float]]) -> Optional[List[float]]:
        for value in values or []:
            _unit_interval(value)
        return values

    @field_validator("J")
    @classmethod
    def check_coupling(cls, value):
        if isinstance(value, float) and value < 0:
            raise ValueError("must be >= 0 or 'selfdual'")
        return value

    @property
    def resolved_J(self) -> float:
        base = selfdual_coupling(self.q) if self.J == "selfdual" else self.J
        return base * self.J_factor

    @property
    def epsilons(self) -> List[float]:
        if self.epsilon_list:
            return list(self.epsilon_list)
        return [1.0 if self.epsilon is None else self.epsilon]

    @property
    def sizes(self) -> List[int]:
        if self.L_list:
            return list(self.L_list)
        return [] if self.L is None else [self.L]


class ChainSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    sweeps: int = Field(default=100_000, ge=1)
    burn_in: int = Field(default=settings.default_burn_in, ge=0)
    thinning: int = Field(default=1, ge=1)
    seed: int = Field(default=20240601, ge=0, lt=2 ** 64)
    stream_id: int = Field(default=0, ge=0, description="First stream; scan point i uses stream_id + i")
    n_batches: int = Field(default=settings.min_batches, ge=MIN_BATCHES)
    kernel: Kernel = Kernel.SWENDSEN_WANG
    start: StartState = StartState.RANDOM

    @model_validator(mode="after")
    def check_budget(self) -> "ChainSection":
        if self.burn_in >= self.sweeps:
            raise ValueError("burn_in: must be smaller than sweeps")
        if (self.sweeps - self.burn_in) // self.thinning < self.n_batches:
            raise ValueError("n_batches: more batches than recorded sweeps")
        return self

    def to_chain_config(self, mode: BoundaryMode, annulus_width: Optional[int] = None,
                        stream_offset: int = 0) -> ChainConfig:
        return ChainConfig(
            sweeps=self.sweeps,
            burn_in=self.burn_in,
            thinning=self.thinning,
            seed=self.seed,
            stream_id=self.stream_id + stream_offset,
            mode=mode,
            annulus_width=annulus_width,
            kernel=self.kernel,
            start=self.start,
            n_batches=self.n_batches,
        )


class OutputSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    directory: str = Field(default=settings.output_dir, description="Directory for CSV and JSON artifacts")
    formats: List[Literal["csv", "json"]] = Field(default=["csv", "json"])
    name: Optional[str] = Field(None, description="File stem; defaults to the command name")


class CapsSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    enumeration_edge_cap: int = Field(default=settings.enumeration_edge_cap, ge=1)
    spin_cap: int = Field(default=settings.spin_enumeration_cap, ge=1)


class RunConfig(BaseModel):
    """One fully resolved batch run"""
    model_config = ConfigDict(extra="forbid")

    command: Command
    model: ModelSection = Field(default_factory=ModelSection)
    chain: ChainSection = Field(default_factory=ChainSection)
    output: OutputSection = Field(default_factory=OutputSection)
    caps: CapsSection = Field(default_factory=CapsSection)

    @model_validator(mode="after")
    def check_command(self) -> "RunConfig":
        model = self.model
        if not model.sizes:
            raise ValueError("L: a side length (L or L_list) is required")
        if any(b <= a for a, b in zip(model.sizes, model.sizes[1:])):
            raise ValueError("L_list: must be strictly increasing")
        if self.command in (Command.CONTOURS, Command.BKL_CHECK) and model.d != 2:
            raise ValueError("d: contour commands need d = 2")
        if self.command in SCAN_COMMANDS and any(L % 2 == 0 for L in model.sizes):
            raise ValueError("L: scan side lengths must be odd")

        mode = BoundaryMode.WEAKLY_WIRED_DIAGONAL if self.command == Command.DIAGONAL else model.mode
        if any(mode.needs_box_cutset(eps, model.r) for eps in model.epsilons) \
                and any(L % 2 == 0 for L in model.sizes):
            raise ValueError("L: must be odd when a cutset is used")
        return self

    @property
    def stem(self) -> str:
        return self.output.name or self.command.value
