from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field, model_validator

from app.config import settings

# Fewest batches a batch-means error is reported from
MIN_BATCHES = 20


class BoundaryMode(str, Enum):
    FREE = "free"
    WIRED_GHOST = "wired-ghost"
    WEAKLY_WIRED_GHOST = "weakly-wired-ghost"
    WEAKLY_WIRED_DIAGONAL = "weakly-wired-diagonal"
    WEAKLY_WIRED_ANNULUS = "weakly-wired-annulus"

    @property
    def wired(self) -> bool:
        return self != BoundaryMode.FREE

    def needs_box_cutset(self, epsilon: float, r: Optional[int] = None) -> bool:
        """Whether the mode weakens a centred box cutset (odd L required)"""
        if self in (BoundaryMode.WEAKLY_WIRED_GHOST, BoundaryMode.WEAKLY_WIRED_ANNULUS):
            return True
        return self == BoundaryMode.FREE and (epsilon < 1.0 or r is not None)


class Kernel(str, Enum):
    SWENDSEN_WANG = "swendsen-wang"
    HEAT_BATH = "heat-bath"


class StartState(str, Enum):
    RANDOM = "random"
    ORDERED = "ordered"


class ChainConfig(BaseModel):
    sweeps: int = Field(default=100_000, ge=1, description="Total sweeps, burn-in included")
    burn_in: int = Field(default=settings.default_burn_in, ge=0, description="Discarded sweeps")
    thinning: int = Field(default=1, ge=1, description="Record every n-th sweep after burn-in")
    seed: int = Field(default=20240601, ge=0, lt=2 ** 64, description="64-bit RNG seed")
    stream_id: int = Field(default=0, ge=0, description="Independent stream index for parallel chains")
    mode: BoundaryMode = Field(default=BoundaryMode.WEAKLY_WIRED_GHOST, description="Boundary mode")
    annulus_width: Optional[int] = Field(None, ge=0, description="Annulus width w (annulus mode)")
    kernel: Kernel = Field(default=Kernel.SWENDSEN_WANG, description="Update kernel")
    start: StartState = Field(default=StartState.RANDOM, description="Initial spin configuration")
    n_batches: int = Field(default=settings.min_batches, ge=MIN_BATCHES,
                           description="Batches for batch-means errors")

    @model_validator(mode="after")
    def check_budget(self) -> "ChainConfig":
        if self.burn_in >= self.sweeps:
            raise ValueError(f"burn_in ({self.burn_in}) must be smaller than sweeps ({self.sweeps})")
        if self.n_measurements < self.n_batches:
            raise ValueError(
                f"{self.n_measurements} measurements cannot fill {self.n_batches} batches"
            )
        return self

    @property
    def n_measurements(self) -> int:
        return (self.sweeps - self.burn_in) // self.thinning
