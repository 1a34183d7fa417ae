from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, model_validator


class EstimateSource(str, Enum):
    EXACT = "exact"
    MONTE_CARLO = "monte-carlo"
    CONNECTIVITY = "connectivity"


class MarginalEstimate(BaseModel):
    """Origin spin marginal plus theta = P(origin <-> ghost), with batch-means errors"""

    q: int = Field(..., ge=1, description="Number of Potts states")
    probabilities: List[float] = Field(..., description="Origin marginal, index 0 is plus")
    standard_errors: List[float] = Field(..., description="Per-component standard errors")
    theta: float = Field(..., ge=0, le=1, description="P(origin connected to ghost)")
    theta_se: float = Field(default=0.0, ge=0, description="Standard error of theta")
    raw_probabilities: Optional[List[float]] = Field(None, description="Direct spin-frequency marginal")
    raw_standard_errors: Optional[List[float]] = Field(None, description="Errors of the direct marginal")
    edge_means: Optional[List[float]] = Field(None, description="Per-edge occupation means")
    edge_standard_errors: Optional[List[float]] = Field(None, description="Errors of the edge means")
    n_samples: int = Field(default=0, ge=0, description="Recorded measurements")
    n_batches: int = Field(default=0, ge=0, description="Batches used for the errors")
    effective_sample_size: Optional[float] = Field(None, description="Effective sample size of theta")
    source: EstimateSource = Field(default=EstimateSource.MONTE_CARLO, description="How the estimate was obtained")
    metadata: Dict[str, Any] = Field(default_factory=dict, description="Chain metadata (seed, stream, rng, kernel)")

    @model_validator(mode="after")
    def check_vector(self) -> "MarginalEstimate":
        if len(self.probabilities) != self.q or len(self.standard_errors) != self.q:
            raise ValueError(f"marginal vectors must have length q={self.q}")
        if abs(sum(self.probabilities) - 1.0) > 1e-9:
            raise ValueError(f"marginal sums to {sum(self.probabilities)}, not 1")
        if any(se < 0 for se in self.standard_errors):
            raise ValueError("standard errors must be non-negative")
        return self


class ExactResult(BaseModel):
    """Exhaustive random-cluster sums on a small lattice"""

    log_partition_function: float = Field(..., description="ln Z of the (unnormalised) FK weight")
    theta: float = Field(..., ge=0, le=1, description="P(origin connected to ghost)")
    edge_marginals: List[float] = Field(..., description="P(η_e = 1) per edge")
    origin_marginal: Optional[List[float]] = Field(None, description="Origin spin marginal (integer q only)")
    q: float = Field(..., gt=0, description="Cluster weight q")
    wired: bool = Field(..., description="Whether the ghost is wired")
    n_configurations: int = Field(..., description="Edge configurations summed")
    metadata: Dict[str, Any] = Field(default_factory=dict, description="Lattice, bonds and boundary condition")


class EventKind(str, Enum):
    ORIGIN_TO_GHOST = "origin-to-ghost"
    EDGE_OCCUPIED = "edge-occupied"
    OCCUPIED_AT_LEAST = "occupied-at-least"


class EventSpec(BaseModel):
    """An increasing event from the built-in library"""

    kind: EventKind
    edge: Optional[int] = Field(None, ge=0, description="Edge index for edge-occupied events")
    threshold: Optional[int] = Field(None, ge=0, description="k for occupied-at-least events")

    @model_validator(mode="after")
    def check_parameters(self) -> "EventSpec":
        if self.kind == EventKind.EDGE_OCCUPIED and self.edge is None:
            raise ValueError("edge-occupied events need an edge index")
        if self.kind == EventKind.OCCUPIED_AT_LEAST and self.threshold is None:
            raise ValueError("occupied-at-least events need a threshold")
        return self

    @property
    def label(self) -> str:
        if self.kind == EventKind.EDGE_OCCUPIED:
            return f"edge[{self.edge}]=1"
        if self.kind == EventKind.OCCUPIED_AT_LEAST:
            return f"occupied>={self.threshold}"
        return "origin<->ghost"


class EventCheck(BaseModel):
    event: str
    probability_a: float
    probability_b: float
    holds: bool


class DominationReport(BaseModel):
    checks: List[EventCheck] = Field(default_factory=list)
    passed: bool = True
    tolerance: float = 1e-12
