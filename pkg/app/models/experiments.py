from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, model_validator

from app.models.chain import BoundaryMode
from app.models.results import EstimateSource


class Verdict(str, Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"
    FLAT = "flat"
    FLAT_AT_ZERO = "flat-at-zero"


class ScanParameters(BaseModel):
    d: int = Field(..., ge=1, description="Lattice dimension")
    q: int = Field(..., ge=1, description="Number of Potts states")
    J: float = Field(..., ge=0, description="Resolved base coupling")
    epsilon: float = Field(..., ge=0, le=1, description="Weakening factor on Γ")
    mode: BoundaryMode = Field(..., description="Boundary mode of the scan")


class ScanPoint(BaseModel):
    L: int = Field(..., description="Side length of the measured (inner) box")
    r: Optional[int] = Field(None, description="Cutset radius; None when Γ is the lattice boundary")
    theta: float
    theta_se: float
    tv: float
    tv_se: float
    n_samples: int
    seed: int
    stream_id: int = 0
    gamma_size: int = Field(..., description="|Γ|")
    boundary_term: float = Field(..., description="Diagnostic 2d * epsilon * |Γ|")
    source: EstimateSource


class TrendSummary(BaseModel):
    verdict: Verdict
    slope: Optional[float] = None
    slope_se: Optional[float] = None
    significance: float = 2.0


class RobustnessCurve(BaseModel):
    parameters: ScanParameters
    points: List[ScanPoint] = Field(default_factory=list)
    trend: TrendSummary

    @model_validator(mode="after")
    def check_order(self) -> "RobustnessCurve":
        sizes = [point.L for point in self.points]
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError(f"L values must be strictly increasing, got {sizes}")
        return self

    def point_at(self, L: int) -> ScanPoint:
        for point in self.points:
            if point.L == L:
                return point
        raise KeyError(f"no scan point at L={L}")
