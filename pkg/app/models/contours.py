from enum import IntEnum
from typing import Dict, List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class SquareClass(IntEnum):
    ORDERED = 0
    DISORDERED = 1
    IRREGULAR = 2
    CONTOUR = 3


class SiteClassification(BaseModel):
    """
    Per-site ordered-bond counts and the E0..E4 / E4' aggregates.

    A bond is ordered when its endpoint spins agree; E4' counts the E4 sites
    that touch at least one weak bond.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    ordered_counts: np.ndarray = Field(..., description="Incident ordered bonds per site")
    touches_weak: np.ndarray = Field(..., description="Whether each site touches a weak bond")
    e0: int = 0
    e1: int = 0
    e2: int = 0
    e3: int = 0
    e4: int = 0
    e4_prime: int = 0

    @model_validator(mode="after")
    def check_counts(self) -> "SiteClassification":
        if self.e0 + self.e1 + self.e2 + self.e3 + self.e4 != self.n_sites:
            raise ValueError("site classes must partition the sites")
        if self.e4_prime > self.e4:
            raise ValueError("E4' cannot exceed E4")
        return self

    @property
    def n_sites(self) -> int:
        return int(self.ordered_counts.shape[0])

    def as_dict(self) -> Dict[str, int]:
        return {"E0": self.e0, "E1": self.e1, "E2": self.e2, "E3": self.e3, "E4": self.e4, "E4prime": self.e4_prime}


class ContourSet(BaseModel):
    """Square classes of one configuration and its contours (corner-connected contour squares)"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    square_classes: np.ndarray = Field(..., description="(L-1, L-1) array of SquareClass codes")
    component_sizes: List[int] = Field(default_factory=list, description="|γ| per contour")
    surrounds_origin: List[bool] = Field(default_factory=list, description="Per contour: encloses the origin")

    @property
    def contour_mask(self) -> np.ndarray:
        """Squares that make up contours: irregular ones and ordered ones touching a weak bond"""
        return (self.square_classes == SquareClass.IRREGULAR) | (self.square_classes == SquareClass.CONTOUR)

    @property
    def n_contour_squares(self) -> int:
        return int(np.count_nonzero(self.contour_mask))

    @property
    def surrounding_sizes(self) -> List[int]:
        return [size for size, flag in zip(self.component_sizes, self.surrounds_origin) if flag]


class CensusRow(BaseModel):
    length: int = Field(..., ge=1, description="Contour size ℓ in squares")
    count: int = Field(..., ge=0, description="Samples with a contour of size ℓ around the origin")
    probability: float = Field(..., ge=0, le=1)
    standard_error: float = Field(..., ge=0)
    log_bounds: Dict[str, float] = Field(
        default_factory=dict, description="2ℓ ln 2 - (Cℓ/4) ln q, keyed by the constant C"
    )


class ContourHistogram(BaseModel):
    q: int
    n_samples: int = Field(..., ge=0)
    constants: List[float] = Field(default_factory=list, description="Peierls constants C of the bound columns")
    rows: List[CensusRow] = Field(default_factory=list, description="One row per observed ℓ, increasing")

    @property
    def is_empty(self) -> bool:
        return not self.rows


class BklCheck(BaseModel):
    """Constrained partition function of one broken/unbroken pattern against the site-class bound"""
    broken: List[bool] = Field(..., description="Broken flag per lattice edge")
    log_z: float = Field(..., description="ln Z(Λ|u,b); -inf when the pattern admits no colouring")
    rhs: float = Field(..., description="Log of the site-class bound")
    holds: bool
    n_colourings: int = Field(..., ge=0, description="Spin configurations compatible with the pattern")
    classes: Dict[str, int] = Field(default_factory=dict)


class BklTable(BaseModel):
    q: int
    coupling: float
    epsilon: float
    checks: List[BklCheck] = Field(default_factory=list)

    @property
    def n_patterns(self) -> int:
        return len(self.checks)

    @property
    def n_violations(self) -> int:
        return sum(1 for check in self.checks if not check.holds)

    @property
    def max_excess(self) -> float:
        """Largest ln Z - RHS over the patterns with at least one colouring"""
        excess = [check.log_z - check.rhs for check in self.checks if check.n_colourings > 0]
        return max(excess) if excess else float("-inf")
