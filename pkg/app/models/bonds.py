from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.models.lattice import Cutset

# An edge configuration η is a boolean numpy vector with one entry per lattice
# edge (ghost edges included); no wrapper type is needed.
EdgeConfig = np.ndarray


class BoundaryKind(str, Enum):
    FREE = "free"
    WIRED = "wired"


class BoundaryCondition(BaseModel):
    """Free, or wired with the ghost carrying ``state`` (0-based, 0 is plus)"""
    model_config = ConfigDict(frozen=True)

    kind: BoundaryKind = Field(default=BoundaryKind.FREE, description="Boundary condition type")
    state: int = Field(default=0, ge=0, description="Ghost state under wired boundary conditions")

    @property
    def wired(self) -> bool:
        return self.kind == BoundaryKind.WIRED

    @classmethod
    def free(cls) -> "BoundaryCondition":
        return cls(kind=BoundaryKind.FREE)

    @classmethod
    def wired_to(cls, state: int = 0) -> "BoundaryCondition":
        return cls(kind=BoundaryKind.WIRED, state=state)


class BondMap(BaseModel):
    """Per-edge couplings J_e (ε·J on Γ, J elsewhere) and p_e = 1 - exp(-J_e)"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    coupling: float = Field(..., ge=0, description="Base coupling J")
    epsilon: float = Field(default=1.0, ge=0, le=1, description="Weakening factor on Γ")
    couplings: np.ndarray = Field(..., description="Per-edge couplings J_e")
    probabilities: np.ndarray = Field(..., description="Per-edge occupation probabilities p_e")
    cutset: Optional[Cutset] = Field(None, description="Weakened cutset Γ, if any")

    @property
    def n_edges(self) -> int:
        return int(self.couplings.shape[0])

    @property
    def weak_edge_mask(self) -> np.ndarray:
        """Edges of Γ that are actually weakened (ε < 1)"""
        mask = np.zeros(self.n_edges, dtype=bool)
        if self.cutset is not None and self.epsilon < 1.0:
            mask[self.cutset.edges] = True
        return mask


class SpinConfig(BaseModel):
    """Potts configuration: one 0-based label in 0..q-1 per lattice vertex"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    labels: np.ndarray = Field(..., description="Spin label per vertex")
    q: int = Field(..., ge=1, description="Number of Potts states")
    boundary: BoundaryCondition = Field(default_factory=BoundaryCondition.free, description="Boundary condition")
