from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class CutsetKind(str, Enum):
    BOX = "box"
    BOUNDARY = "boundary"


class Lattice(BaseModel):
    """
    Finite open box of side ``side`` in ``dimension`` dimensions.

    Vertices are indexed row-major over their coordinates (last axis fastest),
    so vertex ``(c_0, ..., c_{d-1})`` has index ``sum(c_i * side**(d-1-i))``.
    ``edges`` lists the nearest-neighbour lattice edges first, ordered by axis
    and then by lower endpoint, followed by the ghost edges (one per boundary
    vertex per missing neighbour) when ``has_ghost`` is set. The ghost vertex,
    if any, has index ``n_vertices``.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dimension: int = Field(..., ge=1, description="Lattice dimension d")
    side: int = Field(..., ge=1, description="Side length L per axis")
    n_vertices: int = Field(..., description="Number of lattice vertices L**d")
    edges: np.ndarray = Field(..., description="(E, 2) array of vertex index pairs")
    n_lattice_edges: int = Field(..., description="Number of nearest-neighbour edges")
    has_ghost: bool = Field(default=False, description="Whether a ghost vertex exists")
    boundary_vertices: np.ndarray = Field(..., description="Vertices with fewer than 2d lattice neighbours")

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def n_ghost_edges(self) -> int:
        return self.n_edges - self.n_lattice_edges

    @property
    def n_nodes(self) -> int:
        """Vertices plus the ghost, if present"""
        return self.n_vertices + (1 if self.has_ghost else 0)

    @property
    def ghost(self) -> Optional[int]:
        return self.n_vertices if self.has_ghost else None

    @property
    def ghost_edge_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_edges, dtype=bool)
        mask[self.n_lattice_edges:] = True
        return mask

    @property
    def origin(self) -> int:
        """Centre vertex (exact centre when the side is odd)"""
        return self.index_of([(self.side - 1) // 2] * self.dimension)

    def index_of(self, coords: Sequence[int]) -> int:
        if len(coords) != self.dimension:
            raise ValueError(f"expected {self.dimension} coordinates, got {len(coords)}")
        if any(c < 0 or c >= self.side for c in coords):
            raise ValueError(f"coordinates {tuple(coords)} outside a box of side {self.side}")
        return int(np.ravel_multi_index(tuple(coords), (self.side,) * self.dimension))

    def coords_of(self, index: int) -> Tuple[int, ...]:
        if not 0 <= index < self.n_vertices:
            raise ValueError(f"vertex index {index} outside 0..{self.n_vertices - 1}")
        return tuple(int(c) for c in np.unravel_index(index, (self.side,) * self.dimension))

    def coordinates(self) -> np.ndarray:
        """(V, d) array of all vertex coordinates in index order"""
        grid = np.unravel_index(np.arange(self.n_vertices), (self.side,) * self.dimension)
        return np.stack(grid, axis=1)


class Cutset(BaseModel):
    """Edge set Γ separating an interior vertex set from the rest of the lattice"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kind: CutsetKind = Field(default=CutsetKind.BOX, description="Centred box or lattice boundary")
    radius: Optional[int] = Field(None, description="Half-width r of the inner box (box cutsets)")
    edges: np.ndarray = Field(..., description="Sorted edge indices of Γ")
    interior: np.ndarray = Field(..., description="Sorted vertex indices of Int(Γ)")

    @property
    def size(self) -> int:
        return int(self.edges.shape[0])

    def edge_mask(self, n_edges: int) -> np.ndarray:
        mask = np.zeros(n_edges, dtype=bool)
        mask[self.edges] = True
        return mask
