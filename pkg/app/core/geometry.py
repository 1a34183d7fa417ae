"""
Box lattices, centred cutsets and the separation check
"""

import logging
from typing import List, Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from app.core.exceptions import CapExceededError, GeometryError
from app.models.lattice import Cutset, CutsetKind, Lattice

logger = logging.getLogger(__name__)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def build_lattice(d: int, L: int, ghost: bool = False, edge_cap: Optional[int] = None) -> Lattice:
    """
    Build the open box of side L in d dimensions.

    ``edge_cap`` is only passed by exhaustive callers; the total edge count,
    ghost edges included, must not exceed it.
    """
    if d < 1:
        raise GeometryError(f"dimension must be >= 1, got {d}")
    if L < 1:
        raise GeometryError(f"side length must be >= 1, got {L}")

    shape = (L,) * d
    n_vertices = L ** d
    coords = np.stack(np.unravel_index(np.arange(n_vertices), shape), axis=1)

    blocks: List[np.ndarray] = []
    for axis in range(d):
        stride = L ** (d - 1 - axis)
        low = np.flatnonzero(coords[:, axis] < L - 1)
        blocks.append(np.stack([low, low + stride], axis=1))
    lattice_edges = np.concatenate(blocks) if blocks else np.empty((0, 2), dtype=np.int64)
    n_lattice_edges = int(lattice_edges.shape[0])

    on_low = coords == 0
    on_high = coords == L - 1
    boundary = np.flatnonzero((on_low | on_high).any(axis=1))

    edges = lattice_edges
    if ghost:
        # per vertex, per axis: the low side first, then the high side
        missing = np.stack([on_low, on_high], axis=2).reshape(n_vertices, 2 * d)
        owners = np.repeat(np.arange(n_vertices), missing.sum(axis=1))
        ghost_edges = np.stack([owners, np.full_like(owners, n_vertices)], axis=1)
        edges = np.concatenate([lattice_edges, ghost_edges])

    if edge_cap is not None and edges.shape[0] > edge_cap:
        raise CapExceededError("enumeration edge cap", edge_cap, int(edges.shape[0]))

    lattice = Lattice(
        dimension=d,
        side=L,
        n_vertices=n_vertices,
        edges=_frozen(edges.astype(np.int64)),
        n_lattice_edges=n_lattice_edges,
        has_ghost=ghost,
        boundary_vertices=_frozen(boundary.astype(np.int64)),
    )
    logger.debug(f"Built lattice d={d} L={L} ghost={ghost}: V={n_vertices}, E={lattice.n_edges}")
    return lattice


def build_cutset(lat: Lattice, r: int) -> Cutset:
    """Γ = every lattice edge crossing the surface of the centred box of side 2r+1"""
    if lat.side % 2 == 0:
        raise GeometryError(f"cutsets need an odd side length so the origin is central, got L={lat.side}")
    if r < 0:
        raise GeometryError(f"cutset radius must be >= 0, got {r}")
    if 2 * r + 1 >= lat.side:
        raise GeometryError(
            f"inner box of side {2 * r + 1} must lie strictly inside the lattice of side {lat.side}"
        )

    center = (lat.side - 1) // 2
    inside = (np.abs(lat.coordinates() - center) <= r).all(axis=1)
    lattice_edges = lat.edges[:lat.n_lattice_edges]
    crossing = inside[lattice_edges[:, 0]] != inside[lattice_edges[:, 1]]

    return Cutset(
        kind=CutsetKind.BOX,
        radius=r,
        edges=_frozen(np.flatnonzero(crossing).astype(np.int64)),
        interior=_frozen(np.flatnonzero(inside).astype(np.int64)),
    )


def build_boundary_cutset(lat: Lattice) -> Cutset:
    """Γ = all ghost edges, Int(Γ) = the whole lattice (wired directly outside Γ)"""
    if not lat.has_ghost:
        raise GeometryError("a boundary cutset needs a lattice with a ghost vertex")
    return Cutset(
        kind=CutsetKind.BOUNDARY,
        radius=None,
        edges=_frozen(np.arange(lat.n_lattice_edges, lat.n_edges, dtype=np.int64)),
        interior=_frozen(np.arange(lat.n_vertices, dtype=np.int64)),
    )


def component_labels(n_nodes: int, edges: np.ndarray) -> np.ndarray:
    """Connected-component label per node of the graph spanned by ``edges``"""
    data = np.ones(edges.shape[0], dtype=np.int8)
    graph = coo_matrix((data, (edges[:, 0], edges[:, 1])), shape=(n_nodes, n_nodes))
    _, labels = connected_components(graph, directed=False)
    return labels


def separation_check(lat: Lattice, cut: Cutset) -> bool:
    """True iff no path avoiding Γ joins Int(Γ) to an exterior vertex or the ghost"""
    keep = ~cut.edge_mask(lat.n_edges)
    labels = component_labels(lat.n_nodes, lat.edges[keep])

    exterior = np.ones(lat.n_nodes, dtype=bool)
    exterior[cut.interior] = False
    if not exterior.any():
        return True
    return not np.isin(labels[exterior], labels[cut.interior]).any()
