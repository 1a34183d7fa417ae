"""
Random-cluster (Fortuin-Kasteleyn) machinery: edge probabilities, weights,
cluster counting and the Edwards-Sokal origin marginal.

q is a real parameter wherever it only enters as the base of q**C(η).
All weights live in natural-log space; LOG_ZERO stands for a zero weight.
"""

import logging
import math
from typing import Optional, Union

import numpy as np

from app.core.exceptions import InvalidParameterError
from app.core.union_find import UnionFind
from app.models.bonds import BondMap, EdgeConfig
from app.models.lattice import Cutset, Lattice
from app.models.results import EstimateSource, MarginalEstimate

logger = logging.getLogger(__name__)

LOG_ZERO = float("-inf")


def edge_probability(J_e: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """p_e = 1 - exp(-J_e); exactly 0 at J_e = 0"""
    values = np.asarray(J_e, dtype=float)
    if np.isnan(values).any():
        raise InvalidParameterError("coupling is NaN")
    if (values < 0).any():
        raise InvalidParameterError(f"couplings must be non-negative, got {values.min()}")
    p = -np.expm1(-values)
    return float(p) if p.ndim == 0 else p


def selfdual_coupling(q: float) -> float:
    """J_c = ln(1 + sqrt(q)), the planar self-dual point"""
    if q < 1:
        raise InvalidParameterError(f"self-dual coupling needs q >= 1, got {q}")
    return math.log1p(math.sqrt(q))


def build_bonds(lat: Lattice, J: float, epsilon: float = 1.0, cutset: Optional[Cutset] = None) -> BondMap:
    """J_e = epsilon * J on the cutset edges, J everywhere else (ghost edges included)"""
    if math.isnan(J) or J < 0:
        raise InvalidParameterError(f"coupling J must be a non-negative number, got {J}")
    if math.isnan(epsilon) or not 0.0 <= epsilon <= 1.0:
        raise InvalidParameterError(f"epsilon must lie in [0,1], got {epsilon}")

    couplings = np.full(lat.n_edges, float(J))
    if cutset is not None:
        if cutset.size and cutset.edges.max() >= lat.n_edges:
            raise InvalidParameterError("cutset refers to edges outside the lattice")
        couplings[cutset.edges] *= epsilon
    probabilities = edge_probability(couplings)
    couplings.setflags(write=False)
    probabilities.setflags(write=False)

    return BondMap(
        coupling=float(J),
        epsilon=float(epsilon),
        couplings=couplings,
        probabilities=probabilities,
        cutset=cutset,
    )


def boundary_term_scale(bonds: BondMap, dimension: int) -> float:
    """Reported diagnostic 2d * epsilon * |Γ|"""
    size = bonds.cutset.size if bonds.cutset is not None else 0
    return 2.0 * dimension * bonds.epsilon * size


def _active_graph(lat: Lattice, wired: bool):
    """Node count and edge mask of the graph clusters are counted on"""
    if wired and lat.has_ghost:
        return lat.n_nodes, np.ones(lat.n_edges, dtype=bool)
    return lat.n_vertices, ~lat.ghost_edge_mask


def cluster_count(lat: Lattice, eta: EdgeConfig, wired: bool = False) -> int:
    """
    Number of occupied clusters C(η), isolated vertices included.

    Under ``wired`` the ghost is an ordinary vertex; otherwise the ghost and
    its edges are ignored.
    """
    eta = np.asarray(eta, dtype=bool)
    if eta.shape != (lat.n_edges,):
        raise InvalidParameterError(f"edge configuration has length {eta.size}, lattice has {lat.n_edges} edges")

    n_nodes, active = _active_graph(lat, wired)
    forest = UnionFind(n_nodes)
    for u, v in lat.edges[eta & active]:
        forest.union(int(u), int(v))
    return forest.components


def batch_cluster_labels(n_nodes: int, edges: np.ndarray, occupied: np.ndarray) -> np.ndarray:
    """
    Component labels for a block of edge configurations at once.

    ``occupied`` has shape (B, E); the result has shape (B, n_nodes) and gives
    each node the smallest node index of its occupied cluster.
    """
    n_configs = occupied.shape[0]
    labels = np.tile(np.arange(n_nodes), (n_configs, 1))
    if edges.shape[0] == 0:
        return labels

    while True:
        previous = labels.copy()
        for e, (u, v) in enumerate(edges):
            on = occupied[:, e]
            low = np.minimum(labels[:, u], labels[:, v])
            labels[:, u] = np.where(on, low, labels[:, u])
            labels[:, v] = np.where(on, low, labels[:, v])
        # pointer jumping: a label is itself a node whose label is no larger
        labels = np.take_along_axis(labels, labels, axis=1)
        if np.array_equal(labels, previous):
            return labels


def count_from_labels(labels: np.ndarray) -> np.ndarray:
    """Cluster count per row of a batch label array"""
    return (labels == np.arange(labels.shape[1])).sum(axis=1)


def log_weight(
    lat: Lattice,
    bonds: BondMap,
    eta: EdgeConfig,
    q: float,
    wired: Optional[bool] = None,
) -> float:
    """
    ln of the unnormalised FK weight prod p^η (1-p)^(1-η) * q^C(η).

    ``wired`` defaults to whether the lattice has a ghost. Returns LOG_ZERO
    for configurations of zero weight.
    """
    if math.isnan(q) or q <= 0:
        raise InvalidParameterError(f"cluster weight q must be positive, got {q}")
    p = bonds.probabilities
    if np.isnan(p).any():
        raise InvalidParameterError("edge probabilities contain NaN")
    wired = lat.has_ghost if wired is None else wired

    eta = np.asarray(eta, dtype=bool)
    _, active = _active_graph(lat, wired)
    occupied = eta & active
    vacant = ~eta & active

    if (p[occupied] == 0).any() or (p[vacant] == 1).any():
        return LOG_ZERO
    total = np.log(p[occupied]).sum() + np.log1p(-p[vacant]).sum()
    return float(total + cluster_count(lat, eta, wired) * math.log(q))


def origin_marginal_from_connectivity(theta: float, q: int) -> MarginalEstimate:
    """
    Origin spin law under wired-to-plus: plus with probability theta, else uniform.

    P(plus) = theta + (1 - theta)/q and every other state gets (1 - theta)/q.
    """
    if math.isnan(theta) or not 0.0 <= theta <= 1.0:
        raise InvalidParameterError(f"theta must lie in [0,1], got {theta}")
    if q < 1:
        raise InvalidParameterError(f"q must be a positive integer, got {q}")

    other = (1.0 - theta) / q
    probabilities = [1.0 - (q - 1) * other] + [other] * (q - 1)
    return MarginalEstimate(
        q=q,
        probabilities=probabilities,
        standard_errors=[0.0] * q,
        theta=theta,
        source=EstimateSource.CONNECTIVITY,
    )
