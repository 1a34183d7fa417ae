"""
Cluster Monte Carlo for the joint Potts / random-cluster (Edwards-Sokal)
measure with heterogeneous bonds and a ghost-wired boundary.
"""

import logging
import time
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from app.core.exceptions import GeometryError, InvalidParameterError
from app.core.geometry import build_cutset, build_lattice, component_labels, separation_check
from app.core.random_cluster import build_bonds
from app.core.rng import RNG_ALGORITHM, make_rng
from app.core.statistics import BatchMeans
from app.models.bonds import BondMap, BoundaryCondition, SpinConfig
from app.models.chain import ChainConfig, Kernel, StartState
from app.models.lattice import Cutset, Lattice
from app.models.results import EstimateSource, MarginalEstimate

logger = logging.getLogger(__name__)

GHOST_STATE = 0


@dataclass
class _Graph:
    """Edges and probabilities the chain actually updates"""
    n_nodes: int
    ghost: Optional[int]
    edges: np.ndarray
    edge_index: np.ndarray
    probabilities: np.ndarray
    couplings: np.ndarray


@dataclass
class Measurement:
    """What one recorded sweep exposes to the estimators"""
    spins: np.ndarray
    occupied: np.ndarray
    labels: np.ndarray


def _graph(lat: Lattice, bonds: BondMap, wired: bool) -> _Graph:
    if bonds.n_edges != lat.n_edges:
        raise InvalidParameterError(f"bond map has {bonds.n_edges} edges, lattice has {lat.n_edges}")
    if wired and not lat.has_ghost:
        raise GeometryError("wired boundary modes need a lattice with a ghost vertex")
    if wired:
        edge_index = np.arange(lat.n_edges)
    else:
        edge_index = np.arange(lat.n_lattice_edges)
    return _Graph(
        n_nodes=lat.n_nodes if wired else lat.n_vertices,
        ghost=lat.ghost if wired else None,
        edges=lat.edges[edge_index],
        edge_index=edge_index,
        probabilities=bonds.probabilities[edge_index],
        couplings=bonds.couplings[edge_index],
    )


def _bond_draw(graph: _Graph, spins: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Occupy each satisfied edge with probability p_e; return occupation and cluster labels"""
    agree = spins[graph.edges[:, 0]] == spins[graph.edges[:, 1]]
    occupied = agree & (rng.random(graph.edges.shape[0]) < graph.probabilities)
    return occupied, component_labels(graph.n_nodes, graph.edges[occupied])


def _recolor(graph: _Graph, labels: np.ndarray, q: int, rng: np.random.Generator) -> np.ndarray:
    colors = rng.integers(q, size=int(labels.max()) + 1)
    if graph.ghost is not None:
        colors[labels[graph.ghost]] = GHOST_STATE
    return colors[labels]


def _sw_step(graph: _Graph, spins: np.ndarray, q: int, rng: np.random.Generator) -> Measurement:
    occupied, labels = _bond_draw(graph, spins, rng)
    return Measurement(spins=_recolor(graph, labels, q, rng), occupied=occupied, labels=labels)


class _HeatBath:
    """Single-site heat-bath sweeps in vertex order; same stationary law as SW"""

    def __init__(self, graph: _Graph, n_vertices: int):
        self.graph = graph
        self.neighbours: List[np.ndarray] = []
        self.weights: List[np.ndarray] = []
        u, v = graph.edges[:, 0], graph.edges[:, 1]
        for x in range(n_vertices):
            mine_u = u == x
            mine_v = v == x
            self.neighbours.append(np.concatenate([v[mine_u], u[mine_v]]))
            self.weights.append(np.concatenate([graph.couplings[mine_u], graph.couplings[mine_v]]))

    def step(self, spins: np.ndarray, q: int, rng: np.random.Generator) -> Measurement:
        spins = spins.copy()
        for x, (neighbours, weights) in enumerate(zip(self.neighbours, self.weights)):
            field = np.bincount(spins[neighbours], weights=weights, minlength=q)
            boltzmann = np.exp(field - field.max())
            cumulative = np.cumsum(boltzmann)
            spins[x] = min(int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right")), q - 1)
        occupied, labels = _bond_draw(self.graph, spins, rng)
        return Measurement(spins=spins, occupied=occupied, labels=labels)


def _initial_spins(graph: _Graph, n_vertices: int, q: int, cfg: ChainConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.start == StartState.ORDERED:
        spins = np.full(graph.n_nodes, GHOST_STATE, dtype=np.int64)
    else:
        spins = rng.integers(q, size=graph.n_nodes).astype(np.int64)
    if graph.ghost is not None:
        spins[graph.ghost] = GHOST_STATE
    return spins


def _chain(lat: Lattice, bonds: BondMap, q: int, cfg: ChainConfig) -> Iterator[Measurement]:
    """Recorded sweeps of one chain: burn-in first, then every ``thinning``-th sweep"""
    if q < 1:
        raise InvalidParameterError(f"q must be a positive integer, got {q}")
    graph = _graph(lat, bonds, cfg.mode.wired)
    rng = make_rng(cfg.seed, cfg.stream_id)
    spins = _initial_spins(graph, lat.n_vertices, q, cfg, rng)

    if cfg.kernel == Kernel.HEAT_BATH:
        step = _HeatBath(graph, lat.n_vertices).step
    else:
        def step(current, q_, rng_):
            return _sw_step(graph, current, q_, rng_)

    for sweep in range(cfg.sweeps):
        measurement = step(spins, q, rng)
        spins = measurement.spins
        if sweep >= cfg.burn_in and (sweep - cfg.burn_in) % cfg.thinning == 0:
            yield measurement


def _full_occupation(lat: Lattice, graph: _Graph, occupied: np.ndarray) -> np.ndarray:
    full = np.zeros(lat.n_edges, dtype=bool)
    full[graph.edge_index] = occupied
    return full


class SamplerService:
    """Edwards-Sokal cluster sampler with a heat-bath cross-check kernel"""

    def sw_sweep(self, state: SpinConfig, lat: Lattice, bonds: BondMap,
                 rng: np.random.Generator) -> SpinConfig:
        """
        One Swendsen-Wang sweep.

        Satisfied edges are occupied with probability p_e, then every cluster
        is recoloured uniformly, except the ghost's cluster which keeps the
        ghost state.
        """
        wired = state.boundary.wired
        graph = _graph(lat, bonds, wired)
        spins = np.asarray(state.labels, dtype=np.int64)
        if wired:
            spins = np.append(spins, state.boundary.state)
        occupied, labels = _bond_draw(graph, spins, rng)
        colors = rng.integers(state.q, size=int(labels.max()) + 1)
        if wired:
            colors[labels[graph.ghost]] = state.boundary.state
        new_spins = colors[labels][:lat.n_vertices]
        return SpinConfig(labels=new_spins, q=state.q, boundary=state.boundary)

    def sample_configurations(self, lat: Lattice, bonds: BondMap, q: int,
                              cfg: ChainConfig) -> Iterator[SpinConfig]:
        """Post burn-in, thinned spin configurations (ghost excluded)"""
        boundary = BoundaryCondition.wired_to(GHOST_STATE) if cfg.mode.wired else BoundaryCondition.free()
        for measurement in _chain(lat, bonds, q, cfg):
            yield SpinConfig(labels=measurement.spins[:lat.n_vertices].copy(), q=q, boundary=boundary)

    def measurement_series(self, lat: Lattice, bonds: BondMap, q: int,
                           cfg: ChainConfig) -> Dict[str, np.ndarray]:
        """Origin state, origin<->ghost connectivity and edge occupation per recorded sweep"""
        origin = lat.origin
        graph = _graph(lat, bonds, cfg.mode.wired)
        states, connected, occupied = [], [], []
        for measurement in _chain(lat, bonds, q, cfg):
            states.append(measurement.spins[origin])
            occupied.append(_full_occupation(lat, graph, measurement.occupied))
            if cfg.mode.wired:
                connected.append(measurement.labels[origin] == measurement.labels[lat.ghost])
            else:
                connected.append(False)
        return {
            "origin_state": np.asarray(states, dtype=np.int64),
            "connected": np.asarray(connected, dtype=bool),
            "occupied": np.asarray(occupied, dtype=bool).reshape(-1, lat.n_edges),
        }

    def run_chain(self, lat: Lattice, bonds: BondMap, q: int, cfg: ChainConfig) -> MarginalEstimate:
        """
        Run one chain and estimate the origin marginal, theta and edge means.

        ``probabilities`` averages the conditional origin law given the edge
        configuration (plus when joined to the ghost, uniform otherwise);
        ``raw_probabilities`` are the plain spin frequencies.
        """
        if q < 1:
            raise InvalidParameterError(f"q must be a positive integer, got {q}")
        n = cfg.n_measurements
        origin = lat.origin
        uniform = np.full(q, 1.0 / q)
        plus = np.zeros(q)
        plus[GHOST_STATE] = 1.0

        theta_acc = BatchMeans(n, cfg.n_batches, 1)
        conditional_acc = BatchMeans(n, cfg.n_batches, q)
        raw_acc = BatchMeans(n, cfg.n_batches, q)
        edge_acc = BatchMeans(n, cfg.n_batches, lat.n_edges)

        started = time.perf_counter()
        logger.info(
            f"Starting {cfg.kernel.value} chain: V={lat.n_vertices} q={q} J={bonds.coupling:.6g} "
            f"eps={bonds.epsilon:.6g} mode={cfg.mode.value} seed={cfg.seed} stream={cfg.stream_id}"
        )
        graph = _graph(lat, bonds, cfg.mode.wired)
        for measurement in _chain(lat, bonds, q, cfg):
            connected = cfg.mode.wired and measurement.labels[origin] == measurement.labels[lat.ghost]
            theta_acc.add([1.0 if connected else 0.0])
            conditional_acc.add(plus if connected else uniform)
            one_hot = np.zeros(q)
            one_hot[measurement.spins[origin]] = 1.0
            raw_acc.add(one_hot)
            edge_acc.add(_full_occupation(lat, graph, measurement.occupied))

        elapsed = time.perf_counter() - started
        logger.info(f"Chain finished: {n} measurements in {elapsed:.2f}s, theta={theta_acc.mean[0]:.6g}")

        probabilities = conditional_acc.mean
        probabilities = probabilities / probabilities.sum()
        raw = raw_acc.mean
        return MarginalEstimate(
            q=q,
            probabilities=probabilities.tolist(),
            standard_errors=conditional_acc.standard_error.tolist(),
            theta=float(np.clip(theta_acc.mean[0], 0.0, 1.0)),
            theta_se=float(theta_acc.standard_error[0]),
            raw_probabilities=(raw / raw.sum()).tolist(),
            raw_standard_errors=raw_acc.standard_error.tolist(),
            edge_means=edge_acc.mean.tolist(),
            edge_standard_errors=edge_acc.standard_error.tolist(),
            n_samples=n,
            n_batches=cfg.n_batches,
            effective_sample_size=float(theta_acc.effective_sample_size()[0]),
            source=EstimateSource.MONTE_CARLO,
            metadata={
                "seed": cfg.seed,
                "stream_id": cfg.stream_id,
                "rng": RNG_ALGORITHM,
                "kernel": cfg.kernel.value,
                "mode": cfg.mode.value,
                "sweeps": cfg.sweeps,
                "burn_in": cfg.burn_in,
                "thinning": cfg.thinning,
                "start": cfg.start.value,
            },
        )

    def annulus_embed(self, inner_L: int, w: int, cut_r: int, d: int = 2, J: float = 1.0,
                      epsilon: float = 1.0) -> Tuple[Lattice, Cutset, BondMap]:
        """
        Embed the inner box in an outer box of side inner_L + 2w whose boundary
        is ghost-wired at full strength; Γ around the centred box of radius
        cut_r is weakened by epsilon.
        """
        if inner_L < 1 or inner_L % 2 == 0:
            raise GeometryError(f"inner side must be odd and positive, got {inner_L}")
        if w < 0:
            raise GeometryError(f"annulus width must be >= 0, got {w}")
        if 2 * cut_r + 1 > inner_L:
            raise GeometryError(f"cutset box of side {2 * cut_r + 1} does not fit in the inner box of side {inner_L}")
        if w == 0:
            logger.warning("Annulus of width 0 degenerates to the weakly-wired ghost mode")

        lat = build_lattice(d, inner_L + 2 * w, ghost=True)
        cut = build_cutset(lat, cut_r)
        if not separation_check(lat, cut):
            raise GeometryError("annulus cutset does not separate the inner box")
        return lat, cut, build_bonds(lat, J, epsilon, cut)


# Global service instance
sampler_service = SamplerService()
