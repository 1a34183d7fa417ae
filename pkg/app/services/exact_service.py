"""
Exhaustive enumeration on tiny lattices: exact random-cluster sums, exact
spin sums and event-wise FKG comparisons.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from app.config import settings
from app.core.exceptions import CapExceededError, InvalidParameterError, NonComparableBondsError
from app.core.random_cluster import (
    LOG_ZERO,
    batch_cluster_labels,
    count_from_labels,
    origin_marginal_from_connectivity,
)
from app.models.bonds import BondMap, BoundaryCondition
from app.models.lattice import Lattice
from app.models.results import (
    DominationReport,
    EventCheck,
    EventKind,
    EventSpec,
    ExactResult,
)

logger = logging.getLogger(__name__)


@dataclass
class _EnumerationPlan:
    """Which edges are enumerated, fixed open or fixed closed"""
    n_nodes: int
    origin: int
    ghost: Optional[int]
    active_edges: np.ndarray      # indices into lat.edges that take part
    variable: np.ndarray          # positions within active_edges that are enumerated
    fixed_on: np.ndarray          # positions within active_edges that are always occupied
    log_odds: np.ndarray          # ln p - ln(1-p) for the variable edges
    log_base: float               # sum of ln(1-p) over variable edges
    log_q: float

    @property
    def n_variable(self) -> int:
        return int(self.variable.shape[0])


@dataclass
class _PartialSums:
    log_z: float
    log_edges: np.ndarray
    log_theta: float
    log_events: np.ndarray


def _plan(lat: Lattice, bonds: BondMap, q: float, wired: bool) -> _EnumerationPlan:
    if bonds.n_edges != lat.n_edges:
        raise InvalidParameterError(f"bond map has {bonds.n_edges} edges, lattice has {lat.n_edges}")
    if math.isnan(q) or q <= 0:
        raise InvalidParameterError(f"cluster weight q must be positive, got {q}")

    use_ghost = wired and lat.has_ghost
    if use_ghost:
        active_edges = np.arange(lat.n_edges)
    else:
        active_edges = np.arange(lat.n_lattice_edges)
    p = bonds.probabilities[active_edges]
    variable = np.flatnonzero((p > 0) & (p < 1))
    fixed_on = np.flatnonzero(p >= 1)
    p_var = p[variable]

    return _EnumerationPlan(
        n_nodes=lat.n_nodes if use_ghost else lat.n_vertices,
        origin=lat.origin,
        ghost=lat.ghost if use_ghost else None,
        active_edges=active_edges,
        variable=variable,
        fixed_on=fixed_on,
        log_odds=np.log(p_var) - np.log1p(-p_var),
        log_base=float(np.log1p(-p_var).sum()),
        log_q=math.log(q),
    )


def _event_matrix(occupied: np.ndarray, connected: np.ndarray,
                  events: Sequence[EventSpec], lat_edge_position: Dict[int, int]) -> np.ndarray:
    columns = []
    for event in events:
        if event.kind == EventKind.ORIGIN_TO_GHOST:
            columns.append(connected)
        elif event.kind == EventKind.EDGE_OCCUPIED:
            position = lat_edge_position.get(event.edge)
            if position is None:
                columns.append(np.zeros(occupied.shape[0], dtype=bool))
            else:
                columns.append(occupied[:, position])
        else:
            columns.append(occupied.sum(axis=1) >= event.threshold)
    if not columns:
        return np.zeros((occupied.shape[0], 0), dtype=bool)
    return np.stack(columns, axis=1)


def _enumerate_chunk(plan: _EnumerationPlan, edges: np.ndarray, events: Sequence[EventSpec],
                     start: int, stop: int, block_size: int) -> _PartialSums:
    """Accumulate log-space sums over configurations start..stop-1"""
    n_var = plan.n_variable
    bit_shifts = np.arange(n_var, dtype=np.int64)
    lat_edge_position = {int(e): i for i, e in enumerate(plan.active_edges)}

    log_z = LOG_ZERO
    log_edges = np.full(n_var, LOG_ZERO)
    log_theta = LOG_ZERO
    log_events = np.full(len(events), LOG_ZERO)

    for block_start in range(start, stop, block_size):
        index = np.arange(block_start, min(block_start + block_size, stop), dtype=np.int64)
        bits = ((index[:, None] >> bit_shifts) & 1).astype(bool)

        occupied = np.zeros((index.shape[0], plan.active_edges.shape[0]), dtype=bool)
        occupied[:, plan.variable] = bits
        occupied[:, plan.fixed_on] = True

        labels = batch_cluster_labels(plan.n_nodes, edges, occupied)
        log_w = plan.log_base + bits @ plan.log_odds + count_from_labels(labels) * plan.log_q
        if plan.ghost is not None:
            connected = labels[:, plan.origin] == labels[:, plan.ghost]
        else:
            connected = np.zeros(index.shape[0], dtype=bool)
        event_hits = _event_matrix(occupied, connected, events, lat_edge_position)

        shift = log_w.max()
        weights = np.exp(log_w - shift)
        with np.errstate(divide="ignore"):
            log_z = np.logaddexp(log_z, math.log(weights.sum()) + shift)
            log_edges = np.logaddexp(log_edges, np.log(weights @ bits) + shift)
            log_theta = np.logaddexp(log_theta, np.log(weights[connected].sum()) + shift)
            log_events = np.logaddexp(log_events, np.log(weights @ event_hits) + shift)

    return _PartialSums(float(log_z), log_edges, float(log_theta), log_events)


def _run_chunk(args) -> _PartialSums:
    return _enumerate_chunk(*args)


class ExactOracleService:
    """Brute-force random-cluster and Potts sums for lattices within the caps"""

    def __init__(self):
        self.edge_cap = settings.enumeration_edge_cap
        self.spin_cap = settings.spin_enumeration_cap
        self.block_size = settings.enumeration_block_size

    def _sums(self, lat: Lattice, bonds: BondMap, q: float, wired: bool,
              events: Sequence[EventSpec], edge_cap: Optional[int], workers: Optional[int]):
        cap = self.edge_cap if edge_cap is None else edge_cap
        plan = _plan(lat, bonds, q, wired)
        if plan.n_variable > cap:
            raise CapExceededError("enumeration edge cap", cap, plan.n_variable)

        edges = lat.edges[plan.active_edges]
        total = 1 << plan.n_variable
        workers = settings.workers if workers is None else workers
        n_chunks = max(1, min(workers, total // self.block_size))
        bounds = [total * i // n_chunks for i in range(n_chunks + 1)]
        jobs = [(plan, edges, list(events), bounds[i], bounds[i + 1], self.block_size)
                for i in range(n_chunks)]

        if n_chunks > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(_run_chunk, jobs))
        else:
            parts = [_run_chunk(job) for job in jobs]

        # ordered reduction
        merged = parts[0]
        for part in parts[1:]:
            merged = _PartialSums(
                float(np.logaddexp(merged.log_z, part.log_z)),
                np.logaddexp(merged.log_edges, part.log_edges),
                float(np.logaddexp(merged.log_theta, part.log_theta)),
                np.logaddexp(merged.log_events, part.log_events),
            )
        return plan, total, merged

    def enumerate(self, lat: Lattice, bonds: BondMap, q: float, wired: bool,
                  edge_cap: Optional[int] = None, workers: Optional[int] = None) -> ExactResult:
        """Exact FK partition function, edge marginals, theta and origin marginal"""
        plan, total, sums = self._sums(lat, bonds, q, wired, [], edge_cap, workers)

        edge_marginals = np.zeros(lat.n_edges)
        active = plan.active_edges
        edge_marginals[active[plan.variable]] = np.exp(sums.log_edges - sums.log_z)
        edge_marginals[active[plan.fixed_on]] = 1.0
        edge_marginals = np.clip(edge_marginals, 0.0, 1.0)

        theta = min(1.0, math.exp(sums.log_theta - sums.log_z)) if plan.ghost is not None else 0.0
        origin_marginal = None
        if float(q).is_integer():
            origin_marginal = origin_marginal_from_connectivity(theta, int(q)).probabilities

        logger.debug(f"Enumerated {total} configurations: ln Z = {sums.log_z:.6f}, theta = {theta:.6g}")
        return ExactResult(
            log_partition_function=sums.log_z,
            theta=theta,
            edge_marginals=edge_marginals.tolist(),
            origin_marginal=origin_marginal,
            q=q,
            wired=wired,
            n_configurations=total,
            metadata={
                "d": lat.dimension,
                "L": lat.side,
                "ghost": lat.has_ghost,
                "n_edges": lat.n_edges,
                "J": bonds.coupling,
                "epsilon": bonds.epsilon,
                "cutset_size": bonds.cutset.size if bonds.cutset is not None else 0,
                "boundary": "wired" if wired else "free",
            },
        )

    def event_probabilities(self, lat: Lattice, bonds: BondMap, q: float, wired: bool,
                            events: Sequence[EventSpec], edge_cap: Optional[int] = None) -> List[float]:
        _, _, sums = self._sums(lat, bonds, q, wired, events, edge_cap, workers=1)
        return np.clip(np.exp(sums.log_events - sums.log_z), 0.0, 1.0).tolist()

    @staticmethod
    def event_library(lat: Lattice, max_threshold: Optional[int] = None) -> List[EventSpec]:
        """origin<->ghost, every single-edge event and every occupied-count threshold"""
        events = [EventSpec(kind=EventKind.ORIGIN_TO_GHOST)] if lat.has_ghost else []
        events += [EventSpec(kind=EventKind.EDGE_OCCUPIED, edge=e) for e in range(lat.n_edges)]
        top = lat.n_edges if max_threshold is None else max_threshold
        events += [EventSpec(kind=EventKind.OCCUPIED_AT_LEAST, threshold=k) for k in range(top + 1)]
        return events

    def check_event_domination(self, lat: Lattice, bonds_a: BondMap, bonds_b: BondMap, q: float,
                               events: Optional[Sequence[EventSpec]] = None,
                               wired: Optional[bool] = None, tolerance: float = 1e-12,
                               edge_cap: Optional[int] = None) -> DominationReport:
        """P_A(event) >= P_B(event) - tolerance for each increasing event, A the stronger bonds"""
        if bonds_a.n_edges != lat.n_edges or bonds_b.n_edges != lat.n_edges:
            raise NonComparableBondsError("both bond maps must live on the given lattice")
        if (bonds_a.couplings < bonds_b.couplings).any():
            weaker = int(np.flatnonzero(bonds_a.couplings < bonds_b.couplings)[0])
            raise NonComparableBondsError(f"bonds A are weaker than bonds B on edge {weaker}")

        wired = lat.has_ghost if wired is None else wired
        events = self.event_library(lat) if events is None else list(events)
        probs_a = self.event_probabilities(lat, bonds_a, q, wired, events, edge_cap)
        probs_b = self.event_probabilities(lat, bonds_b, q, wired, events, edge_cap)

        checks = [
            EventCheck(event=event.label, probability_a=a, probability_b=b, holds=a >= b - tolerance)
            for event, a, b in zip(events, probs_a, probs_b)
        ]
        report = DominationReport(checks=checks, passed=all(c.holds for c in checks), tolerance=tolerance)
        if not report.passed:
            failed = [c.event for c in checks if not c.holds]
            logger.warning(f"Event domination failed for {failed}")
        return report

    def spin_enumerate(self, lat: Lattice, bonds: BondMap, q: int, bc: BoundaryCondition,
                       spin_cap: Optional[int] = None) -> List[float]:
        """Origin marginal from direct Potts sums with H = -sum J_e delta(s_x, s_y)"""
        cap = self.spin_cap if spin_cap is None else spin_cap
        n_vertices = lat.n_vertices
        if q < 1 or not float(q).is_integer():
            raise InvalidParameterError(f"spin enumeration needs an integer q >= 1, got {q}")
        if bc.wired and bc.state >= q:
            raise InvalidParameterError(f"ghost state {bc.state} outside 0..{q - 1}")
        if q ** n_vertices > cap:
            raise CapExceededError("spin enumeration cap", cap, q ** n_vertices)

        lattice_edges = lat.edges[:lat.n_lattice_edges]
        lattice_J = bonds.couplings[:lat.n_lattice_edges]
        ghost_owners = lat.edges[lat.n_lattice_edges:, 0]
        ghost_J = bonds.couplings[lat.n_lattice_edges:]
        use_ghost = bc.wired and lat.has_ghost

        place = q ** np.arange(n_vertices, dtype=np.int64)
        total = q ** n_vertices
        log_sums = np.full(q, LOG_ZERO)
        for block_start in range(0, total, self.block_size):
            index = np.arange(block_start, min(block_start + self.block_size, total), dtype=np.int64)
            spins = (index[:, None] // place) % q
            energy = (spins[:, lattice_edges[:, 0]] == spins[:, lattice_edges[:, 1]]) @ lattice_J
            if use_ghost:
                energy = energy + (spins[:, ghost_owners] == bc.state) @ ghost_J
            shift = energy.max()
            per_state = np.bincount(spins[:, lat.origin], weights=np.exp(energy - shift), minlength=q)
            with np.errstate(divide="ignore"):
                log_sums = np.logaddexp(log_sums, np.log(per_state) + shift)

        marginal = np.exp(log_sums - logsumexp(log_sums))
        return (marginal / marginal.sum()).tolist()


# Global service instance
exact_service = ExactOracleService()
