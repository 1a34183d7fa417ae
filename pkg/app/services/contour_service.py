"""
Two-dimensional contour machinery: site classes, square classes and
contours, the constrained partition-function check and the contour census.
"""

import itertools
import logging
import math
from collections import Counter
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from app.config import settings
from app.core.exceptions import CapExceededError, GeometryError, InvalidParameterError
from app.core.random_cluster import selfdual_coupling
from app.core.statistics import weighted_slope
from app.core.union_find import UnionFind
from app.models.bonds import BondMap, SpinConfig
from app.models.chain import ChainConfig
from app.models.contours import (
    BklCheck,
    BklTable,
    CensusRow,
    ContourHistogram,
    ContourSet,
    SiteClassification,
    SquareClass,
)
from app.models.lattice import Lattice
from app.services.sampler_service import sampler_service

logger = logging.getLogger(__name__)

DEFAULT_PEIERLS_CONSTANTS = (1.0, 2.0, 3.0)

# 8-connectivity for contour squares, 4-connectivity (scipy's default) for their complement
CORNER_SHARING = np.ones((3, 3), dtype=bool)


def _require_planar(lat: Lattice) -> None:
    if lat.dimension != 2:
        raise GeometryError(f"contour analysis is defined for d=2 only, got d={lat.dimension}")


def _edge_lookup(lat: Lattice) -> np.ndarray:
    """(d, V) table: index of the lattice edge leaving each vertex upwards along each axis, -1 if none"""
    lookup = np.full((lat.dimension, lat.n_vertices), -1, dtype=np.int64)
    lattice_edges = lat.edges[:lat.n_lattice_edges]
    step = lattice_edges[:, 1] - lattice_edges[:, 0]
    for axis in range(lat.dimension):
        selected = np.flatnonzero(step == lat.side ** (lat.dimension - 1 - axis))
        lookup[axis, lattice_edges[selected, 0]] = selected
    return lookup


def _classify(n_vertices: int, edges: np.ndarray, ordered: np.ndarray, weak: np.ndarray) -> SiteClassification:
    # edges may end at the ghost (index n_vertices); its row is dropped
    counts = np.bincount(edges[ordered].ravel(), minlength=n_vertices + 1)[:n_vertices]
    touches = np.zeros(n_vertices + 1, dtype=bool)
    touches[edges[weak].ravel()] = True
    touches = touches[:n_vertices]

    classes = np.bincount(np.minimum(counts, 4), minlength=5)
    return SiteClassification(
        ordered_counts=counts,
        touches_weak=touches,
        e0=int(classes[0]),
        e1=int(classes[1]),
        e2=int(classes[2]),
        e3=int(classes[3]),
        e4=int(classes[4]),
        e4_prime=int(np.count_nonzero((counts >= 4) & touches)),
    )


def _warn_unless_selfdual(bonds: BondMap, q: int) -> None:
    if not math.isclose(bonds.coupling, selfdual_coupling(q), rel_tol=1e-9):
        logger.warning(f"J={bonds.coupling:.6g} is not the self-dual coupling for q={q}")


def _require_within_caps(lat: Lattice, q: int, cap: int, expansion_terms: int) -> None:
    """q^V spin states and the subset-expansion terms the colouring counts will run"""
    if q ** lat.n_vertices > cap:
        raise CapExceededError("spin enumeration cap", cap, q ** lat.n_vertices)
    if expansion_terms > cap:
        raise CapExceededError("colouring expansion cap", cap, expansion_terms)


def _count_colourings(n_vertices: int, edges: np.ndarray, broken: np.ndarray, q: int) -> int:
    """
    Colourings in 0..q-1 equal across unbroken and different across broken edges.

    Unbroken edges are contracted; the proper colourings of the quotient
    graph are then counted exactly by the subset expansion
    sum_A (-1)^|A| q^c(A) over sets A of broken edges.
    """
    contracted = UnionFind(n_vertices)
    for u, v in edges[~broken]:
        contracted.union(int(u), int(v))

    roots = sorted({contracted.find(v) for v in range(n_vertices)})
    node_of = {root: i for i, root in enumerate(roots)}
    quotient = set()
    for u, v in edges[broken]:
        a, b = node_of[contracted.find(int(u))], node_of[contracted.find(int(v))]
        if a == b:
            return 0
        quotient.add((min(a, b), max(a, b)))

    quotient_edges = sorted(quotient)
    total = 0
    for size in range(len(quotient_edges) + 1):
        for subset in itertools.combinations(quotient_edges, size):
            joined = UnionFind(len(roots))
            for a, b in subset:
                joined.union(a, b)
            total += (-1) ** size * q ** joined.components
    return total


class ContourService:
    """Site and square classification, constrained partition functions and the contour census (d = 2)"""

    def classify_sites(self, sigma: SpinConfig, lat: Lattice, bonds: BondMap) -> SiteClassification:
        """
        Count ordered bonds per site. Under a wired boundary the ghost edges
        take part with the ghost carrying the boundary state.
        """
        _require_planar(lat)
        labels = np.asarray(sigma.labels, dtype=np.int64)
        if labels.shape[0] != lat.n_vertices:
            raise InvalidParameterError(f"configuration has {labels.shape[0]} spins, lattice has {lat.n_vertices}")

        with_ghost = sigma.boundary.wired and lat.has_ghost
        n_used = lat.n_edges if with_ghost else lat.n_lattice_edges
        edges = lat.edges[:n_used]
        spins = np.append(labels, sigma.boundary.state) if with_ghost else labels
        ordered = spins[edges[:, 0]] == spins[edges[:, 1]]
        return _classify(lat.n_vertices, edges, ordered, bonds.weak_edge_mask[:n_used])

    @staticmethod
    def bkl_rhs(counts: SiteClassification, q: float, epsilon: float) -> float:
        """(E0 + E4 - E4') ln q + (3/4 + ε)(E1 + E2 + E3 + E4') ln q"""
        if q <= 1:
            raise InvalidParameterError(f"q must exceed 1, got {q}")
        if not 0.0 <= epsilon <= 1.0:
            raise InvalidParameterError(f"epsilon must lie in [0,1], got {epsilon}")
        log_q = math.log(q)
        free_sites = counts.e0 + counts.e4 - counts.e4_prime
        mixed_sites = counts.e1 + counts.e2 + counts.e3 + counts.e4_prime
        return free_sites * log_q + (0.75 + epsilon) * mixed_sites * log_q

    def constrained_partition_check(self, lat: Lattice, bonds: BondMap, q: int, broken: Sequence[bool],
                                    epsilon: Optional[float] = None,
                                    spin_cap: Optional[int] = None) -> BklCheck:
        """
        Z(Λ|u,b) = (compatible colourings) * exp(sum of J_e over unbroken bonds)
        against the site-class bound, free boundary.

        ``epsilon`` replaces the bond-weakening factor in the bound's exponent
        when the two are read as independent constants.
        """
        _require_planar(lat)
        broken = np.asarray(broken, dtype=bool)
        n_edges = lat.n_lattice_edges
        if broken.shape != (n_edges,):
            raise InvalidParameterError(f"pattern has {broken.shape[0]} entries, lattice has {n_edges} bonds")
        cap = settings.spin_enumeration_cap if spin_cap is None else spin_cap
        _require_within_caps(lat, q, cap, 2 ** int(broken.sum()))
        _warn_unless_selfdual(bonds, q)
        return self._pattern_check(lat, bonds, q, broken, epsilon)

    def _pattern_check(self, lat: Lattice, bonds: BondMap, q: int, broken: np.ndarray,
                       epsilon: Optional[float]) -> BklCheck:
        n_edges = lat.n_lattice_edges
        edges = lat.edges[:n_edges]
        colourings = _count_colourings(lat.n_vertices, edges, broken, q)
        if colourings > 0:
            log_z = math.log(colourings) + float(bonds.couplings[:n_edges][~broken].sum())
        else:
            log_z = float("-inf")

        classes = _classify(lat.n_vertices, edges, ~broken, bonds.weak_edge_mask[:n_edges])
        rhs = self.bkl_rhs(classes, q, bonds.epsilon if epsilon is None else epsilon)
        return BklCheck(
            broken=broken.tolist(),
            log_z=log_z,
            rhs=rhs,
            holds=bool(log_z <= rhs + 1e-12),
            n_colourings=colourings,
            classes=classes.as_dict(),
        )

    def bkl_table(self, lat: Lattice, bonds: BondMap, q: int, epsilon: Optional[float] = None,
                  spin_cap: Optional[int] = None) -> BklTable:
        """Every broken/unbroken pattern of a small lattice, all-unbroken first"""
        _require_planar(lat)
        cap = settings.spin_enumeration_cap if spin_cap is None else spin_cap
        # sum over patterns of 2^|broken| is 3^|E|
        _require_within_caps(lat, q, cap, 3 ** lat.n_lattice_edges)

        _warn_unless_selfdual(bonds, q)
        checks = [
            self._pattern_check(lat, bonds, q, np.array(pattern, dtype=bool), epsilon)
            for pattern in itertools.product((False, True), repeat=lat.n_lattice_edges)
        ]
        table = BklTable(q=q, coupling=bonds.coupling,
                         epsilon=bonds.epsilon if epsilon is None else epsilon, checks=checks)
        logger.info(f"BKL table: {table.n_patterns} patterns, {table.n_violations} above the bound")
        return table

    def extract_contours(self, sigma: SpinConfig, lat: Lattice, bonds: BondMap) -> ContourSet:
        """
        Classify unit squares and join contour squares sharing a corner.

        A contour surrounds the origin when none of the squares touching the
        origin lies in the unbounded component of the contour's complement.

        Unit squares are built from lattice bonds only. Ghost edges bound no
        square, so a wired boundary enters only through the spins it has
        forced on the boundary sites, and the boundary ring does not close a
        contour.
        """
        _require_planar(lat)
        L = lat.side
        if L < 2:
            return ContourSet(square_classes=np.zeros((0, 0), dtype=np.int8))
        labels = np.asarray(sigma.labels, dtype=np.int64)

        lattice_edges = lat.edges[:lat.n_lattice_edges]
        ordered = labels[lattice_edges[:, 0]] == labels[lattice_edges[:, 1]]
        weak = bonds.weak_edge_mask[:lat.n_lattice_edges]

        lookup = _edge_lookup(lat)
        a, b = np.meshgrid(np.arange(L - 1), np.arange(L - 1), indexing="ij")
        corner = a * L + b
        square_edges = np.stack(
            [lookup[0, corner], lookup[0, corner + 1], lookup[1, corner], lookup[1, corner + L]], axis=-1
        )
        n_ordered = ordered[square_edges].sum(axis=-1)
        touches_weak = weak[square_edges].any(axis=-1)

        classes = np.full((L - 1, L - 1), SquareClass.IRREGULAR, dtype=np.int8)
        classes[n_ordered == 4] = SquareClass.ORDERED
        classes[n_ordered == 0] = SquareClass.DISORDERED
        classes[(n_ordered == 4) & touches_weak] = SquareClass.CONTOUR

        contour_set = ContourSet(square_classes=classes)
        components, n_components = ndimage.label(contour_set.contour_mask, structure=CORNER_SHARING)
        if n_components == 0:
            return contour_set

        centre = (L - 1) // 2
        near = sorted({min(max(c, 0), L - 2) for c in (centre - 1, centre)})
        origin_squares = [(i, j) for i in near for j in near]

        sizes = np.bincount(components.ravel(), minlength=n_components + 1)[1:]
        surrounds: List[bool] = []
        for k, box in enumerate(ndimage.find_objects(components), start=1):
            inside_box = box[0].start <= near[0] and near[-1] < box[0].stop \
                and box[1].start <= near[0] and near[-1] < box[1].stop
            surrounds.append(inside_box and self._encloses(components == k, origin_squares))

        contour_set.component_sizes = [int(s) for s in sizes]
        contour_set.surrounds_origin = surrounds
        return contour_set

    @staticmethod
    def _encloses(component: np.ndarray, squares: List[Tuple[int, int]]) -> bool:
        outside, _ = ndimage.label(np.pad(~component, 1, constant_values=True))
        unbounded = outside[0, 0]
        return all(component[i, j] or outside[i + 1, j + 1] != unbounded for i, j in squares)

    def contour_census(self, samples: Iterable[SpinConfig], lat: Lattice, bonds: BondMap,
                       constants: Sequence[float] = DEFAULT_PEIERLS_CONSTANTS,
                       q: Optional[int] = None) -> ContourHistogram:
        """
        Empirical P(a contour of size ℓ surrounds the origin) per ℓ with
        binomial standard errors, next to 2ℓ ln 2 - (Cℓ/4) ln q for each C.
        """
        _require_planar(lat)
        hits: Counter = Counter()
        n_samples = 0
        for sigma in samples:
            q = sigma.q if q is None else q
            n_samples += 1
            hits.update(set(self.extract_contours(sigma, lat, bonds).surrounding_sizes))
        if q is None:
            raise InvalidParameterError("an empty sample stream needs an explicit q")

        rows = []
        for length in sorted(hits):
            p = hits[length] / n_samples
            rows.append(CensusRow(
                length=length,
                count=hits[length],
                probability=p,
                standard_error=math.sqrt(p * (1.0 - p) / n_samples),
                log_bounds={
                    f"{c:g}": 2 * length * math.log(2) - c * length / 4 * math.log(q) for c in constants
                },
            ))
        logger.info(f"Contour census: {n_samples} samples, {len(rows)} contour sizes around the origin")
        return ContourHistogram(q=q, n_samples=n_samples, constants=list(constants), rows=rows)

    def run_census(self, lat: Lattice, bonds: BondMap, q: int, cfg: ChainConfig,
                   constants: Sequence[float] = DEFAULT_PEIERLS_CONSTANTS) -> ContourHistogram:
        """Census over the recorded configurations of one chain"""
        samples = sampler_service.sample_configurations(lat, bonds, q, cfg)
        return self.contour_census(samples, lat, bonds, constants, q=q)

    @staticmethod
    def census_log_slope(histogram: ContourHistogram) -> Tuple[float, float]:
        """Weighted least-squares slope of ln P(ℓ) against ℓ and its standard error"""
        rows = [row for row in histogram.rows if row.count > 0]
        if len(rows) < 2:
            raise InvalidParameterError(f"a census slope needs two observed contour sizes, got {len(rows)}")
        return weighted_slope(
            [row.length for row in rows],
            [math.log(row.probability) for row in rows],
            [row.standard_error / row.probability for row in rows],
        )


# Global service instance
contour_service = ContourService()
