"""
Finite-size robustness protocol: theta(L; epsilon, q, J) curves, total
variation from the free measure, the diagonal-limit scan and the Ising
contrast.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.core.exceptions import CapExceededError, GeometryError, InvalidParameterError
from app.core.geometry import build_boundary_cutset, build_cutset, build_lattice
from app.core.random_cluster import boundary_term_scale, build_bonds, origin_marginal_from_connectivity, selfdual_coupling
from app.core.statistics import weighted_slope
from app.models.bonds import BondMap
from app.models.chain import BoundaryMode, ChainConfig
from app.models.experiments import RobustnessCurve, ScanParameters, ScanPoint, TrendSummary, Verdict
from app.models.lattice import Lattice
from app.models.results import EstimateSource, MarginalEstimate
from app.services.exact_service import exact_service
from app.services.sampler_service import sampler_service

logger = logging.getLogger(__name__)

TREND_SIGNIFICANCE = 2.0


def default_radius(L: int) -> int:
    """Γ one site inside the boundary layer"""
    return (L - 3) // 2


def build_geometry(mode: BoundaryMode, d: int, L: int, J: float, epsilon: float,
                   r: Optional[int] = None, annulus_width: Optional[int] = None) -> Tuple[Lattice, BondMap]:
    """
    Lattice and bonds realising one boundary mode at (inner) side L.

    A free lattice at epsilon = 1 without an explicit r carries no cutset.
    """
    if mode == BoundaryMode.WIRED_GHOST:
        lat = build_lattice(d, L, ghost=True)
        return lat, build_bonds(lat, J)

    if mode == BoundaryMode.WEAKLY_WIRED_DIAGONAL:
        lat = build_lattice(d, L, ghost=True)
        return lat, build_bonds(lat, J, epsilon, build_boundary_cutset(lat))

    if not mode.needs_box_cutset(epsilon, r):
        lat = build_lattice(d, L)
        return lat, build_bonds(lat, J)

    radius = default_radius(L) if r is None else r
    if radius < 0:
        raise GeometryError(f"side L={L} is too small for a cutset")

    if mode == BoundaryMode.WEAKLY_WIRED_ANNULUS:
        width = math.ceil(L / 2) if annulus_width is None else annulus_width
        lat, _, bonds = sampler_service.annulus_embed(L, width, radius, d=d, J=J, epsilon=epsilon)
        return lat, bonds

    lat = build_lattice(d, L, ghost=mode.wired)
    return lat, build_bonds(lat, J, epsilon, build_cutset(lat, radius))


def tv_from_free(m: MarginalEstimate, q: Optional[int] = None) -> Tuple[float, float]:
    """
    Total-variation distance of the origin marginal to the uniform vector,
    with its propagated standard error.

    For connectivity mixtures the distance is theta * (1 - 1/q) and the error
    follows theta's; otherwise the componentwise errors are summed.
    """
    q = m.q if q is None else q
    if q != m.q:
        raise InvalidParameterError(f"marginal has {m.q} states, not {q}")
    p = np.asarray(m.probabilities)
    tv = 0.5 * float(np.abs(p - 1.0 / q).sum())

    mixture = origin_marginal_from_connectivity(m.theta, q).probabilities
    if np.allclose(p, mixture, rtol=0.0, atol=1e-9):
        return tv, m.theta_se * (1.0 - 1.0 / q)
    return tv, 0.5 * float(np.sum(m.standard_errors))


def exact_estimate(lat: Lattice, bonds: BondMap, q: int, wired: bool,
                   edge_cap: Optional[int] = None, workers: int = 1) -> MarginalEstimate:
    """Exact theta, origin marginal and edge marginals packaged as an estimate with zero errors"""
    result = exact_service.enumerate(lat, bonds, q, wired, edge_cap=edge_cap, workers=workers)
    estimate = origin_marginal_from_connectivity(result.theta, q)
    return estimate.model_copy(update={
        "source": EstimateSource.EXACT,
        "edge_means": result.edge_marginals,
        "edge_standard_errors": [0.0] * lat.n_edges,
        "metadata": dict(result.metadata, log_partition_function=result.log_partition_function),
    })


def _scan_point(job: dict) -> ScanPoint:
    """One (L, epsilon) point of a scan; runs in a worker process when the pool is used"""
    mode: BoundaryMode = job["mode"]
    cfg: ChainConfig = job["cfg"]
    L, q, d = job["L"], job["q"], job["d"]
    lat, bonds = build_geometry(mode, d, L, job["J"], job["epsilon"], job["r"], job["annulus_width"])

    estimate = None
    if job["use_exact"]:
        try:
            estimate = exact_estimate(lat, bonds, q, mode.wired, job["edge_cap"])
        except CapExceededError as e:
            logger.info(f"L={L}: {e}; falling back to Monte Carlo")
    if estimate is None:
        estimate = sampler_service.run_chain(lat, bonds, q, cfg)

    tv, tv_se = tv_from_free(estimate, q)
    cutset = bonds.cutset
    return ScanPoint(
        L=L,
        r=cutset.radius if cutset is not None else None,
        theta=estimate.theta,
        theta_se=estimate.theta_se,
        tv=tv,
        tv_se=tv_se,
        n_samples=estimate.n_samples,
        seed=cfg.seed,
        stream_id=cfg.stream_id,
        gamma_size=cutset.size if cutset is not None else 0,
        boundary_term=boundary_term_scale(bonds, d),
        source=estimate.source,
    )


class RobustnessService:
    """Scans that approximate the large-Γ limit by finite-size trends"""

    def trend(self, points: Sequence[ScanPoint], significance: float = TREND_SIGNIFICANCE) -> TrendSummary:
        """Weighted least-squares slope of theta against L with a significance verdict"""
        if points and all(p.theta == 0.0 and p.theta_se == 0.0 for p in points):
            return TrendSummary(verdict=Verdict.FLAT_AT_ZERO, slope=0.0, slope_se=0.0, significance=significance)
        if len(points) < 2:
            return TrendSummary(verdict=Verdict.FLAT, significance=significance)

        slope, slope_se = weighted_slope(
            [p.L for p in points], [p.theta for p in points], [p.theta_se for p in points]
        )
        if slope > significance * slope_se:
            verdict = Verdict.INCREASING
        elif slope < -significance * slope_se:
            verdict = Verdict.DECREASING
        else:
            verdict = Verdict.FLAT
        return TrendSummary(verdict=verdict, slope=slope, slope_se=slope_se, significance=significance)

    def robustness_scan(self, d: int, q: int, J: float, epsilon: float, L_list: Sequence[int],
                        mode: BoundaryMode, cfg: ChainConfig, r: Optional[int] = None,
                        annulus_width: Optional[int] = None, use_exact: bool = False,
                        workers: Optional[int] = None, edge_cap: Optional[int] = None) -> RobustnessCurve:
        """
        theta and TV-from-free for each L; Γ sits one site inside the
        boundary unless ``r`` is given. Point i runs on stream
        ``cfg.stream_id + i``.
        """
        L_list = list(L_list)
        if any(L % 2 == 0 for L in L_list):
            raise GeometryError(f"scan side lengths must be odd, got {L_list}")
        if any(b <= a for a, b in zip(L_list, L_list[1:])):
            raise InvalidParameterError(f"scan side lengths must be strictly increasing, got {L_list}")
        if not 0.0 <= epsilon <= 1.0:
            raise InvalidParameterError(f"epsilon must lie in [0,1], got {epsilon}")

        jobs: List[dict] = [
            {
                "mode": mode, "d": d, "q": q, "J": J, "epsilon": epsilon, "L": L, "r": r,
                "annulus_width": annulus_width, "use_exact": use_exact, "edge_cap": edge_cap,
                "cfg": cfg.model_copy(update={"mode": mode, "stream_id": cfg.stream_id + i}),
            }
            for i, L in enumerate(L_list)
        ]

        started = time.perf_counter()
        logger.info(f"Scan d={d} q={q} J={J:.6g} eps={epsilon} mode={mode.value} L={L_list}")
        workers = settings.workers if workers is None else workers
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                points = list(pool.map(_scan_point, jobs))
        else:
            points = [_scan_point(job) for job in jobs]

        curve = RobustnessCurve(
            parameters=ScanParameters(d=d, q=q, J=J, epsilon=epsilon, mode=mode),
            points=points,
            trend=self.trend(points),
        )
        logger.info(f"Scan finished in {time.perf_counter() - started:.1f}s: {curve.trend.verdict.value}")
        return curve

    def diagonal_limit_scan(self, d: int, q: int, J: float, epsilon: float, L_list: Sequence[int],
                            cfg: ChainConfig, use_exact: bool = False, workers: Optional[int] = None,
                            edge_cap: Optional[int] = None) -> RobustnessCurve:
        """Γ on the lattice boundary itself, wired directly outside Γ"""
        return self.robustness_scan(d, q, J, epsilon, L_list, BoundaryMode.WEAKLY_WIRED_DIAGONAL, cfg,
                                    use_exact=use_exact, workers=workers, edge_cap=edge_cap)

    def ising_contrast(self, J_factor: float, epsilon: float, L_list: Sequence[int], cfg: ChainConfig,
                       d: int = 2, use_exact: bool = False, workers: Optional[int] = None,
                       edge_cap: Optional[int] = None) -> RobustnessCurve:
        """q = 2 below the critical temperature: J = J_factor * ln(1 + sqrt 2)"""
        if J_factor <= 1.0:
            raise InvalidParameterError(f"the Ising contrast runs below T_c: J_factor must exceed 1, got {J_factor}")
        J = J_factor * selfdual_coupling(2)
        return self.robustness_scan(d, 2, J, epsilon, L_list, BoundaryMode.WEAKLY_WIRED_GHOST, cfg,
                                    use_exact=use_exact, workers=workers, edge_cap=edge_cap)

    @staticmethod
    def epsilon_separation(weak: RobustnessCurve, strong: RobustnessCurve, L: int) -> float:
        """(theta_strong - theta_weak) at L in units of the combined standard error"""
        a, b = weak.point_at(L), strong.point_at(L)
        difference = b.theta - a.theta
        spread = math.hypot(a.theta_se, b.theta_se)
        if spread == 0.0:
            return 0.0 if difference == 0.0 else math.copysign(math.inf, difference)
        return difference / spread


# Global service instance
robustness_service = RobustnessService()
