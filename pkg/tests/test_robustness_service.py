import math

import pytest

from app.core.exceptions import CapExceededError, GeometryError, InvalidParameterError
from app.core.geometry import build_cutset, build_lattice
from app.core.random_cluster import build_bonds, edge_probability, origin_marginal_from_connectivity, selfdual_coupling
from app.models.chain import BoundaryMode, ChainConfig
from app.models.experiments import RobustnessCurve, ScanParameters, ScanPoint, TrendSummary, Verdict
from app.models.lattice import CutsetKind
from app.models.results import EstimateSource, MarginalEstimate
from app.services.exact_service import exact_service
from app.services.robustness_service import build_geometry, exact_estimate, robustness_service, tv_from_free


def point(L, theta, se, stream_id=0):
    return ScanPoint(
        L=L, r=0, theta=theta, theta_se=se, tv=theta / 2, tv_se=se / 2, n_samples=100, seed=1,
        stream_id=stream_id, gamma_size=4, boundary_term=1.0, source=EstimateSource.MONTE_CARLO,
    )


def curve(points, epsilon=1.0):
    return RobustnessCurve(
        parameters=ScanParameters(d=2, q=2, J=1.0, epsilon=epsilon, mode=BoundaryMode.WEAKLY_WIRED_GHOST),
        points=points,
        trend=TrendSummary(verdict=Verdict.FLAT),
    )


@pytest.fixture
def quick_chain():
    return ChainConfig(sweeps=400, burn_in=100, seed=3)


def test_tv_of_a_connectivity_mixture():
    m = origin_marginal_from_connectivity(0.4, 25).model_copy(update={"theta_se": 0.02})
    tv, se = tv_from_free(m)
    assert tv == pytest.approx(0.384)
    assert se == pytest.approx(0.02 * 0.96)


def test_tv_of_a_plain_marginal():
    m = MarginalEstimate(q=2, probabilities=[0.7, 0.3], standard_errors=[0.01, 0.01], theta=0.2)
    tv, se = tv_from_free(m)
    assert tv == pytest.approx(0.2)
    assert se == pytest.approx(0.01)


def test_tv_rejects_mismatched_q():
    with pytest.raises(InvalidParameterError):
        tv_from_free(origin_marginal_from_connectivity(0.1, 3), q=4)


@pytest.mark.parametrize("thetas, verdict", [
    ([0.1, 0.2, 0.3], Verdict.INCREASING),
    ([0.5, 0.4, 0.3], Verdict.DECREASING),
    ([0.2, 0.21, 0.2], Verdict.FLAT),
])
def test_trend_verdicts(thetas, verdict):
    points = [point(L, theta, 0.01) for L, theta in zip((9, 17, 33), thetas)]
    assert robustness_service.trend(points).verdict == verdict


def test_trend_flat_at_zero():
    summary = robustness_service.trend([point(3, 0.0, 0.0), point(5, 0.0, 0.0)])
    assert summary.verdict == Verdict.FLAT_AT_ZERO
    assert summary.slope == 0.0


def test_trend_of_a_single_point():
    assert robustness_service.trend([point(9, 0.5, 0.01)]).verdict == Verdict.FLAT


def test_epsilon_separation():
    weak = curve([point(9, 0.4, 0.03), point(17, 0.3, 0.03)], epsilon=0.05)
    strong = curve([point(9, 0.6, 0.04), point(17, 0.7, 0.04)])
    assert robustness_service.epsilon_separation(weak, strong, 17) == pytest.approx(0.4 / 0.05)
    with pytest.raises(KeyError):
        robustness_service.epsilon_separation(weak, strong, 33)


def test_epsilon_separation_of_exact_points():
    zero = curve([point(3, 0.0, 0.0)], epsilon=0.0)
    assert robustness_service.epsilon_separation(zero, zero, 3) == 0.0
    assert robustness_service.epsilon_separation(zero, curve([point(3, 0.2, 0.0)]), 3) == math.inf


def test_curve_requires_increasing_sizes():
    with pytest.raises(ValueError):
        curve([point(9, 0.1, 0.01), point(9, 0.1, 0.01)])


def test_geometry_per_mode():
    lat, bonds = build_geometry(BoundaryMode.WIRED_GHOST, 2, 5, 1.0, 0.3)
    assert lat.has_ghost and bonds.cutset is None

    lat, bonds = build_geometry(BoundaryMode.WEAKLY_WIRED_DIAGONAL, 2, 5, 1.0, 0.3)
    assert bonds.cutset.kind == CutsetKind.BOUNDARY
    assert bonds.cutset.size == lat.n_ghost_edges

    lat, bonds = build_geometry(BoundaryMode.FREE, 2, 5, 1.0, 1.0)
    assert not lat.has_ghost and bonds.cutset is None

    lat, bonds = build_geometry(BoundaryMode.FREE, 2, 5, 1.0, 0.5)
    assert not lat.has_ghost and bonds.cutset.radius == 1

    lat, bonds = build_geometry(BoundaryMode.WEAKLY_WIRED_GHOST, 2, 7, 1.0, 0.5, r=0)
    assert lat.has_ghost and bonds.cutset.size == 4


def test_annulus_geometry():
    lat, bonds = build_geometry(BoundaryMode.WEAKLY_WIRED_ANNULUS, 2, 5, 1.0, 0.5)
    assert lat.side == 5 + 2 * 3
    assert bonds.cutset.radius == 1
    lat, _ = build_geometry(BoundaryMode.WEAKLY_WIRED_ANNULUS, 2, 5, 1.0, 0.5, annulus_width=1)
    assert lat.side == 7


def test_geometry_too_small_for_a_cutset():
    with pytest.raises(GeometryError):
        build_geometry(BoundaryMode.WEAKLY_WIRED_GHOST, 2, 1, 1.0, 0.5)


def test_exact_estimate_packages_the_oracle():
    lat = build_lattice(2, 2, ghost=True)
    bonds = build_bonds(lat, 0.9)
    estimate = exact_estimate(lat, bonds, 3, wired=True)
    result = exact_service.enumerate(lat, bonds, 3, wired=True)
    assert estimate.source == EstimateSource.EXACT
    assert estimate.theta == pytest.approx(result.theta)
    assert estimate.theta_se == 0.0
    assert estimate.metadata["log_partition_function"] == pytest.approx(result.log_partition_function)


def test_free_scan_is_flat_at_zero(quick_chain):
    result = robustness_service.robustness_scan(2, 3, 1.0, 1.0, [3, 5], BoundaryMode.FREE, quick_chain, workers=1)
    assert [p.theta for p in result.points] == [0.0, 0.0]
    assert [p.stream_id for p in result.points] == [0, 1]
    assert result.trend.verdict == Verdict.FLAT_AT_ZERO


def test_decoupled_scan_is_flat_at_zero(quick_chain):
    result = robustness_service.robustness_scan(
        2, 25, selfdual_coupling(25), 0.0, [3, 5], BoundaryMode.WEAKLY_WIRED_GHOST, quick_chain, workers=1,
    )
    assert all(p.theta == 0.0 for p in result.points)
    assert all(p.tv == pytest.approx(0.0, abs=1e-12) for p in result.points)
    assert result.trend.verdict == Verdict.FLAT_AT_ZERO


def test_diagonal_scan_uses_exact_within_cap(quick_chain):
    q, J, epsilon = 3, 1.0, 0.5
    result = robustness_service.diagonal_limit_scan(
        2, q, J, epsilon, [1, 3], quick_chain, use_exact=True, workers=1, edge_cap=4,
    )
    exact, sampled = result.points
    assert exact.source == EstimateSource.EXACT
    assert sampled.source == EstimateSource.MONTE_CARLO
    assert exact.r is None
    assert exact.gamma_size == 4
    assert exact.boundary_term == pytest.approx(2 * 2 * epsilon * 4)

    p = edge_probability(epsilon * J)
    none = (1 - p) ** 4
    expected = (1 - none) * q / (none * q ** 2 + (1 - none) * q)
    assert exact.theta == pytest.approx(expected, abs=1e-12)
    assert exact.tv == pytest.approx(expected * (1 - 1 / q), abs=1e-12)


def test_tv_identity_on_sampled_points(quick_chain):
    result = robustness_service.robustness_scan(
        2, 3, 1.2, 0.5, [3, 5], BoundaryMode.WEAKLY_WIRED_GHOST, quick_chain, workers=1,
    )
    for p in result.points:
        assert p.tv == pytest.approx(p.theta * (1 - 1 / 3), abs=1e-9)
        assert p.n_samples == quick_chain.n_measurements


@pytest.mark.parametrize("sizes, error", [
    ([3, 4], GeometryError),
    ([5, 3], InvalidParameterError),
    ([3, 3], InvalidParameterError),
])
def test_scan_rejects_bad_sizes(quick_chain, sizes, error):
    with pytest.raises(error):
        robustness_service.robustness_scan(2, 2, 1.0, 0.5, sizes, BoundaryMode.WEAKLY_WIRED_GHOST, quick_chain)


def test_scan_rejects_bad_epsilon(quick_chain):
    with pytest.raises(InvalidParameterError):
        robustness_service.robustness_scan(2, 2, 1.0, 1.5, [3], BoundaryMode.WEAKLY_WIRED_GHOST, quick_chain)


@pytest.mark.parametrize("J_factor", [0.8, 1.0])
def test_ising_contrast_runs_below_critical_temperature(quick_chain, J_factor):
    with pytest.raises(InvalidParameterError):
        robustness_service.ising_contrast(J_factor, 0.1, [3], quick_chain)


def test_ising_contrast_parameters(quick_chain):
    result = robustness_service.ising_contrast(1.2, 0.1, [3], quick_chain, workers=1)
    assert result.parameters.q == 2
    assert result.parameters.J == pytest.approx(1.2 * math.log(1 + math.sqrt(2)))
    assert result.parameters.mode == BoundaryMode.WEAKLY_WIRED_GHOST


@pytest.mark.slow
@pytest.mark.parametrize("q", [2, 25, 100])
def test_exact_theta_nondecreasing_in_epsilon(q):
    """
    FKG ordering in epsilon on the L=3 cutset lattice. L=5 with a ghost is
    past the enumeration edge cap, which test_cutset_ordering_stops_at_the_edge_cap
    pins down.
    """
    lat = build_lattice(2, 3, ghost=True)
    cut = build_cutset(lat, 0)
    J = selfdual_coupling(q)
    thetas = [
        exact_service.enumerate(lat, build_bonds(lat, J, epsilon, cut), q, wired=True).theta
        for epsilon in (0.0, 0.25, 0.5, 0.75, 1.0)
    ]
    assert all(b >= a - 1e-12 for a, b in zip(thetas, thetas[1:]))


def test_cutset_ordering_stops_at_the_edge_cap():
    lat = build_lattice(2, 5, ghost=True)
    bonds = build_bonds(lat, selfdual_coupling(25), 0.5, build_cutset(lat, 1))
    with pytest.raises(CapExceededError, match="enumeration edge cap") as info:
        exact_service.enumerate(lat, bonds, 25, wired=True)
    assert info.value.requested == lat.n_edges


@pytest.mark.slow
def test_high_q_weak_boundary_loses_order():
    cfg = ChainConfig(sweeps=30_000, burn_in=5_000, seed=20240601)
    sizes = [9, 17, 33]
    J = selfdual_coupling(25)
    weak = robustness_service.robustness_scan(2, 25, J, 0.05, sizes, BoundaryMode.WEAKLY_WIRED_GHOST, cfg)
    strong = robustness_service.robustness_scan(
        2, 25, J, 1.0, sizes, BoundaryMode.WEAKLY_WIRED_GHOST, cfg.model_copy(update={"stream_id": 10}),
    )
    assert robustness_service.epsilon_separation(weak, strong, 33) >= 5.0
    assert weak.trend.verdict == Verdict.DECREASING
    assert strong.trend.verdict != Verdict.DECREASING


@pytest.mark.slow
def test_ising_weak_boundary_keeps_order():
    cfg = ChainConfig(sweeps=30_000, burn_in=5_000, seed=20240601)
    result = robustness_service.ising_contrast(1.2, 0.1, [9, 17, 33], cfg)
    assert result.trend.verdict != Verdict.DECREASING
    assert result.point_at(33).theta > 0.3
