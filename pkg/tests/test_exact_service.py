import math

import numpy as np
import pytest

from app.core.exceptions import CapExceededError, InvalidParameterError, NonComparableBondsError
from app.core.geometry import build_boundary_cutset, build_cutset, build_lattice
from app.core.random_cluster import build_bonds, edge_probability
from app.models.bonds import BoundaryCondition
from app.models.results import EventKind, EventSpec
from app.services.exact_service import ExactOracleService, exact_service


def diagonal_bonds(L, J, epsilon):
    lat = build_lattice(2, L, ghost=True)
    return lat, build_bonds(lat, J, epsilon, build_boundary_cutset(lat))


def test_single_edge_partition_function():
    lat = build_lattice(1, 2)
    result = exact_service.enumerate(lat, build_bonds(lat, math.log(2)), 2, wired=False)
    assert result.log_partition_function == pytest.approx(math.log(3))
    assert result.edge_marginals == pytest.approx([1 / 3])
    assert result.theta == 0.0
    assert result.n_configurations == 2


def test_q_one_edges_are_independent():
    lat = build_lattice(2, 3)
    bonds = build_bonds(lat, 1.0, 0.3, build_cutset(lat, 0))
    result = exact_service.enumerate(lat, bonds, 1, wired=False)
    assert np.allclose(result.edge_marginals, bonds.probabilities, atol=1e-12)
    assert result.log_partition_function == pytest.approx(0.0, abs=1e-12)


def test_single_site_theta_matches_closed_form():
    q, J = 3, 0.9
    lat, bonds = diagonal_bonds(1, J, 1.0)
    p = edge_probability(J)
    none = (1 - p) ** 4
    expected = (1 - none) * q / (none * q ** 2 + (1 - none) * q)
    assert exact_service.enumerate(lat, bonds, q, wired=True).theta == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("q", [2, 3])
def test_edwards_sokal_agrees_with_spin_sums(q):
    lat = build_lattice(2, 2, ghost=True)
    bonds = build_bonds(lat, 0.7)
    fk = exact_service.enumerate(lat, bonds, q, wired=True)
    spins = exact_service.spin_enumerate(lat, bonds, q, BoundaryCondition.wired_to(0))
    assert np.allclose(fk.origin_marginal, spins, atol=1e-10)
    assert fk.theta == pytest.approx(spins[0] - spins[1], abs=1e-10)


@pytest.mark.slow
def test_edwards_sokal_agrees_on_larger_box():
    lat = build_lattice(2, 3, ghost=True)
    bonds = build_bonds(lat, 1.1, 0.4, build_cutset(lat, 0))
    fk = exact_service.enumerate(lat, bonds, 2, wired=True)
    spins = exact_service.spin_enumerate(lat, bonds, 2, BoundaryCondition.wired_to(0))
    assert np.allclose(fk.origin_marginal, spins, atol=1e-10)


def test_free_boundary_marginal_is_uniform():
    lat = build_lattice(2, 2, ghost=True)
    bonds = build_bonds(lat, 1.5)
    fk = exact_service.enumerate(lat, bonds, 3, wired=False)
    spins = exact_service.spin_enumerate(lat, bonds, 3, BoundaryCondition.free())
    assert fk.theta == 0.0
    assert np.allclose(fk.origin_marginal, [1 / 3] * 3)
    assert np.allclose(spins, [1 / 3] * 3, atol=1e-12)


def test_closed_boundary_disconnects_origin():
    lat, bonds = diagonal_bonds(2, 2.0, 0.0)
    result = exact_service.enumerate(lat, bonds, 4, wired=True)
    assert result.theta == 0.0
    assert np.allclose(result.origin_marginal, [0.25] * 4)
    assert np.allclose(result.edge_marginals[lat.n_lattice_edges:], 0.0)


def test_edge_cap_refusal():
    lat = build_lattice(2, 4, ghost=True)
    with pytest.raises(CapExceededError, match="enumeration edge cap") as info:
        exact_service.enumerate(lat, build_bonds(lat, 1.0), 2, wired=True)
    assert info.value.requested == lat.n_edges
    assert info.value.cap == 24


def test_edge_cap_override():
    lat = build_lattice(2, 2, ghost=True)
    with pytest.raises(CapExceededError):
        exact_service.enumerate(lat, build_bonds(lat, 1.0), 2, wired=True, edge_cap=11)


def test_rejects_nonpositive_q():
    lat = build_lattice(2, 2)
    with pytest.raises(InvalidParameterError):
        exact_service.enumerate(lat, build_bonds(lat, 1.0), 0.0, wired=False)


def test_chunked_enumeration_matches_serial():
    service = ExactOracleService()
    service.block_size = 256
    lat, bonds = diagonal_bonds(2, 0.8, 0.6)
    serial = service.enumerate(lat, bonds, 2.5, wired=True, workers=1)
    parallel = service.enumerate(lat, bonds, 2.5, wired=True, workers=2)
    assert parallel.log_partition_function == pytest.approx(serial.log_partition_function, abs=1e-12)
    assert parallel.theta == pytest.approx(serial.theta, abs=1e-12)
    assert np.allclose(parallel.edge_marginals, serial.edge_marginals, atol=1e-12)


def test_theta_is_monotone_in_epsilon():
    thetas = []
    for epsilon in (0.0, 0.25, 0.5, 0.75, 1.0):
        lat, bonds = diagonal_bonds(2, 1.0, epsilon)
        thetas.append(exact_service.enumerate(lat, bonds, 3, wired=True).theta)
    assert thetas[0] == 0.0
    assert all(b >= a - 1e-12 for a, b in zip(thetas, thetas[1:]))


def test_stronger_bonds_dominate_every_event():
    lat, weak = diagonal_bonds(2, 1.2, 0.4)
    _, strong = diagonal_bonds(2, 1.2, 1.0)
    report = exact_service.check_event_domination(lat, strong, weak, 2.0)
    assert report.passed
    assert len(report.checks) == 1 + lat.n_edges + lat.n_edges + 1
    assert report.checks[0].event == "origin<->ghost"


@pytest.mark.slow
@pytest.mark.parametrize("q", [1.0, 2.0, 4.5])
def test_domination_on_cutset_grid(q):
    lat = build_lattice(2, 3, ghost=True)
    cut = build_cutset(lat, 0)
    for low, high in [(0.0, 0.3), (0.3, 0.8), (0.8, 1.0)]:
        report = exact_service.check_event_domination(
            lat, build_bonds(lat, 1.0, high, cut), build_bonds(lat, 1.0, low, cut), q,
        )
        assert report.passed


def test_domination_needs_ordered_bonds():
    lat, weak = diagonal_bonds(2, 1.2, 0.4)
    _, strong = diagonal_bonds(2, 1.2, 1.0)
    with pytest.raises(NonComparableBondsError):
        exact_service.check_event_domination(lat, weak, strong, 2.0)


def test_single_event_probabilities():
    lat = build_lattice(1, 2)
    bonds = build_bonds(lat, math.log(2))
    events = [
        EventSpec(kind=EventKind.EDGE_OCCUPIED, edge=0),
        EventSpec(kind=EventKind.OCCUPIED_AT_LEAST, threshold=0),
    ]
    probabilities = exact_service.event_probabilities(lat, bonds, 2, False, events)
    assert probabilities == pytest.approx([1 / 3, 1.0])


def test_spin_cap_refusal():
    lat = build_lattice(2, 2)
    with pytest.raises(CapExceededError, match="spin enumeration cap"):
        exact_service.spin_enumerate(lat, build_bonds(lat, 1.0), 2, BoundaryCondition.free(), spin_cap=15)


def test_spin_enumeration_needs_integer_q():
    lat = build_lattice(2, 2)
    with pytest.raises(InvalidParameterError):
        exact_service.spin_enumerate(lat, build_bonds(lat, 1.0), 2.5, BoundaryCondition.free())
