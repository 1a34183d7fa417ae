import math

import numpy as np
import pytest

from app.core.exceptions import InvalidParameterError
from app.core.geometry import build_cutset, build_lattice
from app.core.random_cluster import (
    LOG_ZERO,
    batch_cluster_labels,
    boundary_term_scale,
    build_bonds,
    cluster_count,
    count_from_labels,
    edge_probability,
    log_weight,
    origin_marginal_from_connectivity,
    selfdual_coupling,
)
from app.core.union_find import UnionFind
from app.models.results import EstimateSource


@pytest.mark.parametrize("J, p", [(0.0, 0.0), (math.log(2), 0.5), (math.log(6), 5 / 6)])
def test_edge_probability(J, p):
    assert edge_probability(J) == pytest.approx(p, abs=1e-15)


def test_edge_probability_is_exactly_zero_at_zero():
    assert edge_probability(0.0) == 0.0
    assert (edge_probability(np.zeros(3)) == 0.0).all()


@pytest.mark.parametrize("J", [-0.1, float("nan")])
def test_edge_probability_rejects_bad_couplings(J):
    with pytest.raises(InvalidParameterError):
        edge_probability(J)


def test_selfdual_coupling():
    assert selfdual_coupling(25) == pytest.approx(math.log(6))
    assert selfdual_coupling(2) == pytest.approx(math.log(1 + math.sqrt(2)))
    with pytest.raises(InvalidParameterError):
        selfdual_coupling(0.5)


def test_bonds_weaken_only_the_cutset():
    lat = build_lattice(2, 7, ghost=True)
    cut = build_cutset(lat, 1)
    bonds = build_bonds(lat, 2.0, 0.25, cut)
    mask = cut.edge_mask(lat.n_edges)
    assert np.allclose(bonds.couplings[mask], 0.5)
    assert np.allclose(bonds.couplings[~mask], 2.0)
    assert (bonds.probabilities < 1).all()
    assert bonds.weak_edge_mask.sum() == cut.size


def test_unit_epsilon_is_uniform():
    lat = build_lattice(2, 5)
    bonds = build_bonds(lat, 1.3, 1.0, build_cutset(lat, 0))
    assert np.allclose(bonds.couplings, 1.3)
    assert not bonds.weak_edge_mask.any()


def test_zero_epsilon_closes_the_cutset():
    lat = build_lattice(2, 5)
    cut = build_cutset(lat, 0)
    bonds = build_bonds(lat, 1.3, 0.0, cut)
    assert (bonds.probabilities[cut.edges] == 0.0).all()


@pytest.mark.parametrize("epsilon", [-0.1, 1.5])
def test_bonds_reject_epsilon_outside_unit_interval(epsilon):
    with pytest.raises(InvalidParameterError):
        build_bonds(build_lattice(2, 3), 1.0, epsilon)


def test_boundary_term_scale():
    lat = build_lattice(2, 7)
    bonds = build_bonds(lat, 1.0, 0.5, build_cutset(lat, 1))
    assert boundary_term_scale(bonds, 2) == pytest.approx(2 * 2 * 0.5 * 12)


def test_cluster_count_examples():
    lat = build_lattice(2, 2)
    assert cluster_count(lat, np.zeros(4, dtype=bool)) == 4
    assert cluster_count(lat, np.ones(4, dtype=bool)) == 1
    assert cluster_count(lat, np.array([True, False, False, False])) == 3


def test_wired_cluster_count_includes_ghost():
    lat = build_lattice(2, 3, ghost=True)
    vacant = np.zeros(lat.n_edges, dtype=bool)
    assert cluster_count(lat, vacant, wired=True) == lat.n_vertices + 1
    assert cluster_count(lat, np.ones(lat.n_edges, dtype=bool), wired=True) == 1


def test_unwired_count_ignores_ghost_edges():
    lat = build_lattice(2, 3, ghost=True)
    eta = np.zeros(lat.n_edges, dtype=bool)
    eta[lat.n_lattice_edges:] = True
    assert cluster_count(lat, eta, wired=False) == lat.n_vertices
    assert cluster_count(lat, eta, wired=True) == 2


def test_cluster_count_rejects_wrong_length():
    with pytest.raises(InvalidParameterError):
        cluster_count(build_lattice(2, 2), np.zeros(3, dtype=bool))


def test_batch_labels_agree_with_union_find():
    lat = build_lattice(2, 3, ghost=True)
    rng = np.random.default_rng(7)
    occupied = rng.random((200, lat.n_edges)) < 0.4
    labels = batch_cluster_labels(lat.n_nodes, lat.edges, occupied)
    counts = count_from_labels(labels)
    for row, eta in enumerate(occupied):
        assert counts[row] == cluster_count(lat, eta, wired=True)
        forest = UnionFind(lat.n_nodes)
        for u, v in lat.edges[eta]:
            forest.union(int(u), int(v))
        for node in range(lat.n_nodes):
            assert (labels[row] == labels[row, node]).sum() == forest.size[forest.find(node)]


def test_log_weight_single_edge():
    lat = build_lattice(1, 2)
    bonds = build_bonds(lat, math.log(2))
    assert log_weight(lat, bonds, np.array([True]), 2) == pytest.approx(0.0, abs=1e-15)
    assert log_weight(lat, bonds, np.array([False]), 2) == pytest.approx(math.log(2))


def test_log_weight_q_one_is_bernoulli():
    lat = build_lattice(2, 3)
    bonds = build_bonds(lat, 0.8, 0.4, None)
    eta = np.random.default_rng(3).random(lat.n_edges) < 0.5
    p = bonds.probabilities
    expected = np.log(p[eta]).sum() + np.log1p(-p[~eta]).sum()
    assert log_weight(lat, bonds, eta, 1.0) == pytest.approx(expected)


def test_log_weight_of_impossible_configuration():
    lat = build_lattice(2, 5)
    cut = build_cutset(lat, 0)
    bonds = build_bonds(lat, 1.0, 0.0, cut)
    eta = np.zeros(lat.n_edges, dtype=bool)
    eta[cut.edges[0]] = True
    assert log_weight(lat, bonds, eta, 2) == LOG_ZERO


def test_log_weight_rejects_nonpositive_q():
    lat = build_lattice(1, 2)
    with pytest.raises(InvalidParameterError):
        log_weight(lat, build_bonds(lat, 1.0), np.array([True]), 0.0)


@pytest.mark.parametrize("theta, q, expected", [
    (0.0, 3, [1 / 3, 1 / 3, 1 / 3]),
    (1.0, 3, [1.0, 0.0, 0.0]),
    (0.4, 3, [0.6, 0.2, 0.2]),
])
def test_origin_marginal_from_connectivity(theta, q, expected):
    marginal = origin_marginal_from_connectivity(theta, q)
    assert marginal.probabilities == pytest.approx(expected, abs=1e-15)
    assert sum(marginal.probabilities) == pytest.approx(1.0, abs=1e-15)
    assert marginal.source == EstimateSource.CONNECTIVITY


def test_origin_marginal_rejects_bad_theta():
    with pytest.raises(InvalidParameterError):
        origin_marginal_from_connectivity(1.5, 3)


def test_union_find():
    forest = UnionFind(5)
    assert forest.union(0, 1)
    assert forest.union(3, 4)
    assert not forest.union(1, 0)
    assert forest.find(0) == forest.find(1)
    assert forest.find(1) != forest.find(3)
    assert forest.components == 3
    assert forest.size[forest.find(4)] == 2
