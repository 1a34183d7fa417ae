import numpy as np
import pytest

from app.core.exceptions import CapExceededError, GeometryError
from app.core.geometry import build_boundary_cutset, build_cutset, build_lattice, separation_check
from app.models.lattice import Cutset, CutsetKind


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("L", [1, 2, 3, 4, 5, 6])
def test_open_box_edge_count(d, L):
    lat = build_lattice(d, L)
    assert lat.n_vertices == L ** d
    assert lat.n_lattice_edges == d * L ** (d - 1) * (L - 1)
    assert lat.n_edges == lat.n_lattice_edges
    assert not lat.has_ghost


@pytest.mark.parametrize("d, L, V, E", [(2, 2, 4, 4), (2, 3, 9, 12), (3, 2, 8, 12)])
def test_small_lattices(d, L, V, E):
    lat = build_lattice(d, L)
    assert (lat.n_vertices, lat.n_edges) == (V, E)


@pytest.mark.parametrize("d, L", [(1, 4), (2, 3), (2, 5), (3, 3)])
def test_edges_join_unit_neighbours(d, L):
    lat = build_lattice(d, L)
    coords = lat.coordinates()
    steps = np.abs(coords[lat.edges[:, 0]] - coords[lat.edges[:, 1]]).sum(axis=1)
    assert (steps == 1).all()


@pytest.mark.parametrize("d, L", [(1, 1), (1, 5), (2, 1), (2, 4), (3, 3)])
def test_ghost_edges_one_per_missing_neighbour(d, L):
    lat = build_lattice(d, L, ghost=True)
    assert lat.n_ghost_edges == 2 * d * L ** (d - 1)
    assert (lat.edges[lat.n_lattice_edges:, 1] == lat.ghost).all()
    assert set(lat.edges[lat.n_lattice_edges:, 0].tolist()) == set(lat.boundary_vertices.tolist())


def test_corner_gets_two_ghost_edges():
    lat = build_lattice(2, 3, ghost=True)
    owners = lat.edges[lat.n_lattice_edges:, 0].tolist()
    assert owners.count(lat.index_of([0, 0])) == 2
    assert owners.count(lat.index_of([0, 1])) == 1
    assert lat.index_of([1, 1]) not in owners


def test_boundary_vertices():
    lat = build_lattice(2, 5)
    assert lat.boundary_vertices.shape[0] == 16
    assert lat.origin not in lat.boundary_vertices


def test_row_major_indexing_round_trips():
    lat = build_lattice(3, 4)
    for index in range(lat.n_vertices):
        assert lat.index_of(lat.coords_of(index)) == index
    assert lat.index_of([1, 2, 3]) == 1 * 16 + 2 * 4 + 3


def test_origin_is_centre():
    assert build_lattice(2, 5).origin == 12
    assert build_lattice(3, 3).origin == 13
    assert build_lattice(1, 7).origin == 3


def test_arrays_are_read_only():
    lat = build_lattice(2, 3)
    with pytest.raises(ValueError):
        lat.edges[0, 0] = 5


def test_edge_cap_counts_ghost_edges():
    build_lattice(2, 3, ghost=True, edge_cap=24)
    with pytest.raises(CapExceededError, match="enumeration edge cap"):
        build_lattice(2, 3, ghost=True, edge_cap=23)


@pytest.mark.parametrize("d, L", [(0, 3), (2, 0)])
def test_rejects_degenerate_boxes(d, L):
    with pytest.raises(GeometryError):
        build_lattice(d, L)


@pytest.mark.parametrize("d, L, r, size", [(2, 5, 0, 4), (2, 7, 1, 12), (3, 5, 0, 6)])
def test_cutset_sizes(d, L, r, size):
    lat = build_lattice(d, L)
    cut = build_cutset(lat, r)
    assert cut.size == size
    assert lat.origin in cut.interior
    assert cut.kind == CutsetKind.BOX


def test_single_site_cutset_interior_is_origin():
    lat = build_lattice(2, 5)
    cut = build_cutset(lat, 0)
    assert cut.interior.tolist() == [lat.origin]


@pytest.mark.parametrize("r", [0, 1, 2, 3])
def test_planar_cutset_size_formula(r):
    cut = build_cutset(build_lattice(2, 9), r)
    assert cut.size == 4 * (2 * r + 1)
    assert cut.interior.shape[0] == (2 * r + 1) ** 2


@pytest.mark.parametrize("L, r", [(4, 0), (5, 2), (5, -1), (3, 1)])
def test_cutset_must_lie_strictly_inside(L, r):
    with pytest.raises(GeometryError):
        build_cutset(build_lattice(2, L), r)


@pytest.mark.parametrize("ghost", [False, True])
@pytest.mark.parametrize("d, L, r", [(2, 5, 0), (2, 7, 2), (3, 5, 1), (1, 7, 2)])
def test_cutsets_separate(d, L, r, ghost):
    lat = build_lattice(d, L, ghost=ghost)
    assert separation_check(lat, build_cutset(lat, r))


def test_leaky_cutset_fails_separation():
    lat = build_lattice(2, 7, ghost=True)
    cut = build_cutset(lat, 1)
    leaky = Cutset(kind=cut.kind, radius=cut.radius, edges=cut.edges[1:], interior=cut.interior)
    assert not separation_check(lat, leaky)


def test_cutting_everything_separates():
    lat = build_lattice(2, 5)
    cut = build_cutset(lat, 0)
    everything = Cutset(kind=cut.kind, radius=0, edges=np.arange(lat.n_edges), interior=cut.interior)
    assert separation_check(lat, everything)


def test_boundary_cutset_is_the_ghost_edges():
    lat = build_lattice(2, 3, ghost=True)
    cut = build_boundary_cutset(lat)
    assert cut.kind == CutsetKind.BOUNDARY
    assert cut.size == lat.n_ghost_edges
    assert cut.interior.shape[0] == lat.n_vertices
    assert separation_check(lat, cut)


def test_boundary_cutset_needs_ghost():
    with pytest.raises(GeometryError):
        build_boundary_cutset(build_lattice(2, 3))
