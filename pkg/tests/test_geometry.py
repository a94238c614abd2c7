"""Lattice geometry invariants."""

import numpy as np
import pytest

from eamc import LatticeGeometry
from eamc.geometry import DIRECTIONS


def test_index_convention():
    g = LatticeGeometry.box(4, 6, 8)
    # x fastest, then y, then z
    assert g.site_index(1, 0, 0) == 1
    assert g.site_index(0, 1, 0) == 4
    assert g.site_index(0, 0, 1) == 24
    for i in [0, 1, 17, 100, g.n_sites - 1]:
        assert g.site_index(*g.site_coords(i)) == i


def test_neighbors_match_coordinates():
    g = LatticeGeometry.box(4, 6, 8)
    lx, ly, lz = g.dims
    for i in range(0, g.n_sites, 7):
        x, y, z = g.site_coords(i)
        for d, (dx, dy, dz) in enumerate(DIRECTIONS):
            want = g.site_index((x + dx) % lx, (y + dy) % ly, (z + dz) % lz)
            assert g.neighbors[i, d] == want


def test_neighbor_involution():
    g = LatticeGeometry(6)
    nbr = g.neighbors
    for d in range(6):
        back = d ^ 1  # +x pairs with -x and so on
        assert np.array_equal(nbr[nbr[:, d], back], np.arange(g.n_sites))


def test_checkerboard_two_coloring():
    g = LatticeGeometry.box(2, 4, 6)
    par = g.parity
    # every neighbor of a site has the opposite color
    for d in range(6):
        assert np.all(par[g.neighbors[:, d]] == 1 - par)
    p0, p1 = g.phase_sites
    assert p0.size == p1.size == g.n_sites // 2
    assert np.all(np.diff(p0) > 0) and np.all(np.diff(p1) > 0)
    assert np.array_equal(np.sort(np.concatenate([p0, p1])),
                          np.arange(g.n_sites))


def test_l2_axis_doubles_bonds():
    # on an L=2 axis the +d and -d neighbors are the same site
    g = LatticeGeometry(2)
    assert np.array_equal(g.neighbors[:, 0], g.neighbors[:, 1])
    assert np.array_equal(g.neighbors[:, 4], g.neighbors[:, 5])


def test_dimension_validation():
    for bad in [(3, 4, 4), (4, 5, 4), (4, 4, 1), (0, 2, 2)]:
        with pytest.raises(ValueError):
            LatticeGeometry.box(*bad)
    with pytest.raises(ValueError):
        LatticeGeometry(5)
    with pytest.raises(ValueError):
        LatticeGeometry.box(2, 2, 4).l  # not cubic
    assert LatticeGeometry(4).l == 4
    assert LatticeGeometry.box(2, 2, 4).n_sites == 16


def test_equality_and_hash():
    assert LatticeGeometry(4) == LatticeGeometry.box(4, 4, 4)
    assert LatticeGeometry(4) != LatticeGeometry.box(4, 4, 6)
    assert hash(LatticeGeometry(8)) == hash(LatticeGeometry(8))
