"""Spin storage, energy, and local moves against the naive oracle."""

from fractions import Fraction

import numpy as np
import pytest

from eamc import LatticeGeometry, Sample, SpinConfiguration
from eamc import spins as sp

from oracles import naive_energy, naive_delta_e


def test_pack_unpack_roundtrip():
    g = LatticeGeometry(4)
    rng = np.random.default_rng(0)
    arrays = [rng.choice([-1, 1], g.n_sites).astype(np.int8) for _ in range(3)]
    cfg = sp.pack(g, arrays)
    assert cfg.width == 3
    back = sp.unpack(cfg)
    for a, b in zip(arrays, back):
        assert np.array_equal(a, b)
    for w, a in enumerate(arrays):
        assert np.array_equal(cfg.lane_spins(w), a)


def test_random_configuration():
    g = LatticeGeometry(8)
    c1 = SpinConfiguration.random(g, seed=5)
    c2 = SpinConfiguration.random(g, seed=5)
    assert c1 == c2
    assert c1 != SpinConfiguration.random(g, seed=6)
    assert set(np.unique(c1.lane_spins())) == {-1, 1}
    wide = SpinConfiguration.random(g, seed=5, width=64)
    assert wide.width == 64
    # unused high lanes stay zero
    narrow = SpinConfiguration.random(g, seed=5, width=3)
    assert int((narrow.words >> np.uint64(3)).max()) == 0


def test_pack_validation():
    g = LatticeGeometry(2)
    with pytest.raises(ValueError):
        sp.pack(g, [])
    with pytest.raises(ValueError):
        sp.pack(g, [np.full(g.n_sites, 2, dtype=np.int8)])
    with pytest.raises(ValueError):
        sp.pack(g, [np.ones(g.n_sites + 1, dtype=np.int8)])
    with pytest.raises(ValueError):
        sp.pack(g, [np.ones(g.n_sites, dtype=np.int8)] * 65)


def test_energy_matches_naive_loop():
    for dims in [(2, 2, 2), (2, 2, 4), (4, 4, 4)]:
        g = LatticeGeometry.box(*dims)
        rng = np.random.default_rng(sum(dims))
        for trial in range(3):
            s = Sample.generate(g, seed=trial)
            spin = rng.choice([-1, 1], g.n_sites).astype(np.int8)
            cfg = sp.pack(g, [spin])
            assert sp.energy(s, cfg) == naive_energy(dims, s.couplings, spin)


def test_energy_with_field_matches_naive_loop():
    g = LatticeGeometry.box(2, 4, 4)
    rng = np.random.default_rng(9)
    s = Sample.generate(g, seed=3, h=Fraction(1, 2))
    field = s.field_values()
    for _ in range(3):
        spin = rng.choice([-1, 1], g.n_sites).astype(np.int8)
        cfg = sp.pack(g, [spin])
        assert sp.energy(s, cfg) == naive_energy(g.dims, s.couplings, spin, field)


def test_l2_ferromagnet_counts_doubled_bonds():
    # all-plus couplings, all-up spins on L=2: every axis contributes two
    # satisfied parallel bonds per site pair, 3N bonds total
    g = LatticeGeometry(2)
    s = Sample(g, np.ones((3, 8), dtype=np.uint8))
    cfg = sp.pack(g, [np.ones(8, dtype=np.int8)])
    assert sp.energy(s, cfg) == -24.0  # -3 * N


def test_ground_state_energy_ferromagnet():
    g = LatticeGeometry(4)
    s = Sample(g, np.ones((3, 64), dtype=np.uint8))
    cfg = sp.pack(g, [np.ones(64, dtype=np.int8)])
    assert sp.energy(s, cfg) == -3.0 * 64


def test_local_delta_e_matches_flip():
    g = LatticeGeometry.box(2, 2, 4)
    rng = np.random.default_rng(31)
    for h in [0, Fraction(1, 4)]:
        s = Sample.generate(g, seed=8, h=h)
        spin = rng.choice([-1, 1], g.n_sites).astype(np.int8)
        cfg = sp.pack(g, [spin])
        field = s.field_values() if h else None
        for site in range(g.n_sites):
            want = naive_delta_e(g.dims, s.couplings, spin, site, field)
            assert sp.local_delta_e(s, cfg, site) == want


def test_delta_e_is_quantized():
    # zero field: dE in {-12,-8,...,12}; h=1/4 shifts by +-1/2
    g = LatticeGeometry(4)
    rng = np.random.default_rng(80)
    s = Sample.generate(g, seed=2)
    spin = rng.choice([-1, 1], g.n_sites).astype(np.int8)
    cfg = sp.pack(g, [spin])
    des = {sp.local_delta_e(s, cfg, i) for i in range(g.n_sites)}
    assert des <= {4.0 * n - 12.0 for n in range(7)}


def test_gauge_invariance():
    # flipping spins and bonds on any site set leaves the energy unchanged
    g = LatticeGeometry(4)
    rng = np.random.default_rng(4)
    s = Sample.generate(g, seed=21)
    spin = rng.choice([-1, 1], g.n_sites).astype(np.int8)
    e0 = sp.energy(s, sp.pack(g, [spin]))
    eps = rng.choice([0, 1], g.n_sites).astype(np.uint8)
    couplings = s.couplings.copy()
    nbr = g.neighbors
    for axis in range(3):
        couplings[axis] ^= eps ^ eps[nbr[:, 2 * axis]]
    gauged = Sample(g, couplings)
    gspin = spin * (1 - 2 * eps.astype(np.int8))
    assert sp.energy(gauged, sp.pack(g, [gspin])) == e0


def test_overlap():
    g = LatticeGeometry(4)
    a = SpinConfiguration.random(g, seed=1)
    b = SpinConfiguration.random(g, seed=2)
    assert sp.overlap(a, a) == 1.0
    sa, sb = a.lane_spins(), b.lane_spins()
    assert sp.overlap(a, b) == float(np.dot(sa, sb)) / g.n_sites
    flipped = sp.pack(g, [-sa])
    assert sp.overlap(a, flipped) == -1.0
    # field form: per-site product as +-1 array
    qf = sp.overlap_field(a, b)
    assert np.array_equal(qf, sa * sb)
    assert qf.mean() == sp.overlap(a, b)
