"""Spin storage and energy evaluation.

Spins live bit-packed: one machine word per site, one lane per bit, so lane w
of word i is spin bit sigma_i of sample/replica w.  The bit maps to the spin
value through S = 2*sigma - 1.  A bond (i, j) is satisfied exactly when
sigma_i XOR sigma_j XOR j_ij = 1, and a single-site flip costs

    dE = 4*n_sat - 12 + 2*h_i*S_i

with n_sat the number of satisfied bonds among the six touching the site.
"""

from __future__ import annotations

import numpy as np

from .geometry import LatticeGeometry
from .sample import Sample
from . import prng

FULL_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def lane_mask(width: int) -> np.uint64:
    if not 1 <= width <= 64:
        raise ValueError(f"width must be in 1..64, got {width}")
    if width == 64:
        return FULL_MASK
    return np.uint64((1 << width) - 1)


class SpinConfiguration:
    """Bit-packed spins for `width` lanes on one lattice."""

    def __init__(self, geometry: LatticeGeometry, words: np.ndarray, width: int = 1):
        words = np.asarray(words, dtype=np.uint64)
        if words.shape != (geometry.n_sites,):
            raise ValueError(f"words must have shape ({geometry.n_sites},)")
        mask = lane_mask(width)
        if np.any(words & ~mask):
            raise ValueError("unused high lanes must be zero")
        self.geometry = geometry
        self.words = np.ascontiguousarray(words)
        self.width = int(width)

    @classmethod
    def random(cls, geometry: LatticeGeometry, seed: int, width: int = 1
               ) -> "SpinConfiguration":
        """Fair-coin spins for every site and lane from the mixing sequence."""
        mask = lane_mask(width)  # validates width
        n = geometry.n_sites
        bits = prng.bit_stream(seed, 64 * n).reshape(n, 64)
        words = np.packbits(bits, axis=1, bitorder="little").view(np.uint64)[:, 0]
        return cls(geometry, words & mask, width)

    def lane_spins(self, lane: int = 0) -> np.ndarray:
        """One lane's spins as +-1 int8 values."""
        if not 0 <= lane < self.width:
            raise ValueError(f"lane {lane} out of range for width {self.width}")
        bits = ((self.words >> np.uint64(lane)) & np.uint64(1)).astype(np.int8)
        return 2 * bits - 1

    def copy(self) -> "SpinConfiguration":
        return SpinConfiguration(self.geometry, self.words.copy(), self.width)

    def __eq__(self, other):
        return (isinstance(other, SpinConfiguration)
                and self.geometry == other.geometry
                and self.width == other.width
                and bool(np.array_equal(self.words, other.words)))


def pack(geometry: LatticeGeometry, spin_arrays) -> SpinConfiguration:
    """Pack per-sample +-1 spin arrays into lanes; inverse of unpack."""
    arrays = list(spin_arrays)
    if not arrays:
        raise ValueError("need at least one spin array")
    if len(arrays) > 64:
        raise ValueError(f"at most 64 lanes per word, got {len(arrays)}")
    n = geometry.n_sites
    words = np.zeros(n, dtype=np.uint64)
    for w, spins in enumerate(arrays):
        spins = np.asarray(spins)
        if spins.shape != (n,):
            raise ValueError(f"spin array {w} must have shape ({n},)")
        if not np.all(np.abs(spins) == 1):
            raise ValueError(f"spin array {w} must be +-1 valued")
        bits = ((spins + 1) // 2).astype(np.uint64)
        words |= bits << np.uint64(w)
    return SpinConfiguration(geometry, words, len(arrays))


def unpack(config: SpinConfiguration) -> list[np.ndarray]:
    """Per-lane +-1 spin arrays; inverse of pack."""
    return [config.lane_spins(w) for w in range(config.width)]


def energy(sample: Sample, config: SpinConfiguration, lane: int = 0) -> float:
    """Total energy of one lane: -sum_bonds J*S*S - sum_i h_i*S_i.

    Every stored bond counts exactly once (the three positive directions per
    site); on an L=2 axis that includes both parallel bonds.
    """
    if sample.geometry != config.geometry:
        raise ValueError("sample and configuration live on different lattices")
    s = config.lane_spins(lane).astype(np.int64)
    nbr = sample.geometry.neighbors
    j = 2 * sample.couplings.astype(np.int64) - 1
    e = 0
    for axis in range(3):
        e -= int(np.dot(j[axis] * s, s[nbr[:, 2 * axis]]))
    if sample.h == 0:
        return float(e)
    return float(e) - float(np.dot(sample.field_values(), s))


def local_delta_e(sample: Sample, config: SpinConfiguration, site: int,
                  lane: int = 0) -> float:
    """Energy change if `site` in `lane` flips right now."""
    w = config.words
    s_bit = int((w[site] >> np.uint64(lane)) & np.uint64(1))
    nbr = sample.geometry.neighbors[site]
    j6 = sample.j6()[site]
    n_sat = 0
    for d in range(6):
        nb_bit = int((w[nbr[d]] >> np.uint64(lane)) & np.uint64(1))
        n_sat += s_bit ^ nb_bit ^ int(j6[d])
    de = 4 * n_sat - 12
    if sample.h == 0:
        return float(de)
    s_val = 2 * s_bit - 1
    h_i = float(sample.h) * (2 * int(sample.field_bits[site]) - 1)
    return de + 2.0 * h_i * s_val


def overlap(config_a: SpinConfiguration, config_b: SpinConfiguration,
            lane: int = 0) -> float:
    """Site-averaged replica overlap q = (1/N) sum_i S_i^a S_i^b."""
    if config_a.geometry != config_b.geometry:
        raise ValueError("configurations live on different lattices")
    sa = config_a.lane_spins(lane).astype(np.int64)
    sb = config_b.lane_spins(lane).astype(np.int64)
    return float(np.dot(sa, sb)) / config_a.geometry.n_sites


def overlap_field(config_a: SpinConfiguration, config_b: SpinConfiguration,
                  lane: int = 0) -> np.ndarray:
    """Per-site overlap q_i = S_i^a S_i^b as +-1 int8."""
    if config_a.geometry != config_b.geometry:
        raise ValueError("configurations live on different lattices")
    diff = (config_a.words ^ config_b.words) >> np.uint64(lane)
    return (1 - 2 * (diff & np.uint64(1)).astype(np.int8))
