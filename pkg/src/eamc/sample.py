"""Disorder realizations: quenched couplings and the optional random field.

A sample owns one bit per bond, stored as three positive-direction bond bits
per site (+x, +y, +z), plus an optional per-site field-sign bit with a common
magnitude h.  Bit j maps to the coupling J = 2j - 1; field bit b maps to the
local field h_i = (2b - 1) * h.  h is quantized to multiples of 1/4 so every
energy difference stays an exact dyadic rational.

On an L=2 axis the +d and -d neighbors coincide; the two parallel bonds are
both stored and both counted in the energy.
"""

from __future__ import annotations

import struct
from fractions import Fraction

import numpy as np

from .geometry import LatticeGeometry
from . import prng

MAGIC = b"EASAMPLE"
VERSION = 1
_HEADER = struct.Struct("<8sIIIIIQQB")  # magic, version, L, h_num, h_den, pad, sample_id, seed, has_field


def _check_h(h) -> Fraction:
    h = Fraction(h)
    if h < 0:
        raise ValueError(f"field magnitude must be >= 0, got {h}")
    if (4 * h).denominator != 1:
        raise ValueError(f"field magnitude must be a multiple of 1/4, got {h}")
    return h


class Sample:
    """One disorder realization on a lattice."""

    def __init__(self, geometry: LatticeGeometry, couplings: np.ndarray,
                 h=0, field_bits: np.ndarray | None = None,
                 sample_id: int = 0, coupling_seed: int = 0):
        n = geometry.n_sites
        couplings = np.asarray(couplings, dtype=np.uint8)
        if couplings.shape != (3, n):
            raise ValueError(f"couplings must have shape (3, {n})")
        if couplings.max(initial=0) > 1:
            raise ValueError("coupling bits must be 0 or 1")
        self.geometry = geometry
        self.couplings = np.ascontiguousarray(couplings)
        self.h = _check_h(h)
        if (self.h > 0) != (field_bits is not None):
            raise ValueError("field bits must be present exactly when h > 0")
        if field_bits is not None:
            field_bits = np.asarray(field_bits, dtype=np.uint8)
            if field_bits.shape != (n,):
                raise ValueError(f"field bits must have shape ({n},)")
            if field_bits.max(initial=0) > 1:
                raise ValueError("field bits must be 0 or 1")
            field_bits = np.ascontiguousarray(field_bits)
        self.field_bits = field_bits
        self.sample_id = int(sample_id)
        self.coupling_seed = int(coupling_seed)
        self._j6 = None

    # -- generation ---------------------------------------------------------

    @classmethod
    def generate(cls, geometry: LatticeGeometry, seed: int, *, h=0,
                 sample_id: int = 0) -> "Sample":
        """Draw couplings (and field signs when h > 0) as fair coin flips.

        The coupling bits come from the documented mixing sequence keyed by
        `seed`; the field signs use an independent derived stream.
        """
        n = geometry.n_sites
        bits = prng.bit_stream(seed, 3 * n)
        couplings = np.ascontiguousarray(bits.reshape(n, 3).T)
        h = _check_h(h)
        field_bits = None
        if h > 0:
            field_bits = prng.bit_stream(prng.derive_seed(seed, prng.TAG_FIELD), n)
        return cls(geometry, couplings, h=h, field_bits=field_bits,
                   sample_id=sample_id, coupling_seed=seed)

    # -- derived tables -----------------------------------------------------

    def j6(self) -> np.ndarray:
        """Per-site coupling bits for all six directions, shape (N, 6).

        Column order matches the geometry's direction order; the -d column
        holds the +d bond bit of the -d neighbor.
        """
        if self._j6 is None:
            nbr = self.geometry.neighbors
            j6 = np.empty((self.geometry.n_sites, 6), dtype=np.uint8)
            for axis in range(3):
                j6[:, 2 * axis] = self.couplings[axis]
                j6[:, 2 * axis + 1] = self.couplings[axis, nbr[:, 2 * axis + 1]]
            self._j6 = np.ascontiguousarray(j6)
        return self._j6

    def j6_values(self) -> np.ndarray:
        """Same layout as j6() but as +-1 coupling values (int8)."""
        return (2 * self.j6().astype(np.int8) - 1)

    def field_values(self) -> np.ndarray:
        """Per-site field h_i as float64 (zeros when h == 0)."""
        n = self.geometry.n_sites
        if self.h == 0:
            return np.zeros(n, dtype=np.float64)
        signs = 2.0 * self.field_bits - 1.0
        return float(self.h) * signs

    def field_key_bits(self) -> np.ndarray:
        """Field bits for the sweep kernels (empty array when h == 0)."""
        if self.h == 0:
            return np.zeros(0, dtype=np.uint8)
        return self.field_bits

    # -- serialization ------------------------------------------------------

    def to_bytes(self) -> bytes:
        """Versioned little-endian binary layout.

        Header, then the 3N coupling bits packed eight per byte in site order
        with the (+x, +y, +z) bits of each site adjacent, then the N field
        bits (only when a field is present).
        """
        if not self.geometry.is_cubic:
            raise ValueError("only cubic samples have a file representation")
        header = _HEADER.pack(MAGIC, VERSION, self.geometry.l,
                              self.h.numerator, self.h.denominator, 0,
                              self.sample_id, self.coupling_seed,
                              1 if self.field_bits is not None else 0)
        interleaved = np.ascontiguousarray(self.couplings.T).reshape(-1)
        blob = header + np.packbits(interleaved, bitorder="little").tobytes()
        if self.field_bits is not None:
            blob += np.packbits(self.field_bits, bitorder="little").tobytes()
        return blob

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Sample":
        if len(raw) < _HEADER.size:
            raise ValueError("truncated sample blob")
        magic, version, l, h_num, h_den, _pad, sample_id, seed, has_field = \
            _HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise ValueError("bad magic; not a sample blob")
        if version != VERSION:
            raise ValueError(f"unsupported sample version {version}")
        geometry = LatticeGeometry(l)
        n = geometry.n_sites
        off = _HEADER.size
        nc = (3 * n + 7) // 8
        packed = np.frombuffer(raw, dtype=np.uint8, count=nc, offset=off)
        bits = np.unpackbits(packed, bitorder="little")[:3 * n]
        couplings = np.ascontiguousarray(bits.reshape(n, 3).T)
        off += nc
        field_bits = None
        if has_field:
            nf = (n + 7) // 8
            fpacked = np.frombuffer(raw, dtype=np.uint8, count=nf, offset=off)
            field_bits = np.unpackbits(fpacked, bitorder="little")[:n].copy()
            off += nf
        if len(raw) != off:
            raise ValueError("trailing bytes in sample blob")
        h = Fraction(h_num, h_den)
        if h == 0:
            field_bits = None
        return cls(geometry, couplings, h=h, field_bits=field_bits,
                   sample_id=sample_id, coupling_seed=seed)

    def __eq__(self, other):
        if not isinstance(other, Sample):
            return NotImplemented
        same_field = (
            (self.field_bits is None and other.field_bits is None)
            or (self.field_bits is not None and other.field_bits is not None
                and np.array_equal(self.field_bits, other.field_bits))
        )
        return (self.geometry == other.geometry
                and np.array_equal(self.couplings, other.couplings)
                and self.h == other.h and same_field
                and self.sample_id == other.sample_id
                and self.coupling_seed == other.coupling_seed)


class SampleSet:
    """Up to 64 same-shape, zero-field samples packed one per bit lane."""

    def __init__(self, samples: list[Sample]):
        if not samples:
            raise ValueError("need at least one sample")
        if len(samples) > 64:
            raise ValueError(f"at most 64 lanes per word, got {len(samples)}")
        geometry = samples[0].geometry
        for s in samples:
            if s.geometry != geometry:
                raise ValueError("all packed samples must share one geometry")
            if s.h != 0:
                raise ValueError("bit-packed sample sets carry no field")
        self.geometry = geometry
        self.samples = list(samples)
        self.width = len(samples)
        n = geometry.n_sites
        jw = np.zeros((3, n), dtype=np.uint64)
        for w, s in enumerate(self.samples):
            jw |= s.couplings.astype(np.uint64) << np.uint64(w)
        self.coupling_words = jw
        nbr = geometry.neighbors
        j6w = np.empty((n, 6), dtype=np.uint64)
        for axis in range(3):
            j6w[:, 2 * axis] = jw[axis]
            j6w[:, 2 * axis + 1] = jw[axis, nbr[:, 2 * axis + 1]]
        self.j6_words = np.ascontiguousarray(j6w)

    @property
    def lane_mask(self) -> np.uint64:
        if self.width == 64:
            return np.uint64(0xFFFFFFFFFFFFFFFF)
        return np.uint64((1 << self.width) - 1)
