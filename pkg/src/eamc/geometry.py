"""Periodic 3D lattice geometry with checkerboard parity.

Site index convention: idx = x + lx*y + lx*ly*z, so x is the fastest axis.
Parity is (x+y+z) mod 2; every dimension must be even (and at least 2) so the
two-color checkerboard tiles the torus and no site is its own neighbor's
neighbor within a parity class.  The production lattices are cubic; small
rectangular boxes are supported so exhaustive enumeration can reach shapes
like 2x2x4 that a cube cannot.
"""

from __future__ import annotations

import numpy as np

# direction order used everywhere: +x, -x, +y, -y, +z, -z
DIRECTIONS = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))


class LatticeGeometry:
    """Neighbor tables and parity orderings for one lattice shape."""

    def __init__(self, l: int):
        self._init_dims(l, l, l)

    @classmethod
    def box(cls, lx: int, ly: int, lz: int) -> "LatticeGeometry":
        geom = cls.__new__(cls)
        geom._init_dims(lx, ly, lz)
        return geom

    def _init_dims(self, lx: int, ly: int, lz: int) -> None:
        for name, v in (("lx", lx), ("ly", ly), ("lz", lz)):
            if v < 2:
                raise ValueError(f"{name} must be >= 2, got {v}")
            if v % 2 != 0:
                raise ValueError(f"{name} must be even for checkerboard parity, got {v}")
        self.dims = (int(lx), int(ly), int(lz))
        self.n_sites = lx * ly * lz
        self._build_tables()

    @property
    def is_cubic(self) -> bool:
        return self.dims[0] == self.dims[1] == self.dims[2]

    @property
    def l(self) -> int:
        if not self.is_cubic:
            raise ValueError(f"lattice is not cubic: {self.dims}")
        return self.dims[0]

    def _build_tables(self) -> None:
        lx, ly, lz = self.dims
        n = self.n_sites
        idx = np.arange(n)
        x = idx % lx
        y = (idx // lx) % ly
        z = idx // (lx * ly)
        self.coords = np.stack([x, y, z], axis=1).astype(np.int32)
        self.parity = ((x + y + z) & 1).astype(np.uint8)

        nbr = np.empty((n, 6), dtype=np.int32)
        nbr[:, 0] = (x + 1) % lx + lx * y + lx * ly * z
        nbr[:, 1] = (x - 1) % lx + lx * y + lx * ly * z
        nbr[:, 2] = x + lx * ((y + 1) % ly) + lx * ly * z
        nbr[:, 3] = x + lx * ((y - 1) % ly) + lx * ly * z
        nbr[:, 4] = x + lx * y + lx * ly * ((z + 1) % lz)
        nbr[:, 5] = x + lx * y + lx * ly * ((z - 1) % lz)
        self.neighbors = np.ascontiguousarray(nbr)

        # checkerboard visit order: all parity-0 sites by ascending index,
        # then all parity-1 sites
        self.phase_sites = (
            np.ascontiguousarray(np.nonzero(self.parity == 0)[0].astype(np.int32)),
            np.ascontiguousarray(np.nonzero(self.parity == 1)[0].astype(np.int32)),
        )
        self.phase_ids = (
            self.phase_sites[0].astype(np.int64),
            self.phase_sites[1].astype(np.int64),
        )

    def site_index(self, x: int, y: int, z: int) -> int:
        lx, ly, lz = self.dims
        return (x % lx) + lx * (y % ly) + lx * ly * (z % lz)

    def site_coords(self, i: int) -> tuple[int, int, int]:
        lx, ly, _ = self.dims
        return (i % lx, (i // lx) % ly, i // (lx * ly))

    def __eq__(self, other):
        return isinstance(other, LatticeGeometry) and self.dims == other.dims

    def __hash__(self):
        return hash(self.dims)

    def __repr__(self):
        return f"LatticeGeometry{self.dims}"
