"""Slab partitioning of one lattice across P workers with halo exchange.

The cube is cut into P z-slabs (thickness >= 2 so a slab never needs its
own far boundary through a neighbor).  Each worker owns its slab plus two
ghost planes mirroring the adjacent slabs' boundary planes.  A sweep runs
exchange-then-compute per parity phase: every worker posts its two boundary
planes, refreshes its ghosts from the two messages addressed to it, then
updates its own sites of that parity.  Because a checkerboard phase only
reads opposite-parity neighbors, the phase result is order-independent and
the partitioned update is exactly the monolithic update whenever the random
assigned to each (site, sweep, phase) matches:

* site-keyed streams: randoms are a pure function of the global site id, so
  any P reproduces P=1 bit for bit;
* per-slab wheel streams: each worker draws from its own stream (statistical
  mode) -- trajectories differ across P but sample the same chain.

Wire format of one halo message: little-endian header (sweep u64, phase u8,
direction u8, sender u16, reserved u32), then the boundary plane's spin bits
packed eight per byte, site order x fastest.  Direction 0 travels +z (the
sender's top plane, becoming the receiver's bottom ghost), 1 travels -z.
A single worker self-copies its wrap planes and sends nothing.
"""

from __future__ import annotations

import struct

import numpy as np

from . import _kernels, prng
from .acceptance import AcceptanceTable
from .engine import FlipStats
from .geometry import LatticeGeometry
from .sample import Sample
from .spins import SpinConfiguration

HALO_HEADER = struct.Struct("<QBBHI")  # sweep, phase, direction, sender, reserved
UP, DOWN = 0, 1


class HaloProtocolError(RuntimeError):
    """A halo message was missing, duplicated, malformed, or unexpected."""

    def __init__(self, kind: str, *, sweep=None, phase=None, direction=None,
                 sender=None, detail: str = ""):
        self.kind = kind
        self.sweep = sweep
        self.phase = phase
        self.direction = direction
        self.sender = sender
        parts = [f"halo protocol violation ({kind})"]
        if sweep is not None:
            parts.append(f"sweep={sweep} phase={phase} "
                         f"direction={direction} sender={sender}")
        if detail:
            parts.append(detail)
        super().__init__(": ".join(parts))


class HaloMessage:
    """One boundary plane in flight."""

    def __init__(self, sweep: int, phase: int, direction: int, sender: int,
                 plane_bits: np.ndarray):
        self.sweep = int(sweep)
        self.phase = int(phase)
        self.direction = int(direction)
        self.sender = int(sender)
        self.plane_bits = np.asarray(plane_bits, dtype=np.uint8)

    def encode(self) -> bytes:
        header = HALO_HEADER.pack(self.sweep, self.phase, self.direction,
                                  self.sender, 0)
        return header + np.packbits(self.plane_bits,
                                    bitorder="little").tobytes()

    @classmethod
    def decode(cls, raw: bytes, plane_sites: int) -> "HaloMessage":
        need = HALO_HEADER.size + (plane_sites + 7) // 8
        if len(raw) != need:
            raise HaloProtocolError(
                "malformed", detail=f"expected {need} bytes, got {len(raw)}")
        sweep, phase, direction, sender, _ = HALO_HEADER.unpack_from(raw)
        if phase > 1 or direction > 1:
            raise HaloProtocolError("malformed",
                                    detail="phase and direction are one bit")
        packed = np.frombuffer(raw, dtype=np.uint8, offset=HALO_HEADER.size)
        bits = np.unpackbits(packed, bitorder="little")[:plane_sites]
        return cls(sweep, phase, direction, sender, bits)


class HaloChannel:
    """In-process mailbox carrying encoded halo messages between slabs.

    Messages are posted as raw bytes and collected per (receiver, sweep,
    phase).  Collection enforces the protocol: exactly one message per
    expected (direction, sender) key, nothing stale, nothing duplicated.
    The mailbox is a plain dict so tests can drop or duplicate traffic.
    """

    def __init__(self, plane_sites: int):
        self.plane_sites = plane_sites
        self.mailbox: dict = {}   # receiver -> list of raw messages
        self.posted = 0

    def post(self, receiver: int, raw: bytes) -> None:
        self.mailbox.setdefault(receiver, []).append(raw)
        self.posted += 1

    def collect(self, receiver: int, sweep: int, phase: int,
                expected: list) -> dict:
        """Decode this receiver's mail for (sweep, phase).

        `expected` lists (direction, sender) pairs.  Returns
        {(direction, sender): HaloMessage}.
        """
        raws = self.mailbox.pop(receiver, [])
        out = {}
        for raw in raws:
            msg = HaloMessage.decode(raw, self.plane_sites)
            if msg.sweep != sweep or msg.phase != phase:
                raise HaloProtocolError(
                    "unexpected", sweep=msg.sweep, phase=msg.phase,
                    direction=msg.direction, sender=msg.sender,
                    detail=f"collector is at sweep={sweep} phase={phase}")
            key = (msg.direction, msg.sender)
            if key in out:
                raise HaloProtocolError("duplicate", sweep=sweep, phase=phase,
                                        direction=msg.direction,
                                        sender=msg.sender)
            out[key] = msg
        for key in expected:
            if key not in out:
                raise HaloProtocolError("missing", sweep=sweep, phase=phase,
                                        direction=key[0], sender=key[1])
        for key in out:
            if key not in expected:
                raise HaloProtocolError("unexpected", sweep=sweep, phase=phase,
                                        direction=key[0], sender=key[1])
        return out


class SlabLayout:
    """Balanced 1-D decomposition of Lz planes into P slabs."""

    def __init__(self, geometry: LatticeGeometry, p: int):
        lz = geometry.dims[2]
        if p < 1:
            raise ValueError("need at least one worker")
        if lz < 2 * p:
            raise ValueError(
                f"Lz = {lz} cannot give {p} slabs of thickness >= 2")
        base, extra = divmod(lz, p)
        self.geometry = geometry
        self.p = p
        self.thickness = [base + (1 if w < extra else 0) for w in range(p)]
        self.z0 = [sum(self.thickness[:w]) for w in range(p)]
        assert max(self.thickness) - min(self.thickness) <= 1

    def slab_of_plane(self, z: int) -> int:
        for w in range(self.p):
            if self.z0[w] <= z < self.z0[w] + self.thickness[w]:
                return w
        raise ValueError(f"plane {z} outside the lattice")


def link_traffic(p: int, sweeps: int) -> int:
    """Total halo messages for a run: the slab ring has P boundaries and
    each carries 2 phases x 2 directions per sweep.  Zero when P = 1 (the
    single slab copies its own boundary planes without messaging)."""
    return 0 if p == 1 else 4 * p * sweeps


class _Slab:
    """One worker's share: owned planes, ghosts, local tables."""

    def __init__(self, sample: Sample, layout: SlabLayout, w: int):
        geom = layout.geometry
        lx, ly, lz = geom.dims
        self.w = w
        self.lx, self.ly = lx, ly
        self.plane = lx * ly
        self.thickness = layout.thickness[w]
        self.z0 = layout.z0[w]
        nz = self.thickness + 2  # ghosts at local plane 0 and nz-1
        n_local = self.plane * nz
        self.up_neighbor = (w + 1) % layout.p
        self.down_neighbor = (w - 1) % layout.p

        # local tables: x/y periodic in-plane, z runs into the ghost planes
        idx = np.arange(n_local)
        x = idx % lx
        y = (idx // lx) % ly
        zl = idx // self.plane
        nbr = np.empty((n_local, 6), dtype=np.int32)
        nbr[:, 0] = (x + 1) % lx + lx * y + self.plane * zl
        nbr[:, 1] = (x - 1) % lx + lx * y + self.plane * zl
        nbr[:, 2] = x + lx * ((y + 1) % ly) + self.plane * zl
        nbr[:, 3] = x + lx * ((y - 1) % ly) + self.plane * zl
        nbr[:, 4] = np.minimum(idx + self.plane, n_local - 1)
        nbr[:, 5] = np.maximum(idx - self.plane, 0)
        self.neighbors = np.ascontiguousarray(nbr)

        owned = (zl >= 1) & (zl <= self.thickness)
        zg = self.z0 + zl - 1  # global plane of each local site (ghosts wrap)
        self.global_ids = (x + lx * y + self.plane * ((zg % lz))).astype(np.int64)
        parity = (x + y + zg) & 1
        self.phase_sites = tuple(
            np.ascontiguousarray(
                np.nonzero(owned & (parity == ph))[0].astype(np.int32))
            for ph in (0, 1))
        self.phase_ids = tuple(
            np.ascontiguousarray(self.global_ids[self.phase_sites[ph]])
            for ph in (0, 1))

        self.j6 = np.ascontiguousarray(sample.j6()[self.global_ids])
        if sample.h == 0:
            self.fbits = np.zeros(0, dtype=np.uint8)
        else:
            self.fbits = np.ascontiguousarray(
                sample.field_bits[self.global_ids])
        self.words = np.zeros(n_local, dtype=np.uint64)
        self.rand = (np.empty(self.phase_sites[0].size, dtype=np.uint32),
                     np.empty(self.phase_sites[1].size, dtype=np.uint32))

    def load(self, global_words: np.ndarray) -> None:
        self.words[:] = global_words[self.global_ids]

    def owned_slice(self) -> slice:
        return slice(self.plane, self.plane * (self.thickness + 1))

    def boundary_plane(self, direction: int) -> np.ndarray:
        """Spin bits of the owned plane facing `direction` (UP = top)."""
        if direction == UP:
            sl = slice(self.plane * self.thickness,
                       self.plane * (self.thickness + 1))
        else:
            sl = slice(self.plane, 2 * self.plane)
        return (self.words[sl] & np.uint64(1)).astype(np.uint8)

    def write_ghost(self, direction: int, bits: np.ndarray) -> None:
        """Install a received plane: UP mail lands in the bottom ghost."""
        if direction == UP:
            sl = slice(0, self.plane)
        else:
            sl = slice(self.plane * (self.thickness + 1),
                       self.plane * (self.thickness + 2))
        self.words[sl] = bits.astype(np.uint64)


class PartitionedRunner:
    """Drives one scalar Metropolis chain split into P z-slabs.

    rng_mode "site-keyed" reproduces the monolithic trajectory bit for bit
    for any P.  Mode "per-slab" gives every worker its own wheel stream
    derived as (TAG_SLAB, w) -- statistically equivalent, not bit-equal;
    pass `streams` to seed workers explicitly (a P=1 run fed the monolithic
    stream object IS the monolithic run).
    """

    def __init__(self, sample: Sample, table: AcceptanceTable,
                 config: SpinConfiguration, p: int, *,
                 rng_mode: str = "site-keyed", master_seed: int = 0,
                 streams: list | None = None,
                 channel: HaloChannel | None = None):
        if config.width != 1:
            raise ValueError("partitioned runs are scalar (width 1)")
        if sample.geometry != config.geometry:
            raise ValueError("sample and configuration live on different lattices")
        if table.h != sample.h:
            raise ValueError(
                f"table field {table.h} does not match sample field {sample.h}")
        geom = sample.geometry
        self.sample = sample
        self.table = table
        self.geometry = geom
        self.layout = SlabLayout(geom, p)
        self.p = p
        self.slabs = [_Slab(sample, self.layout, w) for w in range(p)]
        for slab in self.slabs:
            slab.load(config.words)
        plane = geom.dims[0] * geom.dims[1]
        self.channel = channel if channel is not None else HaloChannel(plane)
        self.sweep = 0
        self.energy0 = None  # caller may track via delta_e
        self.delta_e = 0.0
        self.stats = FlipStats(table)
        if streams is not None:
            if len(streams) != p:
                raise ValueError(f"need exactly {p} streams")
            self.streams = list(streams)
        elif rng_mode == "site-keyed":
            self.streams = [prng.SiteKeyedStream(master_seed) for _ in range(p)]
        elif rng_mode == "per-slab":
            self.streams = [
                prng.ParisiRapuanoState.from_seed(
                    prng.derive_seed(master_seed, prng.TAG_SLAB, w))
                for w in range(p)]
        else:
            raise ValueError(f"unknown rng mode {rng_mode!r}")

    # -- halo machinery -------------------------------------------------------

    def _exchange(self, phase: int) -> None:
        if self.p == 1:
            slab = self.slabs[0]
            slab.write_ghost(UP, slab.boundary_plane(UP))
            slab.write_ghost(DOWN, slab.boundary_plane(DOWN))
            return
        for slab in self.slabs:
            for direction, receiver in ((UP, slab.up_neighbor),
                                        (DOWN, slab.down_neighbor)):
                msg = HaloMessage(self.sweep, phase, direction, slab.w,
                                  slab.boundary_plane(direction))
                self.channel.post(receiver, msg.encode())
        for slab in self.slabs:
            expected = [(UP, slab.down_neighbor), (DOWN, slab.up_neighbor)]
            got = self.channel.collect(slab.w, self.sweep, phase, expected)
            for (direction, _sender), msg in got.items():
                slab.write_ghost(direction, msg.plane_bits)

    # -- sweeping -------------------------------------------------------------

    def run(self, sweeps: int = 1) -> float:
        """Full sweeps across all slabs; returns the total energy change."""
        t = self.table
        de = 0.0
        for _ in range(sweeps):
            for phase in (0, 1):
                self._exchange(phase)
                for slab, rng in zip(self.slabs, self.streams):
                    rng.phase_randoms(slab.rand[phase], slab.phase_ids[phase],
                                      phase)
                    de += _kernels.metropolis_phase(
                        slab.words, slab.neighbors, slab.j6,
                        slab.phase_sites[phase], slab.rand[phase],
                        t.always, t.thresholds, t.delta_e, slab.fbits,
                        self.stats.attempts, self.stats.accepts)
            for rng in self.streams:
                rng.end_sweep()
            self.sweep += 1
        self.delta_e += de
        return de

    def gather(self) -> SpinConfiguration:
        """Assemble the owned planes of every slab into a global configuration."""
        words = np.zeros(self.geometry.n_sites, dtype=np.uint64)
        for slab in self.slabs:
            sl = slab.owned_slice()
            words[slab.global_ids[sl]] = slab.words[sl]
        return SpinConfiguration(self.geometry, words, 1)

    @property
    def messages_posted(self) -> int:
        return self.channel.posted
