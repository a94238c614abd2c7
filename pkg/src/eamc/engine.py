"""Sweep engines: scalar Metropolis, scalar heat-bath, and the W-lane
bit-sliced Metropolis that updates up to 64 samples per word operation.

One full sweep (one MCS) visits every site once: all parity-0 sites in
ascending index order, then all parity-1 sites.  Every engine consumes
exactly one 32-bit random per site visit -- acceptance never short-circuits
the stream -- so the stream position after a sweep depends only on the
lattice size.  The bit-sliced engine shares each site's random across all
lanes; replaying any single lane through the scalar engine on the same
stream reproduces it bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels, prng
from .acceptance import AcceptanceTable, HeatBathTable, build_heatbath_table, build_acceptance_table
from .sample import Sample, SampleSet
from .spins import SpinConfiguration

STAT_PLANES = 48  # per-lane counters saturate at 2^48 site visits


@dataclass
class SweepPlan:
    """How a campaign drives its sweeps (the visit order is fixed:
    checkerboard, parity 0 then parity 1, ascending site index)."""

    engine: str = "scalar"          # scalar | bit-sliced
    width: int = 1
    rng_mode: str = "parisi-rapuano"  # parisi-rapuano | site-keyed


class FlipStats:
    """Attempt/accept counters per acceptance-table key (scalar engines)."""

    def __init__(self, table: AcceptanceTable):
        self.beta = table.beta
        self.h = table.h
        self.delta_e = table.delta_e.copy()
        self.attempts = np.zeros(table.n_keys, dtype=np.int64)
        self.accepts = np.zeros(table.n_keys, dtype=np.int64)

    def merge(self, other: "FlipStats") -> None:
        if other.beta != self.beta or other.h != self.h:
            raise ValueError("cannot merge statistics from different tables")
        self.attempts += other.attempts
        self.accepts += other.accepts

    def acceptance_rates(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.attempts > 0,
                            self.accepts / self.attempts, np.nan)

    def csv_rows(self):
        """(beta, delta_e, attempts, accepts) per key, attempts > 0 only."""
        rows = []
        for k in range(len(self.delta_e)):
            if self.attempts[k] > 0:
                rows.append((self.beta, float(self.delta_e[k]),
                             int(self.attempts[k]), int(self.accepts[k])))
        return rows


class LaneFlipStats:
    """Per-lane attempt/accept counters for the bit-sliced engine.

    Counts live in bit-plane counters (one ripple-carry add per mask), so
    tracking costs a few word ops per site instead of a per-lane loop.
    """

    def __init__(self, width: int):
        self.width = width
        self.planes = np.zeros((14, STAT_PLANES), dtype=np.uint64)

    def _decode(self, rows: slice) -> np.ndarray:
        out = np.zeros((7, self.width), dtype=np.int64)
        planes = self.planes[rows]
        for key in range(7):
            for p in range(STAT_PLANES):
                word = int(planes[key, p])
                if word == 0:
                    continue
                for w in range(self.width):
                    out[key, w] += ((word >> w) & 1) << p
        return out

    def attempts(self) -> np.ndarray:
        """int64[7, width]: site visits per satisfied-bond count per lane."""
        return self._decode(slice(0, 7))

    def accepts(self) -> np.ndarray:
        """int64[7, width]: accepted flips per satisfied-bond count per lane."""
        return self._decode(slice(7, 14))

    def lane_delta_e(self) -> np.ndarray:
        """Accumulated energy change per lane, from the accept counters."""
        de = np.array([4.0 * n - 12.0 for n in range(7)])
        return de @ self.accepts()


def _scratch(config: SpinConfiguration) -> tuple[np.ndarray, np.ndarray]:
    buf = getattr(config, "_rand_scratch", None)
    if buf is None:
        p0, p1 = config.geometry.phase_sites
        buf = (np.empty(p0.size, dtype=np.uint32),
               np.empty(p1.size, dtype=np.uint32))
        config._rand_scratch = buf
    return buf


_NO_BINS = np.zeros(1, dtype=np.float64)
_NO_HIST = np.zeros(0, dtype=np.int64)
_NO_FIELD = np.zeros(0, dtype=np.uint8)


def _check_scalar(sample: Sample, config: SpinConfiguration, h) -> None:
    if config.width != 1:
        raise ValueError("scalar engine needs a width-1 configuration")
    if sample.geometry != config.geometry:
        raise ValueError("sample and configuration live on different lattices")
    if sample.h != h:
        raise ValueError(
            f"table field {h} does not match sample field {sample.h}")


def metropolis_sweep_scalar(sample: Sample, config: SpinConfiguration,
                            table: AcceptanceTable, rng, *, sweeps: int = 1,
                            stats: FlipStats | None = None) -> float:
    """Run full Metropolis sweeps in place; returns the total energy change."""
    _check_scalar(sample, config, table.h)
    geom = config.geometry
    rand0, rand1 = _scratch(config)
    if stats is None:
        att = np.zeros(table.n_keys, dtype=np.int64)
        acc = np.zeros(table.n_keys, dtype=np.int64)
    else:
        att, acc = stats.attempts, stats.accepts
    mode, wheel, cursor, sk_seed, sweep0 = prng.kernel_rng_args(rng)
    e, cursor, sweep = _kernels.metropolis_run(
        config.words, geom.neighbors, sample.j6(),
        geom.phase_sites[0], geom.phase_sites[1],
        geom.phase_ids[0], geom.phase_ids[1],
        table.always, table.thresholds, table.delta_e,
        sample.field_key_bits(), att, acc,
        mode, wheel, cursor, sk_seed, sweep0, sweeps,
        0.0, _NO_BINS, 0, _NO_HIST, 1, rand0, rand1)
    prng.store_kernel_rng(rng, cursor, sweep)
    return float(e)


def metropolis_run_binned(sample: Sample, config: SpinConfiguration,
                          table: AcceptanceTable, rng, *, sweeps: int,
                          bins: int, e0: float,
                          stats: FlipStats | None = None
                          ) -> tuple[np.ndarray, float]:
    """Sweep and record bin means of the post-sweep energy.

    Returns (bin_means, final_energy); `sweeps` must split evenly into
    `bins`.  e0 is the energy of `config` before the first sweep.
    """
    _check_scalar(sample, config, table.h)
    if sweeps % bins != 0:
        raise ValueError(f"{sweeps} sweeps do not split into {bins} bins")
    bin_size = sweeps // bins
    geom = config.geometry
    rand0, rand1 = _scratch(config)
    if stats is None:
        att = np.zeros(table.n_keys, dtype=np.int64)
        acc = np.zeros(table.n_keys, dtype=np.int64)
    else:
        att, acc = stats.attempts, stats.accepts
    bin_sums = np.zeros(bins, dtype=np.float64)
    mode, wheel, cursor, sk_seed, sweep0 = prng.kernel_rng_args(rng)
    e, cursor, sweep = _kernels.metropolis_run(
        config.words, geom.neighbors, sample.j6(),
        geom.phase_sites[0], geom.phase_sites[1],
        geom.phase_ids[0], geom.phase_ids[1],
        table.always, table.thresholds, table.delta_e,
        sample.field_key_bits(), att, acc,
        mode, wheel, cursor, sk_seed, sweep0, sweeps,
        e0, bin_sums, bin_size, _NO_HIST, 1, rand0, rand1)
    prng.store_kernel_rng(rng, cursor, sweep)
    return bin_sums / bin_size, float(e)


def metropolis_run_histogram(sample: Sample, config: SpinConfiguration,
                             table: AcceptanceTable, rng, *, sweeps: int,
                             thin: int = 1) -> np.ndarray:
    """Sweep while histogramming the packed spin state every `thin` sweeps.

    Only sensible on tiny lattices; requires at most 20 sites.
    """
    _check_scalar(sample, config, table.h)
    n = sample.geometry.n_sites
    if n > 20:
        raise ValueError(f"state histogram limited to 20 sites, lattice has {n}")
    if thin < 1:
        raise ValueError("thin must be >= 1")
    geom = config.geometry
    rand0, rand1 = _scratch(config)
    att = np.zeros(table.n_keys, dtype=np.int64)
    acc = np.zeros(table.n_keys, dtype=np.int64)
    hist = np.zeros(1 << n, dtype=np.int64)
    mode, wheel, cursor, sk_seed, sweep0 = prng.kernel_rng_args(rng)
    _, cursor, sweep = _kernels.metropolis_run(
        config.words, geom.neighbors, sample.j6(),
        geom.phase_sites[0], geom.phase_sites[1],
        geom.phase_ids[0], geom.phase_ids[1],
        table.always, table.thresholds, table.delta_e,
        sample.field_key_bits(), att, acc,
        mode, wheel, cursor, sk_seed, sweep0, sweeps,
        0.0, _NO_BINS, 0, hist, thin, rand0, rand1)
    prng.store_kernel_rng(rng, cursor, sweep)
    return hist


def heatbath_sweep_scalar(sample: Sample, config: SpinConfiguration,
                          table: HeatBathTable, rng, *, sweeps: int = 1
                          ) -> float:
    """Heat-bath sweeps in place; returns the total energy change."""
    _check_scalar(sample, config, table.h)
    geom = config.geometry
    rand0, rand1 = _scratch(config)
    de = build_acceptance_table(table.beta, table.h).delta_e
    mode, wheel, cursor, sk_seed, sweep0 = prng.kernel_rng_args(rng)
    e, cursor, sweep = _kernels.heatbath_run(
        config.words, geom.neighbors, sample.j6(),
        geom.phase_sites[0], geom.phase_sites[1],
        geom.phase_ids[0], geom.phase_ids[1],
        table.thresholds, de, sample.field_key_bits(),
        mode, wheel, cursor, sk_seed, sweep0, sweeps,
        0.0, _NO_BINS, 0, _NO_HIST, 1, rand0, rand1)
    prng.store_kernel_rng(rng, cursor, sweep)
    return float(e)


def heatbath_run_binned(sample: Sample, config: SpinConfiguration,
                        table: HeatBathTable, rng, *, sweeps: int, bins: int,
                        e0: float) -> tuple[np.ndarray, float]:
    """Heat-bath analogue of metropolis_run_binned."""
    _check_scalar(sample, config, table.h)
    if sweeps % bins != 0:
        raise ValueError(f"{sweeps} sweeps do not split into {bins} bins")
    bin_size = sweeps // bins
    geom = config.geometry
    rand0, rand1 = _scratch(config)
    de = build_acceptance_table(table.beta, table.h).delta_e
    bin_sums = np.zeros(bins, dtype=np.float64)
    mode, wheel, cursor, sk_seed, sweep0 = prng.kernel_rng_args(rng)
    e, cursor, sweep = _kernels.heatbath_run(
        config.words, geom.neighbors, sample.j6(),
        geom.phase_sites[0], geom.phase_sites[1],
        geom.phase_ids[0], geom.phase_ids[1],
        table.thresholds, de, sample.field_key_bits(),
        mode, wheel, cursor, sk_seed, sweep0, sweeps,
        e0, bin_sums, bin_size, _NO_HIST, 1, rand0, rand1)
    prng.store_kernel_rng(rng, cursor, sweep)
    return bin_sums / bin_size, float(e)


def heatbath_run_histogram(sample: Sample, config: SpinConfiguration,
                           table: HeatBathTable, rng, *, sweeps: int,
                           thin: int = 1) -> np.ndarray:
    """Heat-bath analogue of metropolis_run_histogram."""
    _check_scalar(sample, config, table.h)
    n = sample.geometry.n_sites
    if n > 20:
        raise ValueError(f"state histogram limited to 20 sites, lattice has {n}")
    if thin < 1:
        raise ValueError("thin must be >= 1")
    geom = config.geometry
    rand0, rand1 = _scratch(config)
    de = build_acceptance_table(table.beta, table.h).delta_e
    hist = np.zeros(1 << n, dtype=np.int64)
    mode, wheel, cursor, sk_seed, sweep0 = prng.kernel_rng_args(rng)
    _, cursor, sweep = _kernels.heatbath_run(
        config.words, geom.neighbors, sample.j6(),
        geom.phase_sites[0], geom.phase_sites[1],
        geom.phase_ids[0], geom.phase_ids[1],
        table.thresholds, de, sample.field_key_bits(),
        mode, wheel, cursor, sk_seed, sweep0, sweeps,
        0.0, _NO_BINS, 0, hist, thin, rand0, rand1)
    prng.store_kernel_rng(rng, cursor, sweep)
    return hist


def metropolis_sweep_bitsliced(samples: SampleSet, config: SpinConfiguration,
                               table: AcceptanceTable, rng, *,
                               sweeps: int = 1,
                               stats: LaneFlipStats | None = None) -> None:
    """W-lane Metropolis sweeps, one shared random per site across lanes."""
    if samples.geometry != config.geometry:
        raise ValueError("samples and configuration live on different lattices")
    if samples.width != config.width:
        raise ValueError(
            f"configuration width {config.width} != sample width {samples.width}")
    if table.h != 0:
        raise ValueError("bit-sliced engine handles zero-field samples only")
    if stats is not None and stats.width != samples.width:
        raise ValueError("statistics width does not match sample width")
    geom = config.geometry
    rand0, rand1 = _scratch(config)
    if stats is None:
        planes = np.zeros((14, 1), dtype=np.uint64)
        track = False
    else:
        planes = stats.planes
        track = True
    mode, wheel, cursor, sk_seed, sweep0 = prng.kernel_rng_args(rng)
    cursor, sweep = _kernels.metropolis_run_bits(
        config.words, geom.neighbors, samples.j6_words,
        geom.phase_sites[0], geom.phase_sites[1],
        geom.phase_ids[0], geom.phase_ids[1],
        table.thresholds, samples.lane_mask, planes, track,
        mode, wheel, cursor, sk_seed, sweep0, sweeps, rand0, rand1)
    prng.store_kernel_rng(rng, cursor, sweep)


def lane_energies(samples: SampleSet, config: SpinConfiguration) -> np.ndarray:
    """Per-lane total energy of a packed configuration (zero field)."""
    if samples.geometry != config.geometry:
        raise ValueError("samples and configuration live on different lattices")
    if samples.width != config.width:
        raise ValueError("width mismatch")
    geom = config.geometry
    words = config.words
    planes = np.zeros((1, STAT_PLANES), dtype=np.uint64)
    for axis in range(3):
        plus = geom.neighbors[:, 2 * axis]
        sat = words ^ words[plus] ^ samples.coupling_words[axis]
        _kernels.lane_popcount(sat, planes)
    counts = np.zeros(samples.width, dtype=np.int64)
    for p in range(STAT_PLANES):
        word = int(planes[0, p])
        if word == 0:
            continue
        for w in range(samples.width):
            counts[w] += ((word >> w) & 1) << p
    n_bonds = 3 * geom.n_sites
    # E = -(sat - unsat) = -(2*sat - n_bonds)
    return (n_bonds - 2 * counts).astype(np.float64)
