"""Throughput measurement for the bit-sliced engine.

Reports the two standard figures of merit for spin-flip engines:

* SUT (single update time): wall seconds per site visit of one worker,
  in picoseconds.
* GUT (global update time): SUT divided by the number of concurrent
  lanes, i.e. effective picoseconds per lane flip.

A context table of published single-chip numbers (2007..2013 survey,
ps/flip) is included so a report can place a software run against the
historical hardware range without reproducing any of those platforms.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .acceptance import build_acceptance_table
from .engine import metropolis_sweep_bitsliced
from .geometry import LatticeGeometry
from .prng import ParisiRapuanoState, derive_seed, TAG_BENCH, TAG_SWEEP
from .sample import Sample, SampleSet
from .spins import SpinConfiguration

# Published per-chip throughput survey (year, picoseconds per spin flip).
# CPU/GPU entries are commodity parts; the two custom entries are FPGA
# based dedicated machines (per-FPGA figure).
CONTEXT_ROWS = (
    ("Core 2 Duo (2 cores)", 2007, 1000.0),
    ("Cell BE (16 cores)", 2007, 150.0),
    ("custom FPGA, gen 1", 2008, 16.0),
    ("Tesla C1060 GPU", 2009, 720.0),
    ("Nehalem (8 cores)", 2009, 200.0),
    ("Tesla C2050 GPU", 2010, 430.0),
    ("Sandy Bridge (16 cores)", 2012, 60.0),
    ("Tesla K20X GPU", 2012, 230.0),
    ("Xeon Phi (61 cores)", 2013, 52.0),
    ("custom FPGA, gen 2", 2013, 2.0),
)


@dataclass(frozen=True)
class ThroughputReport:
    l: int
    width: int
    sweeps: int
    wall_seconds: float
    sut_ps: float
    gut_ps: float

    def lines(self) -> list:
        """Formatted report with the historical context rows appended."""
        out = [
            f"lattice L={self.l}, lanes={self.width}, sweeps={self.sweeps}",
            f"wall time        {self.wall_seconds:10.3f} s",
            f"SUT (per worker) {self.sut_ps:10.2f} ps/site-visit",
            f"GUT (per lane)   {self.gut_ps:10.2f} ps/flip",
            "",
            "context: published single-chip figures (ps/flip)",
        ]
        for label, year, ps in CONTEXT_ROWS:
            out.append(f"  {label:<26} {year}  {ps:8.1f}")
        return out


def measure_throughput(l: int = 64, width: int = 64, sweeps: int = 20,
                       warmup: int = 2, seed: int = 0) -> ThroughputReport:
    """Time the bit-sliced Metropolis engine on `width` zero-field samples.

    Warmup sweeps run first (outside the timed region) so jit compilation
    and cache effects do not pollute the measurement.
    """
    if sweeps < 10:
        raise ValueError(f"need at least 10 timed sweeps, got {sweeps}")
    if warmup < 1:
        raise ValueError("need at least one warmup sweep")
    geometry = LatticeGeometry(l)
    samples = [Sample.generate(geometry, derive_seed(seed, TAG_BENCH, i))
               for i in range(width)]
    sset = SampleSet(samples)
    config = SpinConfiguration.random(
        geometry, derive_seed(seed, TAG_BENCH, width), width)
    table = build_acceptance_table(1.0)
    rng = ParisiRapuanoState.from_seed(derive_seed(seed, TAG_SWEEP))

    for _ in range(warmup):
        metropolis_sweep_bitsliced(sset, config, table, rng)
    t0 = time.perf_counter()
    for _ in range(sweeps):
        metropolis_sweep_bitsliced(sset, config, table, rng)
    wall = time.perf_counter() - t0

    visits = float(sweeps) * geometry.n_sites
    sut_ps = wall / visits * 1e12
    return ThroughputReport(l=l, width=width, sweeps=sweeps,
                            wall_seconds=wall, sut_ps=sut_ps,
                            gut_ps=sut_ps / width)
