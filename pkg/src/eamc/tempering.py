"""Parallel tempering: a ladder of temperatures with label exchanges.

N_T replicas of one sample evolve simultaneously, one per temperature slot.
After every block of sweeps, adjacent slots attempt a configuration exchange
accepted with the Metropolis probability min(1, exp[(b_k - b_{k+1}) *
(E_a - E_b)]).  Exchanges move temperature labels, not spin words: each
replica keeps its configuration array and random stream for its whole life,
and only the slot permutation is rewritten.

The swap decision uses the same fixed-point rule as the single-spin engines:
one 32-bit word per pair decision, always consumed, accepted on a strict
compare against floor(2^32 * e^x).  A degenerate ladder (equal temperatures)
therefore accepts every exchange exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import prng
from .acceptance import TWO32, build_acceptance_table, build_heatbath_table
from .engine import FlipStats, heatbath_run_binned, metropolis_run_binned
from .sample import Sample
from .spins import SpinConfiguration, energy


@dataclass(frozen=True)
class TemperatureLadder:
    """Ascending temperatures; equal entries are allowed (degenerate rungs)."""

    temps: tuple

    def __post_init__(self):
        temps = tuple(float(t) for t in self.temps)
        if not temps:
            raise ValueError("ladder needs at least one temperature")
        if any(t <= 0 for t in temps):
            raise ValueError("temperatures must be positive")
        if any(b < a for a, b in zip(temps, temps[1:])):
            raise ValueError("temperatures must be sorted ascending")
        object.__setattr__(self, "temps", temps)

    @classmethod
    def geometric(cls, t_lo: float, t_hi: float, n_t: int) -> "TemperatureLadder":
        """n_t rungs spaced uniformly in log T between the fixed endpoints."""
        if n_t < 1:
            raise ValueError("need at least one rung")
        if n_t == 1:
            if t_lo != t_hi:
                raise ValueError("a single rung needs t_lo == t_hi")
            return cls((t_lo,))
        ratio = t_hi / t_lo
        return cls(tuple(t_lo * ratio ** (k / (n_t - 1)) for k in range(n_t)))

    @property
    def n_t(self) -> int:
        return len(self.temps)

    @property
    def betas(self) -> np.ndarray:
        """Inverse temperatures by slot (descending as T ascends)."""
        return 1.0 / np.array(self.temps)


def swap_exponent(beta_a: float, beta_b: float, e_a: float, e_b: float) -> float:
    """log of the exchange acceptance ratio for configs a (slot with beta_a)
    and b (slot with beta_b)."""
    return (beta_a - beta_b) * (e_a - e_b)


def swap_accepts(x: float, r: int) -> bool:
    """Fixed-point exchange decision: x >= 0, else r < floor(2^32 * e^x)."""
    if x >= 0.0:
        return True
    return r < math.floor(TWO32 * math.exp(x))


@dataclass
class SwapStats:
    """Exchange bookkeeping per adjacent pair plus slot occupancy."""

    n_t: int
    passes: int = 0
    attempts: np.ndarray = field(default=None)
    accepts: np.ndarray = field(default=None)
    occupancy: np.ndarray = field(default=None)  # [replica, slot] pass counts

    def __post_init__(self):
        if self.attempts is None:
            self.attempts = np.zeros(max(self.n_t - 1, 0), dtype=np.int64)
        if self.accepts is None:
            self.accepts = np.zeros(max(self.n_t - 1, 0), dtype=np.int64)
        if self.occupancy is None:
            self.occupancy = np.zeros((self.n_t, self.n_t), dtype=np.int64)

    def pair_acceptance(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.attempts > 0,
                            self.accepts / self.attempts, np.nan)

    def occupancy_chi2(self) -> tuple[float, int]:
        """(chi2, dof) of the occupancy table against perfect uniformity."""
        if self.passes == 0:
            return 0.0, 0
        expect = self.passes / self.n_t
        chi2 = float(((self.occupancy - expect) ** 2 / expect).sum())
        return chi2, self.n_t * (self.n_t - 1)


class ParallelTempering:
    """One sample, N_T replicas, label-exchange parallel tempering.

    All randomness derives from `master_seed`: replica r sweeps with the
    stream (TAG_SWEEP, r), initial spins come from (TAG_SPINS, r), and the
    exchange decisions use the single stream (TAG_SWAP,).  Cached energies
    are updated incrementally from the exact kernel deltas and revalidated
    against a full recomputation every `revalidate_every` blocks.
    """

    def __init__(self, sample: Sample, ladder: TemperatureLadder, *,
                 master_seed: int, sweeps_per_block: int = 10,
                 engine: str = "metropolis", rng_mode: str = "parisi-rapuano",
                 revalidate_every: int = 10_000,
                 track_flips: bool = False):
        if engine not in ("metropolis", "heat-bath"):
            raise ValueError(f"unknown engine {engine!r}")
        if sweeps_per_block < 1:
            raise ValueError("sweeps_per_block must be >= 1")
        self.sample = sample
        self.ladder = ladder
        self.engine = engine
        self.sweeps_per_block = int(sweeps_per_block)
        self.revalidate_every = int(revalidate_every)
        n_t = ladder.n_t
        self.betas = ladder.betas
        if engine == "metropolis":
            self.tables = [build_acceptance_table(b, sample.h)
                           for b in self.betas]
        else:
            self.tables = [build_heatbath_table(b, sample.h)
                           for b in self.betas]
        geom = sample.geometry
        self.configs = []
        self.rngs = []
        for r in range(n_t):
            spin_seed = prng.derive_seed(master_seed, prng.TAG_SPINS, r)
            self.configs.append(SpinConfiguration.random(geom, spin_seed))
            sweep_seed = prng.derive_seed(master_seed, prng.TAG_SWEEP, r)
            if rng_mode == "parisi-rapuano":
                self.rngs.append(prng.ParisiRapuanoState.from_seed(sweep_seed))
            elif rng_mode == "site-keyed":
                self.rngs.append(prng.SiteKeyedStream(sweep_seed))
            else:
                raise ValueError(f"unknown rng mode {rng_mode!r}")
        self.swap_rng = prng.ParisiRapuanoState.from_seed(
            prng.derive_seed(master_seed, prng.TAG_SWAP))
        self.slot_of_replica = np.arange(n_t, dtype=np.int32)
        self.replica_at_slot = np.arange(n_t, dtype=np.int32)
        self.energies = np.array([energy(sample, c) for c in self.configs])
        self.blocks = 0
        self.swap_stats = SwapStats(n_t)
        self.flip_stats = None
        if track_flips:
            if engine != "metropolis":
                raise ValueError("flip statistics track the Metropolis tables")
            self.flip_stats = [FlipStats(t) for t in self.tables]

    @property
    def n_t(self) -> int:
        return self.ladder.n_t

    def config_at_slot(self, k: int) -> SpinConfiguration:
        return self.configs[self.replica_at_slot[k]]

    def energy_at_slot(self, k: int) -> float:
        return float(self.energies[self.replica_at_slot[k]])

    def retarget(self, ladder: TemperatureLadder) -> None:
        """Swap in a new ladder, keeping configurations and streams warm."""
        if ladder.n_t != self.n_t:
            raise ValueError("retarget cannot change the rung count")
        self.ladder = ladder
        self.betas = ladder.betas
        if self.engine == "metropolis":
            self.tables = [build_acceptance_table(b, self.sample.h)
                           for b in self.betas]
        else:
            self.tables = [build_heatbath_table(b, self.sample.h)
                           for b in self.betas]
        self.swap_stats = SwapStats(self.n_t)
        if self.flip_stats is not None:
            self.flip_stats = [FlipStats(t) for t in self.tables]

    def swap_pass(self) -> None:
        """One exchange attempt per adjacent pair, slots low to high."""
        st = self.swap_stats
        for k in range(self.n_t - 1):
            a = int(self.replica_at_slot[k])
            b = int(self.replica_at_slot[k + 1])
            x = swap_exponent(self.betas[k], self.betas[k + 1],
                              float(self.energies[a]), float(self.energies[b]))
            r = self.swap_rng.next_u32()  # always one word per decision
            st.attempts[k] += 1
            if swap_accepts(x, r):
                st.accepts[k] += 1
                self.replica_at_slot[k] = b
                self.replica_at_slot[k + 1] = a
                self.slot_of_replica[a] = k + 1
                self.slot_of_replica[b] = k
        st.passes += 1
        for r_id in range(self.n_t):
            st.occupancy[r_id, self.slot_of_replica[r_id]] += 1

    def run_block(self) -> np.ndarray:
        """Sweep every replica at its slot, then one swap pass.

        Returns the per-slot mean of the post-sweep energies in this block.
        """
        means = np.empty(self.n_t)
        for r in range(self.n_t):
            k = int(self.slot_of_replica[r])
            stats = self.flip_stats[k] if self.flip_stats is not None else None
            if self.engine == "metropolis":
                bm, e = metropolis_run_binned(
                    self.sample, self.configs[r], self.tables[k], self.rngs[r],
                    sweeps=self.sweeps_per_block, bins=1,
                    e0=float(self.energies[r]), stats=stats)
            else:
                bm, e = heatbath_run_binned(
                    self.sample, self.configs[r], self.tables[k], self.rngs[r],
                    sweeps=self.sweeps_per_block, bins=1,
                    e0=float(self.energies[r]))
            self.energies[r] = e
            means[k] = bm[0]
        self.swap_pass()
        self.blocks += 1
        if self.revalidate_every > 0 and self.blocks % self.revalidate_every == 0:
            self.revalidate()
        return means

    def run(self, blocks: int, series: np.ndarray | None = None) -> np.ndarray:
        """Run `blocks` blocks; returns per-slot means over the whole stretch.

        When `series` (float64[blocks, n_t]) is given, the per-block slot
        means are stored there as well.
        """
        total = np.zeros(self.n_t)
        for t in range(blocks):
            means = self.run_block()
            total += means
            if series is not None:
                series[t] = means
        return total / max(blocks, 1)

    def revalidate(self) -> None:
        """Recompute every cached energy from scratch; the incremental
        bookkeeping is exact, so any mismatch is a real defect."""
        for r, c in enumerate(self.configs):
            e = energy(self.sample, c)
            if e != self.energies[r]:
                raise RuntimeError(
                    f"cached energy of replica {r} drifted: "
                    f"{self.energies[r]} != {e}")


@dataclass
class TuneResult:
    ladder: TemperatureLadder
    pair_acceptance: np.ndarray
    iterations: int
    converged: bool
    history: list


def tune_ladder(sample: Sample, t_lo: float, t_hi: float, n_t: int, *,
                target: float = 0.10, master_seed: int = 0,
                sweeps_per_block: int = 10, warmup_blocks: int = 200,
                blocks_per_iter: int = 400, max_iters: int = 25,
                engine: str = "metropolis") -> TuneResult:
    """Iteratively place the interior rungs for roughly uniform exchange
    acceptance near `target`, endpoints held fixed.

    Each iteration measures the pair acceptances, then rescales every
    beta-space gap by (ln target / ln acc)^(1/2) -- damped, clipped to
    [0.3, 3] -- and renormalizes the gaps so the endpoints stay put.
    Converged when every pair acceptance lies inside [target/2, 2*target].

    Small systems on a narrow pinned range can over-accept everywhere:
    the balanced fixed point then sits far above the window and no gap
    rescaling helps, because the endpoints cap the total beta span.  In
    that regime the tuner switches to a bottleneck mode: it squeezes the
    interior rungs toward t_lo, concentrating the leftover span into the
    hottest gap, and bisects the squeeze until that pair's acceptance
    falls inside the window.  The result keeps fine spacing at the cold
    end, reports the measured per-pair acceptances, and stays flagged
    non-converged unless every pair lands inside the window.
    """
    if n_t < 2:
        raise ValueError("tuning needs at least two rungs")
    if not 0.0 < target < 1.0:
        raise ValueError("target acceptance must be inside (0, 1)")
    if t_lo >= t_hi:
        raise ValueError("need t_lo < t_hi")
    ladder = TemperatureLadder.geometric(t_lo, t_hi, n_t)
    pt = ParallelTempering(sample, ladder, master_seed=master_seed,
                           sweeps_per_block=sweeps_per_block, engine=engine,
                           revalidate_every=0)
    lo, hi = target / 2, 2 * target
    history = []

    def pilot(lad):
        pt.retarget(lad)
        for _ in range(warmup_blocks):
            pt.run_block()
        pt.swap_stats = SwapStats(n_t)
        for _ in range(blocks_per_iter):
            pt.run_block()
        measured = pt.swap_stats.pair_acceptance()
        history.append((lad, measured))
        return measured

    acc = np.full(n_t - 1, np.nan)
    balanced = ladder
    for it in range(1, max_iters + 1):
        acc = pilot(ladder)
        if np.all((acc >= lo) & (acc <= hi)):
            return TuneResult(ladder, acc, it, True, history)
        balanced = ladder
        if it >= 2 and n_t >= 3 and np.all(acc > hi):
            break  # over-accepting everywhere: rescaling cannot help
        betas = ladder.betas  # descending
        gaps = betas[:-1] - betas[1:]
        clamped = np.clip(acc, 1e-4, 0.9999)
        factor = np.sqrt(np.log(target) / np.log(clamped))
        factor = np.clip(factor, 0.3, 3.0)
        gaps = gaps * factor
        gaps *= (betas[0] - betas[-1]) / gaps.sum()
        new_betas = betas[0] - np.concatenate([[0.0], np.cumsum(gaps)])
        new_betas[-1] = betas[-1]  # exact endpoint
        # betas descend as slots go up in T, so 1/beta is already ascending
        ladder = TemperatureLadder(tuple(1.0 / b for b in new_betas))
    else:
        return TuneResult(ladder, acc, max_iters, False, history)

    def squeezed(lam):
        inner = [t_lo + (t - t_lo) * (1.0 - lam)
                 for t in balanced.temps[1:-1]]
        return TemperatureLadder((t_lo, *inner, t_hi))

    lam_lo, lam_hi = 0.0, 0.98
    best, best_acc = ladder, acc
    while len(history) < max_iters:
        lam = 0.5 * (lam_lo + lam_hi)
        trial = squeezed(lam)
        acc = pilot(trial)
        if abs(acc[-1] - target) < abs(best_acc[-1] - target):
            best, best_acc = trial, acc
        if lo <= acc[-1] <= hi:
            break
        if acc[-1] > hi:
            lam_lo = lam  # hottest pair still over-accepts: squeeze harder
        else:
            lam_hi = lam
    converged = bool(np.all((best_acc >= lo) & (best_acc <= hi)))
    return TuneResult(best, best_acc, len(history), converged, history)
