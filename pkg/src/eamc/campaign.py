"""Campaign orchestration: multi-sample runs, measurements, checkpoints.

A campaign advances every chain in lockstep blocks of n_pt sweeps.  At each
block boundary that crosses a measurement grid point it appends one JSON
record per (sample, replica, temperature slot) to measurements.jsonl; PT
runs also append a trace line per block, and two-chain runs append C4
profiles to c4.csv.  Flip statistics become flips.csv when the run
completes.  No timestamps anywhere: rerunning a config reproduces every
output byte.

Checkpoints are written atomically (temp file + rename) every
checkpoint_every sweeps and at completion.  A checkpoint stores the full
mutable state -- spin words, stream states, PT permutations, cached
energies, statistics, and the byte offsets of the append-only outputs.
Resuming truncates the outputs back to those offsets and replays from the
stored state, so an interrupted-and-resumed campaign is bit-identical to an
uninterrupted one.
"""

from __future__ import annotations

import json
import os

import numpy as np

from . import prng
from .acceptance import build_acceptance_table, build_heatbath_table
from .configfile import CampaignConfig, ConfigError
from .engine import (FlipStats, LaneFlipStats, lane_energies,
                     metropolis_sweep_bitsliced)
from .geometry import LatticeGeometry
from .observables import c4_profile, xi_from_profile
from .partition import PartitionedRunner
from .sample import Sample, SampleSet
from .spins import SpinConfiguration, energy, overlap, overlap_field
from .tempering import ParallelTempering, SwapStats, TemperatureLadder, tune_ladder

CHECKPOINT_VERSION = 1


class CampaignInterrupted(RuntimeError):
    """Raised by the interrupt_after test hook mid-run (no checkpoint)."""


def _json_line(sample_id, replica, t_slot, t, e, q, xi, guard):
    rec = {"sample_id": sample_id, "replica": replica, "T": t_slot,
           "t": t, "E": e, "q": q, "xi": xi, "guard": guard}
    return json.dumps(rec) + "\n"


def _restore_stream(mode: str, raw: bytes):
    if mode == "parisi-rapuano":
        return prng.ParisiRapuanoState.from_bytes(raw)
    return prng.SiteKeyedStream.from_bytes(raw)


class CampaignRunner:
    """Executes one validated CampaignConfig inside an output directory."""

    def __init__(self, config: CampaignConfig, out_dir: str | None = None):
        self.config = config
        self.out_dir = out_dir if out_dir is not None else config.out_dir
        os.makedirs(self.out_dir, exist_ok=True)
        self.geometry = LatticeGeometry(config.l)
        self.t = 0
        self.grid = list(config.grid_points())
        self.grid_idx = 0
        self.ladder = None  # resolved in _build or _restore
        self._build_samples()

    # -- construction -------------------------------------------------------

    def _build_samples(self):
        cfg = self.config
        self.samples = [
            Sample.generate(self.geometry,
                            prng.derive_seed(cfg.seed, prng.TAG_SAMPLE, i),
                            h=cfg.h, sample_id=i)
            for i in range(cfg.n_samples)]

    def _resolve_ladder(self) -> TemperatureLadder:
        cfg = self.config
        if cfg.temps is not None:
            return TemperatureLadder(cfg.temps)
        t_min, t_max, n_t, target = cfg.tune
        res = tune_ladder(
            self.samples[0], t_min, t_max, n_t, target=target,
            master_seed=prng.derive_seed(cfg.seed, prng.TAG_LADDER),
            engine=cfg.engine if cfg.engine != "bit-sliced" else "metropolis")
        return res.ladder

    def _build_state(self):
        """Fresh mutable state for sweep 0 (not called on resume)."""
        cfg = self.config
        self.ladder = self._resolve_ladder()
        if cfg.engine == "bit-sliced":
            self._build_bitsliced()
        elif cfg.p > 1:
            self._build_partitioned()
        else:
            self._build_tempered()

    def _chain_seed(self, i: int, c: int) -> int:
        return prng.derive_seed(self.config.seed, prng.TAG_CHAIN, i, c)

    def _build_tempered(self):
        cfg = self.config
        self.pts = [[ParallelTempering(
            self.samples[i], self.ladder, master_seed=self._chain_seed(i, c),
            sweeps_per_block=cfg.n_pt, engine=cfg.engine,
            rng_mode=cfg.rng_mode, revalidate_every=0,
            track_flips=(cfg.engine == "metropolis"))
            for c in range(cfg.chains)] for i in range(cfg.n_samples)]

    def _build_partitioned(self):
        cfg = self.config
        table = build_acceptance_table(1.0 / self.ladder.temps[0], cfg.h)
        # wheel streams become one independent stream per slab
        mode = "per-slab" if cfg.rng_mode == "parisi-rapuano" else "site-keyed"
        self.runners = []
        self.base_energies = []
        for i in range(cfg.n_samples):
            seed = self._chain_seed(i, 0)
            cfg0 = SpinConfiguration.random(
                self.geometry, prng.derive_seed(seed, prng.TAG_SPINS, 0))
            self.base_energies.append(energy(self.samples[i], cfg0))
            self.runners.append(PartitionedRunner(
                self.samples[i], table, cfg0, cfg.p, rng_mode=mode,
                master_seed=prng.derive_seed(seed, prng.TAG_SWEEP)))

    def _build_bitsliced(self):
        cfg = self.config
        self.sset = SampleSet(self.samples)
        beta = 1.0 / self.ladder.temps[0]
        self.bs_table = build_acceptance_table(beta)
        self.bs_configs = []
        self.bs_rngs = []
        self.bs_stats = []
        for c in range(cfg.chains):
            seed = self._chain_seed(0, c)
            self.bs_configs.append(SpinConfiguration.random(
                self.geometry, prng.derive_seed(seed, prng.TAG_SPINS),
                cfg.width))
            sweep_seed = prng.derive_seed(seed, prng.TAG_SWEEP)
            if cfg.rng_mode == "parisi-rapuano":
                self.bs_rngs.append(prng.ParisiRapuanoState.from_seed(sweep_seed))
            else:
                self.bs_rngs.append(prng.SiteKeyedStream(sweep_seed))
            self.bs_stats.append(LaneFlipStats(cfg.width))

    # -- output files -------------------------------------------------------

    def _paths(self):
        j = os.path.join
        return {"measurements": j(self.out_dir, "measurements.jsonl"),
                "trace": j(self.out_dir, "trace.jsonl"),
                "c4": j(self.out_dir, "c4.csv"),
                "flips": j(self.out_dir, "flips.csv"),
                "checkpoint": j(self.out_dir, "checkpoint.npz"),
                "config": j(self.out_dir, "config.cfg")}

    def _open_outputs(self, truncate_to=None):
        paths = self._paths()
        names = ("measurements", "trace", "c4")
        if truncate_to is not None:
            for name, size in zip(names, truncate_to):
                with open(paths[name], "ab") as fh:
                    fh.truncate(int(size))
        else:
            for name in names:
                with open(paths[name], "wb"):
                    pass
            with open(paths["c4"], "ab") as fh:
                fh.write(b"sample_id,replica,T,t,r,c4\n")
        self._files = {name: open(paths[name], "ab") for name in names}

    def _offsets(self) -> np.ndarray:
        for fh in self._files.values():
            fh.flush()
        return np.array([self._files[n].tell()
                         for n in ("measurements", "trace", "c4")],
                        dtype=np.uint64)

    def _close_outputs(self):
        for fh in self._files.values():
            fh.close()
        self._files = {}

    # -- measurement --------------------------------------------------------

    def _xi_lane(self, ca, cb, lane):
        q = overlap_field(ca, cb, lane).astype(np.float64)
        est = xi_from_profile(c4_profile(q, self.config.l), self.config.l)
        return q, est

    def _measure(self):
        cfg = self.config
        out = self._files["measurements"]
        c4f = self._files["c4"]
        if cfg.engine == "bit-sliced":
            es = [lane_energies(self.sset, c) for c in self.bs_configs]
            t_slot = self.ladder.temps[0]
            for lane in range(cfg.width):
                q = xi = guard = None
                if cfg.chains == 2:
                    qfield, est = self._xi_lane(self.bs_configs[0],
                                                self.bs_configs[1], lane)
                    q = float(qfield.mean())
                    xi, guard = est.xi, est.guard_ok
                    for r, c4r in enumerate(est.profile):
                        c4f.write(f"{lane},0,{t_slot!r},{self.t},{r},{c4r!r}\n"
                                  .encode())
                for c in range(cfg.chains):
                    rec = _json_line(lane, c, t_slot, self.t,
                                     float(es[c][lane]),
                                     q if c == 0 else None,
                                     xi if c == 0 else None,
                                     guard if c == 0 else None)
                    out.write(rec.encode())
            return
        if cfg.p > 1:
            t_slot = self.ladder.temps[0]
            for i, runner in enumerate(self.runners):
                e = self.base_energies[i] + runner.delta_e
                out.write(_json_line(i, 0, t_slot, self.t, e,
                                     None, None, None).encode())
            return
        for i in range(cfg.n_samples):
            chains = self.pts[i]
            for k in range(self.ladder.n_t):
                t_slot = self.ladder.temps[k]
                q = xi = guard = None
                if cfg.chains == 2:
                    ca = chains[0].config_at_slot(k)
                    cb = chains[1].config_at_slot(k)
                    q = overlap(ca, cb, 0)
                    qfield, est = self._xi_lane(ca, cb, 0)
                    xi, guard = est.xi, est.guard_ok
                    for r, c4r in enumerate(est.profile):
                        c4f.write(f"{i},0,{t_slot!r},{self.t},{r},{c4r!r}\n"
                                  .encode())
                for c in range(cfg.chains):
                    rec = _json_line(i, c, t_slot, self.t,
                                     chains[c].energy_at_slot(k),
                                     q if c == 0 else None,
                                     xi if c == 0 else None,
                                     guard if c == 0 else None)
                    out.write(rec.encode())

    def _trace(self):
        cfg = self.config
        if cfg.engine == "bit-sliced" or cfg.p > 1 or self.ladder.n_t < 2:
            return
        fh = self._files["trace"]
        for i in range(cfg.n_samples):
            for c, pt in enumerate(self.pts[i]):
                acc = pt.swap_stats.pair_acceptance()
                rec = {"sample_id": i, "replica": c, "t": self.t,
                       "perm": [int(r) for r in pt.replica_at_slot],
                       "pair_acc": [round(float(a), 6) for a in acc]}
                fh.write((json.dumps(rec) + "\n").encode())

    # -- checkpointing ------------------------------------------------------

    def _checkpoint_arrays(self) -> dict:
        cfg = self.config
        arrs = {
            "version": np.array([CHECKPOINT_VERSION], dtype=np.uint32),
            "config_sha": np.frombuffer(bytes.fromhex(cfg.sha256()),
                                        dtype=np.uint8),
            "t": np.array([self.t], dtype=np.uint64),
            "grid_idx": np.array([self.grid_idx], dtype=np.uint64),
            "offsets": self._offsets(),
            "temps": np.array(self.ladder.temps, dtype=np.float64),
        }
        if cfg.engine == "bit-sliced":
            for c in range(cfg.chains):
                arrs[f"bs_words_{c}"] = self.bs_configs[c].words
                arrs[f"bs_rng_{c}"] = np.frombuffer(
                    self.bs_rngs[c].to_bytes(), dtype=np.uint8)
                arrs[f"bs_planes_{c}"] = self.bs_stats[c].planes
        elif cfg.p > 1:
            for i, runner in enumerate(self.runners):
                arrs[f"part_words_{i}"] = runner.gather().words
                arrs[f"part_delta_{i}"] = np.array([runner.delta_e])
                for w, stream in enumerate(runner.streams):
                    arrs[f"part_rng_{i}_{w}"] = np.frombuffer(
                        stream.to_bytes(), dtype=np.uint8)
                arrs[f"part_att_{i}"] = runner.stats.attempts
                arrs[f"part_acc_{i}"] = runner.stats.accepts
        else:
            for i in range(cfg.n_samples):
                for c, pt in enumerate(self.pts[i]):
                    pre = f"pt_{i}_{c}"
                    for r in range(pt.n_t):
                        arrs[f"{pre}_words_{r}"] = pt.configs[r].words
                        arrs[f"{pre}_rng_{r}"] = np.frombuffer(
                            pt.rngs[r].to_bytes(), dtype=np.uint8)
                    arrs[f"{pre}_perm"] = pt.replica_at_slot
                    arrs[f"{pre}_energies"] = pt.energies
                    arrs[f"{pre}_swaprng"] = np.frombuffer(
                        pt.swap_rng.to_bytes(), dtype=np.uint8)
                    st = pt.swap_stats
                    arrs[f"{pre}_swap"] = np.concatenate(
                        [st.attempts, st.accepts, [st.passes]])
                    arrs[f"{pre}_occ"] = st.occupancy
                    if pt.flip_stats is not None:
                        arrs[f"{pre}_fatt"] = np.stack(
                            [fs.attempts for fs in pt.flip_stats])
                        arrs[f"{pre}_facc"] = np.stack(
                            [fs.accepts for fs in pt.flip_stats])
        return arrs

    def _write_checkpoint(self):
        path = self._paths()["checkpoint"]
        tmp = path + ".tmp"
        with open(tmp, "wb") as fh:
            np.savez(fh, **self._checkpoint_arrays())
        os.replace(tmp, path)

    def _restore(self, arrs):
        cfg = self.config
        sha = bytes(arrs["config_sha"]).hex()
        if sha != cfg.sha256():
            raise ConfigError(
                "checkpoint belongs to a different config "
                f"(hash {sha[:12]}.. != {cfg.sha256()[:12]}..)")
        if int(arrs["version"][0]) != CHECKPOINT_VERSION:
            raise ConfigError(
                f"checkpoint version {int(arrs['version'][0])} unsupported")
        self.ladder = TemperatureLadder(tuple(float(t)
                                              for t in arrs["temps"]))
        self.t = int(arrs["t"][0])
        self.grid_idx = int(arrs["grid_idx"][0])
        if cfg.engine == "bit-sliced":
            self._build_bitsliced()
            for c in range(cfg.chains):
                self.bs_configs[c].words[:] = arrs[f"bs_words_{c}"]
                self.bs_rngs[c] = _restore_stream(
                    cfg.rng_mode, bytes(arrs[f"bs_rng_{c}"]))
                self.bs_stats[c].planes[:] = arrs[f"bs_planes_{c}"]
        elif cfg.p > 1:
            self._build_partitioned()
            for i, runner in enumerate(self.runners):
                words = arrs[f"part_words_{i}"].astype(np.uint64)
                for slab in runner.slabs:
                    slab.load(words)
                runner.delta_e = float(arrs[f"part_delta_{i}"][0])
                runner.sweep = self.t
                runner.streams = [
                    _restore_stream(cfg.rng_mode,
                                    bytes(arrs[f"part_rng_{i}_{w}"]))
                    for w in range(cfg.p)]
                runner.stats.attempts[:] = arrs[f"part_att_{i}"]
                runner.stats.accepts[:] = arrs[f"part_acc_{i}"]
        else:
            self._build_tempered()
            for i in range(cfg.n_samples):
                for c, pt in enumerate(self.pts[i]):
                    pre = f"pt_{i}_{c}"
                    for r in range(pt.n_t):
                        pt.configs[r].words[:] = arrs[f"{pre}_words_{r}"]
                        pt.rngs[r] = _restore_stream(
                            cfg.rng_mode, bytes(arrs[f"{pre}_rng_{r}"]))
                    pt.replica_at_slot[:] = arrs[f"{pre}_perm"]
                    pt.slot_of_replica[pt.replica_at_slot] = \
                        np.arange(pt.n_t, dtype=np.int32)
                    pt.energies[:] = arrs[f"{pre}_energies"]
                    pt.swap_rng = prng.ParisiRapuanoState.from_bytes(
                        bytes(arrs[f"{pre}_swaprng"]))
                    packed = arrs[f"{pre}_swap"]
                    n_pair = pt.n_t - 1
                    st = SwapStats(pt.n_t)
                    st.attempts[:] = packed[:n_pair]
                    st.accepts[:] = packed[n_pair:2 * n_pair]
                    st.passes = int(packed[-1])
                    st.occupancy[:] = arrs[f"{pre}_occ"]
                    pt.swap_stats = st
                    if pt.flip_stats is not None:
                        for k, fs in enumerate(pt.flip_stats):
                            fs.attempts[:] = arrs[f"{pre}_fatt"][k]
                            fs.accepts[:] = arrs[f"{pre}_facc"][k]

    @classmethod
    def resume(cls, config: CampaignConfig, checkpoint_path: str,
               out_dir: str | None = None) -> "CampaignRunner":
        runner = cls(config, out_dir)
        with np.load(checkpoint_path, allow_pickle=False) as data:
            arrs = {k: data[k] for k in data.files}
        runner._restore(arrs)
        runner._resume_offsets = arrs["offsets"]
        return runner

    # -- the run loop -------------------------------------------------------

    def _advance_block(self):
        cfg = self.config
        if cfg.engine == "bit-sliced":
            for c in range(cfg.chains):
                metropolis_sweep_bitsliced(
                    self.sset, self.bs_configs[c], self.bs_table,
                    self.bs_rngs[c], sweeps=cfg.n_pt,
                    stats=self.bs_stats[c])
        elif cfg.p > 1:
            for runner in self.runners:
                runner.run(cfg.n_pt)
        else:
            for chains in self.pts:
                for pt in chains:
                    pt.run_block()
        self.t += cfg.n_pt

    def _write_flips_csv(self):
        cfg = self.config
        path = self._paths()["flips"]
        rows = []
        if cfg.engine == "bit-sliced":
            beta = 1.0 / self.ladder.temps[0]
            de = self.bs_table.delta_e
            att = sum(st.attempts() for st in self.bs_stats)
            acc = sum(st.accepts() for st in self.bs_stats)
            for k in range(7):
                a = int(att[k].sum())
                if a:
                    rows.append((beta, float(de[k]), a, int(acc[k].sum())))
        elif cfg.p > 1:
            merged = None
            for runner in self.runners:
                if merged is None:
                    merged = FlipStats(runner.table)
                merged.merge(runner.stats)
            rows = merged.csv_rows()
        elif self.config.engine == "metropolis":
            per_slot = None
            for chains in self.pts:
                for pt in chains:
                    if per_slot is None:
                        per_slot = [FlipStats(t) for t in pt.tables]
                    for k, fs in enumerate(pt.flip_stats):
                        per_slot[k].merge(fs)
            for slot in per_slot:
                rows.extend(slot.csv_rows())
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("beta,delta_e,attempts,accepts\n")
            for beta, de, att, acc in rows:
                fh.write(f"{beta!r},{de!r},{att},{acc}\n")

    def run(self, interrupt_after: int | None = None) -> dict:
        """Execute (or finish) the campaign; returns a completion summary."""
        cfg = self.config
        resuming = hasattr(self, "_resume_offsets")
        if resuming:
            self._open_outputs(truncate_to=self._resume_offsets)
            del self._resume_offsets
        else:
            self._build_state()
            self._open_outputs()
            with open(self._paths()["config"], "w", encoding="utf-8") as fh:
                fh.write(cfg.canonical())
        ckpt_due = 0
        try:
            while self.t < cfg.sweeps:
                self._advance_block()
                measure_due = False
                while (self.grid_idx < len(self.grid)
                       and self.grid[self.grid_idx] <= self.t):
                    measure_due = True
                    self.grid_idx += 1
                if measure_due:
                    self._measure()
                    self._trace()
                if cfg.checkpoint_every:
                    due = self.t // cfg.checkpoint_every
                    if due > ckpt_due and self.t < cfg.sweeps:
                        ckpt_due = due
                        self._write_checkpoint()
                if interrupt_after is not None and self.t >= interrupt_after:
                    for fh in self._files.values():
                        fh.flush()
                    raise CampaignInterrupted(
                        f"interrupted after sweep {self.t}")
            self._write_checkpoint()
            self._write_flips_csv()
        finally:
            self._close_outputs()
        return {"sweeps": self.t, "samples": cfg.n_samples,
                "measurements": len(self.grid), "out_dir": self.out_dir}
