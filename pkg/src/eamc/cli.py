"""Command-line front end: run, oracle, bench, perf, inspect.

Exit codes: 0 success, 2 configuration error, 3 oracle z-score failure,
4 protocol or internal invariant violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from fractions import Fraction

import numpy as np

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ORACLE = 3
EXIT_PROTOCOL = 4


def _cmd_run(args) -> int:
    from .campaign import CampaignRunner
    from .configfile import CampaignConfig

    cfg = CampaignConfig.from_file(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.workers is not None:
        cfg = dataclasses.replace(cfg, p=args.workers)
        cfg._validate()
    out_dir = args.out if args.out else None
    if args.resume:
        runner = CampaignRunner.resume(cfg, args.resume, out_dir=out_dir)
    else:
        runner = CampaignRunner(cfg, out_dir=out_dir)
    summary = runner.run()
    print(f"completed {summary['sweeps']} sweeps over "
          f"{summary['samples']} sample(s); "
          f"{summary['measurements']} measurement points -> "
          f"{summary['out_dir']}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    from .acceptance import build_acceptance_table, build_heatbath_table
    from .configfile import CampaignConfig, ConfigError
    from .engine import heatbath_run_binned, metropolis_run_binned
    from .geometry import LatticeGeometry
    from .observables import (ENUM_MAX_SITES, enumerator_self_check,
                              exact_reference)
    from . import prng
    from .sample import Sample
    from .spins import SpinConfiguration, energy

    cfg = CampaignConfig.from_file(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if cfg.engine == "bit-sliced":
        raise ConfigError("[engine] the oracle compares scalar chains; "
                          "use kind = metropolis or heat-bath")
    if cfg.temps is None:
        raise ConfigError("[ladder] the oracle needs explicit temps")
    geometry = LatticeGeometry(cfg.l)
    if geometry.n_sites > ENUM_MAX_SITES:
        raise ConfigError(f"[lattice] l = {cfg.l} has {geometry.n_sites} "
                          f"sites; enumeration budget is {ENUM_MAX_SITES}")

    bins = min(64, cfg.sweeps)
    burn = cfg.sweeps // 10
    measured = cfg.sweeps - burn
    measured -= measured % bins

    print(f"oracle: L={cfg.l} ({geometry.n_sites} sites), "
          f"{cfg.n_samples} sample(s), engine {cfg.engine}, "
          f"{cfg.sweeps} sweeps per point ({burn} burn-in)")
    print(f"{'sample':>6} {'T':>6} {'exact <E>':>12} {'estimate':>12} "
          f"{'sem':>10} {'z':>7}")
    worst = 0.0
    for i in range(cfg.n_samples):
        s = Sample.generate(geometry,
                            prng.derive_seed(cfg.seed, prng.TAG_SAMPLE, i),
                            h=cfg.h, sample_id=i)
        ref = exact_reference(s)
        for t_slot in cfg.temps:
            beta = 1.0 / t_slot
            seed = prng.derive_seed(cfg.seed, prng.TAG_CHAIN, i,
                                    int(round(t_slot * 4096)))
            config = SpinConfiguration.random(
                geometry, prng.derive_seed(seed, prng.TAG_SPINS))
            if cfg.rng_mode == "parisi-rapuano":
                rng = prng.ParisiRapuanoState.from_seed(
                    prng.derive_seed(seed, prng.TAG_SWEEP))
            else:
                rng = prng.SiteKeyedStream(
                    prng.derive_seed(seed, prng.TAG_SWEEP))
            e0 = energy(s, config)
            if cfg.engine == "metropolis":
                table = build_acceptance_table(beta, cfg.h)
                run = metropolis_run_binned
            else:
                table = build_heatbath_table(beta, cfg.h)
                run = heatbath_run_binned
            if burn:
                _, e0 = run(s, config, table, rng, sweeps=burn, bins=1, e0=e0)
            means, _ = run(s, config, table, rng, sweeps=measured, bins=bins,
                           e0=e0)
            exact = ref.mean_energy(beta)
            est = float(means.mean())
            sem = float(means.std(ddof=1) / np.sqrt(bins))
            z = (est - exact) / sem if sem > 0 else 0.0
            worst = max(worst, abs(z))
            print(f"{i:>6} {t_slot:>6.3g} {exact:>12.6f} {est:>12.6f} "
                  f"{sem:>10.6f} {z:>7.2f}")

    print("\nenumerator self-check (isolated spin pair, <S0 S1> = tanh(beta))")
    print(f"{'beta':>8} {'enumerated':>14} {'closed form':>14}")
    for t_slot in cfg.temps:
        got, closed = enumerator_self_check(1.0 / t_slot)
        print(f"{1.0 / t_slot:>8.4f} {got:>14.10f} {closed:>14.10f}")

    if worst > 4.0:
        print(f"\nFAIL: worst |z| = {worst:.2f} exceeds 4")
        return EXIT_ORACLE
    print(f"\nOK: worst |z| = {worst:.2f} (threshold 4)")
    return EXIT_OK


def _cmd_bench(args) -> int:
    from .bench import measure_throughput

    report = measure_throughput(l=args.l, width=args.width,
                                sweeps=args.sweeps, warmup=args.warmup,
                                seed=args.seed or 0)
    for line in report.lines():
        print(line)
    return EXIT_OK


def _cmd_perf(args) -> int:
    from . import perf

    f_hz = args.freq_mhz * 10 ** 6
    t_spin = perf.spin_update_time(args.cores, f_hz)
    t_glob = perf.machine_update_time(args.cores, f_hz, args.p)
    cross = perf.balance_crossover(args.cores, args.p, args.links,
                                   args.link_speedup)
    print(f"update cores n_p = {args.cores}, f = {args.freq_mhz} MHz, "
          f"P = {args.p}, links = {args.links} x{args.link_speedup}")
    print(f"t_spin   {float(perf.as_picoseconds(t_spin)):10.4f} ps  "
          f"({t_spin} s)")
    print(f"t_global {float(perf.as_picoseconds(t_glob)):10.4f} ps  "
          f"({t_glob} s)")
    print(f"balance crossover L* = {cross}")
    if args.watts is not None:
        e = perf.energy_per_flip(args.watts, t_spin)
        print(f"energy/flip estimate (configured {args.watts} W x t_spin): "
              f"{float(e * 10**9):.4f} nJ")

    sizes = list(range(args.l_min, args.l_max + 1, args.l_step))
    if cross not in sizes and args.l_min <= cross <= args.l_max:
        sizes = sorted(set(sizes) | {cross})
    pts = perf.balance_table(args.cores, f_hz, args.p, args.links,
                             args.link_speedup, sizes)
    rows = [("l", "t_lat_s", "t_dat_s", "ratio", "compute_bound")]
    print(f"\n{'L':>6} {'t_lat (us)':>12} {'t_dat (us)':>12} "
          f"{'lat/dat':>9}  bound")
    for pt in pts:
        ratio = pt.sweep_time / pt.halo_time
        flag = "compute" if pt.compute_bound else "link"
        mark = "  <- L*" if pt.l == cross else ""
        print(f"{pt.l:>6} {float(perf.as_microseconds(pt.sweep_time)):>12.4f} "
              f"{float(perf.as_microseconds(pt.halo_time)):>12.4f} "
              f"{float(ratio):>9.4f}  {flag}{mark}")
        rows.append((pt.l, float(pt.sweep_time), float(pt.halo_time),
                     float(ratio), pt.compute_bound))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(",".join(str(v) for v in row) + "\n")
        print(f"\nwrote {len(rows) - 1} rows to {args.csv}")
    return EXIT_OK


def _cmd_inspect(args) -> int:
    from .campaign import CHECKPOINT_VERSION

    with np.load(args.checkpoint, allow_pickle=False) as data:
        version = int(data["version"][0])
        sha = bytes(data["config_sha"]).hex()
        t = int(data["t"][0])
        temps = [float(x) for x in data["temps"]]
        offsets = [int(x) for x in data["offsets"]]
        names = sorted(data.files)
    print(f"checkpoint version {version} "
          f"(reader supports {CHECKPOINT_VERSION})")
    print(f"config sha256  {sha}")
    print(f"sweep counter  {t}")
    print(f"ladder temps   {temps}")
    print(f"output offsets measurements={offsets[0]} trace={offsets[1]} "
          f"c4={offsets[2]}")
    print(f"state arrays   {len(names)}")
    for name in names:
        print(f"  {name}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="eamc",
        description="bit-packed spin-glass Monte Carlo engine")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a campaign config")
    run.add_argument("--config", required=True)
    run.add_argument("--resume", help="checkpoint file to continue from")
    run.add_argument("--seed", type=int, help="override [rng] seed")
    run.add_argument("--out", help="override [output] dir")
    run.add_argument("--workers", type=int, help="override [partition] p")
    run.set_defaults(func=_cmd_run)

    oracle = sub.add_parser(
        "oracle", help="compare Monte Carlo estimates to exact enumeration")
    oracle.add_argument("--config", required=True)
    oracle.add_argument("--seed", type=int, help="override [rng] seed")
    oracle.set_defaults(func=_cmd_oracle)

    bench = sub.add_parser("bench", help="time the bit-sliced engine")
    bench.add_argument("--l", type=int, default=64)
    bench.add_argument("--width", type=int, default=64)
    bench.add_argument("--sweeps", type=int, default=20)
    bench.add_argument("--warmup", type=int, default=2)
    bench.add_argument("--seed", type=int, default=0)
    bench.set_defaults(func=_cmd_bench)

    perf = sub.add_parser("perf", help="analytic machine-balance model")
    perf.add_argument("--cores", type=int, default=2000,
                      help="update cores per worker (n_p)")
    perf.add_argument("--freq-mhz", type=Fraction, default=Fraction(200),
                      help="worker clock in MHz")
    perf.add_argument("--p", type=int, default=16, help="worker count")
    perf.add_argument("--links", type=int, default=8,
                      help="link lanes per neighbor (n_l)")
    perf.add_argument("--link-speedup", type=Fraction, default=Fraction(15),
                      help="link clock as a multiple of the worker clock")
    perf.add_argument("--l-min", type=int, default=100)
    perf.add_argument("--l-max", type=int, default=600)
    perf.add_argument("--l-step", type=int, default=100)
    perf.add_argument("--watts", type=Fraction,
                      help="board power for the energy/flip estimate")
    perf.add_argument("--csv", help="write the (L, t_lat, t_dat) table here")
    perf.set_defaults(func=_cmd_perf)

    inspect = sub.add_parser("inspect", help="dump a checkpoint header")
    inspect.add_argument("--checkpoint", required=True)
    inspect.set_defaults(func=_cmd_inspect)
    return ap


def main(argv=None) -> int:
    from .configfile import ConfigError
    from .partition import HaloProtocolError

    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HaloProtocolError as exc:
        print(f"protocol violation: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except RuntimeError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL


if __name__ == "__main__":
    sys.exit(main())
