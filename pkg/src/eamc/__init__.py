"""Bit-packed Edwards-Anderson spin-glass Monte Carlo engine.

Simulates the +-1-coupling Ising spin glass on periodic 3D lattices with
bit-mapped storage, fixed-point Metropolis/heat-bath sweeps, multi-sample
bit-sliced updates, parallel tempering, slab partitioning with an explicit
halo protocol, and an analytic machine-balance performance model.
"""

__version__ = "0.1.0"

from .geometry import LatticeGeometry
from .sample import Sample, SampleSet
from .spins import (SpinConfiguration, pack, unpack, energy, local_delta_e,
                    overlap, overlap_field)
from .prng import (ParisiRapuanoState, SiteKeyedStream, derive_seed, mix64,
                   site_random)
from .acceptance import (AcceptanceTable, HeatBathTable,
                         build_acceptance_table, build_heatbath_table)
from .engine import (FlipStats, LaneFlipStats, SweepPlan,
                     metropolis_sweep_scalar, metropolis_run_binned,
                     metropolis_run_histogram, heatbath_sweep_scalar,
                     heatbath_run_binned, heatbath_run_histogram,
                     metropolis_sweep_bitsliced, lane_energies)
from .tempering import (TemperatureLadder, ParallelTempering, SwapStats,
                        TuneResult, tune_ladder, swap_exponent)
from .observables import (ExactReference, XiEstimate, PowerLawFit,
                          exact_reference, exact_state_energies,
                          exact_overlap_distribution, overlap_histogram,
                          c4_profile, xi_from_profile, xi_estimate,
                          xi_growth_fit, z_prediction,
                          enumerator_self_check, T_CRITICAL, Z_CRITICAL)
from .partition import (PartitionedRunner, SlabLayout, HaloChannel,
                        HaloMessage, HaloProtocolError, link_traffic)
from .perf import (spin_update_time, machine_update_time, lattice_sweep_time,
                   halo_transfer_time, balance_crossover, balance_table,
                   campaign_budget, as_picoseconds, as_microseconds)
from .bench import ThroughputReport, measure_throughput, CONTEXT_ROWS
from .configfile import CampaignConfig, ConfigError
from .campaign import CampaignRunner, CampaignInterrupted

__all__ = [
    "LatticeGeometry", "Sample", "SampleSet", "SpinConfiguration",
    "pack", "unpack", "energy", "local_delta_e", "overlap", "overlap_field",
    "ParisiRapuanoState", "SiteKeyedStream", "derive_seed", "mix64",
    "site_random", "AcceptanceTable", "HeatBathTable",
    "build_acceptance_table", "build_heatbath_table",
    "FlipStats", "LaneFlipStats", "SweepPlan",
    "metropolis_sweep_scalar", "metropolis_run_binned",
    "metropolis_run_histogram", "heatbath_sweep_scalar",
    "heatbath_run_binned", "heatbath_run_histogram",
    "metropolis_sweep_bitsliced", "lane_energies",
    "TemperatureLadder", "ParallelTempering", "SwapStats", "TuneResult",
    "tune_ladder", "swap_exponent",
    "ExactReference", "XiEstimate", "PowerLawFit", "exact_reference",
    "exact_state_energies", "exact_overlap_distribution",
    "overlap_histogram", "c4_profile", "xi_from_profile", "xi_estimate",
    "xi_growth_fit", "z_prediction", "enumerator_self_check",
    "T_CRITICAL", "Z_CRITICAL",
    "PartitionedRunner", "SlabLayout", "HaloChannel", "HaloMessage",
    "HaloProtocolError", "link_traffic",
    "spin_update_time", "machine_update_time", "lattice_sweep_time",
    "halo_transfer_time", "balance_crossover", "balance_table",
    "campaign_budget", "as_picoseconds", "as_microseconds",
    "ThroughputReport", "measure_throughput", "CONTEXT_ROWS",
    "CampaignConfig", "ConfigError", "CampaignRunner", "CampaignInterrupted",
]
