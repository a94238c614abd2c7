"""Analytic machine-balance model for massively parallel spin update engines.

Models a worker that retires n_p spin updates per clock cycle at frequency f,
P such workers slicing one lattice, and inter-worker links that carry one
boundary site per link clock.  All quantities are exact rationals (seconds as
Fraction), so regression values can be pinned without float tolerance.

The headline numbers for the reference design point (n_p = 2000 update
cores, f = 200..250 MHz, P = 16, n_l = 8 link lanes at a 15x effective link
clock): one spin every 2.5 ps per worker, 0.125 ps machine-wide, a 15.625 us
L = 500 lattice sweep, and compute/communication balance above L = 267.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import ceil


def _frac(x) -> Fraction:
    f = Fraction(x)
    if f <= 0:
        raise ValueError(f"model parameters must be positive, got {x}")
    return f


def spin_update_time(n_p: int, f_hz) -> Fraction:
    """Seconds per spin update of one worker: 1 / (n_p * f)."""
    return 1 / (_frac(n_p) * _frac(f_hz))


def machine_update_time(n_p: int, f_hz, p: int) -> Fraction:
    """Machine-wide seconds per update with P workers: 1 / (n_p * f * P)."""
    return spin_update_time(n_p, f_hz) / _frac(p)


def lattice_sweep_time(l: int, n_p: int, f_hz, p: int = 1) -> Fraction:
    """Seconds per full sweep of an L^3 lattice split over P workers."""
    return _frac(l) ** 3 * machine_update_time(n_p, f_hz, p)


def halo_transfer_time(l: int, n_l: int, link_hz) -> Fraction:
    """Seconds to move one L^2 boundary plane over n_l link lanes."""
    return _frac(l) ** 2 / (_frac(n_l) * _frac(link_hz))


def balance_crossover(n_p: int, p: int, n_l: int, link_speedup) -> int:
    """Smallest L where a slab's compute time covers its halo traffic.

    Compute per sweep scales as L^3 / (P * n_p * f); boundary traffic as
    L^2 / (n_l * f_link) with f_link = link_speedup * f.  The links stop
    being the bottleneck once

        L >= n_p * P / (n_l * link_speedup).
    """
    ratio = _frac(n_p) * _frac(p) / (_frac(n_l) * _frac(link_speedup))
    return ceil(ratio)


def campaign_budget(n_t: int, l: int, n_mcs: int, n_samples: int) -> int:
    """Total spin updates of a campaign: N_T * L^3 * N_MCS * N_samples.

    Exact integer arithmetic; desk-scale inputs routinely reach 10^20.
    """
    for name, v in (("n_t", n_t), ("l", l), ("n_mcs", n_mcs),
                    ("n_samples", n_samples)):
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v}")
    return int(n_t) * int(l) ** 3 * int(n_mcs) * int(n_samples)


def energy_per_flip(watts, sut_seconds) -> Fraction:
    """Joules per spin flip as configured power x measured update time.

    A pass-through estimate (board power is an input, not a measurement);
    reports quoting it must label it as such.
    """
    return _frac(watts) * _frac(sut_seconds)


_PS = Fraction(1, 10**12)
_US = Fraction(1, 10**6)


def as_picoseconds(t: Fraction) -> Fraction:
    return t / _PS


def as_microseconds(t: Fraction) -> Fraction:
    return t / _US


@dataclass(frozen=True)
class BalancePoint:
    l: int
    sweep_time: Fraction
    halo_time: Fraction

    @property
    def compute_bound(self) -> bool:
        return self.sweep_time >= self.halo_time


def balance_table(n_p: int, f_hz, p: int, n_l: int, link_speedup,
                  sizes) -> list:
    """Sweep/halo times per slab for a list of lattice sizes.

    The halo side uses f_link = link_speedup * f.  Each worker owns an
    L^2 * (L/P) slab: compute L^3/(P n_p f) per sweep against one boundary
    plane exchange L^2/(n_l f_link).
    """
    link_hz = _frac(link_speedup) * _frac(f_hz)
    out = []
    for l in sizes:
        out.append(BalancePoint(
            l=int(l),
            sweep_time=lattice_sweep_time(l, n_p, f_hz, p),
            halo_time=halo_transfer_time(l, n_l, link_hz)))
    return out
