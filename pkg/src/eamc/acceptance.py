"""Fixed-point acceptance tables for the sweep engines.

A Metropolis flip with energy change dE is accepted when dE <= 0 (explicit
always-accept flag) or when the fresh 32-bit random r satisfies the strict
compare r < floor(2^32 * exp(-beta*dE)).  A threshold of zero therefore never
accepts.  Table keys enumerate the possible local environments:

* zero field: key = n_sat in 0..6, dE = 4*n_sat - 12;
* with field: key = 2*n_sat + a where a = field_bit XOR spin_bit, and
  dE = 4*n_sat - 12 + 2*h*(1 - 2*a).

Heat-bath tables hold floor(2^32 * p) with p = 1/(1 + exp(-2*beta*h_loc)) and
h_loc = m + h_i, keyed by (m+6)/2 (m is the coupling field sum, even, in
-6..6) times two plus the field bit when a field is present.  These entries
may reach 2^32 (always set the spin up), which is why thresholds are u64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .sample import _check_h

TWO32 = 1 << 32


def _threshold(beta: float, de: float) -> tuple[bool, int]:
    """(always_accept, floor(2^32 * min(1, exp(-beta*de))))."""
    if de <= 0:
        return True, TWO32
    return False, math.floor(TWO32 * math.exp(-beta * de))


@dataclass(frozen=True)
class AcceptanceTable:
    """Metropolis thresholds for one (beta, h) pair."""

    beta: float
    h: Fraction
    always: np.ndarray        # uint8[K], 1 where dE <= 0
    thresholds: np.ndarray    # uint64[K]
    delta_e: np.ndarray       # float64[K], exact dyadic values
    delta_e_exact: tuple = field(repr=False, default=())

    @property
    def n_keys(self) -> int:
        return len(self.delta_e)

    def key_of(self, n_sat: int, align: int = 0) -> int:
        if self.h == 0:
            return n_sat
        return 2 * n_sat + align


def build_acceptance_table(beta: float, h=0) -> AcceptanceTable:
    """Thresholds for every local key at inverse temperature beta."""
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    h = _check_h(h)
    des = []
    if h == 0:
        for n_sat in range(7):
            des.append(Fraction(4 * n_sat - 12))
    else:
        for n_sat in range(7):
            for a in (0, 1):
                des.append(4 * n_sat - 12 + 2 * h * (1 - 2 * a))
    always = np.zeros(len(des), dtype=np.uint8)
    thr = np.zeros(len(des), dtype=np.uint64)
    for k, de in enumerate(des):
        flag, t = _threshold(beta, float(de))
        always[k] = 1 if flag else 0
        thr[k] = t
    return AcceptanceTable(beta=float(beta), h=h, always=always,
                           thresholds=thr,
                           delta_e=np.array([float(d) for d in des]),
                           delta_e_exact=tuple(des))


@dataclass(frozen=True)
class HeatBathTable:
    """Set-up probabilities as u64 fixed-point thresholds."""

    beta: float
    h: Fraction
    thresholds: np.ndarray    # uint64[K]


def build_heatbath_table(beta: float, h=0) -> HeatBathTable:
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    h = _check_h(h)
    ms = range(-6, 7, 2)
    thr = []
    if h == 0:
        for m in ms:
            p = 1.0 / (1.0 + math.exp(-2.0 * beta * m))
            thr.append(math.floor(TWO32 * p))
    else:
        for m in ms:
            for b in (0, 1):
                h_loc = m + float(h) * (2 * b - 1)
                p = 1.0 / (1.0 + math.exp(-2.0 * beta * h_loc))
                thr.append(math.floor(TWO32 * p))
    return HeatBathTable(beta=float(beta), h=h,
                         thresholds=np.array(thr, dtype=np.uint64))
