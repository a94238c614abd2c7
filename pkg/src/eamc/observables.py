"""Observables and exact small-system references.

Two groups live here:

* Exact enumeration over all 2^N states (Gray-code walk, N <= 20): thermal
  means for engine validation, the full two-replica overlap distribution
  (N <= 12), and a closed-form self-check on an isolated two-spin system.

* Non-equilibrium estimators: the replica-overlap correlation profile
  C4(r), the integral coherence-length estimator xi, its finite-size guard
  (a measurement is window-limited once 7*xi exceeds L), and a power-law
  fitter for xi(t) ~ t^(1/z) growth with the literature prediction
  z(T) ~ 6.86 * T_c / T, T_c = 1.109.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .sample import Sample
from .spins import SpinConfiguration, overlap_field

T_CRITICAL = 1.109     # zero-field critical temperature of the +-1 model
Z_CRITICAL = 6.86      # dynamic exponent at T_c

ENUM_MAX_SITES = 20
OVERLAP_MAX_SITES = 12


def z_prediction(t: float) -> float:
    """Literature growth exponent z(T) ~ z_c * T_c / T (valid for T <= T_c)."""
    if t <= 0:
        raise ValueError("temperature must be positive")
    return Z_CRITICAL * T_CRITICAL / t


# ---------------------------------------------------------------------------
# exact enumeration references
# ---------------------------------------------------------------------------

def _enum_tables(sample: Sample):
    n = sample.geometry.n_sites
    if n > ENUM_MAX_SITES:
        raise ValueError(
            f"exact enumeration is limited to {ENUM_MAX_SITES} sites, "
            f"lattice has {n}")
    jval = sample.j6_values()
    h4 = np.round(4.0 * sample.field_values()).astype(np.int64)
    return jval, h4


@dataclass(frozen=True)
class ExactReference:
    """Energy/magnetization histogram over all states of one sample.

    e4_values holds 4x the energy (an exact integer for quarter-integer
    fields); counts the number of states at each energy; mag_sums the summed
    magnetization of those states.
    """

    n_sites: int
    e4_values: np.ndarray
    counts: np.ndarray
    mag_sums: np.ndarray

    def _weights(self, beta: float) -> np.ndarray:
        e = 0.25 * self.e4_values
        w = np.exp(-beta * (e - e.min())) * self.counts
        return w

    def mean_energy(self, beta: float) -> float:
        w = self._weights(beta)
        return float((w * 0.25 * self.e4_values).sum() / w.sum())

    def mean_magnetization(self, beta: float) -> float:
        """Thermal mean of sum_i S_i (not divided by N)."""
        e = 0.25 * self.e4_values
        boltz = np.exp(-beta * (e - e.min()))
        z = (boltz * self.counts).sum()
        return float((boltz * self.mag_sums).sum() / z)

    def var_energy(self, beta: float) -> float:
        w = self._weights(beta)
        e = 0.25 * self.e4_values
        mean = (w * e).sum() / w.sum()
        return float((w * (e - mean) ** 2).sum() / w.sum())


def exact_reference(sample: Sample) -> ExactReference:
    """Enumerate all 2^N states of `sample` into an energy histogram."""
    jval, h4 = _enum_tables(sample)
    n = sample.geometry.n_sites
    off = 12 * n + int(np.abs(h4).sum())
    hist_n = np.zeros(2 * off + 1, dtype=np.int64)
    hist_m = np.zeros(2 * off + 1, dtype=np.int64)
    _kernels.enum_gray_hist(sample.geometry.neighbors, jval, h4,
                            hist_n, hist_m, off)
    pop = np.nonzero(hist_n)[0]
    return ExactReference(n_sites=n, e4_values=(pop - off).astype(np.int64),
                          counts=hist_n[pop], mag_sums=hist_m[pop])


def exact_state_energies(sample: Sample) -> np.ndarray:
    """Energy of every packed state (bit i set = spin i up), N <= 20."""
    jval, h4 = _enum_tables(sample)
    n = sample.geometry.n_sites
    e4s = np.empty(1 << n, dtype=np.int64)
    _kernels.enum_state_energies(sample.geometry.neighbors, jval, h4, e4s)
    return 0.25 * e4s


def exact_overlap_distribution(sample: Sample, beta: float
                               ) -> tuple[np.ndarray, np.ndarray]:
    """Exact two-replica overlap distribution P(q) at one temperature.

    Returns (q_values, probabilities) over the 2N+1 overlap levels.  The
    double state sum is O(4^N); limited to N <= 12.
    """
    n = sample.geometry.n_sites
    if n > OVERLAP_MAX_SITES:
        raise ValueError(
            f"overlap enumeration is limited to {OVERLAP_MAX_SITES} sites, "
            f"lattice has {n}")
    jval, h4 = _enum_tables(sample)
    e4s = np.empty(1 << n, dtype=np.int64)
    _kernels.enum_state_energies(sample.geometry.neighbors, jval, h4, e4s)
    qhist = np.zeros(2 * n + 1, dtype=np.float64)
    _kernels.enum_overlap_hist(e4s, beta, n, qhist)
    q_values = (np.arange(2 * n + 1) - n) / n
    return q_values, qhist


def two_spin_chain_correlation(beta: float) -> float:
    """Closed form <S0 S1> for an isolated pair with one J = +1 bond.

    Z = 2 e^beta + 2 e^-beta and <S0S1> = (e^beta - e^-beta)/(2 cosh beta)
    per spin pair, i.e. tanh(beta).
    """
    return math.tanh(beta)


def enumerator_self_check(beta: float) -> tuple[float, float]:
    """(enumerated, closed-form) <S0 S1> for the isolated two-spin system.

    Runs the Gray-code kernel on a hand-built two-site bond table, so a
    report can show the enumeration machinery agreeing with pencil-and-paper
    algebra on the smallest nontrivial system.
    """
    nbr = np.array([[1, 1, 0, 0, 0, 0],
                    [0, 0, 1, 1, 1, 1]], dtype=np.int32)
    jval = np.zeros((2, 6), dtype=np.int8)
    jval[0, 0] = 1  # the +x bond from site 0
    jval[1, 1] = 1  # the same bond seen from site 1
    h4 = np.zeros(2, dtype=np.int64)
    e4s = np.empty(4, dtype=np.int64)
    _kernels.enum_state_energies(nbr, jval, h4, e4s)
    e = 0.25 * e4s
    w = np.exp(-beta * (e - e.min()))
    corr = np.array([1.0, -1.0, -1.0, 1.0])  # S0*S1 per packed state
    got = float((w * corr).sum() / w.sum())
    return got, two_spin_chain_correlation(beta)


def overlap_histogram(q_values, n_sites: int) -> tuple[np.ndarray, np.ndarray]:
    """Histogram site-overlap measurements onto the 2N+1 exact levels."""
    grid = (np.arange(2 * n_sites + 1) - n_sites) / n_sites
    counts = np.zeros(2 * n_sites + 1, dtype=np.int64)
    for q in np.asarray(q_values, dtype=np.float64):
        k = int(round(q * n_sites)) + n_sites
        if not 0 <= k <= 2 * n_sites:
            raise ValueError(f"overlap {q} outside [-1, 1]")
        counts[k] += 1
    return grid, counts


# ---------------------------------------------------------------------------
# coherence length machinery
# ---------------------------------------------------------------------------

def c4_profile(qfield: np.ndarray, l: int) -> np.ndarray:
    """Axis-averaged overlap correlation C4(r), r = 0..L/2.

    C4(r) = (1/3N) sum_axes sum_i q_i q_{i + r e_axis} on the periodic cube
    (site index x + L*y + L*L*z).
    """
    n = l ** 3
    q = np.asarray(qfield, dtype=np.float64)
    if q.shape != (n,):
        raise ValueError(f"overlap field must have shape ({n},)")
    q3 = q.reshape(l, l, l)  # [z, y, x]
    out = np.empty(l // 2 + 1)
    for r in range(l // 2 + 1):
        acc = 0.0
        for axis in range(3):
            acc += float((q3 * np.roll(q3, -r, axis=axis)).mean())
        out[r] = acc / 3.0
    return out


@dataclass(frozen=True)
class XiEstimate:
    xi: float
    guard_ok: bool     # False once 7*xi exceeds the box, i.e. window-limited
    profile: np.ndarray


def xi_from_profile(c4: np.ndarray, l: int) -> XiEstimate:
    """Integral estimator xi = sum_r r*C+(r) / sum_r C+(r), C+ = max(C4, 0).

    The sums run over r = 0..L/2 (the r=0 term only stabilizes the
    denominator).  guard_ok is False when 7*xi > L: the growing correlated
    domains no longer fit the periodic box and xi is window-limited.
    """
    c4 = np.asarray(c4, dtype=np.float64)
    if c4.shape != (l // 2 + 1,):
        raise ValueError(f"profile must have shape ({l // 2 + 1},)")
    cp = np.maximum(c4, 0.0)
    denom = cp.sum()
    xi = float((np.arange(c4.size) * cp).sum() / denom) if denom > 0 else 0.0
    return XiEstimate(xi=xi, guard_ok=not (7.0 * xi > l), profile=c4)


def xi_estimate(config_a: SpinConfiguration, config_b: SpinConfiguration,
                lane: int = 0) -> XiEstimate:
    """Coherence length of the replica overlap field of two configurations."""
    geom = config_a.geometry
    if not geom.is_cubic:
        raise ValueError("the correlation profile needs a cubic lattice")
    q = overlap_field(config_a, config_b, lane).astype(np.float64)
    return xi_from_profile(c4_profile(q, geom.l), geom.l)


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    amplitude: float
    residual_rms: float

    @property
    def z_dynamic(self) -> float:
        """Growth exponent read as xi ~ t^(1/z)."""
        return 1.0 / self.exponent


def xi_growth_fit(times, xis, l: int | None = None) -> PowerLawFit:
    """Least-squares power law xi = A * t^p through (t, xi) points.

    Needs at least 10 points at strictly increasing positive times with
    positive xi; when `l` is given, every point must also pass the 7*xi <= L
    guard, since window-limited values would bias the exponent down.
    """
    t = np.asarray(times, dtype=np.float64)
    x = np.asarray(xis, dtype=np.float64)
    if t.shape != x.shape or t.ndim != 1:
        raise ValueError("times and xis must be matching 1-d arrays")
    if t.size < 10:
        raise ValueError(f"need at least 10 points, got {t.size}")
    if np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ValueError("times must be positive and strictly increasing")
    if np.any(x <= 0):
        raise ValueError("xi values must be positive")
    if l is not None and np.any(7.0 * x > l):
        raise ValueError("window-limited points (7*xi > L) cannot be fitted")
    lt, lx = np.log(t), np.log(x)
    p, lna = np.polyfit(lt, lx, 1)
    resid = lx - (lna + p * lt)
    return PowerLawFit(exponent=float(p), amplitude=float(math.exp(lna)),
                       residual_rms=float(np.sqrt(np.mean(resid ** 2))))
