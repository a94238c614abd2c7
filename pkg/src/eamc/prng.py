"""Random-number machinery for the simulation engines.

Two stream flavors drive the sweeps:

* ``ParisiRapuanoState`` -- the lagged-Fibonacci wheel generator used by the
  production engines.  62 words of 32 bits with feedback lags (24, 55, 61):
  the word written at the cursor is t = (w[c-24] + w[c-55]) mod 2^32 and the
  output is t XOR w[c-61].  The engines consume exactly one 32-bit word per
  site visit, whatever the local move looks like, so the stream position is
  a pure function of (sites, sweeps).

* ``SiteKeyedStream`` -- a stateless counter mode.  Every draw is a pure
  function of (global seed, site index, sweep number, parity phase), which
  makes a lattice split across workers reproduce the single-worker
  trajectory bit for bit.

Seeding and all seed derivation use one documented stateless mixer: the
splitmix64 step, i.e. out_k = mix64(seed + (k+1) * 0x9E3779B97F4A7C15) with
mix64 the xor-shift-multiply finalizer

    x ^= x >> 30;  x *= 0xBF58476D1CE4E5B9
    x ^= x >> 27;  x *= 0x94D049BB133111EB
    x ^= x >> 31
"""

from __future__ import annotations

import numpy as np

from . import _kernels

_M64 = (1 << 64) - 1
_M32 = 0xFFFFFFFF

GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB
_REMIX_TAG = 0x7265666C6C000001  # folded into the seed if a fill comes up all-zero

WHEEL_WORDS = 62
LAGS = (24, 55, 61)
STATE_BYTES = WHEEL_WORDS * 4 + 1

# domain-separation tags for derive_seed paths
TAG_COUPLING = 0x01
TAG_FIELD = 0x02
TAG_SPINS = 0x03
TAG_SWEEP = 0x04
TAG_SWAP = 0x05
TAG_SLAB = 0x06
TAG_LADDER = 0x07
TAG_BENCH = 0x08
TAG_SAMPLE = 0x09
TAG_CHAIN = 0x0A


def mix64(x: int) -> int:
    """The 64-bit finalizer; pure Python mirror of the compiled version."""
    x &= _M64
    x ^= x >> 30
    x = (x * _MIX_A) & _M64
    x ^= x >> 27
    x = (x * _MIX_B) & _M64
    x ^= x >> 31
    return x


def seed_words(seed: int, count: int) -> list[int]:
    """First `count` outputs of the stateless mixing sequence from `seed`."""
    s = seed & _M64
    return [mix64((s + (k + 1) * GOLDEN) & _M64) for k in range(count)]


def derive_seed(master: int, *path: int) -> int:
    """Domain-separated child seed: fold the path words into the master.

    Distinct paths give independent streams; the same path always gives the
    same seed.  Use the TAG_* constants as the leading path element.
    """
    z = master & _M64
    for w in path:
        z = mix64((z + GOLDEN) ^ (w & _M64))
    return z


def bit_stream(seed: int, nbits: int) -> np.ndarray:
    """nbits fair bits from the mixing sequence, as a uint8 0/1 array.

    Bits come from the low-endian expansion of successive 64-bit outputs.
    """
    if nbits <= 0:
        return np.zeros(0, dtype=np.uint8)
    nwords = (nbits + 63) // 64
    k = np.arange(1, nwords + 1, dtype=np.uint64)
    x = np.uint64(seed & _M64) + k * np.uint64(GOLDEN)
    x ^= x >> np.uint64(30)
    x *= np.uint64(_MIX_A)
    x ^= x >> np.uint64(27)
    x *= np.uint64(_MIX_B)
    x ^= x >> np.uint64(31)
    bits = np.unpackbits(x.view(np.uint8), bitorder="little")
    return bits[:nbits]


def site_random(seed: int, site: int, sweep: int, phase: int) -> int:
    """Stateless 32-bit draw keyed by (seed, site, sweep, phase).

    Definition (all mod 2^64):
        z = mix64(seed + GOLDEN * (site + 1))
        z = mix64(z XOR (GOLDEN * (2*sweep + phase + 1)))
        return z mod 2^32
    """
    z = mix64((seed + GOLDEN * (site + 1)) & _M64)
    z = mix64(z ^ ((GOLDEN * (2 * sweep + phase + 1)) & _M64))
    return z & _M32


def _wheel_from_seed(seed: int) -> np.ndarray:
    words = seed_words(seed, WHEEL_WORDS)
    return np.array([w & _M32 for w in words], dtype=np.uint32)


class ParisiRapuanoState:
    """The 62-word lagged-Fibonacci wheel with lags (24, 55, 61)."""

    mode = 0  # kernel dispatch: sequential wheel draw

    __slots__ = ("wheel", "cursor")

    def __init__(self, wheel: np.ndarray, cursor: int = 0):
        wheel = np.asarray(wheel, dtype=np.uint32)
        if wheel.shape != (WHEEL_WORDS,):
            raise ValueError(f"wheel must hold {WHEEL_WORDS} words")
        if not 0 <= cursor < WHEEL_WORDS:
            raise ValueError("cursor out of range")
        if not wheel.any():
            raise ValueError("all-zero wheel is a fixed point; reseed instead")
        self.wheel = wheel.copy()
        self.cursor = int(cursor)

    @classmethod
    def from_seed(cls, seed: int) -> "ParisiRapuanoState":
        """Fill the wheel from the mixing sequence; re-mix if it comes up zero.

        No 64-bit seed is known to produce 62 consecutive zero outputs, but
        the validation rule exists so a hostile state can never freeze the
        generator (an all-zero wheel reproduces itself forever).
        """
        s = seed & _M64
        wheel = _wheel_from_seed(s)
        while not wheel.any():
            s = mix64(s ^ _REMIX_TAG)
            wheel = _wheel_from_seed(s)
        return cls(wheel, 0)

    def next_u32(self) -> int:
        """Single draw; pure Python to keep tiny consumers allocation-free."""
        c = self.cursor
        w = self.wheel
        t = (int(w[c - 24]) + int(w[c - 55])) & _M32
        r = t ^ int(w[c - 61])
        w[c] = t
        self.cursor = (c + 1) % WHEEL_WORDS
        return r

    def fill(self, out: np.ndarray) -> None:
        """Fill a uint32 array with consecutive draws."""
        self.cursor = int(_kernels.pr_fill(self.wheel, self.cursor, out))

    # engines treat both stream flavors uniformly through these three hooks
    def phase_randoms(self, out: np.ndarray, ids, phase: int) -> None:
        self.fill(out)

    def end_sweep(self) -> None:
        pass

    def to_bytes(self) -> bytes:
        """62 little-endian 32-bit words followed by one cursor byte."""
        return self.wheel.astype("<u4").tobytes() + bytes([self.cursor])

    @classmethod
    def from_bytes(cls, raw: bytes) -> "ParisiRapuanoState":
        if len(raw) != STATE_BYTES:
            raise ValueError(f"state block must be {STATE_BYTES} bytes")
        wheel = np.frombuffer(raw[:-1], dtype="<u4").astype(np.uint32)
        return cls(wheel, raw[-1])

    def copy(self) -> "ParisiRapuanoState":
        return ParisiRapuanoState(self.wheel, self.cursor)

    def __eq__(self, other):
        return (isinstance(other, ParisiRapuanoState)
                and self.cursor == other.cursor
                and bool(np.array_equal(self.wheel, other.wheel)))


class SiteKeyedStream:
    """Stateless per-site stream; carries only the seed and the sweep count."""

    mode = 1

    __slots__ = ("seed", "sweep")

    def __init__(self, seed: int, sweep: int = 0):
        self.seed = seed & _M64
        self.sweep = int(sweep)

    def phase_randoms(self, out: np.ndarray, ids: np.ndarray, phase: int) -> None:
        _kernels.site_keyed_fill(np.uint64(self.seed), ids,
                                 np.uint64(self.sweep), np.uint64(phase), out)

    def end_sweep(self) -> None:
        self.sweep += 1

    def to_bytes(self) -> bytes:
        return self.seed.to_bytes(8, "little") + self.sweep.to_bytes(8, "little")

    @classmethod
    def from_bytes(cls, raw: bytes) -> "SiteKeyedStream":
        if len(raw) != 16:
            raise ValueError("site-keyed state block must be 16 bytes")
        return cls(int.from_bytes(raw[:8], "little"),
                   int.from_bytes(raw[8:], "little"))

    def copy(self) -> "SiteKeyedStream":
        return SiteKeyedStream(self.seed, self.sweep)

    def __eq__(self, other):
        return (isinstance(other, SiteKeyedStream)
                and self.seed == other.seed and self.sweep == other.sweep)


_DUMMY_WHEEL = np.zeros(WHEEL_WORDS, dtype=np.uint32)
_DUMMY_IDS = np.zeros(1, dtype=np.int64)


def kernel_rng_args(rng):
    """(mode, wheel, cursor, sk_seed, sweep) tuple for the run kernels."""
    if rng.mode == 0:
        return 0, rng.wheel, rng.cursor, np.uint64(0), 0
    return 1, _DUMMY_WHEEL, 0, np.uint64(rng.seed), rng.sweep


def store_kernel_rng(rng, cursor: int, sweep: int) -> None:
    """Write back the advanced kernel state after a run."""
    if rng.mode == 0:
        rng.cursor = int(cursor)
    else:
        rng.sweep = int(sweep)
