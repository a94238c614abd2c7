"""Campaign configuration files: strict INI-style key-value text.

Every recognized section and key is listed in _SCHEMA; anything else is a
hard error, so a typo in a physics parameter can never pass silently.  A
parsed config serializes back to a canonical text form (fixed section and
key order, defaults materialized) whose SHA-256 pins checkpoints to the
exact run plan that produced them.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass
from fractions import Fraction


class ConfigError(ValueError):
    """A campaign config that names an unknown or invalid field."""


_SCHEMA = {
    "lattice": ("l",),
    "sample": ("count", "h"),
    "ladder": ("temps", "t_min", "t_max", "n_t", "target_acc", "n_pt"),
    "engine": ("kind", "width"),
    "rng": ("mode", "seed"),
    "run": ("sweeps", "grid", "chains", "checkpoint_every"),
    "partition": ("p",),
    "output": ("dir",),
}

_ENGINES = ("metropolis", "heat-bath", "bit-sliced")
_RNG_MODES = ("parisi-rapuano", "site-keyed")


def _get(cp, section, key, default=None):
    if cp.has_option(section, key):
        return cp.get(section, key).strip()
    return default


def _as_int(section, key, raw, lo=None, hi=None):
    try:
        v = int(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"[{section}] {key} = {raw!r} is not an integer")
    if lo is not None and v < lo:
        raise ConfigError(f"[{section}] {key} = {v} must be >= {lo}")
    if hi is not None and v > hi:
        raise ConfigError(f"[{section}] {key} = {v} must be <= {hi}")
    return v


def _as_float(section, key, raw):
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a number")


@dataclass(frozen=True)
class CampaignConfig:
    """A fully resolved, validated run plan."""

    l: int
    n_samples: int
    h: Fraction
    temps: tuple | None      # explicit ascending ladder, or None to tune
    tune: tuple | None       # (t_min, t_max, n_t, target_acc)
    n_pt: int
    engine: str
    width: int
    rng_mode: str
    seed: int
    sweeps: int
    grid: str                # "log2" or "every:<k>"
    chains: int
    checkpoint_every: int
    p: int
    out_dir: str

    # -- parsing ---------------------------------------------------------

    @classmethod
    def parse(cls, text: str) -> "CampaignConfig":
        cp = configparser.ConfigParser(interpolation=None, strict=True,
                                       inline_comment_prefixes=("#", ";"))
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unparseable config: {exc}") from None

        for section in cp.sections():
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]")
            for key in cp.options(section):
                if key not in _SCHEMA[section]:
                    raise ConfigError(
                        f"[{section}] key {key!r} is not recognized")
        for required in ("lattice", "ladder", "rng", "run"):
            if required not in cp.sections():
                raise ConfigError(f"missing required section [{required}]")

        l = _as_int("lattice", "l", _get(cp, "lattice", "l"), lo=2)
        if l % 2:
            raise ConfigError(f"[lattice] l = {l} must be even "
                              "(checkerboard parity)")

        n_samples = _as_int("sample", "count",
                            _get(cp, "sample", "count", "1"), lo=1)
        h_raw = _get(cp, "sample", "h", "0")
        try:
            h = Fraction(h_raw)
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"[sample] h = {h_raw!r} is not a fraction")
        if h < 0 or h % Fraction(1, 4) != 0:
            raise ConfigError(f"[sample] h = {h} must be a nonnegative "
                              "multiple of 1/4")

        temps, tune = cls._parse_ladder(cp)
        n_pt = _as_int("ladder", "n_pt", _get(cp, "ladder", "n_pt", "10"),
                       lo=1)

        engine = _get(cp, "engine", "kind", "metropolis")
        if engine not in _ENGINES:
            raise ConfigError(f"[engine] kind = {engine!r}; pick one of "
                              f"{', '.join(_ENGINES)}")
        width = _as_int("engine", "width", _get(cp, "engine", "width", "1"),
                        lo=1, hi=64)

        rng_mode = _get(cp, "rng", "mode", "parisi-rapuano")
        if rng_mode not in _RNG_MODES:
            raise ConfigError(f"[rng] mode = {rng_mode!r}; pick one of "
                              f"{', '.join(_RNG_MODES)}")
        seed = _as_int("rng", "seed", _get(cp, "rng", "seed"), lo=0,
                       hi=(1 << 64) - 1)

        sweeps = _as_int("run", "sweeps", _get(cp, "run", "sweeps"), lo=1)
        grid = _get(cp, "run", "grid", "log2")
        if grid != "log2":
            if not grid.startswith("every:"):
                raise ConfigError(f"[run] grid = {grid!r}; use 'log2' or "
                                  "'every:<k>'")
            _as_int("run", "grid", grid[6:], lo=1)
        chains = _as_int("run", "chains", _get(cp, "run", "chains", "1"),
                         lo=1, hi=2)
        checkpoint_every = _as_int(
            "run", "checkpoint_every",
            _get(cp, "run", "checkpoint_every", "0"), lo=0)

        p = _as_int("partition", "p", _get(cp, "partition", "p", "1"), lo=1)
        out_dir = _get(cp, "output", "dir", "out")

        cfg = cls(l=l, n_samples=n_samples, h=h, temps=temps, tune=tune,
                  n_pt=n_pt, engine=engine, width=width, rng_mode=rng_mode,
                  seed=seed, sweeps=sweeps, grid=grid, chains=chains,
                  checkpoint_every=checkpoint_every, p=p, out_dir=out_dir)
        cfg._validate()
        return cfg

    @staticmethod
    def _parse_ladder(cp):
        temps_raw = _get(cp, "ladder", "temps")
        bounds = [_get(cp, "ladder", k) for k in
                  ("t_min", "t_max", "n_t", "target_acc")]
        if temps_raw is not None:
            if any(b is not None for b in bounds):
                raise ConfigError("[ladder] give either temps or the "
                                  "t_min/t_max/n_t/target_acc bounds, not both")
            try:
                temps = tuple(float(t) for t in temps_raw.split(","))
            except ValueError:
                raise ConfigError(f"[ladder] temps = {temps_raw!r} is not a "
                                  "comma-separated number list")
            if any(t <= 0 for t in temps):
                raise ConfigError("[ladder] temperatures must be positive")
            if any(b <= a for a, b in zip(temps, temps[1:])):
                raise ConfigError("[ladder] temps must be strictly ascending "
                                  "(duplicate rungs are rejected)")
            return temps, None
        if any(b is None for b in bounds):
            raise ConfigError("[ladder] needs temps or all four of "
                              "t_min/t_max/n_t/target_acc")
        t_min = _as_float("ladder", "t_min", bounds[0])
        t_max = _as_float("ladder", "t_max", bounds[1])
        n_t = _as_int("ladder", "n_t", bounds[2], lo=2)
        target = _as_float("ladder", "target_acc", bounds[3])
        if not 0.0 < t_min < t_max:
            raise ConfigError("[ladder] needs 0 < t_min < t_max")
        if not 0.0 < target < 1.0:
            raise ConfigError(f"[ladder] target_acc = {target} must be "
                              "inside (0, 1)")
        return None, (t_min, t_max, n_t, target)

    # -- cross-field validation -------------------------------------------

    def _validate(self):
        n_t = len(self.temps) if self.temps is not None else self.tune[2]
        if self.sweeps % self.n_pt:
            raise ConfigError(f"[run] sweeps = {self.sweeps} must be a "
                              f"multiple of the tempering block n_pt = "
                              f"{self.n_pt}")
        if self.engine != "bit-sliced" and self.width != 1:
            raise ConfigError("[engine] width > 1 needs kind = bit-sliced")
        if self.engine == "bit-sliced":
            if self.h != 0:
                raise ConfigError("[engine] bit-sliced runs need h = 0")
            if n_t != 1:
                raise ConfigError("[engine] bit-sliced runs are "
                                  "constant-temperature (one ladder rung)")
            if self.p != 1:
                raise ConfigError("[engine] bit-sliced runs cannot be "
                                  "partitioned")
            if self.n_samples != self.width:
                raise ConfigError(f"[engine] bit-sliced lanes are samples: "
                                  f"need count = width, got "
                                  f"{self.n_samples} != {self.width}")
        if self.p > 1:
            if self.engine != "metropolis":
                raise ConfigError("[partition] p > 1 needs the scalar "
                                  "Metropolis engine")
            if n_t != 1:
                raise ConfigError("[partition] p > 1 runs are "
                                  "constant-temperature (one ladder rung)")
            if self.chains != 1:
                raise ConfigError("[partition] p > 1 supports a single chain")
            if self.l < 2 * self.p:
                raise ConfigError(f"[partition] p = {self.p} needs L >= 2p")
        if self.tune is not None and n_t < 2:
            raise ConfigError("[ladder] tuning needs n_t >= 2")

    # -- canonical form ----------------------------------------------------

    def canonical(self) -> str:
        """Text form with fixed ordering; parse(canonical()) == self."""
        out = io.StringIO()
        out.write(f"[lattice]\nl = {self.l}\n\n")
        out.write(f"[sample]\ncount = {self.n_samples}\nh = {self.h}\n\n")
        out.write("[ladder]\n")
        if self.temps is not None:
            out.write("temps = " + ", ".join(repr(t) for t in self.temps)
                      + "\n")
        else:
            t_min, t_max, n_t, target = self.tune
            out.write(f"t_min = {t_min!r}\nt_max = {t_max!r}\n"
                      f"n_t = {n_t}\ntarget_acc = {target!r}\n")
        out.write(f"n_pt = {self.n_pt}\n\n")
        out.write(f"[engine]\nkind = {self.engine}\nwidth = {self.width}\n\n")
        out.write(f"[rng]\nmode = {self.rng_mode}\nseed = {self.seed}\n\n")
        out.write(f"[run]\nsweeps = {self.sweeps}\ngrid = {self.grid}\n"
                  f"chains = {self.chains}\n"
                  f"checkpoint_every = {self.checkpoint_every}\n\n")
        out.write(f"[partition]\np = {self.p}\n\n")
        out.write(f"[output]\ndir = {self.out_dir}\n")
        return out.getvalue()

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    @classmethod
    def from_file(cls, path) -> "CampaignConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.parse(fh.read())

    def grid_points(self):
        """Yield the measurement sweep counts in ascending order."""
        if self.grid == "log2":
            t = 1
            while t < self.sweeps:
                yield t
                t *= 2
            yield self.sweeps
        else:
            k = int(self.grid[6:])
            for t in range(k, self.sweeps + 1, k):
                yield t
            if self.sweeps % k:
                yield self.sweeps
