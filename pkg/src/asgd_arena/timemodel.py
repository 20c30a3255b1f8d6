"""Worker compute-time laws: fixed, time-varying power, and stochastic.

Three ways a worker's cost per task can be described:

* ``Fixed``       -- worker i always takes ``tau_i`` seconds per task.
* ``Universal``   -- worker i completes ``floor(integral of p_i)`` tasks over
  an interval, with ``p_i`` a nonnegative piecewise-constant power function.
* ``Stochastic``  -- worker i's task durations are iid draws from a per-worker
  distribution.

All stochastic draws are counter-based: a draw is a pure function of
``(seed, worker, task_counter)``, so schedules are reproducible no matter in
which order the event loop asks for them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import ConfigError, UnsupportedQueryError

_LN2 = math.log(2.0)

# Draws for task durations and gradient noise come from disjoint streams.
_DURATION_STREAM = 0

# One numpy Generator serves a contiguous block of task counters; this keeps
# the per-draw cost low while staying a pure function of the counter.
_BLOCK = 64


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Distribution:
    """Base class for per-worker duration laws (all parameters in seconds)."""

    def mean(self) -> float:
        raise NotImplementedError

    def std(self) -> float:
        raise NotImplementedError

    def orlicz_upper(self) -> float:
        """Finite upper bound on the centered sub-exponential norm.

        The bound is analytic and conservative; tests only require validity,
        not tightness.  See each subclass for the derivation sketch.
        """
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def _validate(self) -> None:
        m = self.mean()
        if not math.isfinite(m) or m <= 0:
            raise ConfigError(f"{self!r}: mean must be finite and positive")


@dataclass(frozen=True)
class Deterministic(Distribution):
    value: float

    def __post_init__(self):
        self._validate()

    def mean(self):
        return float(self.value)

    def std(self):
        return 0.0

    def orlicz_upper(self):
        return 0.0

    def sample(self, rng, size=None):
        if size is None:
            return float(self.value)
        return np.full(size, float(self.value))


@dataclass(frozen=True)
class Exponential(Distribution):
    scale: float

    def __post_init__(self):
        self._validate()

    def mean(self):
        return float(self.scale)

    def std(self):
        return float(self.scale)

    def orlicz_upper(self):
        # ||X||_psi1 = 2*scale exactly (solve E exp(X/C) = 2); centering at
        # the mean at most doubles it for a positive variable.
        return 4.0 * self.scale

    def sample(self, rng, size=None):
        return rng.exponential(self.scale, size=size)


@dataclass(frozen=True)
class ShiftedExponential(Distribution):
    shift: float
    scale: float

    def __post_init__(self):
        if self.shift < 0:
            raise ConfigError("shift must be >= 0")
        self._validate()

    def mean(self):
        return float(self.shift + self.scale)

    def std(self):
        return float(self.scale)

    def orlicz_upper(self):
        # The shift cancels under centering, so the exponential bound applies.
        # For shift == scale == c this gives 4c = 2 * mean.
        return 4.0 * self.scale

    def sample(self, rng, size=None):
        return self.shift + rng.exponential(self.scale, size=size)


@dataclass(frozen=True)
class Uniform(Distribution):
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo < 0 or self.hi <= self.lo:
            raise ConfigError("need 0 <= lo < hi")
        self._validate()

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def std(self):
        return (self.hi - self.lo) / math.sqrt(12.0)

    def orlicz_upper(self):
        # |X - mean| <= (hi-lo)/2, and a variable bounded by M has
        # psi1-norm at most M/ln 2.
        return (self.hi - self.lo) / (2.0 * _LN2)

    def sample(self, rng, size=None):
        return rng.uniform(self.lo, self.hi, size=size)


@dataclass(frozen=True)
class HalfNormal(Distribution):
    scale: float
    shift: float = 0.0

    def __post_init__(self):
        if self.scale <= 0 or self.shift < 0:
            raise ConfigError("need scale > 0 and shift >= 0")
        self._validate()

    def mean(self):
        return self.shift + self.scale * math.sqrt(2.0 / math.pi)

    def std(self):
        return self.scale * math.sqrt(1.0 - 2.0 / math.pi)

    def orlicz_upper(self):
        # |N(0, s)| has psi2-norm s*sqrt(8/3) (solve E exp(X^2/C^2) = 2),
        # psi1 <= psi2 / sqrt(ln 2), and centering adds mean / ln 2.
        psi1 = self.scale * math.sqrt(8.0 / 3.0) / math.sqrt(_LN2)
        return psi1 + (self.mean() - self.shift) / _LN2

    def sample(self, rng, size=None):
        return self.shift + np.abs(rng.normal(0.0, self.scale, size=size))


@dataclass(frozen=True)
class LogNormal(Distribution):
    mu: float
    sigma: float
    shift: float = 0.0

    def __post_init__(self):
        if self.sigma <= 0 or self.shift < 0:
            raise ConfigError("need sigma > 0 and shift >= 0")
        self._validate()

    def mean(self):
        return self.shift + math.exp(self.mu + 0.5 * self.sigma**2)

    def std(self):
        base = math.exp(self.mu + 0.5 * self.sigma**2)
        return base * math.sqrt(math.expm1(self.sigma**2))

    def orlicz_upper(self):
        # The log-normal tail is heavier than exponential, so no finite
        # sub-exponential norm exists.  We return the bound of the gamma
        # distribution with matched mean/variance as a finite surrogate so
        # that allocation policies still get a usable confidence scale.
        m = self.mean() - self.shift
        v = self.std() ** 2
        shape = m * m / v
        scale = v / m
        return 2.0 * scale / (1.0 - 2.0 ** (-1.0 / shape))

    def sample(self, rng, size=None):
        return self.shift + rng.lognormal(self.mu, self.sigma, size=size)


@dataclass(frozen=True)
class Gamma(Distribution):
    shape: float
    scale: float
    shift: float = 0.0

    def __post_init__(self):
        if self.shape <= 0 or self.scale <= 0 or self.shift < 0:
            raise ConfigError("need shape > 0, scale > 0, shift >= 0")
        self._validate()

    def mean(self):
        return self.shift + self.shape * self.scale

    def std(self):
        return math.sqrt(self.shape) * self.scale

    def orlicz_upper(self):
        # ||X||_psi1 = scale / (1 - 2^(-1/shape)) exactly via the mgf;
        # centering at most doubles it.
        return 2.0 * self.scale / (1.0 - 2.0 ** (-1.0 / self.shape))

    def sample(self, rng, size=None):
        return self.shift + rng.gamma(self.shape, self.scale, size=size)


def mean_and_orlicz(dist: Distribution) -> tuple[float, float]:
    """Analytic mean and a finite upper bound on the centered psi1-norm."""
    return dist.mean(), dist.orlicz_upper()


# ---------------------------------------------------------------------------
# Piecewise-constant compute power
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PiecewisePower:
    """Nonnegative piecewise-constant power function of virtual time.

    ``values[j]`` holds on ``[breaks[j], breaks[j+1])``; the last value
    extends to infinity.  ``breaks[0]`` must be 0.
    """

    breaks: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.breaks) != len(self.values) or not self.breaks:
            raise ConfigError("breaks and values must have equal nonzero length")
        if self.breaks[0] != 0.0:
            raise ConfigError("first breakpoint must be 0")
        if any(b2 <= b1 for b1, b2 in zip(self.breaks, self.breaks[1:])):
            raise ConfigError("breakpoints must be strictly increasing")
        if any(v < 0 for v in self.values):
            raise ConfigError("power values must be nonnegative")

    @staticmethod
    def constant(rate: float) -> "PiecewisePower":
        return PiecewisePower((0.0,), (float(rate),))

    def integral(self, t0: float, t1: float) -> float:
        """Exact integral of the power over ``[t0, t1]``."""
        if t1 < t0 or t0 < 0:
            raise ValueError("need 0 <= t0 <= t1")
        total = 0.0
        for j, v in enumerate(self.values):
            seg_lo = self.breaks[j]
            seg_hi = self.breaks[j + 1] if j + 1 < len(self.breaks) else math.inf
            lo = max(seg_lo, t0)
            hi = min(seg_hi, t1)
            if hi > lo:
                total += v * (hi - lo)
        return total

    def time_to_work(self, t0: float, work: float) -> float:
        """Smallest ``T >= t0`` with ``integral(t0, T) >= work`` (inf if never)."""
        if work <= 0:
            return t0
        acc = 0.0
        for j, v in enumerate(self.values):
            seg_lo = max(self.breaks[j], t0)
            seg_hi = self.breaks[j + 1] if j + 1 < len(self.breaks) else math.inf
            if seg_hi <= t0:
                continue
            if math.isinf(seg_hi):
                if v > 0:
                    return seg_lo + (work - acc) / v
                return math.inf
            gain = v * (seg_hi - seg_lo)
            if acc + gain >= work:
                return seg_lo + (work - acc) / v
            acc += gain
        return math.inf


def grads_completed(power: PiecewisePower, t0: float, t1: float) -> int:
    """Number of tasks a worker with this power finishes on ``[t0, t1]``."""
    if t1 < t0:
        raise ValueError("need t1 >= t0")
    work = power.integral(t0, t1)
    # Tiny nudge so that integrals that are integers up to float round-off
    # (e.g. (1/tau) * (k*tau)) land on the mathematically exact floor.
    return int(math.floor(work * (1.0 + 1e-12) + 1e-12))


# ---------------------------------------------------------------------------
# Compute models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Fixed:
    taus: tuple[float, ...]

    def __post_init__(self):
        if not self.taus or any(t <= 0 for t in self.taus):
            raise ConfigError("all task times must be positive")

    @property
    def n(self):
        return len(self.taus)


@dataclass(frozen=True)
class Universal:
    powers: tuple[PiecewisePower, ...]

    def __post_init__(self):
        if not self.powers:
            raise ConfigError("need at least one worker")

    @property
    def n(self):
        return len(self.powers)


@dataclass(frozen=True)
class Stochastic:
    dists: tuple[Distribution, ...]

    def __post_init__(self):
        if not self.dists:
            raise ConfigError("need at least one worker")

    @property
    def n(self):
        return len(self.dists)


ComputeModel = Union[Fixed, Universal, Stochastic]


@lru_cache(maxsize=4096)
def _duration_block(dist: Distribution, seed: int, worker: int, block: int) -> np.ndarray:
    rng = np.random.default_rng((seed, worker, block, _DURATION_STREAM))
    out = dist.sample(rng, size=_BLOCK)
    return np.asarray(out, dtype=float)


def sample_duration(model: ComputeModel, worker: int, task_counter: int, seed: int) -> float:
    """Duration of one task; a pure function of ``(seed, worker, task_counter)``."""
    if worker < 0 or worker >= model.n:
        raise IndexError(f"worker {worker} out of range for n={model.n}")
    if isinstance(model, Fixed):
        return float(model.taus[worker])
    if isinstance(model, Stochastic):
        block, off = divmod(task_counter, _BLOCK)
        return float(_duration_block(model.dists[worker], seed, worker, block)[off])
    raise UnsupportedQueryError(
        "pointwise durations are undefined under the time-varying power model; "
        "use grads_completed over an interval instead"
    )


# ---------------------------------------------------------------------------
# Named experiment presets
# ---------------------------------------------------------------------------

_PRESETS = ("sqrt_shifted_exp", "linear_shifted_exp", "fixed_linear_jitter", "five_dist_groups")

_HETERO_BASE = 29.0


def _five_dist_worker(idx: int) -> Distribution:
    group, kind = divmod(idx, 5)
    m = _HETERO_BASE * (5 * group + 1)
    if kind == 0:
        return ShiftedExponential(shift=m, scale=m)
    if kind == 1:
        return Uniform(lo=1.5 * m, hi=2.5 * m)
    if kind == 2:
        return HalfNormal(scale=m * math.sqrt(math.pi / 2.0), shift=m)
    if kind == 3:
        return LogNormal(mu=0.5 * math.log(m), sigma=math.sqrt(math.log(m)), shift=m)
    return Gamma(shape=m * m, scale=1.0 / m, shift=m)


def experiment_times(preset: str, n: int, seed: int = 0) -> ComputeModel:
    """Per-worker compute-time model for one of the named benchmark setups.

    * ``sqrt_shifted_exp``   -- worker i draws ``29*sqrt(i) + Exp(29*sqrt(i))``
      (mean ``2*29*sqrt(i)``), i = 1..n.
    * ``linear_shifted_exp`` -- same with ``29*i`` in place of ``29*sqrt(i)``.
    * ``fixed_linear_jitter``-- fixed times ``tau_i = i + |eta_i|`` with
      ``eta_i ~ N(0, i)``, sampled once here from ``seed``.
    * ``five_dist_groups``   -- groups of five workers, one per distribution
      family (shifted exponential / uniform / half-normal / log-normal /
      gamma), all five sharing the mean ``2 * 29 * (5g+1)`` in group g.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    if preset == "sqrt_shifted_exp":
        return Stochastic(tuple(
            ShiftedExponential(shift=_HETERO_BASE * math.sqrt(i), scale=_HETERO_BASE * math.sqrt(i))
            for i in range(1, n + 1)
        ))
    if preset == "linear_shifted_exp":
        return Stochastic(tuple(
            ShiftedExponential(shift=_HETERO_BASE * i, scale=_HETERO_BASE * i)
            for i in range(1, n + 1)
        ))
    if preset == "fixed_linear_jitter":
        rng = np.random.default_rng((seed, 0x7A115))
        eta = rng.normal(0.0, 1.0, size=n) * np.sqrt(np.arange(1, n + 1, dtype=float))
        taus = np.arange(1, n + 1, dtype=float) + np.abs(eta)
        return Fixed(tuple(float(t) for t in taus))
    if preset == "five_dist_groups":
        return Stochastic(tuple(_five_dist_worker(i) for i in range(n)))
    raise ConfigError(f"unknown time preset {preset!r}; expected one of {_PRESETS}")


def sample_many(dist: Distribution, n_draws: int, seed: int, worker: int = 0) -> np.ndarray:
    """Vectorized iid draws for Monte-Carlo estimation (single seeded stream)."""
    rng = np.random.default_rng((seed, worker, _DURATION_STREAM))
    return np.asarray(dist.sample(rng, size=n_draws), dtype=float)


def taus_sorted(model: Fixed) -> tuple[float, ...]:
    """Task times in ascending order (the order theory formulas expect)."""
    return tuple(sorted(model.taus))
