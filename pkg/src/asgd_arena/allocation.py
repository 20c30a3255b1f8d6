"""Budget-B task allocation over workers with unknown random durations.

The round cost is the makespan ``C(a) = max_i sum_{u<=a_i} X_i^u``; since its
expectation depends on whole distributions, allocations are chosen against
the proxy ``loss(a, s) = max_i a_i * s_i`` instead.  ``ras`` minimizes that
proxy exactly (and, among minimizers, the number of cost-critical arms);
the adaptive allocators feed it lower confidence bounds on the mean
durations, built either from a known sub-exponential norm bound (``alpha``
mode) or from the empirical mean with a relative-width bound (``eta`` mode).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError
from .timemodel import Distribution

_EXPLORE_STREAM = 2


# ---------------------------------------------------------------------------
# Proxy loss and exact allocation search
# ---------------------------------------------------------------------------

def proxy_loss(a: Sequence[int], lam: Sequence[float]) -> float:
    """max_i a_i * lam_i; arms with a_i = 0 contribute 0."""
    if len(a) != len(lam):
        raise ValueError("allocation and rate vectors must have equal length")
    return max((ai * li for ai, li in zip(a, lam)), default=0.0)


def _argmax_cardinality(a: Sequence[int], s: Sequence[float]) -> int:
    """Number of arms attaining the proxy loss (exact float equality)."""
    products = [ai * si for ai, si in zip(a, s)]
    top = max(products)
    return sum(1 for p in products if p == top)


def _uniform_over(indices: list[int], n: int, B: int) -> list[int]:
    """floor(B/z) to every listed arm, +1 to the first B mod z of them."""
    a = [0] * n
    base, extra = divmod(B, len(indices))
    for rank, idx in enumerate(indices):
        a[idx] = base + (1 if rank < extra else 0)
    return a


def ras(scores: Sequence[float], B: int) -> list[int]:
    """Exact proxy-loss minimizer over all allocations of B units.

    Builds the optimum by adding one unit at a time: a unit may go to any arm
    up to and including the first empty one in score order; among the
    additions that minimize the resulting loss, the one leaving the fewest
    cost-critical arms wins, with remaining ties broken toward the lowest
    sorted index.  Arms scored 0 (unexplored) share the budget uniformly.
    """
    if B < 1:
        raise ConfigError("B must be >= 1")
    if any(s < 0 for s in scores):
        raise ConfigError("scores must be nonnegative")
    n = len(scores)
    if n == 0:
        raise ConfigError("need at least one arm")
    zero = [i for i, s in enumerate(scores) if s == 0.0]
    if zero:
        return _uniform_over(zero, n, B)

    order = sorted(range(n), key=lambda i: scores[i])
    s = [scores[i] for i in order]
    a = [0] * n
    a[0] = 1
    for _ in range(B - 1):
        r = n if a[n - 1] > 0 else a.index(0) + 1
        loss_now = max(ai * si for ai, si in zip(a, s))
        best_j, best_loss, best_card = -1, math.inf, -1
        for j in range(r):
            cand_loss = max(loss_now, (a[j] + 1) * s[j])
            if cand_loss > best_loss:
                continue
            a[j] += 1
            card = sum(1 for i in range(r) if a[i] * s[i] == cand_loss)
            a[j] -= 1
            if cand_loss < best_loss or card < best_card:
                best_j, best_loss, best_card = j, cand_loss, card
        a[best_j] += 1
    out = [0] * n
    for pos, idx in enumerate(order):
        out[idx] = a[pos]
    return out


def brute_force_alloc(scores: Sequence[float], B: int) -> tuple[list[int], float, int]:
    """Exhaustive oracle: (allocation, min loss, min critical-arm count).

    Returns the lexicographically smallest allocation among those attaining
    both the minimum proxy loss and, within that, the minimum cardinality of
    the cost-critical arm set.
    """
    n = len(scores)
    if B < 1:
        raise ConfigError("B must be >= 1")
    if math.comb(n + B - 1, B) > 10**6:
        raise ConfigError("combinatorial budget exceeded")
    best: Optional[tuple[float, int, tuple[int, ...]]] = None

    def rec(prefix: list[int], remaining: int, idx: int):
        nonlocal best
        if idx == n - 1:
            cand = prefix + [remaining]
            loss = proxy_loss(cand, scores)
            card = _argmax_cardinality(cand, scores)
            key = (loss, card, tuple(cand))
            if best is None or key < best:
                best = key
            return
        for units in range(remaining + 1):
            rec(prefix + [units], remaining - units, idx + 1)

    rec([], B, 0)
    loss, card, alloc = best
    return list(alloc), loss, card


# ---------------------------------------------------------------------------
# Confidence bounds
# ---------------------------------------------------------------------------

def _width(count: int, log_term: float) -> float:
    return math.sqrt(log_term / count) + log_term / count


def conf_bound(alpha: float, K_i: int, k: int) -> float:
    """Additive confidence width 2*alpha*(sqrt(ln(2k^2)/K) + ln(2k^2)/K)."""
    if alpha < 0 or K_i < 0 or k < 1:
        raise ConfigError("need alpha >= 0, K_i >= 0, k >= 1")
    if K_i == 0:
        return math.inf
    return 2.0 * alpha * _width(K_i, math.log(2.0 * k * k))


@dataclass
class LcbState:
    """Per-arm sufficient statistics of the adaptive allocators."""

    n: int
    mode: str = "alpha"            # "alpha" (norm bound) or "eta" (relative)
    alpha: float = 1.0
    eta: float = 1.0
    counts: np.ndarray = field(init=False)   # samples per arm
    times: np.ndarray = field(init=False)    # total observed seconds per arm
    k: int = 1                               # current round (1-based)

    def __post_init__(self):
        if self.mode not in ("alpha", "eta"):
            raise ConfigError(f"unknown LCB mode {self.mode!r}")
        self.counts = np.zeros(self.n, dtype=int)
        self.times = np.zeros(self.n)

    def empirical_means(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts > 0, self.times / np.maximum(self.counts, 1), 0.0)


def lcb(state: LcbState) -> np.ndarray:
    """Clamped-at-zero lower confidence bounds per the state's mode."""
    log_term = math.log(2.0 * state.k * state.k)
    mu = state.empirical_means()
    out = np.zeros(state.n)
    for i in range(state.n):
        c = int(state.counts[i])
        if c == 0:
            continue  # unexplored arm scores 0
        w = _width(c, log_term)
        if state.mode == "alpha":
            out[i] = max(0.0, mu[i] - 2.0 * state.alpha * w)
        else:
            out[i] = mu[i] * max(0.0, 1.0 - 2.0 * state.eta * w)
    return out


def ata_round(state: LcbState, B: int,
              observe: Callable[[int, int], np.ndarray]) -> tuple[list[int], LcbState]:
    """One allocate-observe-update round; mutates and returns ``state``.

    ``observe(worker, count)`` must return the ``count`` task durations for
    that worker this round.  Arms with a zero allocation receive no feedback
    and their statistics stay untouched.
    """
    if B < 1:
        raise ConfigError("B must be >= 1")
    scores = lcb(state)
    alloc = ras(scores, B)
    for i, ai in enumerate(alloc):
        if ai == 0:
            continue
        samples = np.asarray(observe(i, ai), dtype=float)
        if samples.shape != (ai,):
            raise ValueError(f"expected {ai} observations for arm {i}, got {samples.shape}")
        state.counts[i] += ai
        state.times[i] += float(samples.sum())
    state.k += 1
    return alloc, state


# ---------------------------------------------------------------------------
# Baselines and cost evaluation
# ---------------------------------------------------------------------------

def ofta(mu: Sequence[float], B: int) -> list[int]:
    """Fixed allocation from the true means (oracle baseline)."""
    return ras(mu, B)


def uta(n: int, B: int, seed: int = 0) -> list[int]:
    """Uniform split; B random distinct single-task workers when n > B."""
    if n <= B:
        return _uniform_over(list(range(n)), n, B)
    rng = np.random.default_rng((seed, _EXPLORE_STREAM))
    chosen = rng.choice(n, size=B, replace=False)
    a = [0] * n
    for i in chosen:
        a[int(i)] = 1
    return a


def gta(dists: Sequence[Distribution], B: int, seed: int,
        counters: Optional[list[int]] = None) -> tuple[float, list[int], float, float]:
    """Greedy round: all workers busy from t=0, stop at the B-th completion.

    Returns (realized cost, per-worker completed-task counts, wasted busy
    seconds of the tasks terminated at the stop instant, total busy seconds
    including waste).  ``counters`` (per-worker task counters) is advanced in
    place when provided so successive rounds consume fresh iid draws.
    """
    n = len(dists)
    if counters is None:
        counters = [0] * n
    from .timemodel import Stochastic, sample_duration
    model = Stochastic(tuple(dists))
    busy_from = [0.0] * n
    done_at = [0.0] * n
    in_flight = [True] * n
    counts = [0] * n
    completed_busy = 0.0
    for w in range(n):
        done_at[w] = sample_duration(model, w, counters[w], seed)
        counters[w] += 1
    completed = 0
    now = 0.0
    while completed < B:
        w = min((i for i in range(n) if in_flight[i]), key=lambda i: (done_at[i], i))
        now = done_at[w]
        completed_busy += done_at[w] - busy_from[w]
        counts[w] += 1
        completed += 1
        if completed == B:
            in_flight[w] = False
            break
        busy_from[w] = now
        done_at[w] = now + sample_duration(model, w, counters[w], seed)
        counters[w] += 1
    wasted = sum(now - busy_from[w] for w in range(n) if in_flight[w])
    return now, counts, wasted, completed_busy + wasted


def realized_cost(a: Sequence[int], samples: Sequence[np.ndarray]) -> float:
    """Makespan of an allocation given each supported arm's duration draws."""
    if len(samples) != len(a):
        raise ValueError("need one sample array per arm")
    cost = 0.0
    for ai, draws in zip(a, samples):
        draws = np.asarray(draws, dtype=float)
        if draws.shape != (ai,):
            raise ValueError(f"arm with allocation {ai} got {draws.shape} draws")
        if ai:
            cost = max(cost, float(draws.sum()))
    return cost


def expected_cost_mc(a: Sequence[int], dists: Sequence[Distribution],
                     trials: int, seed: int) -> tuple[float, float]:
    """Monte-Carlo estimate (mean, stderr) of the expected round makespan."""
    if trials < 10**3:
        raise ConfigError("use at least 1000 trials")
    costs = np.zeros(trials)
    for i, (ai, dist) in enumerate(zip(a, dists)):
        if ai == 0:
            continue
        rng = np.random.default_rng((seed, i, _EXPLORE_STREAM))
        draws = np.asarray(dist.sample(rng, size=(trials, ai)), dtype=float)
        np.maximum(costs, draws.sum(axis=1), out=costs)
    return float(costs.mean()), float(costs.std(ddof=1) / math.sqrt(trials))


# ---------------------------------------------------------------------------
# Regret accounting
# ---------------------------------------------------------------------------

class RegretLedger:
    """Round-by-round proxy losses and realized costs of one allocation run.

    The fixed competitor is the proxy-optimal allocation for the true means.
    """

    def __init__(self, mu: Sequence[float], B: int):
        self.mu = np.asarray(mu, dtype=float)
        self.best_alloc = ras(self.mu, B)
        self.best_loss = proxy_loss(self.best_alloc, self.mu)
        self.proxy_losses: list[float] = []
        self.realized_costs: list[float] = []

    def record(self, alloc: Sequence[int], cost: Optional[float] = None) -> None:
        self.proxy_losses.append(proxy_loss(alloc, self.mu))
        if cost is not None:
            self.realized_costs.append(cost)

    def cumulative_regret(self) -> np.ndarray:
        losses = np.asarray(self.proxy_losses)
        return np.cumsum(losses - self.best_loss)

    def bad_rounds(self) -> int:
        """Diagnostic only: rounds whose proxy loss exceeded the optimum."""
        return int(np.sum(np.asarray(self.proxy_losses) > self.best_loss))


def regret_report(ledger: RegretLedger) -> dict[str, np.ndarray]:
    """Cumulative regret, averaged regret R_K/K, and R_K/ln(K) series."""
    cum = ledger.cumulative_regret()
    rounds = np.arange(1, len(cum) + 1, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        per_log = np.where(rounds > 1, cum / np.log(rounds), np.nan)
    return {"cum_regret": cum, "avg_regret": cum / rounds, "regret_per_log": per_log}


def critical_increments(mu: Sequence[float], B: int) -> list[int]:
    """Smallest k_i with (a_i + k_i) mu_i > loss of the optimal allocation."""
    best = ras(mu, B)
    loss = proxy_loss(best, mu)
    out = []
    for ai, m in zip(best, mu):
        ki = 1
        while (ai + ki) * m <= loss:
            ki += 1
        out.append(ki)
    return out
