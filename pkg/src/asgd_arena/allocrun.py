"""Round-based runners combining task allocation with (optional) optimization.

A strategy decides each round's allocation; the runner draws that round's
task durations, charges virtual time with the round makespan, optionally
performs the gradient step(s), feeds observations back to the strategy, and
keeps the regret ledger.  Strategies:

* ``ata`` / ``ata_empirical`` -- confidence-bound adaptive allocation,
* ``ofta`` -- fixed optimal allocation from the true means,
* ``uta``  -- fixed uniform allocation,
* ``gta``  -- greedy (everyone busy, overflow terminated).
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .allocation import (LcbState, RegretLedger, gta, ofta, ras,
                         realized_cost, uta)
from .errors import ConfigError
from .simcore import RunRecord
from .timemodel import Distribution

_ROUND_STREAM = 3


def _round_draws(dists, alloc, seed, round_k):
    """One round's duration draws, keyed by (seed, round) for reproducibility."""
    rng = np.random.default_rng((seed, round_k, _ROUND_STREAM))
    return [np.asarray(dists[i].sample(rng, size=a), dtype=float) if a else np.zeros(0)
            for i, a in enumerate(alloc)]


class _AtaStrategy:
    def __init__(self, n, mode, alpha, eta, warm_start=None):
        # a pre-loaded LcbState (e.g. statistics carried over from earlier
        # runs) skips the corresponding exploration
        self.state = warm_start if warm_start is not None else \
            LcbState(n=n, mode=mode, alpha=alpha, eta=eta)

    def allocate(self, B):
        from .allocation import lcb
        return ras(lcb(self.state), B)

    def feedback(self, alloc, samples):
        for i, ai in enumerate(alloc):
            if ai:
                self.state.counts[i] += ai
                self.state.times[i] += float(samples[i].sum())
        self.state.k += 1


class _FixedStrategy:
    def __init__(self, alloc):
        self.alloc = list(alloc)

    def allocate(self, B):
        return self.alloc

    def feedback(self, alloc, samples):
        pass


def make_strategy(method: str, dists: Sequence[Distribution], n: int, B: int,
                  seed: int, alpha: Optional[float] = None,
                  eta: Optional[float] = None, warm_start=None):
    """Strategy factory; `alpha` defaults to the largest known norm bound."""
    if method in ("ata", "sgd_ata", "asgd_ata"):
        if alpha is None:
            alpha = max(d.orlicz_upper() for d in dists)
        return _AtaStrategy(n, "alpha", alpha, 1.0, warm_start)
    if method in ("ata_empirical", "sgd_ata_empirical", "asgd_ata_empirical"):
        return _AtaStrategy(n, "eta", 1.0, 1.0 if eta is None else eta, warm_start)
    if method in ("ofta", "sgd_ofta"):
        return _FixedStrategy(ofta([d.mean() for d in dists], B))
    if method in ("uta", "sgd_uta"):
        return _FixedStrategy(uta(n, B, seed))
    raise ConfigError(f"unknown allocation method {method!r}")


def run_bandit(method: str, dists: Sequence[Distribution], B: int, rounds: int,
               seed: int, alpha: Optional[float] = None, eta: Optional[float] = None
               ) -> tuple[RegretLedger, list[list[int]]]:
    """Allocation-only rounds (no optimizer); returns ledger and allocations."""
    n = len(dists)
    mu = [d.mean() for d in dists]
    ledger = RegretLedger(mu, B)
    allocs: list[list[int]] = []
    if method == "gta":
        counters = [0] * n
        for k in range(1, rounds + 1):
            cost, counts, _wasted, _busy = gta(dists, B, seed, counters)
            ledger.record(counts, cost)
            allocs.append(counts)
        return ledger, allocs
    strat = make_strategy(method, dists, n, B, seed, alpha, eta)
    for k in range(1, rounds + 1):
        alloc = strat.allocate(B)
        samples = _round_draws(dists, alloc, seed, k)
        strat.feedback(alloc, samples)
        ledger.record(alloc, realized_cost(alloc, samples))
        allocs.append(alloc)
    return ledger, allocs


def _grad_mean(problem, x, alloc, seed, counters):
    """Average of sum(alloc) stochastic gradients at x (one point, iid noise)."""
    total = np.zeros_like(x)
    count = 0
    for w, ai in enumerate(alloc):
        for _ in range(ai):
            total += problem.stochastic_gradient(x, w, counters[w], seed)
            counters[w] += 1
            count += 1
    return total / max(count, 1)


def run_sgd_allocation(method: str, problem, dists: Sequence[Distribution], B: int,
                       gamma: float, seed: int, max_rounds: int,
                       grad_tol: Optional[float] = None,
                       alpha: Optional[float] = None, eta: Optional[float] = None,
                       sample_every: int = 1) -> tuple[RunRecord, RegretLedger]:
    """Batched SGD where each round's B gradients come from the allocator.

    ``sgd_gta`` collects greedily and wastes terminated work; the other
    methods run exactly the allocated tasks, so nothing is discarded.
    """
    n = len(dists)
    mu = [d.mean() for d in dists]
    ledger = RegretLedger(mu, B)
    record = RunRecord(method=method, seed=seed, sample_every=sample_every)
    x = problem.x0()
    vtime = 0.0
    busy = 0.0
    discarded = 0
    counters = [0] * n          # gradient-noise counters
    dur_counters = [0] * n      # duration counters (gta)
    strat = None if method == "sgd_gta" else make_strategy(method, dists, n, B, seed, alpha, eta)

    def snapshot(k):
        record.add(k, vtime, grad_norm_sq=problem.grad_norm_sq(x),
                   subopt=problem.suboptimality(x), total_busy=busy,
                   discarded=discarded,
                   cum_regret=float(np.sum(ledger.proxy_losses) - len(ledger.proxy_losses) * ledger.best_loss))

    snapshot(0)
    for k in range(1, max_rounds + 1):
        if method == "sgd_gta":
            cost, counts, wasted, round_busy = gta(dists, B, seed, dur_counters)
            alloc = counts
            busy += round_busy
            discarded += n - 1  # every non-closing worker is mid-task at stop
            ledger.record(alloc, cost)
        else:
            alloc = strat.allocate(B)
            samples = _round_draws(dists, alloc, seed, k)
            strat.feedback(alloc, samples)
            cost = realized_cost(alloc, samples)
            busy += float(sum(s.sum() for s in samples))
            ledger.record(alloc, cost)
        vtime += cost
        g = _grad_mean(problem, x, alloc, seed, counters)
        x = x - gamma * g
        if k % sample_every == 0 or k == max_rounds:
            snapshot(k)
        if grad_tol is not None and problem.grad_norm_sq(x) <= grad_tol:
            record.threshold_time = vtime
            record.threshold_k = k
            snapshot(k)
            record.stop_reason = "grad_tol"
            break
    record.final_k = len(ledger.proxy_losses)
    record.final_time = vtime
    return record, ledger


def run_asgd_allocation(problem, dists: Sequence[Distribution], B: int,
                        gamma: float, seed: int, max_rounds: int,
                        grad_tol: Optional[float] = None, mode: str = "alpha",
                        alpha: Optional[float] = None, eta: Optional[float] = None,
                        sample_every: int = 1) -> tuple[RunRecord, RegretLedger]:
    """Asynchronous inner loop: each completed task updates the model at once.

    Within a round each supported worker chains through its allocated tasks;
    updates are applied in completion order, so later tasks of a worker are
    computed at the model it received after its previous completion.
    """
    n = len(dists)
    mu = [d.mean() for d in dists]
    ledger = RegretLedger(mu, B)
    method = "asgd_ata" if mode == "alpha" else "asgd_ata_empirical"
    record = RunRecord(method=method, seed=seed, sample_every=sample_every)
    strat = make_strategy(method, dists, n, B, seed, alpha, eta)
    x = problem.x0()
    vtime = 0.0
    busy = 0.0
    counters = [0] * n

    def snapshot(k):
        record.add(k, vtime, grad_norm_sq=problem.grad_norm_sq(x),
                   subopt=problem.suboptimality(x), total_busy=busy, discarded=0,
                   cum_regret=float(np.sum(ledger.proxy_losses) - len(ledger.proxy_losses) * ledger.best_loss))

    snapshot(0)
    for k in range(1, max_rounds + 1):
        alloc = strat.allocate(B)
        samples = _round_draws(dists, alloc, seed, k)
        strat.feedback(alloc, samples)
        cost = realized_cost(alloc, samples)
        ledger.record(alloc, cost)
        busy += float(sum(s.sum() for s in samples))
        # Build each worker's completion times, then apply in completion order.
        events = []
        for w, ai in enumerate(alloc):
            if ai:
                events.extend((t, w, j) for j, t in enumerate(np.cumsum(samples[w])))
        events.sort(key=lambda e: (e[0], e[1]))
        x_of_worker = {w: x for w, ai in enumerate(alloc) if ai}
        for _t, w, _j in events:
            g = problem.stochastic_gradient(x_of_worker[w], w, counters[w], seed)
            counters[w] += 1
            x = x - gamma * g
            x_of_worker[w] = x
        vtime += cost
        if k % sample_every == 0 or k == max_rounds:
            snapshot(k)
        if grad_tol is not None and problem.grad_norm_sq(x) <= grad_tol:
            record.threshold_time = vtime
            record.threshold_k = k
            snapshot(k)
            record.stop_reason = "grad_tol"
            break
    record.final_k = len(ledger.proxy_losses)
    record.final_time = vtime
    return record, ledger
