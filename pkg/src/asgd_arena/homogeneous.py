"""Servers for the homogeneous-data setting.

All methods consume iid stochastic gradients of one global objective and
differ only in scheduling: which workers run, when the model updates, and
which gradients are kept.  ``ringmaster`` discards gradients whose delay
(server updates since assignment) reaches the threshold R; the ``with_stops``
variant additionally cancels such computations mid-flight.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, UnsupportedQueryError
from .simcore import (APPLIED, BUFFERED, DISCARDED, Engine, RunRecord,
                      ServerActions, StopRule)
from .theory import select_m_star  # noqa: F401  (part of this module's API)
from .timemodel import ComputeModel, Fixed


class _BaseServer(ServerActions):
    def __init__(self, x0: np.ndarray, gamma: float):
        self.x = np.asarray(x0, dtype=float).copy()
        self.gamma = float(gamma)
        self.k = 0


class HeroServer(_BaseServer):
    """Plain SGD on a single designated worker; everyone else stays idle."""

    def __init__(self, x0, gamma, fastest: int):
        super().__init__(x0, gamma)
        self.fastest = fastest

    def on_init(self, ctx):
        ctx.request(self.fastest, 0, self.x)

    def on_arrival(self, ctx, msg):
        self.x = self.x - self.gamma * msg.vector
        self.k += 1
        ctx.request(self.fastest, self.k, self.x)
        return APPLIED


class MinibatchServer(_BaseServer):
    """One gradient per worker per iteration, averaged synchronously."""

    def __init__(self, x0, gamma, n: int):
        super().__init__(x0, gamma)
        self.n = n
        self._acc = np.zeros_like(self.x)
        self._count = 0

    def on_init(self, ctx):
        for w in range(self.n):
            ctx.request(w, 0, self.x)

    def on_arrival(self, ctx, msg):
        self._acc += msg.vector
        self._count += 1
        if self._count < self.n:
            return BUFFERED
        self.x = self.x - self.gamma * self._acc / self.n
        self.k += 1
        self._acc = np.zeros_like(self.x)
        self._count = 0
        for w in range(self.n):
            ctx.request(w, self.k, self.x)
        return APPLIED


class NaiveAsgdServer(_BaseServer):
    """Update on every arrival with a constant stepsize, no discarding."""

    def __init__(self, x0, gamma, active: Sequence[int]):
        super().__init__(x0, gamma)
        self.active = tuple(active)

    def on_init(self, ctx):
        for w in self.active:
            ctx.request(w, 0, self.x)

    def on_arrival(self, ctx, msg):
        self.x = self.x - self.gamma * msg.vector
        self.k += 1
        ctx.request(msg.worker, self.k, self.x)
        return APPLIED


class RennalaServer(_BaseServer):
    """Collect B same-iterate gradients asynchronously, then step and rebroadcast.

    In-flight computations at the broadcast are terminated (counted as
    discarded work), so every kept gradient has zero delay by construction.
    """

    def __init__(self, x0, gamma, n: int, B: int):
        if B < 1:
            raise ConfigError("B must be >= 1")
        super().__init__(x0, gamma)
        self.n = n
        self.B = B
        self._acc = np.zeros_like(self.x)
        self._count = 0

    def on_init(self, ctx):
        for w in range(self.n):
            ctx.request(w, 0, self.x)

    def on_arrival(self, ctx, msg):
        self._acc += msg.vector
        self._count += 1
        if self._count < self.B:
            ctx.request(msg.worker, self.k, self.x)
            return BUFFERED
        self.x = self.x - self.gamma * self._acc / self.B
        self.k += 1
        self._acc = np.zeros_like(self.x)
        self._count = 0
        for w in range(self.n):
            ctx.terminate(w)  # no-op for idle workers (incl. the sender)
        for w in range(self.n):
            ctx.request(w, self.k, self.x)
        return APPLIED


class RingmasterServer(_BaseServer):
    """Delay-thresholded asynchronous SGD.

    ``no_stops``: a gradient arriving with delay >= R is dropped and its
    worker reassigned to the current model.  ``with_stops``: additionally,
    just before each arrival is processed, every in-flight computation whose
    delay already reached R is cancelled and restarted at the current model.
    """

    def __init__(self, x0, gamma, n: int, R: int, variant: str = "no_stops"):
        if R < 1:
            raise ConfigError("R must be >= 1")
        if variant not in ("no_stops", "with_stops"):
            raise ConfigError(f"unknown ringmaster variant {variant!r}")
        super().__init__(x0, gamma)
        self.n = n
        self.R = R
        self.variant = variant
        self.assigned_k = [0] * n

    def on_init(self, ctx):
        for w in range(self.n):
            self.assigned_k[w] = 0
            ctx.request(w, 0, self.x)

    def on_before_arrival(self, ctx, worker):
        if self.variant != "with_stops":
            return
        for w in range(self.n):
            if w == worker:
                continue  # its task already completed; nothing to cancel
            if self.k - self.assigned_k[w] >= self.R:
                ctx.terminate(w)
                self.assigned_k[w] = self.k
                ctx.request(w, self.k, self.x)

    def on_arrival(self, ctx, msg):
        delay = self.k - msg.computed_at_k
        if delay < self.R:
            self.x = self.x - self.gamma * msg.vector
            self.k += 1
            action = APPLIED
        else:
            action = DISCARDED
        self.assigned_k[msg.worker] = self.k
        ctx.request(msg.worker, self.k, self.x)
        return action


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------

def _run(server, problem, model, stop, seed, sample_every=1, trace=None,
         event_cap=None) -> tuple[RunRecord, Engine]:
    record = RunRecord(sample_every=sample_every)
    grad_fn = lambda x, w, c: problem.stochastic_gradient(x, w, c, seed)
    metrics_fn = lambda x: (problem.grad_norm_sq(x), problem.suboptimality(x))
    kwargs = {} if event_cap is None else {"event_cap": event_cap}
    engine = Engine(model, server, stop, seed, grad_fn=grad_fn,
                    metrics_fn=metrics_fn, record=record, trace=trace, **kwargs)
    engine.run()
    return record, engine


def _fastest_worker(model: ComputeModel) -> int:
    if not isinstance(model, Fixed):
        raise UnsupportedQueryError("this method needs fixed, known task times")
    return int(np.argmin(model.taus))


def hero_sgd(problem, model, stop: StopRule, seed: int, gamma: float, **kw):
    server = HeroServer(problem.x0(), gamma, _fastest_worker(model))
    return _run(server, problem, model, stop, seed, **kw)


def naive_minibatch(problem, model, stop: StopRule, seed: int, gamma: float, **kw):
    server = MinibatchServer(problem.x0(), gamma, model.n)
    return _run(server, problem, model, stop, seed, **kw)


def naive_asgd(problem, model, stop: StopRule, seed: int, gamma: float,
               active: Optional[Sequence[int]] = None, **kw):
    server = NaiveAsgdServer(problem.x0(), gamma, active or range(model.n))
    return _run(server, problem, model, stop, seed, **kw)


def rennala(problem, model, stop: StopRule, seed: int, gamma: float, B: int, **kw):
    server = RennalaServer(problem.x0(), gamma, model.n, B)
    return _run(server, problem, model, stop, seed, **kw)


def naive_optimal_asgd(problem, model, stop: StopRule, seed: int, gamma: float,
                       sigma2: float, eps: float, **kw):
    """Asynchronous SGD restricted to the best prefix of the fastest workers."""
    if not isinstance(model, Fixed):
        raise UnsupportedQueryError("pool selection needs fixed, known task times")
    order = np.argsort(model.taus, kind="stable")
    m_star = select_m_star([model.taus[i] for i in order], sigma2, eps)
    active = [int(i) for i in order[:m_star]]
    return naive_asgd(problem, model, stop, seed, gamma, active=active, **kw)


def ringmaster(problem, model, stop: StopRule, seed: int, gamma: float, R: int,
               variant: str = "no_stops", **kw):
    server = RingmasterServer(problem.x0(), gamma, model.n, R, variant)
    return _run(server, problem, model, stop, seed, **kw)


def ringmaster_adaptive_form_check(trace_rows, R: int, n: int) -> bool:
    """Replay a no-stops trace through the virtual-delay stepsize recursion.

    The recursion keeps one virtual delay per worker, reset to zero for the
    sender at every arrival, incremented for the others only when a step was
    taken.  The check confirms (a) the virtual delay always equals the true
    delay carried by the arrival and (b) zero-step rounds coincide exactly
    with discarded arrivals.
    """
    bar = [0] * n
    for row in trace_rows:
        try:
            action = row["action"]
            if action not in (APPLIED, DISCARDED):
                continue
            i = row["worker"]
            true_delay = row["k_current"] - row["k_computed_at"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed trace row {row!r}") from exc
        if bar[i] != true_delay:
            return False
        stepped = bar[i] < R
        if stepped != (action == APPLIED):
            return False
        if stepped:
            for j in range(n):
                bar[j] += 1
        bar[i] = 0
    return True
