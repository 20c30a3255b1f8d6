"""Servers for the heterogeneous-data setting (per-worker objectives).

All four methods keep a per-worker gradient table ``(G_i, b_i)`` so that
every model update mixes information from all workers, which is what removes
the need for any similarity assumption between local objectives:

* ``malenia``     -- synchronous rounds; collect until a harmonic-mean batch
  condition holds, step once, terminate stragglers, rebroadcast.
* ``malenia_pf``  -- same, but the round ends once every worker contributed
  at least one gradient (no noise/accuracy inputs).
* ``ia2sgd``      -- fully asynchronous; each arrival overwrites its table
  entry and triggers an immediate update.
* ``ringleader``  -- two-phase rounds: collect until every worker reported,
  then perform exactly one update per worker while buffering
  early arrivals for the next round; nothing is discarded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError
from .simcore import (APPLIED, BUFFERED, Engine, RunRecord,
                      ServerActions, StopRule)
from .timemodel import Fixed


@dataclass
class GradientTable:
    """Per-worker accumulated gradient sums with per-entry base iterates.

    Keeps the sum of per-entry means and the sum of reciprocal counts up to
    date incrementally, so the estimator and the harmonic batch size are
    O(d) and O(1) per query instead of O(n d) and O(n).
    """

    n: int
    d: int
    G: np.ndarray = field(init=False)
    b: np.ndarray = field(init=False)
    computed_at: np.ndarray = field(init=False)

    def __post_init__(self):
        self.G = np.zeros((self.n, self.d))
        self.b = np.zeros(self.n, dtype=int)
        self.computed_at = np.full(self.n, -1, dtype=int)
        self._filled = 0
        self._inv_sum = 0.0
        self._mean_sum = np.zeros(self.d)

    def accumulate(self, worker: int, vector: np.ndarray, at_k: int) -> None:
        b = int(self.b[worker])
        if b == 0:
            self.computed_at[worker] = at_k
            self._filled += 1
            self._inv_sum += 1.0
            entry = self.G[worker]
            entry += vector
            self._mean_sum += entry
        else:
            if self.computed_at[worker] != at_k:
                raise RuntimeError(
                    f"table purity violated: worker {worker} entry at "
                    f"{self.computed_at[worker]} got a gradient from {at_k}")
            self._inv_sum += 1.0 / (b + 1) - 1.0 / b
            entry = self.G[worker]
            self._mean_sum -= entry / b
            entry += vector
            self._mean_sum += entry / (b + 1)
        self.b[worker] = b + 1

    def overwrite(self, worker: int, vector: np.ndarray, at_k: int) -> None:
        """Replace the entry with a single fresh gradient (count becomes 1)."""
        b = int(self.b[worker])
        if b == 0:
            self._filled += 1
            self._inv_sum += 1.0
        else:
            self._inv_sum += 1.0 - 1.0 / b
            self._mean_sum -= self.G[worker] / b
        self.G[worker] = vector
        self.b[worker] = 1
        self.computed_at[worker] = at_k
        self._mean_sum += vector

    def full(self) -> bool:
        return self._filled == self.n

    def harmonic_batch(self) -> float:
        """n / sum(1/b_i); zero while any entry is empty."""
        if self._filled != self.n:
            return 0.0
        return self.n / self._inv_sum

    def reset(self) -> None:
        self.G[:] = 0.0
        self.b[:] = 0
        self.computed_at[:] = -1
        self._filled = 0
        self._inv_sum = 0.0
        self._mean_sum[:] = 0.0


def table_estimator(table: GradientTable) -> np.ndarray:
    """Average of per-worker entry means: (1/n) sum_i G_i / b_i."""
    if not table.full():
        raise ConfigError("estimator needs at least one gradient per worker")
    return table._mean_sum / table.n


class _TableServer(ServerActions):
    def __init__(self, x0, gamma, n, audit=False):
        self.x = np.asarray(x0, dtype=float).copy()
        self.gamma = float(gamma)
        self.n = n
        self.k = 0
        self.audit = audit
        self.update_times: list[float] = []
        self.update_delays: list[int] = []      # max entry delay per update
        self.update_harmonics: list[float] = []
        self.update_recipients: list[int] = []
        self.warnings: list[str] = []

    def _audit_update(self, ctx, table: GradientTable, recipient: int) -> None:
        if not self.audit:
            return
        self.update_times.append(ctx.now)
        delays = self.k - table.computed_at[table.b >= 1]
        self.update_delays.append(int(delays.max()) if delays.size else 0)
        self.update_harmonics.append(table.harmonic_batch())
        self.update_recipients.append(recipient)


class MaleniaServer(_TableServer):
    """Synchronous rounds gated by the harmonic-mean batch condition.

    ``threshold`` is ``max(1, sigma2/(n*eps))``; the parameter-free variant
    passes ``threshold=None`` and fires once every worker has contributed.
    """

    def __init__(self, x0, gamma, n, threshold: Optional[float], d: int, audit=False):
        super().__init__(x0, gamma, n, audit)
        self.threshold = threshold
        self.table = GradientTable(n, d)
        self.fire_pairs: list[tuple[float, float]] = []  # (before, after) harmonic

    def _fired(self) -> bool:
        if self.threshold is None:
            return self.table.full()
        return self.table.harmonic_batch() >= self.threshold

    def on_init(self, ctx):
        for w in range(self.n):
            ctx.request(w, 0, self.x)

    def on_arrival(self, ctx, msg):
        if msg.computed_at_k != self.k:
            raise RuntimeError("stale arrival in a synchronous round")
        before = self.table.harmonic_batch() if self.audit else 0.0
        self.table.accumulate(msg.worker, msg.vector, msg.computed_at_k)
        if not self._fired():
            ctx.request(msg.worker, self.k, self.x)
            return BUFFERED
        if self.audit:
            self.fire_pairs.append((before, self.table.harmonic_batch()))
        self._audit_update(ctx, self.table, msg.worker)
        self.x = self.x - self.gamma * table_estimator(self.table)
        self.k += 1
        self.table.reset()
        for w in range(self.n):
            ctx.terminate(w)  # no-op for the idle sender
        for w in range(self.n):
            ctx.request(w, self.k, self.x)
        return APPLIED


class Ia2sgdServer(_TableServer):
    """Overwrite-one-entry-per-arrival table SGD with immediate updates."""

    def __init__(self, x0, gamma, n, d, audit=False):
        super().__init__(x0, gamma, n, audit)
        self.table = GradientTable(n, d)
        self._warm = True
        self._mean = np.zeros(d)

    def on_init(self, ctx):
        for w in range(self.n):
            ctx.request(w, 0, self.x)

    def on_arrival(self, ctx, msg):
        t, w = self.table, msg.worker
        if self._warm:
            t.accumulate(w, msg.vector, msg.computed_at_k)
            if not t.full():
                return BUFFERED  # sender idles until the first broadcast
            self._warm = False
            self._mean = table_estimator(t)
            self._audit_update(ctx, t, -1)
            self.x = self.x - self.gamma * self._mean
            self.k += 1
            for i in range(self.n):
                ctx.request(i, self.k, self.x)
            return APPLIED
        # Overwrite the entry and keep the table mean incrementally.
        self._mean = self._mean + (msg.vector - t.G[w]) / self.n
        t.overwrite(w, msg.vector, msg.computed_at_k)
        self._audit_update(ctx, t, w)
        self.x = self.x - self.gamma * self._mean
        self.k += 1
        ctx.request(w, self.k, self.x)
        return APPLIED


class RingleaderServer(_TableServer):
    """Two-phase rounds with a carry buffer; every gradient is kept.

    Phase 1 collects until the stop rule holds (every worker reported, or a
    harmonic-mean threshold for the time-varying-speed variant).  Phase 2
    then performs exactly one update per worker, sending each its fresh
    model as its own gradient arrives; gradients from already-updated
    workers accumulate in a buffer that seeds the next round's table.
    """

    def __init__(self, x0, gamma, n, d, threshold: Optional[float] = None, audit=False):
        super().__init__(x0, gamma, n, audit)
        self.threshold = threshold
        self.table = GradientTable(n, d)
        self.buffer = GradientTable(n, d)
        self.pending: set[int] = set()
        self.phase = 1
        self.assigned_k = [0] * n
        self.assigned_x: list[Optional[np.ndarray]] = [None] * n

    def _phase1_done(self) -> bool:
        if self.threshold is None:
            return self.table.full()
        return self.table.harmonic_batch() >= self.threshold

    def on_init(self, ctx):
        for w in range(self.n):
            self.assigned_k[w] = 0
            self.assigned_x[w] = self.x
            ctx.request(w, 0, self.x)

    def _step_and_send(self, ctx, worker: int) -> None:
        self._audit_update(ctx, self.table, worker)
        self.x = self.x - self.gamma * table_estimator(self.table)
        self.k += 1
        self.assigned_k[worker] = self.k
        self.assigned_x[worker] = self.x
        ctx.request(worker, self.k, self.x)
        self.pending.discard(worker)

    def _continue_same_point(self, ctx, worker: int) -> None:
        ctx.request(worker, self.assigned_k[worker], self.assigned_x[worker])

    def _finish_round_if_done(self) -> None:
        if self.pending:
            return
        # Carry buffered work into the next round's table.
        self.table, self.buffer = self.buffer, self.table
        self.buffer.reset()
        self.phase = 1

    def on_arrival(self, ctx, msg):
        w = msg.worker
        if self.phase == 1:
            self.table.accumulate(w, msg.vector, msg.computed_at_k)
            if not self._phase1_done():
                self._continue_same_point(ctx, w)
                return BUFFERED
            self.phase = 2
            self.pending = set(range(self.n))
            self.buffer.reset()
            self._step_and_send(ctx, w)
            self._finish_round_if_done()
            return APPLIED
        if w in self.pending:
            self.table.accumulate(w, msg.vector, msg.computed_at_k)
            self._step_and_send(ctx, w)
            self._finish_round_if_done()
            return APPLIED
        self.buffer.accumulate(w, msg.vector, msg.computed_at_k)
        self._continue_same_point(ctx, w)
        return BUFFERED


def _run(server, problem, model, stop, seed, sample_every=1, trace=None,
         event_cap=None, local=True) -> tuple[RunRecord, Engine]:
    record = RunRecord(sample_every=sample_every)
    if local:
        grad_fn = lambda x, w, c: problem.local_stochastic_gradient(w, x, c, seed)
    else:
        grad_fn = lambda x, w, c: problem.stochastic_gradient(x, w, c, seed)
    metrics_fn = lambda x: (problem.grad_norm_sq(x), problem.suboptimality(x))
    kwargs = {} if event_cap is None else {"event_cap": event_cap}
    engine = Engine(model, server, stop, seed, grad_fn=grad_fn,
                    metrics_fn=metrics_fn, record=record, trace=trace, **kwargs)
    engine.run()
    return record, engine


def _dim(problem) -> int:
    return problem.d


def malenia(problem, model, stop: StopRule, seed: int, gamma: float,
            sigma2: float, eps: float, audit=False, **kw):
    if sigma2 < 0 or eps <= 0:
        raise ConfigError("need sigma2 >= 0 and eps > 0")
    threshold = max(1.0, sigma2 / (model.n * eps))
    server = MaleniaServer(problem.x0(), gamma, model.n, threshold, _dim(problem), audit)
    return _run(server, problem, model, stop, seed, **kw)


def malenia_param_free(problem, model, stop: StopRule, seed: int, gamma: float,
                       audit=False, **kw):
    server = MaleniaServer(problem.x0(), gamma, model.n, None, _dim(problem), audit)
    if not isinstance(model, Fixed):
        server.warnings.append(
            "parameter-free round rule is only optimal under fixed task times")
    return _run(server, problem, model, stop, seed, **kw)


def ia2sgd(problem, model, stop: StopRule, seed: int, gamma: float, audit=False, **kw):
    server = Ia2sgdServer(problem.x0(), gamma, model.n, _dim(problem), audit)
    return _run(server, problem, model, stop, seed, **kw)


def ringleader(problem, model, stop: StopRule, seed: int, gamma: float, audit=False, **kw):
    server = RingleaderServer(problem.x0(), gamma, model.n, _dim(problem),
                              threshold=None, audit=audit)
    return _run(server, problem, model, stop, seed, **kw)


def ringleader_universal(problem, model, stop: StopRule, seed: int, gamma: float,
                         sigma2: float, eps: float, audit=False, **kw):
    if sigma2 < 0 or eps <= 0:
        raise ConfigError("need sigma2 >= 0 and eps > 0")
    threshold = max(1.0, sigma2 / (model.n * eps))
    server = RingleaderServer(problem.x0(), gamma, model.n, _dim(problem),
                              threshold=threshold, audit=audit)
    return _run(server, problem, model, stop, seed, **kw)
