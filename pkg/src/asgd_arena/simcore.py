"""Deterministic discrete-event engine for server/worker gradient protocols.

One engine instance simulates a server (an algorithm implementing
:class:`ServerActions`) plus ``n`` workers under a compute-time model.  Time
is virtual; communication, reads and writes are atomic and free, so the only
thing that advances the clock is task computation.  Simultaneous completions
are ordered by the triple ``(time, worker id, sequence number)``, which makes
every run a pure function of (config, seed).
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import BudgetExceededError, ConfigError
from .timemodel import ComputeModel, Fixed, Stochastic, Universal, sample_duration

APPLIED = "applied"
BUFFERED = "buffered"
DISCARDED = "discarded"

_ACTIONS = (APPLIED, BUFFERED, DISCARDED)

DEFAULT_EVENT_CAP = 10**8


@dataclass
class GradientMsg:
    """A completed task: gradient tagged with the iterate it was computed at."""

    worker: int
    computed_at_k: int
    vector: Optional[np.ndarray]
    task_counter: int


@dataclass
class WorkerState:
    id: int
    busy_until: Optional[float] = None
    busy_since: float = 0.0
    assigned_k: int = -1
    assigned_x: Optional[np.ndarray] = None
    task_counter: int = 0      # counter of the task in flight
    next_counter: int = 0      # next counter to hand out
    seq: int = 0               # invalidates stale heap entries
    cumulative_busy: float = 0.0
    tasks_started: int = 0
    tasks_discarded: int = 0   # terminated mid-flight
    arrivals_applied: int = 0
    arrivals_buffered: int = 0
    arrivals_discarded: int = 0

    @property
    def idle(self) -> bool:
        return self.busy_until is None


class ServerActions:
    """Algorithm callbacks; concrete servers keep ``k`` and ``x`` up to date."""

    k: int = 0
    x: Optional[np.ndarray] = None

    def on_init(self, ctx: "Context") -> None:
        raise NotImplementedError

    def on_before_arrival(self, ctx: "Context", worker: int) -> None:
        """Runs at the arrival's timestamp, before the gradient is classified."""

    def on_arrival(self, ctx: "Context", msg: GradientMsg) -> str:
        """Classify the gradient; must return applied/buffered/discarded."""
        raise NotImplementedError


@dataclass
class StopRule:
    """Stop when any bound is reached; grad_tol is checked every check_every updates.

    ``diverge_above`` aborts a run whose gradient norm squared explodes (or
    goes non-finite), so badly tuned stepsizes fail fast instead of burning
    the whole iteration budget on overflowed arithmetic.
    """

    max_k: Optional[int] = None
    grad_tol: Optional[float] = None
    time_budget: Optional[float] = None
    check_every: int = 1
    diverge_above: Optional[float] = None

    def __post_init__(self):
        if self.max_k is None and self.grad_tol is None and self.time_budget is None:
            raise ConfigError("stop rule needs at least one of max_k/grad_tol/time_budget")
        if self.check_every < 1:
            raise ConfigError("check_every must be >= 1")


class RunRecord:
    """Sampled metric stream of one run (one row per sampled iterate)."""

    columns = ("k", "vtime", "grad_norm_sq", "subopt", "total_busy",
               "discarded", "avg_iter_time", "cum_regret")

    def __init__(self, method: str = "", seed: int = 0, sample_every: int = 1):
        self.method = method
        self.seed = seed
        self.sample_every = max(1, int(sample_every))
        self.rows: list[tuple] = []
        self.final_k: int = 0
        self.final_time: float = 0.0
        self.stop_reason: str = "none"
        self.threshold_time: Optional[float] = None
        self.threshold_k: Optional[int] = None
        self.total_discarded: int = 0

    def add(self, k: int, vtime: float, grad_norm_sq=None, subopt=None,
            total_busy=None, discarded=None, cum_regret=None) -> None:
        if self.rows and self.rows[-1][0] == k:
            return
        avg = vtime / k if k > 0 else math.nan
        self.rows.append((k, vtime,
                          math.nan if grad_norm_sq is None else grad_norm_sq,
                          math.nan if subopt is None else subopt,
                          math.nan if total_busy is None else total_busy,
                          math.nan if discarded is None else discarded,
                          avg,
                          math.nan if cum_regret is None else cum_regret))

    def as_arrays(self) -> dict[str, np.ndarray]:
        cols = list(zip(*self.rows)) if self.rows else [[] for _ in self.columns]
        return {name: np.asarray(col, dtype=float)
                for name, col in zip(self.columns, cols)}


class Trace:
    """Optional JSONL event trace; rows are plain dicts, serialized on save."""

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.rows: list[dict] = []

    def emit(self, **row) -> None:
        if self.enabled:
            self.rows.append(row)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            for row in self.rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")


class Context:
    """Primitives a server may invoke from its callbacks."""

    def __init__(self, engine: "Engine"):
        self._engine = engine

    @property
    def now(self) -> float:
        return self._engine.now

    @property
    def n(self) -> int:
        return self._engine.n

    def request(self, worker: int, k: int, x: Optional[np.ndarray]) -> None:
        self._engine._request(worker, k, x)

    def terminate(self, worker: int) -> None:
        self._engine._terminate(worker)

    def stop(self, reason: str = "server") -> None:
        self._engine._stop_reason = reason


class Engine:
    """Single-threaded event loop; owns all worker state for one run."""

    def __init__(self, model: ComputeModel, server: ServerActions, stop: StopRule,
                 seed: int, grad_fn: Optional[Callable[[np.ndarray, int, int], np.ndarray]] = None,
                 metrics_fn: Optional[Callable[[np.ndarray], tuple[float, float]]] = None,
                 record: Optional[RunRecord] = None, trace: Optional[Trace] = None,
                 event_cap: int = DEFAULT_EVENT_CAP):
        self.model = model
        self.n = model.n
        self.server = server
        self.stoprule = stop
        self.seed = seed
        self.grad_fn = grad_fn
        self.metrics_fn = metrics_fn
        self.record = record if record is not None else RunRecord()
        self.trace = trace if trace is not None else Trace(enabled=False)
        self.event_cap = event_cap
        self.now = 0.0
        self.workers = [WorkerState(id=i) for i in range(self.n)]
        self.heap: list[tuple[float, int, int]] = []
        self._stop_reason: Optional[str] = None
        self._updates_since_check = 0
        self._last_cached_gnorm: Optional[float] = None

    # -- primitives -------------------------------------------------------

    def _completion_time(self, worker: int, counter: int) -> float:
        if isinstance(self.model, (Fixed, Stochastic)):
            return self.now + sample_duration(self.model, worker, counter, self.seed)
        assert isinstance(self.model, Universal)
        return self.model.powers[worker].time_to_work(self.now, 1.0)

    def _request(self, worker: int, k: int, x: Optional[np.ndarray]) -> None:
        if not 0 <= worker < self.n:
            raise ConfigError(f"request for nonexistent worker {worker}")
        ws = self.workers[worker]
        if not ws.idle:
            raise RuntimeError(f"worker {worker} is already busy")
        counter = ws.next_counter
        ws.next_counter += 1
        done = self._completion_time(worker, counter)
        ws.task_counter = counter
        ws.assigned_k = k
        ws.assigned_x = x
        ws.busy_since = self.now
        ws.busy_until = done
        ws.seq += 1
        ws.tasks_started += 1
        if math.isfinite(done):
            heapq.heappush(self.heap, (done, worker, ws.seq))
        if self.trace.enabled:
            self.trace.emit(t=self.now, worker=worker, k_computed_at=k,
                            k_current=self.server.k, action="requested")

    def _terminate(self, worker: int) -> None:
        if not 0 <= worker < self.n:
            raise ConfigError(f"terminate for nonexistent worker {worker}")
        ws = self.workers[worker]
        if ws.idle:
            self.trace.emit(t=self.now, worker=worker, k_computed_at=ws.assigned_k,
                            k_current=self.server.k, action="terminate_noop")
            return
        ws.cumulative_busy += self.now - ws.busy_since
        ws.tasks_discarded += 1
        ws.busy_until = None
        ws.seq += 1  # invalidate the pending heap entry
        if self.trace.enabled:
            self.trace.emit(t=self.now, worker=worker, k_computed_at=ws.assigned_k,
                            k_current=self.server.k, action="terminated")

    # -- metrics ----------------------------------------------------------

    def total_busy(self) -> float:
        total = 0.0
        for ws in self.workers:
            total += ws.cumulative_busy
            if not ws.idle:
                total += self.now - ws.busy_since
        return total

    def total_discarded(self) -> int:
        return sum(ws.tasks_discarded + ws.arrivals_discarded for ws in self.workers)

    def _sample_metrics(self, force: bool = False) -> None:
        rec = self.record
        k = self.server.k
        if not force and (k % rec.sample_every) != 0:
            return
        g = s = None
        if self.metrics_fn is not None and self.server.x is not None:
            g, s = self.metrics_fn(self.server.x)
            self._last_cached_gnorm = g
        rec.add(k, self.now, grad_norm_sq=g, subopt=s,
                total_busy=self.total_busy(), discarded=self.total_discarded())

    def _check_stop(self, updated: bool) -> bool:
        if self._stop_reason is not None:
            return True
        sr = self.stoprule
        k = self.server.k
        if sr.max_k is not None and k >= sr.max_k:
            self._stop_reason = "max_k"
            return True
        if sr.time_budget is not None and self.now >= sr.time_budget:
            self._stop_reason = "time_budget"
            return True
        if updated and (sr.grad_tol is not None or sr.diverge_above is not None) \
                and self.metrics_fn is not None:
            self._updates_since_check += 1
            if self._updates_since_check >= sr.check_every:
                self._updates_since_check = 0
                g, _ = self.metrics_fn(self.server.x)
                self._last_cached_gnorm = g
                if sr.grad_tol is not None and g <= sr.grad_tol:
                    self._stop_reason = "grad_tol"
                    if self.record.threshold_time is None:
                        self.record.threshold_time = self.now
                        self.record.threshold_k = k
                    return True
                if sr.diverge_above is not None and \
                        (not math.isfinite(g) or g >= sr.diverge_above):
                    self._stop_reason = "diverged"
                    return True
        return False

    # -- main loop ---------------------------------------------------------

    def run(self) -> RunRecord:
        server, workers = self.server, self.workers
        ctx = Context(self)
        server.on_init(ctx)
        self._sample_metrics(force=True)
        events = 0
        while self.heap:
            if self._stop_reason is not None:
                break
            if events >= self.event_cap:
                self._finalize("event_cap")
                raise BudgetExceededError(
                    f"event cap {self.event_cap} reached at t={self.now}", self.record)
            t, w, seq = heapq.heappop(self.heap)
            ws = workers[w]
            if seq != ws.seq or ws.idle:
                continue  # canceled by a termination
            events += 1
            self.now = t
            ws.cumulative_busy += t - ws.busy_since
            ws.busy_until = None
            server.on_before_arrival(ctx, w)
            vector = None
            if self.grad_fn is not None and ws.assigned_x is not None:
                vector = self.grad_fn(ws.assigned_x, w, ws.task_counter)
            msg = GradientMsg(worker=w, computed_at_k=ws.assigned_k,
                              vector=vector, task_counter=ws.task_counter)
            k_before = server.k
            action = server.on_arrival(ctx, msg)
            if action not in _ACTIONS:
                raise RuntimeError(f"server returned invalid classification {action!r}")
            if action == APPLIED:
                ws.arrivals_applied += 1
            elif action == BUFFERED:
                ws.arrivals_buffered += 1
            else:
                ws.arrivals_discarded += 1
            if self.trace.enabled:
                self.trace.emit(t=t, worker=w, k_computed_at=msg.computed_at_k,
                                k_current=k_before, action=action)
            updated = server.k != k_before
            if updated:
                self._sample_metrics()
            if self._check_stop(updated):
                break
        reason = self._stop_reason if self._stop_reason is not None else "drained"
        self._finalize(reason)
        return self.record

    def _finalize(self, reason: str) -> None:
        rec = self.record
        rec.stop_reason = reason
        rec.final_k = self.server.k
        rec.final_time = self.now
        rec.total_discarded = self.total_discarded()
        self._sample_metrics(force=True)

    # -- invariants (used by tests) ----------------------------------------

    def conservation_ok(self) -> bool:
        """tasks_started == classified arrivals + terminations + in-flight."""
        for ws in self.workers:
            in_flight = 0 if ws.idle else 1
            total = (ws.arrivals_applied + ws.arrivals_buffered +
                     ws.arrivals_discarded + ws.tasks_discarded + in_flight)
            if ws.tasks_started != total:
                return False
        return True
