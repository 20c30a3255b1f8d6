"""Closed-form bounds and parameter formulas used to check the simulator.

Everything here is a pure function.  Order-level (Theta) quantities are
evaluated with all universal constants set to 1 and must only be used for
ranking or ratio checks, never compared to simulated values in absolute
terms; each such function says so in its docstring.
"""

from __future__ import annotations

import math
from typing import Sequence

from .errors import ConfigError
from .timemodel import PiecewisePower


def t_of_R(taus: Sequence[float], R: int) -> float:
    """Worst-case seconds for any R consecutive applied updates (fixed times).

    ``2 * min_m (R + m) / sum_{i<=m} 1/tau_i`` with ``taus`` ascending.
    """
    if len(taus) == 0:
        raise ConfigError("empty task-time list")
    if R < 1:
        raise ConfigError("R must be >= 1")
    best = math.inf
    inv_sum = 0.0
    for m, tau in enumerate(taus, start=1):
        inv_sum += 1.0 / tau
        best = min(best, 2.0 * (R + m) / inv_sum)
    return best


def optimal_R(sigma2: float, eps: float) -> int:
    """Delay threshold giving optimal wall-clock behavior: max{1, ceil(s2/eps)}."""
    if eps <= 0:
        raise ConfigError("eps must be positive")
    return max(1, math.ceil(sigma2 / eps))


def rennala_B(sigma2: float, eps: float) -> int:
    """Batch size for the batched collector; same formula as ``optimal_R``."""
    return optimal_R(sigma2, eps)


def ringmaster_K(R: int, L: float, Delta: float, sigma2: float, eps: float) -> int:
    """Iterations sufficient for mean-squared gradient <= eps with threshold R."""
    if min(R, L, Delta, eps) <= 0:
        raise ConfigError("R, L, Delta, eps must be positive")
    return math.ceil(8.0 * R * L * Delta / eps + 16.0 * sigma2 * L * Delta / eps**2)


def ringleader_K(n: int, L: float, Delta: float, sigma2: float, eps: float, B: float) -> int:
    """Iterations sufficient for the table-based method with harmonic batch B."""
    if min(n, L, Delta, eps, B) <= 0:
        raise ConfigError("n, L, Delta, eps, B must be positive")
    return math.ceil(32.0 * n * L * Delta / eps + 40.0 * L * Delta * sigma2 / (B * eps**2))


def stepsizes(method: str, *, L: float, eps: float, sigma2: float,
              R: int = 1, n: int = 1, B: float = 1.0) -> float:
    """Default theoretical stepsize for ``ringmaster`` or ``ringleader``."""
    if L <= 0 or eps <= 0:
        raise ConfigError("L and eps must be positive")
    if method == "ringmaster":
        first = 1.0 / (2.0 * R * L)
        if sigma2 == 0:
            return first
        return min(first, eps / (4.0 * L * sigma2))
    if method == "ringleader":
        first = 1.0 / (8.0 * n * L)
        if sigma2 == 0:
            return first
        return min(first, eps * B / (10.0 * L * sigma2))
    raise ConfigError(f"no stepsize rule for method {method!r}")


def universal_T(powers: Sequence[PiecewisePower], R: int, T0: float) -> float:
    """Deadline for R updates under time-varying powers, starting at ``T0``.

    Smallest T with ``sum_i floor((1/4) * integral_{T0}^{T} p_i) >= R``.
    Returns ``inf`` when the total remaining work can never reach R.
    Exact: walks the merged breakpoints and solves the deciding segment in
    closed form.
    """
    if R < 1:
        raise ConfigError("R must be >= 1")
    if T0 < 0:
        raise ConfigError("T0 must be >= 0")
    n = len(powers)
    if n == 0:
        raise ConfigError("need at least one worker power")

    # Work already banked toward the next unit, per worker, at current time.
    t = T0
    acc = [0.0 for _ in range(n)]  # integral of p_i / 4 since T0
    count = 0

    def rate_at(p: PiecewisePower, time: float) -> float:
        v = p.values[0]
        for b, val in zip(p.breaks, p.values):
            if b <= time:
                v = val
            else:
                break
        return v

    all_breaks = sorted({b for p in powers for b in p.breaks if b > T0})
    boundaries = all_breaks + [math.inf]
    for seg_end in boundaries:
        while True:
            rates = [rate_at(p, t) / 4.0 for p in powers]
            # Next integer crossing per worker within this segment.
            best_t = math.inf
            for i, r in enumerate(rates):
                if r <= 0:
                    continue
                need = math.floor(acc[i] + 1e-9) + 1.0 - acc[i]
                cross = t + need / r
                if cross < best_t:
                    best_t = cross
            if math.isinf(best_t) and math.isinf(seg_end):
                return math.inf
            if best_t <= seg_end + 1e-15:
                for i, r in enumerate(rates):
                    acc[i] += r * (best_t - t)
                t = best_t
                count = sum(int(math.floor(a + 1e-9)) for a in acc)
                if count >= R:
                    return t
            else:
                if math.isinf(seg_end):
                    return math.inf
                for i, r in enumerate(rates):
                    acc[i] += r * (seg_end - t)
                t = seg_end
                break
    return math.inf


def universal_T_sequence(powers: Sequence[PiecewisePower], R: int, count: int) -> list[float]:
    """Iterated deadlines ``T^k``: T^0 = 0 and T^k = universal_T(R, T^{k-1})."""
    out: list[float] = []
    prev = 0.0
    for _ in range(count):
        nxt = universal_T(powers, R, prev)
        out.append(nxt)
        if math.isinf(nxt):
            out.extend(math.inf for _ in range(count - len(out)))
            break
        prev = nxt
    return out


def dynamic_K(L: float, Delta: float, eps: float) -> int:
    """Deadline count paired with ``universal_T_sequence``: ceil(48 L Delta / eps).

    Under time-varying powers, the delay-thresholded method reaches the
    target stationarity within the first this-many elements of the deadline
    recursion.
    """
    if min(L, Delta, eps) <= 0:
        raise ConfigError("L, Delta, eps must be positive")
    return math.ceil(48.0 * L * Delta / eps)


def harmonic_floor(taus: Sequence[float]) -> float:
    """Lower bound on the worst-round harmonic batch size: tau_n / (2 tau_avg)."""
    if len(taus) == 0:
        raise ConfigError("empty task-time list")
    tau_n = max(taus)
    tau_avg = sum(taus) / len(taus)
    return tau_n / (2.0 * tau_avg)


def sandwich_factor(eta: float, B: int) -> float:
    """Multiplicative gap between the proxy loss and the expected round cost."""
    if B < 1:
        raise ConfigError("B must be >= 1")
    return 1.0 + 4.0 * eta * math.log(B)


def select_m_star(taus: Sequence[float], sigma2: float, eps: float) -> int:
    """Smallest worker-pool size minimizing the pool-rate/variance trade-off.

    Objective over m: ``((1/m) sum_{i<=m} 1/tau_i)^-1 * (1 + sigma2/(m*eps))``
    with ``taus`` ascending; ties break toward smaller m.
    """
    if len(taus) == 0:
        raise ConfigError("empty task-time list")
    if eps <= 0:
        raise ConfigError("eps must be positive")
    ratio = sigma2 / eps
    best_m, best_val = 1, math.inf
    inv_sum = 0.0
    for m, tau in enumerate(taus, start=1):
        inv_sum += 1.0 / tau
        val = (m / inv_sum) * (1.0 + ratio / m)
        if val < best_val:
            best_val = val
            best_m = m
    return best_m


def closed_form_T(taus: Sequence[float], L: float, Delta: float,
                  sigma2: float, eps: float) -> tuple[float, float]:
    """Order-level time complexities (T_pooled, T_all_workers), constants 1.

    The first minimizes over worker-pool prefixes, the second uses all n
    workers.  Only the ordering/ratio of the two is meaningful.
    """
    if len(taus) == 0:
        raise ConfigError("empty task-time list")
    term = L * Delta / eps
    inv_sum = 0.0
    best = math.inf
    val_n = math.inf
    n = len(taus)
    for m, tau in enumerate(taus, start=1):
        inv_sum += 1.0 / tau
        val = (m / inv_sum) * (term + sigma2 * L * Delta / (m * eps**2))
        best = min(best, val)
        if m == n:
            val_n = val
    return best, val_n
