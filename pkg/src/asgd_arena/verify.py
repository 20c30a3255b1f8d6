"""Named self-check suites behind the ``verify`` CLI subcommand.

Each suite returns (passed, detail) and is also reused by the test suite at
larger trial counts.  Checks compare the fast implementations against
independent oracles (exhaustive enumeration, Monte-Carlo, replays).
"""

from __future__ import annotations

import math

import numpy as np

from . import theory
from .allocation import (brute_force_alloc, critical_increments, expected_cost_mc,
                         lcb, LcbState, proxy_loss, ras)
from .problem import QuadraticProblem
from .simcore import StopRule, Trace
from .timemodel import Exponential, Fixed, ShiftedExponential


def check_ras(trials: int = 200, seed: int = 0) -> tuple[bool, str]:
    """ras loss and critical-arm count match exhaustive search."""
    rng = np.random.default_rng(seed)
    for t in range(trials):
        n = int(rng.integers(2, 7))
        B = int(rng.integers(1, 9))
        scores = rng.uniform(0.1, 10.0, size=n)
        a = ras(scores, B)
        _, best_loss, best_card = brute_force_alloc(scores, B)
        loss = proxy_loss(a, scores)
        prods = [ai * si for ai, si in zip(a, scores)]
        card = sum(1 for p in prods if p == max(prods))
        if loss != best_loss or card != best_card:
            return False, f"mismatch at trial {t}: scores={scores} B={B}"
    return True, f"{trials}/{trials} instances match exhaustive search"


def check_lemma_increment(trials: int = 1000, seed: int = 1) -> tuple[bool, str]:
    """For ras output a: a_j s_j <= (a_i + 1) s_i for all arm pairs."""
    rng = np.random.default_rng(seed)
    for t in range(trials):
        n = int(rng.integers(2, 8))
        B = int(rng.integers(1, 12))
        scores = rng.uniform(0.1, 10.0, size=n)
        a = ras(scores, B)
        top = max(ai * si for ai, si in zip(a, scores))
        floor = min((ai + 1) * si for ai, si in zip(a, scores))
        if top > floor + 1e-12:
            return False, f"violated at trial {t}"
    return True, f"{trials}/{trials} instances satisfy the one-unit bound"


def check_critical_increments(trials: int = 500, seed: int = 2) -> tuple[bool, str]:
    """The per-arm suboptimality increments k_i always land in {1, 2}."""
    rng = np.random.default_rng(seed)
    for t in range(trials):
        n = int(rng.integers(2, 7))
        B = int(rng.integers(1, 9))
        mu = rng.uniform(0.1, 10.0, size=n)
        if any(ki not in (1, 2) for ki in critical_increments(mu, B)):
            return False, f"k_i outside {{1,2}} at trial {t}"
    return True, f"{trials}/{trials} instances have k_i in {{1,2}}"


def check_m_star(trials: int = 1000, seed: int = 3) -> tuple[bool, str]:
    """Pool-size selection matches a literal re-enumeration."""
    rng = np.random.default_rng(seed)
    for t in range(trials):
        n = int(rng.integers(1, 30))
        taus = np.sort(rng.uniform(0.1, 50.0, size=n))
        sigma2 = float(rng.uniform(0.0, 100.0))
        eps = float(rng.uniform(0.01, 1.0))
        fast = theory.select_m_star(taus, sigma2, eps)
        vals = []
        for m in range(1, n + 1):
            inv = sum(1.0 / taus[i] for i in range(m))
            vals.append((m / inv) * (1.0 + sigma2 / (eps * m)))
        slow = 1 + min(range(len(vals)), key=lambda i: vals[i])
        if fast != slow:
            return False, f"mismatch at trial {t}: {fast} vs {slow}"
    return True, f"{trials}/{trials} instances match enumeration"


def check_ordering(trials: int = 300, seed: int = 4) -> tuple[bool, str]:
    """Pooled time complexity never exceeds the all-workers expression."""
    rng = np.random.default_rng(seed)
    for t in range(trials):
        n = int(rng.integers(1, 40))
        taus = np.sort(rng.uniform(0.1, 100.0, size=n))
        tr, ta = theory.closed_form_T(taus, L=1.0, Delta=1.0,
                                      sigma2=float(rng.uniform(0, 10)), eps=0.1)
        if tr > ta * (1 + 1e-12):
            return False, f"ordering violated at trial {t}"
    return True, f"{trials}/{trials} instances ordered correctly"


def check_t_of_R_monotone(trials: int = 300, seed: int = 5) -> tuple[bool, str]:
    """t(R) grows with R and with any slowdown of a worker."""
    rng = np.random.default_rng(seed)
    for t in range(trials):
        n = int(rng.integers(1, 10))
        taus = np.sort(rng.uniform(0.1, 10.0, size=n))
        R = int(rng.integers(1, 20))
        base = theory.t_of_R(taus, R)
        if theory.t_of_R(taus, R + 1) < base - 1e-12:
            return False, f"not monotone in R at trial {t}"
        j = int(rng.integers(0, n))
        slower = np.sort(taus * np.where(np.arange(n) == j, 1.5, 1.0))
        if theory.t_of_R(slower, R) < base - 1e-12:
            return False, f"not monotone in tau at trial {t}"
    return True, f"{trials}/{trials} monotonicity checks hold"


def check_sandwich(allocs: int = 10, trials: int = 20000, seed: int = 6) -> tuple[bool, str]:
    """Proxy loss brackets the Monte-Carlo expected makespan."""
    rng = np.random.default_rng(seed)
    for t in range(allocs):
        n = int(rng.integers(1, 6))
        B = int(rng.integers(1, 24))
        dists = [Exponential(float(rng.uniform(0.5, 5.0))) for _ in range(n)]
        a = [0] * n
        for _ in range(B):
            a[int(rng.integers(0, n))] += 1
        mu = [d.mean() for d in dists]
        low = proxy_loss(a, mu)
        high = theory.sandwich_factor(1.0, B) * low
        est, se = expected_cost_mc(a, dists, trials, seed + t)
        if not (low - 3 * se <= est <= high + 3 * se):
            return False, f"bracket failed at trial {t}: {low} {est} {high}"
    return True, f"{allocs}/{allocs} allocations inside the bracket"


def check_coverage(reps: int = 2000, seed: int = 7) -> tuple[bool, str]:
    """Lower confidence bounds stay below the true mean ~95% of the time."""
    delta = 0.05
    log_term = math.log(2.0 / delta)
    dist = ShiftedExponential(2.0, 2.0)
    mu = dist.mean()
    rng = np.random.default_rng(seed)
    for K in (1, 10, 100):
        draws = np.asarray(dist.sample(rng, size=(reps, K)), dtype=float)
        means = draws.mean(axis=1)
        width = math.sqrt(log_term / K) + log_term / K
        s_alpha = np.maximum(means - 2.0 * dist.orlicz_upper() * width, 0.0)
        s_eta = means * max(0.0, 1.0 - 2.0 * 1.0 * width)
        for name, s in (("alpha", s_alpha), ("eta", s_eta)):
            cover = float(np.mean(s <= mu))
            if cover < 1 - delta - 0.01:
                return False, f"{name}-mode coverage {cover:.3f} at K={K}"
    return True, "alpha- and eta-mode bounds cover the mean at the stated level"


def check_delay_law(runs: int = 10, seed: int = 8) -> tuple[bool, str]:
    """Applied arrivals have delay < R; dropped arrivals have delay >= R."""
    from .homogeneous import ringmaster
    rng = np.random.default_rng(seed)
    for r in range(runs):
        n = int(rng.integers(2, 6))
        taus = tuple(np.sort(rng.uniform(0.5, 5.0, size=n)))
        R = int(rng.integers(1, 5))
        problem = QuadraticProblem(5, sigma=0.01, seed=seed + r)
        trace = Trace()
        ringmaster(problem, Fixed(taus), StopRule(max_k=50), seed + r, 0.01, R,
                   variant="no_stops", trace=trace)
        for row in trace.rows:
            delay = row["k_current"] - row["k_computed_at"]
            if row["action"] == "applied" and delay >= R:
                return False, f"applied with delay {delay} >= R={R}"
            if row["action"] == "discarded" and delay < R:
                return False, f"discarded with delay {delay} < R={R}"
    return True, f"{runs}/{runs} runs satisfy the delay law"


def check_ringleader(runs: int = 5, seed: int = 9) -> tuple[bool, str]:
    """Delay bound, one-update-per-worker rounds, and zero discards."""
    from .heterogeneous import ringleader
    from .problem import HeteroProblem
    rng = np.random.default_rng(seed)
    for r in range(runs):
        n = int(rng.integers(2, 6))
        taus = tuple(np.sort(rng.uniform(0.5, 5.0, size=n)))
        problem = HeteroProblem(n, 5, sigma=0.01, seed=seed + r)
        rec, eng = ringleader(problem, Fixed(taus), StopRule(max_k=6 * n),
                              seed + r, 0.01, audit=True)
        server = eng.server
        if max(server.update_delays) > 2 * n - 2:
            return False, f"delay bound broken in run {r}"
        if eng.total_discarded() != 0:
            return False, f"discards in run {r}"
        for block in range(len(server.update_recipients) // n):
            recips = server.update_recipients[block * n:(block + 1) * n]
            if sorted(recips) != list(range(n)):
                return False, f"round {block} recipients {recips}"
    return True, f"{runs}/{runs} structural checks hold"


def check_determinism(seed: int = 10) -> tuple[bool, str]:
    """Identical (config, seed) gives byte-identical CSV twice."""
    import os
    import tempfile
    from .harness import ExperimentConfig, emit_csv, run_experiment
    cfg = ExperimentConfig.from_dict({
        "experiment": {"method": "ringmaster", "seed": seed},
        "problem": {"kind": "quad", "d": 10, "sigma": 0.01},
        "times": {"preset": "fixed_linear_jitter", "n": 4},
        "params": {"gamma": 0.05, "R": 3},
        "stop": {"max_k": 200},
    })
    outs = []
    for _ in range(2):
        rec, _ = run_experiment(cfg)
        with tempfile.NamedTemporaryFile(mode="r", suffix=".csv", delete=False) as fh:
            path = fh.name
        emit_csv([rec], path)
        with open(path, "rb") as fh:
            outs.append(fh.read())
        os.unlink(path)
    if outs[0] != outs[1]:
        return False, "CSV outputs differ between identical runs"
    return True, "byte-identical CSV for identical (config, seed)"


SUITES = {
    "ras": check_ras,
    "lemma1": check_lemma_increment,
    "increments": check_critical_increments,
    "mstar": check_m_star,
    "ordering": check_ordering,
    "t_of_r": check_t_of_R_monotone,
    "sandwich": check_sandwich,
    "coverage": check_coverage,
    "delay": check_delay_law,
    "ringleader": check_ringleader,
    "determinism": check_determinism,
}


def run_suite(name: str, trials: int | None = None) -> list[tuple[str, bool, str]]:
    names = list(SUITES) if name == "all" else [name]
    results = []
    for nm in names:
        if nm not in SUITES:
            raise KeyError(nm)
        fn = SUITES[nm]
        if trials is not None and nm in ("ras", "lemma1", "increments", "mstar",
                                         "ordering", "t_of_r"):
            ok, detail = fn(trials)
        else:
            ok, detail = fn()
        results.append((nm, ok, detail))
    return results
