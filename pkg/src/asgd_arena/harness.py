"""Experiment configuration, dispatch, and metric serialization.

Configs are TOML files with sections ``experiment / problem / times /
params / stop / output``; unknown keys anywhere are rejected.  A run is a
pure function of (config, seed): identical inputs produce byte-identical
CSV and JSONL outputs.
"""

from __future__ import annotations

import math
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import allocrun, heterogeneous, homogeneous, theory, timemodel
from .errors import ConfigError
from .problem import HeteroProblem, QuadraticProblem
from .simcore import RunRecord, StopRule, Trace

CSV_HEADER = "method,seed,k,vtime,grad_norm_sq,subopt,total_busy,discarded,avg_iter_time,cum_regret"

HOMOGENEOUS_METHODS = ("hero", "minibatch", "naive_asgd", "rennala",
                       "naive_optimal_asgd", "ringmaster", "ringmaster_stops")
HETEROGENEOUS_METHODS = ("malenia", "malenia_pf", "ia2sgd", "ringleader",
                         "ringleader_universal")
BANDIT_METHODS = ("ata", "ata_empirical", "gta", "ofta", "uta")
WRAPPER_METHODS = ("sgd_ata", "sgd_ata_empirical", "asgd_ata", "sgd_gta",
                   "sgd_ofta", "sgd_uta")
ALL_METHODS = HOMOGENEOUS_METHODS + HETEROGENEOUS_METHODS + BANDIT_METHODS + WRAPPER_METHODS

# Desk-scale defaults standing in for the original large-scale runs.
DEFAULT_D = 100
DEFAULT_N = 20
DEFAULT_B = 23


def _check_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in [{where}]")


@dataclass
class ExperimentConfig:
    method: str
    seed: int = 0
    problem: dict = field(default_factory=dict)
    times: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    stop: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        _check_keys(raw, {"experiment", "problem", "times", "params", "stop", "output"}, "root")
        exp = dict(raw.get("experiment", {}))
        _check_keys(exp, {"method", "seed"}, "experiment")
        method = exp.get("method")
        if method not in ALL_METHODS:
            raise ConfigError(f"unknown method {method!r}; expected one of {ALL_METHODS}")
        prob = dict(raw.get("problem", {}))
        _check_keys(prob, {"kind", "d", "sigma", "n"}, "problem")
        times = dict(raw.get("times", {}))
        _check_keys(times, {"preset", "n", "taus", "powers", "dists", "preset_seed"}, "times")
        params = dict(raw.get("params", {}))
        _check_keys(params, {"gamma", "R", "B", "sigma2", "eps", "alpha", "eta",
                             "variant", "rounds"}, "params")
        stop = dict(raw.get("stop", {}))
        _check_keys(stop, {"max_k", "grad_tol", "time_budget", "check_every",
                           "max_events"}, "stop")
        output = dict(raw.get("output", {}))
        _check_keys(output, {"csv", "trace", "sample_every"}, "output")
        return cls(method=method, seed=int(exp.get("seed", 0)), problem=prob,
                   times=times, params=params, stop=stop, output=output)

    @classmethod
    def from_toml(cls, path: str) -> "ExperimentConfig":
        with open(path, "rb") as fh:
            return cls.from_dict(tomllib.load(fh))


def _dist_from_spec(spec: dict) -> timemodel.Distribution:
    kinds = {"exponential": timemodel.Exponential,
             "shifted_exponential": timemodel.ShiftedExponential,
             "uniform": timemodel.Uniform,
             "half_normal": timemodel.HalfNormal,
             "log_normal": timemodel.LogNormal,
             "gamma": timemodel.Gamma,
             "deterministic": timemodel.Deterministic}
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in kinds:
        raise ConfigError(f"unknown distribution kind {kind!r}")
    try:
        return kinds[kind](**spec)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {kind}: {exc}") from exc


def build_model(cfg: ExperimentConfig) -> timemodel.ComputeModel:
    t = cfg.times
    n = int(t.get("n", DEFAULT_N))
    given = [k for k in ("preset", "taus", "powers", "dists") if k in t]
    if len(given) != 1:
        raise ConfigError("[times] needs exactly one of preset/taus/powers/dists")
    if "preset" in t:
        return timemodel.experiment_times(t["preset"], n, int(t.get("preset_seed", cfg.seed)))
    if "taus" in t:
        return timemodel.Fixed(tuple(float(x) for x in t["taus"]))
    if "powers" in t:
        return timemodel.Universal(tuple(
            timemodel.PiecewisePower(tuple(p["breaks"]), tuple(p["values"]))
            for p in t["powers"]))
    return timemodel.Stochastic(tuple(_dist_from_spec(d) for d in t["dists"]))


def build_problem(cfg: ExperimentConfig, model) -> QuadraticProblem | HeteroProblem:
    p = cfg.problem
    kind = p.get("kind", "quad")
    d = int(p.get("d", DEFAULT_D))
    sigma = float(p.get("sigma", 0.0))
    if kind == "quad":
        return QuadraticProblem(d, sigma=sigma, seed=cfg.seed)
    if kind == "hetero_quad":
        n = int(p.get("n", model.n))
        if n != model.n:
            raise ConfigError("heterogeneous problem n must match worker count")
        return HeteroProblem(n, d, sigma=sigma, seed=cfg.seed)
    raise ConfigError(f"unknown problem kind {kind!r}")


def build_stop(cfg: ExperimentConfig) -> StopRule:
    s = cfg.stop
    return StopRule(max_k=s.get("max_k"), grad_tol=s.get("grad_tol"),
                    time_budget=s.get("time_budget"),
                    check_every=int(s.get("check_every", 1)))


def default_sample_every(cfg: ExperimentConfig) -> int:
    if "sample_every" in cfg.output:
        return int(cfg.output["sample_every"])
    max_k = cfg.stop.get("max_k")
    if max_k:
        return max(1, int(max_k) // 2000)
    return 1


def _auto_gamma(cfg: ExperimentConfig, problem, model, method: str) -> float:
    sigma2 = float(cfg.params.get("sigma2", problem.sigma2_total))
    eps = float(cfg.params.get("eps", cfg.stop.get("grad_tol", 1e-5)))
    if method in ("ringmaster", "ringmaster_stops"):
        R = int(cfg.params.get("R", theory.optimal_R(sigma2, eps)))
        return theory.stepsizes("ringmaster", L=problem.L, eps=eps, sigma2=sigma2, R=R)
    if method in ("ringleader", "ringleader_universal", "ia2sgd", "malenia", "malenia_pf"):
        if isinstance(model, timemodel.Fixed):
            B = max(1.0, theory.harmonic_floor(timemodel.taus_sorted(model)))
        else:
            B = 1.0
        return theory.stepsizes("ringleader", L=problem.L, eps=eps, sigma2=sigma2,
                                n=model.n, B=B)
    # Plain-SGD-style default for the remaining methods.
    if sigma2 == 0:
        return 1.0 / (2.0 * problem.L)
    return min(1.0 / (2.0 * problem.L), eps / (4.0 * problem.L * sigma2))


def run_experiment(cfg: ExperimentConfig, seed: Optional[int] = None,
                   trace: Optional[Trace] = None, audit: bool = False
                   ) -> tuple[RunRecord, Any]:
    """Run one configured experiment; returns (record, engine-or-ledger)."""
    if seed is not None:
        cfg = ExperimentConfig(cfg.method, int(seed), cfg.problem, cfg.times,
                               cfg.params, cfg.stop, cfg.output)
    method = cfg.method
    if method in BANDIT_METHODS:
        return _run_bandit_method(cfg)
    if method in WRAPPER_METHODS:
        return _run_wrapper_method(cfg)
    model = build_model(cfg)
    problem = build_problem(cfg, model)
    stop = build_stop(cfg)
    gamma = cfg.params.get("gamma", "auto")
    if gamma == "auto":
        gamma = _auto_gamma(cfg, problem, model, method)
    gamma = float(gamma)
    sigma2 = float(cfg.params.get("sigma2", problem.sigma2_total))
    eps = float(cfg.params.get("eps", cfg.stop.get("grad_tol", 1e-5)))
    kw = dict(sample_every=default_sample_every(cfg), trace=trace)
    if "max_events" in cfg.stop:
        kw["event_cap"] = int(cfg.stop["max_events"])

    if method == "hero":
        rec, eng = homogeneous.hero_sgd(problem, model, stop, cfg.seed, gamma, **kw)
    elif method == "minibatch":
        rec, eng = homogeneous.naive_minibatch(problem, model, stop, cfg.seed, gamma, **kw)
    elif method == "naive_asgd":
        rec, eng = homogeneous.naive_asgd(problem, model, stop, cfg.seed, gamma, **kw)
    elif method == "rennala":
        B = int(cfg.params.get("B", theory.rennala_B(sigma2, eps)))
        rec, eng = homogeneous.rennala(problem, model, stop, cfg.seed, gamma, B, **kw)
    elif method == "naive_optimal_asgd":
        rec, eng = homogeneous.naive_optimal_asgd(problem, model, stop, cfg.seed,
                                                  gamma, sigma2, eps, **kw)
    elif method in ("ringmaster", "ringmaster_stops"):
        R = int(cfg.params.get("R", theory.optimal_R(sigma2, eps)))
        variant = "with_stops" if method == "ringmaster_stops" else "no_stops"
        rec, eng = homogeneous.ringmaster(problem, model, stop, cfg.seed, gamma,
                                          R, variant, **kw)
    elif method == "malenia":
        rec, eng = heterogeneous.malenia(problem, model, stop, cfg.seed, gamma,
                                         sigma2, eps, audit=audit, **kw)
    elif method == "malenia_pf":
        rec, eng = heterogeneous.malenia_param_free(problem, model, stop, cfg.seed,
                                                    gamma, audit=audit, **kw)
    elif method == "ia2sgd":
        rec, eng = heterogeneous.ia2sgd(problem, model, stop, cfg.seed, gamma,
                                        audit=audit, **kw)
    elif method == "ringleader":
        rec, eng = heterogeneous.ringleader(problem, model, stop, cfg.seed, gamma,
                                            audit=audit, **kw)
    elif method == "ringleader_universal":
        rec, eng = heterogeneous.ringleader_universal(problem, model, stop, cfg.seed,
                                                      gamma, sigma2, eps, audit=audit, **kw)
    else:  # pragma: no cover
        raise ConfigError(f"unhandled method {method!r}")
    rec.method = method
    rec.seed = cfg.seed
    return rec, eng


def _bandit_dists(cfg: ExperimentConfig) -> tuple:
    model = build_model(cfg)
    if isinstance(model, timemodel.Stochastic):
        return model.dists
    if isinstance(model, timemodel.Fixed):
        return tuple(timemodel.Deterministic(t) for t in model.taus)
    raise ConfigError("allocation methods need stochastic or fixed task times")


def _run_bandit_method(cfg: ExperimentConfig):
    dists = _bandit_dists(cfg)
    B = int(cfg.params.get("B", DEFAULT_B))
    rounds = int(cfg.params.get("rounds", cfg.stop.get("max_k", 1000)))
    ledger, allocs = allocrun.run_bandit(
        cfg.method, dists, B, rounds, cfg.seed,
        alpha=cfg.params.get("alpha"), eta=cfg.params.get("eta"))
    rec = RunRecord(method=cfg.method, seed=cfg.seed,
                    sample_every=default_sample_every(cfg))
    cum = ledger.cumulative_regret()
    costs = np.cumsum(ledger.realized_costs)
    step = rec.sample_every
    for k in range(1, len(cum) + 1):
        if k % step == 0 or k == 1 or k == len(cum):
            rec.add(k, float(costs[k - 1]), cum_regret=float(cum[k - 1]))
    rec.final_k = len(cum)
    rec.final_time = float(costs[-1]) if len(costs) else 0.0
    return rec, ledger


def _run_wrapper_method(cfg: ExperimentConfig):
    dists = _bandit_dists(cfg)
    model = build_model(cfg)
    problem = build_problem(cfg, model)
    B = int(cfg.params.get("B", DEFAULT_B))
    rounds = int(cfg.params.get("rounds", cfg.stop.get("max_k", 1000)))
    gamma = cfg.params.get("gamma", "auto")
    if gamma == "auto":
        gamma = _auto_gamma(cfg, problem, model, cfg.method)
    gamma = float(gamma)
    common = dict(grad_tol=cfg.stop.get("grad_tol"),
                  sample_every=default_sample_every(cfg),
                  alpha=cfg.params.get("alpha"), eta=cfg.params.get("eta"))
    if cfg.method in ("asgd_ata",):
        rec, ledger = allocrun.run_asgd_allocation(problem, dists, B, gamma,
                                                   cfg.seed, rounds, **common)
    else:
        rec, ledger = allocrun.run_sgd_allocation(cfg.method, problem, dists, B,
                                                  gamma, cfg.seed, rounds, **common)
    rec.method = cfg.method
    rec.seed = cfg.seed
    return rec, ledger


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def emit_csv(records: list[RunRecord], path: str) -> None:
    """Write sampled metric rows; missing metrics become empty fields."""
    if not records:
        raise ConfigError("no records to emit")
    lines = [CSV_HEADER]
    for rec in records:
        for row in rec.rows:
            k, vtime, g, s, busy, disc, avg, reg = row
            lines.append(",".join([
                rec.method, str(rec.seed), str(int(k)), _fmt(vtime), _fmt(g),
                _fmt(s), _fmt(busy), _fmt(disc), _fmt(avg), _fmt(reg)]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path: str) -> list[dict]:
    """Parse a metrics CSV back into dict rows (floats; '' becomes None)."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ConfigError(f"unexpected CSV header {header!r}")
        names = header.split(",")
        rows = []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            row: dict[str, Any] = {}
            for name, part in zip(names, parts):
                if name == "method":
                    row[name] = part
                elif part == "":
                    row[name] = None
                else:
                    row[name] = float(part)
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def parse_grid(spec: str) -> tuple[str, list]:
    """Parse ``name=v1,v2,...`` or ``name=5^-5..5^5`` (power range) grids."""
    if "=" not in spec:
        raise ConfigError(f"bad grid spec {spec!r}")
    name, body = spec.split("=", 1)
    name = name.strip()
    body = body.strip()
    if "^" in body and ".." in body:
        base_s, rng = body.split("^", 1)
        lo_s, hi_s = rng.split("..", 1)
        if "^" in hi_s:
            hi_base, hi_exp = hi_s.split("^", 1)
            if hi_base.strip() != base_s.strip():
                raise ConfigError(f"mismatched bases in {spec!r}")
            hi_s = hi_exp
        base = float(base_s)
        lo, hi = int(lo_s), int(hi_s)
        return name, [base**p for p in range(lo, hi + 1)]
    values = []
    for tok in body.split(","):
        tok = tok.strip()
        try:
            values.append(int(tok))
        except ValueError:
            values.append(float(tok))
    return name, values


def _run_cell(args):
    cfg_dict, seed = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    rec, _ = run_experiment(cfg, seed=seed)
    return rec


def sweep(cfg: ExperimentConfig, grids: list[tuple[str, list]], seeds: list[int]
          ) -> list[RunRecord]:
    """Cross seeds with parameter grids; cells are independent runs.

    Results come back sorted by (parameter values, seed) regardless of
    execution order; ``ASGD_ARENA_THREADS`` caps process parallelism.
    """
    cells = []

    def expand(idx, params):
        if idx == len(grids):
            for seed in seeds:
                d = {"experiment": {"method": cfg.method, "seed": seed},
                     "problem": cfg.problem, "times": cfg.times,
                     "params": {**cfg.params, **params},
                     "stop": cfg.stop, "output": cfg.output}
                cells.append((tuple(sorted(params.items())), d, seed))
            return
        name, values = grids[idx]
        for v in values:
            expand(idx + 1, {**params, name: v})

    expand(0, {})
    cells.sort(key=lambda c: (c[0], c[2]))
    threads = int(os.environ.get("ASGD_ARENA_THREADS", "1"))
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=threads) as pool:
            recs = list(pool.map(_run_cell, [(d, s) for _, d, s in cells]))
    else:
        recs = [_run_cell((d, s)) for _, d, s in cells]
    for (key, _, _), rec in zip(cells, recs):
        if key:
            rec.method = rec.method + "[" + ",".join(f"{k}={v}" for k, v in key) + "]"
    return recs
