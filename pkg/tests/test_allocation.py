import math

import numpy as np
import pytest

from asgd_arena import allocation as al
from asgd_arena import allocrun
from asgd_arena import theory
from asgd_arena import timemodel as tm
from asgd_arena.errors import ConfigError


# -- proxy loss ------------------------------------------------------------

def test_proxy_loss_examples():
    assert al.proxy_loss([2, 1], [3.0, 5.0]) == 6.0
    assert al.proxy_loss([0, 1], [7.0, 2.0]) == 2.0
    assert al.proxy_loss([4, 4], [0.0, 0.0]) == 0.0
    with pytest.raises(ValueError):
        al.proxy_loss([1], [1.0, 2.0])


# -- exact allocation search -------------------------------------------------

def test_ras_examples():
    assert al.ras([5.0, 3.0, 4.0], 1) == [0, 1, 0]
    assert al.ras([1.0, 2.0, 3.0], 3) == [2, 1, 0]
    assert al.proxy_loss(al.ras([1.0, 2.0, 3.0], 3), [1.0, 2.0, 3.0]) == 2.0
    assert al.ras([1.0, 2.0], 2) == [2, 0]
    assert al.ras([2.0], 5) == [5]


def test_ras_zero_scores_share_uniformly():
    assert al.ras([0.0, 1.0, 0.0], 5) == [3, 0, 2]
    assert al.ras([0.0] * 4, 8) == [2, 2, 2, 2]
    assert al.ras([0.0] * 5, 2) == [1, 1, 0, 0, 0]


def test_ras_rejects_bad_input():
    with pytest.raises(ConfigError):
        al.ras([1.0, 2.0], 0)
    with pytest.raises(ConfigError):
        al.ras([], 2)
    with pytest.raises(ConfigError):
        al.ras([-1.0], 2)


def test_brute_force_bounds():
    with pytest.raises(ConfigError):
        al.brute_force_alloc([1.0] * 40, 30)
    alloc, loss, card = al.brute_force_alloc([2.0], 3)
    assert alloc == [3] and loss == 6.0 and card == 1


def test_ras_matches_brute_force_on_grid():
    rng = np.random.default_rng(10)
    for _ in range(300):
        n = int(rng.integers(2, 7))
        B = int(rng.integers(1, 9))
        scores = list(rng.uniform(0.1, 10.0, size=n))
        a = al.ras(scores, B)
        assert sum(a) == B and all(x >= 0 for x in a)
        _, best_loss, best_card = al.brute_force_alloc(scores, B)
        loss = al.proxy_loss(a, scores)
        prods = [ai * si for ai, si in zip(a, scores)]
        card = sum(1 for p in prods if p == max(prods))
        assert loss == best_loss
        assert card == best_card


def test_ras_one_unit_exchange_lemma():
    rng = np.random.default_rng(11)
    for _ in range(2000):
        n = int(rng.integers(2, 9))
        B = int(rng.integers(1, 15))
        s = rng.uniform(0.1, 10.0, size=n)
        a = al.ras(list(s), B)
        top = max(ai * si for ai, si in zip(a, s))
        assert all(top <= (ai + 1) * si + 1e-12 for ai, si in zip(a, s))


def test_critical_increments_in_one_two():
    rng = np.random.default_rng(12)
    for _ in range(500):
        n = int(rng.integers(2, 7))
        B = int(rng.integers(1, 9))
        mu = list(rng.uniform(0.1, 10.0, size=n))
        assert set(al.critical_increments(mu, B)) <= {1, 2}


# -- confidence bounds --------------------------------------------------------

def test_conf_bound_examples():
    assert math.isinf(al.conf_bound(1.0, 0, 1))
    got = al.conf_bound(1.0, 1, 1)
    assert got == pytest.approx(2 * (math.sqrt(math.log(2)) + math.log(2)))
    widths = [al.conf_bound(1.0, K, 3) for K in (1, 10, 100, 10000)]
    assert all(a > b for a, b in zip(widths, widths[1:]))
    assert widths[-1] < 0.1
    with pytest.raises(ConfigError):
        al.conf_bound(-1.0, 1, 1)


def test_lcb_modes():
    state = al.LcbState(n=3, mode="alpha", alpha=100.0)
    state.counts[:] = (0, 4, 9)
    state.times[:] = (0.0, 8.0, 45.0)
    s = al.lcb(state)
    assert s[0] == 0.0          # unsampled arm
    assert np.all(s == 0.0)     # huge alpha clamps everything
    eta0 = al.LcbState(n=2, mode="eta", eta=0.0)
    eta0.counts[:] = (3, 3)
    eta0.times[:] = (3.0, 6.0)
    assert np.allclose(al.lcb(eta0), [1.0, 2.0])  # eta=0: score = empirical mean


def test_ata_round_first_round_uniform_and_partial_feedback():
    state = al.LcbState(n=4, mode="alpha", alpha=1.0)
    seen = []

    def observe(i, c):
        seen.append(i)
        return np.full(c, 2.0)

    alloc, state = al.ata_round(state, 2, observe)
    assert alloc == [1, 1, 0, 0]          # zero scores share the budget
    assert seen == [0, 1]                  # unallocated arms get no feedback
    assert state.counts.tolist() == [1, 1, 0, 0]
    assert state.times.tolist() == [2.0, 2.0, 0.0, 0.0]
    assert state.k == 2


def test_ata_round_observation_shape_checked():
    state = al.LcbState(n=2, mode="alpha", alpha=1.0)
    with pytest.raises(ValueError):
        al.ata_round(state, 2, lambda i, c: np.zeros(c + 1))


def test_ata_deterministic_arms_fix_allocation():
    # eta-mode with eta=0 scores by the exact empirical means, so the
    # allocation locks onto the optimum right after every arm is seen
    state = al.LcbState(n=2, mode="eta", eta=0.0)
    mus = [1.0, 2.0]
    allocs = []
    for _ in range(200):
        alloc, state = al.ata_round(state, 2, lambda i, c: np.full(c, mus[i]))
        allocs.append(tuple(alloc))
    assert allocs[0] == (1, 1)
    assert all(a == (2, 0) for a in allocs[2:])


def test_ata_single_arm_zero_regret():
    dists = [tm.Exponential(2.0)]
    ledger, allocs = allocrun.run_bandit("ata", dists, 3, 50, seed=0)
    assert all(a == [3] for a in allocs)
    assert ledger.cumulative_regret()[-1] == 0.0


# -- baselines and cost ------------------------------------------------------

def test_gta_hand_trace():
    dists = [tm.Deterministic(1.0), tm.Deterministic(2.0), tm.Deterministic(3.0)]
    cost, counts, wasted, busy = al.gta(dists, 1, seed=0)
    assert cost == 1.0 and counts == [1, 0, 0]
    assert wasted == 2.0 and busy == 3.0


def test_gta_equal_arms_tiebreak_no_waste():
    dists = [tm.Deterministic(2.0)] * 3
    cost, counts, wasted, busy = al.gta(dists, 3, seed=0)
    assert cost == 2.0 and counts == [1, 1, 1] and wasted == 0.0


def test_gta_single_worker_sum_of_draws():
    dists = [tm.Exponential(1.5)]
    counters = [0]
    cost, counts, wasted, busy = al.gta(dists, 4, seed=3, counters=counters)
    model = tm.Stochastic(tuple(dists))
    expected = sum(tm.sample_duration(model, 0, c, 3) for c in range(4))
    assert cost == pytest.approx(expected)
    assert counts == [4] and wasted == 0.0


def test_ofta_uta():
    assert al.ofta([1.0, 2.0], 2) == [2, 0]
    assert al.uta(4, 8) == [2, 2, 2, 2]
    a = al.uta(5, 2, seed=9)
    assert sum(a) == 2 and set(a) <= {0, 1}
    assert al.uta(5, 2, seed=9) == a  # seeded


def test_realized_cost():
    a = [2, 0, 1]
    samples = [np.array([1.0, 2.0]), np.zeros(0), np.array([2.5])]
    assert al.realized_cost(a, samples) == 3.0
    with pytest.raises(ValueError):
        al.realized_cost([1, 1], [np.ones(1)])
    # deterministic arms: equals the proxy loss at the means
    det = [np.full(3, 2.0), np.full(1, 5.0)]
    assert al.realized_cost([3, 1], det) == al.proxy_loss([3, 1], [2.0, 5.0])


def test_expected_cost_mc_deterministic_and_b1():
    dists = [tm.Deterministic(2.0), tm.Deterministic(0.5)]
    est, se = al.expected_cost_mc([2, 1], dists, 1000, seed=0)
    assert est == 4.0 and se == 0.0
    one = [tm.Exponential(3.0)]
    est, se = al.expected_cost_mc([1], one, 200000, seed=1)
    assert est == pytest.approx(3.0, rel=0.02)  # B=1: expected cost = mean
    with pytest.raises(ConfigError):
        al.expected_cost_mc([1], one, 10, seed=0)


def test_sandwich_bracket_random_allocations():
    rng = np.random.default_rng(20)
    for t in range(12):
        n = int(rng.integers(1, 6))
        B = int(rng.integers(1, 24))
        dists = [tm.Exponential(float(rng.uniform(0.5, 4.0))) for _ in range(n)]
        a = [0] * n
        for _ in range(B):
            a[int(rng.integers(0, n))] += 1
        mu = [d.mean() for d in dists]
        low = al.proxy_loss(a, mu)
        high = theory.sandwich_factor(1.0, B) * low
        est, se = al.expected_cost_mc(a, dists, 30000, seed=100 + t)
        assert low - 3 * se <= est <= high + 3 * se


# -- regret ledger -----------------------------------------------------------

def test_regret_zero_when_playing_optimum():
    led = al.RegretLedger([1.0, 2.0], 2)
    for _ in range(10):
        led.record(led.best_alloc)
    assert np.all(led.cumulative_regret() == 0.0)


def test_regret_linear_for_worst_single_arm():
    led = al.RegretLedger([1.0, 2.0], 1)
    for _ in range(25):
        led.record([0, 1])
    cum = led.cumulative_regret()
    assert cum[-1] == pytest.approx(25 * (2.0 - 1.0))
    rep = al.regret_report(led)
    assert rep["avg_regret"][-1] == pytest.approx(1.0)
    assert math.isnan(rep["regret_per_log"][0])


def test_bandit_runner_partial_feedback_and_decreasing_avg_regret():
    dists = [tm.Exponential(2.0 * (i + 1)) for i in range(6)]
    ledger, allocs = allocrun.run_bandit("ata_empirical", dists, 3, 3000,
                                         seed=1, eta=1.0)
    avg = al.regret_report(ledger)["avg_regret"]
    assert avg[-1] < 0.6 * avg[:200].max()  # exploration cost washes out
    ledger_gta, allocs_gta = allocrun.run_bandit("gta", dists, 3, 20, seed=1)
    assert all(sum(a) == 3 for a in allocs_gta)


def test_sgd_wrappers_step_and_account():
    from asgd_arena.problem import QuadraticProblem
    q = QuadraticProblem(10, sigma=0.001, seed=0)
    dists = [tm.Exponential(1.0 + i) for i in range(4)]
    for method in ("sgd_ata", "sgd_gta", "sgd_ofta", "sgd_uta"):
        rec, ledger = allocrun.run_sgd_allocation(method, q, dists, B=6,
                                                  gamma=0.5, seed=2,
                                                  max_rounds=60)
        arrs = rec.as_arrays()
        assert arrs["subopt"][-1] < arrs["subopt"][0]
        assert np.all(np.diff(arrs["vtime"]) >= 0)
        assert len(ledger.proxy_losses) == 60
    rec, ledger = allocrun.run_asgd_allocation(q, dists, B=6, gamma=0.2, seed=2,
                                               max_rounds=60, mode="eta", eta=1.0)
    assert rec.as_arrays()["subopt"][-1] < 5e-3


def test_sgd_gta_wastes_but_fixed_alloc_does_not():
    from asgd_arena.problem import QuadraticProblem
    q = QuadraticProblem(5, sigma=0.0, seed=0)
    dists = [tm.Exponential(1.0), tm.Exponential(5.0)]
    rec_gta, _ = allocrun.run_sgd_allocation("sgd_gta", q, dists, B=3, gamma=0.1,
                                             seed=0, max_rounds=10)
    rec_fix, _ = allocrun.run_sgd_allocation("sgd_ofta", q, dists, B=3, gamma=0.1,
                                             seed=0, max_rounds=10)
    assert rec_gta.as_arrays()["discarded"][-1] > 0
    assert rec_fix.as_arrays()["discarded"][-1] == 0


def test_b1_reduces_to_single_arm_bandit():
    dists = [tm.Exponential(1.0), tm.Exponential(6.0), tm.Exponential(12.0)]
    ledger, allocs = allocrun.run_bandit("ata_empirical", dists, 1, 2000, seed=4, eta=1.0)
    assert all(sum(a) == 1 and max(a) == 1 for a in allocs)
    # after exploration the cheapest arm dominates
    tail = allocs[-200:]
    assert sum(a[0] == 1 for a in tail) >= 180


def test_bad_round_diagnostic_and_warm_start():
    dists = [tm.Exponential(2.0), tm.Exponential(8.0)]
    ledger, allocs = allocrun.run_bandit("ata_empirical", dists, 2, 200, seed=3)
    assert 0 < ledger.bad_rounds() < 200
    # a warm-started state skips the uniform exploration round
    warm = al.LcbState(n=2, mode="eta", eta=1.0)
    warm.counts[:] = (500, 500)
    warm.times[:] = (500 * 2.0, 500 * 8.0)
    warm.k = 501
    strat = allocrun.make_strategy("ata_empirical", dists, 2, 2, seed=0,
                                   warm_start=warm)
    assert strat.allocate(2) == [2, 0]
