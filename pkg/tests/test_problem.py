import numpy as np
import pytest
import scipy.linalg

from asgd_arena.problem import HeteroProblem, QuadraticProblem, smoothness_L


def dense_hessian(d):
    A = np.zeros((d, d))
    for i in range(d):
        A[i, i] = 0.5
        if i + 1 < d:
            A[i, i + 1] = -0.25
            A[i + 1, i] = -0.25
    return A


def test_gradient_at_zero():
    q = QuadraticProblem(6)
    g = q.full_gradient(np.zeros(6))
    assert g[0] == 0.25 and np.all(g[1:] == 0.0)


def test_gradient_scalar_case():
    q = QuadraticProblem(1)
    assert q.full_gradient(np.array([2.0]))[0] == pytest.approx(1.25)


def test_gradient_matches_dense_matvec():
    rng = np.random.default_rng(0)
    for d in (1, 2, 5, 40):
        q = QuadraticProblem(d)
        A = dense_hessian(d)
        for _ in range(5):
            x = rng.normal(size=d)
            assert np.allclose(q.full_gradient(x), A @ x - q.b, atol=1e-13)


def test_gradient_zero_at_minimizer():
    # independent oracle: banded solver from scipy
    for d in (3, 17, 100):
        q = QuadraticProblem(d)
        ab = np.zeros((3, d))
        ab[0, 1:] = -0.25
        ab[1, :] = 0.5
        ab[2, :-1] = -0.25
        xstar = scipy.linalg.solve_banded((1, 1), ab, q.b)
        assert np.allclose(q.xstar, xstar, atol=1e-12)
        assert q.grad_norm_sq(q.xstar) < 1e-10
        assert abs(q.suboptimality(q.xstar)) < 1e-10


def test_dimension_mismatch():
    q = QuadraticProblem(4)
    with pytest.raises(ValueError):
        q.full_gradient(np.zeros(5))


def test_smoothness_closed_form():
    assert smoothness_L(1) == 0.5
    assert smoothness_L(2) == pytest.approx(0.75)
    # 2x2 eigen-decomposition oracle
    w = np.linalg.eigvalsh(dense_hessian(2))
    assert smoothness_L(2) == pytest.approx(w.max())
    # dense eigensolver oracle for d = 100
    d = 100
    lam = float(np.linalg.eigvalsh(dense_hessian(d)).max())
    assert abs(smoothness_L(d) - lam) < 1e-8
    assert smoothness_L(d) < 1.0


def test_smoothness_lipschitz_property():
    q = QuadraticProblem(30)
    rng = np.random.default_rng(1)
    L = q.L
    for _ in range(1000):
        x, y = rng.normal(size=30), rng.normal(size=30)
        lhs = np.linalg.norm(q.full_gradient(x) - q.full_gradient(y))
        assert lhs <= L * np.linalg.norm(x - y) + 1e-12


def test_grad_norm_examples():
    q = QuadraticProblem(2)
    assert q.grad_norm_sq(np.array([1.0, 0.0])) == pytest.approx(0.625)
    qz = QuadraticProblem(8)
    assert qz.grad_norm_sq(np.zeros(8)) == pytest.approx(1 / 16)


def test_stochastic_gradient_sigma_zero():
    q = QuadraticProblem(5, sigma=0.0)
    x = np.ones(5)
    assert np.array_equal(q.stochastic_gradient(x, 0, 0, seed=1), q.full_gradient(x))


def test_stochastic_gradient_determinism():
    q = QuadraticProblem(5, sigma=0.3)
    x = np.ones(5)
    a = q.stochastic_gradient(x, 2, 17, seed=9)
    b = q.stochastic_gradient(x, 2, 17, seed=9)
    assert np.array_equal(a, b)
    c = q.stochastic_gradient(x, 2, 18, seed=9)
    assert not np.array_equal(a, c)


def test_stochastic_gradient_unbiased():
    d = 10
    q = QuadraticProblem(d, sigma=0.5)
    x = np.linspace(-1, 1, d)
    n_draws = 10**5
    total = np.zeros(d)
    for c in range(n_draws):
        total += q.stochastic_gradient(x, 0, c, seed=21)
    mean = total / n_draws
    tol = 3 * q.sigma / np.sqrt(n_draws)
    assert np.all(np.abs(mean - q.full_gradient(x)) <= tol)


def test_stochastic_gradient_variance_bound():
    d = 8
    q = QuadraticProblem(d, sigma=0.4)
    x = np.zeros(d)
    g0 = q.full_gradient(x)
    sq = 0.0
    n_draws = 10**4
    for c in range(n_draws):
        diff = q.stochastic_gradient(x, 1, c, seed=33) - g0
        sq += float(diff @ diff)
    assert sq / n_draws <= 1.05 * q.sigma2_total


def test_hetero_single_worker_matches_homogeneous():
    hp = HeteroProblem(1, 6, sigma=0.2, seed=5)
    q = QuadraticProblem(6, sigma=0.2, seed=5)
    x = np.linspace(0, 1, 6)
    assert np.allclose(hp.local_full_gradient(0, x), q.full_gradient(x))
    assert np.array_equal(hp.local_stochastic_gradient(0, x, 3),
                          q.stochastic_gradient(x, 0, 3))


def test_hetero_average_identity():
    hp = HeteroProblem(7, 12, sigma=0.0)
    rng = np.random.default_rng(2)
    for _ in range(100):
        x = rng.normal(size=12)
        avg = np.mean([hp.local_full_gradient(i, x) for i in range(7)], axis=0)
        assert np.allclose(avg, hp.full_gradient(x), atol=1e-12)


def test_hetero_witness_at_minimizer():
    hp = HeteroProblem(5, 10, sigma=0.0)
    xstar = hp.global_problem.xstar
    locals_ = [hp.local_full_gradient(i, xstar) for i in range(5)]
    assert np.linalg.norm(np.mean(locals_, axis=0)) < 1e-10
    assert all(np.linalg.norm(g) > 1e-3 for g in locals_)


def test_hetero_index_range():
    hp = HeteroProblem(3, 4)
    with pytest.raises(IndexError):
        hp.local_full_gradient(3, np.zeros(4))


def test_hetero_smoothness_chain():
    # mixed-argument constant: ||grad f(x) - avg_i grad f_i(y_i)|| ^2
    #   <= (L^2/n) sum ||x - y_i||^2, with L <= max local constant
    hp = HeteroProblem(4, 9, sigma=0.0)
    L = hp.L  # all locals share the Hessian, so L == L_f == max L_i
    rng = np.random.default_rng(3)
    for _ in range(300):
        x = rng.normal(size=9)
        ys = rng.normal(size=(4, 9))
        mix = np.mean([hp.local_full_gradient(i, ys[i]) for i in range(4)], axis=0)
        lhs = np.sum((hp.full_gradient(x) - mix) ** 2)
        rhs = (L**2 / 4) * np.sum((x[None, :] - ys) ** 2)
        assert lhs <= rhs + 1e-12
