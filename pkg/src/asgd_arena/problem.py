"""Objective oracles: a convex tridiagonal quadratic and a heterogeneous family.

The base objective is ``f(x) = 0.5 x'Ax - b'x`` with
``A = (1/4) tridiag(-1, 2, -1)`` and ``b = (1/4)(-1, 0, ..., 0)``; stochastic
gradients add isotropic Gaussian noise ``N(0, sigma^2 I)``, so the effective
variance bound is ``sigma^2 * d``.  The heterogeneous family gives each
worker a shifted copy of the same quadratic with zero-sum shifts, so local
minimizers differ while the average of the local gradients equals the global
gradient identically.

Noise draws are counter-based: pure functions of (seed, worker, counter).
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import ConfigError

_NOISE_STREAM = 1
_BLOCK = 64


def _thomas_tridiagonal_solve(diag: float, off: float, rhs: np.ndarray) -> np.ndarray:
    """Solve (constant-band) tridiagonal system via forward elimination."""
    d = rhs.shape[0]
    c_prime = np.empty(d)
    d_prime = np.empty(d)
    c_prime[0] = off / diag
    d_prime[0] = rhs[0] / diag
    for i in range(1, d):
        denom = diag - off * c_prime[i - 1]
        c_prime[i] = off / denom
        d_prime[i] = (rhs[i] - off * d_prime[i - 1]) / denom
    x = np.empty(d)
    x[-1] = d_prime[-1]
    for i in range(d - 2, -1, -1):
        x[i] = d_prime[i] - c_prime[i] * x[i + 1]
    return x


def smoothness_L(d: int) -> float:
    """Largest eigenvalue of the quadratic's Hessian: 0.5*(1 + cos(pi/(d+1)))."""
    if d < 1:
        raise ConfigError("d must be >= 1")
    return 0.5 * (1.0 + math.cos(math.pi / (d + 1)))


class QuadraticProblem:
    """Tridiagonal quadratic with additive Gaussian gradient noise.

    ``sigma`` is the per-coordinate noise standard deviation; the stochastic
    gradient satisfies E||g - grad||^2 = sigma^2 * d (the bound used wherever
    a total-variance parameter is needed).
    """

    def __init__(self, d: int, sigma: float = 0.0, seed: int = 0):
        if d < 1:
            raise ConfigError("d must be >= 1")
        if sigma < 0:
            raise ConfigError("sigma must be >= 0")
        self.d = d
        self.sigma = float(sigma)
        self.seed = int(seed)
        self.b = np.zeros(d)
        self.b[0] = -0.25
        self.xstar = _thomas_tridiagonal_solve(0.5, -0.25, self.b)
        self.fstar = float(0.5 * np.dot(self.xstar, self._matvec(self.xstar))
                           - np.dot(self.b, self.xstar))
        self.L = smoothness_L(d)

    @property
    def sigma2_total(self) -> float:
        """Effective variance bound of one stochastic gradient: sigma^2 * d."""
        return self.sigma**2 * self.d

    def _matvec(self, x: np.ndarray) -> np.ndarray:
        out = 0.5 * x
        out[:-1] -= 0.25 * x[1:]
        out[1:] -= 0.25 * x[:-1]
        return out

    def x0(self) -> np.ndarray:
        return np.zeros(self.d)

    def value(self, x: np.ndarray) -> float:
        self._check(x)
        return float(0.5 * np.dot(x, self._matvec(x)) - np.dot(self.b, x))

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        self._check(x)
        return self._matvec(x) - self.b

    def stochastic_gradient(self, x: np.ndarray, worker: int,
                            sample_counter: int, seed: int | None = None) -> np.ndarray:
        self._check(x)
        g = self.full_gradient(x)
        if self.sigma == 0.0:
            return g
        s = self.seed if seed is None else seed
        return g + self.sigma * _noise(s, worker, sample_counter, self.d)

    def grad_norm_sq(self, x: np.ndarray) -> float:
        g = self.full_gradient(x)
        return float(np.dot(g, g))

    def suboptimality(self, x: np.ndarray) -> float:
        return self.value(x) - self.fstar

    def _check(self, x: np.ndarray) -> None:
        if x.shape != (self.d,):
            raise ValueError(f"expected vector of length {self.d}, got shape {x.shape}")


@lru_cache(maxsize=512)
def _noise_block(seed: int, worker: int, block: int, d: int) -> np.ndarray:
    rng = np.random.default_rng((seed, worker, block, _NOISE_STREAM))
    return rng.standard_normal((_BLOCK, d))


def _noise(seed: int, worker: int, counter: int, d: int) -> np.ndarray:
    block, off = divmod(counter, _BLOCK)
    return _noise_block(seed, worker, block, d)[off]


class HeteroProblem:
    """n local quadratics with zero-sum shift offsets; global f is their mean.

    Local linear terms are ``b_i = b + 0.25 * r_i`` where ``r_i`` is the
    (i mod d)-th unit vector recentered so that sum_i r_i = 0.  Hence the
    global objective coincides with the plain quadratic, while each local
    minimizer differs from the global one.
    """

    def __init__(self, n: int, d: int, sigma: float = 0.0, seed: int = 0):
        if n < 1:
            raise ConfigError("n must be >= 1")
        self.n = n
        self.global_problem = QuadraticProblem(d, sigma=sigma, seed=seed)
        self.d = d
        self.sigma = float(sigma)
        self.seed = int(seed)
        offsets = np.zeros((n, d))
        if n > 1:
            for i in range(n):
                offsets[i, i % d] += 1.0
            offsets -= offsets.mean(axis=0, keepdims=True)
        self.local_bs = self.global_problem.b + 0.25 * offsets

    @property
    def sigma2_total(self) -> float:
        return self.global_problem.sigma2_total

    @property
    def L(self) -> float:
        return self.global_problem.L

    @property
    def fstar(self) -> float:
        return self.global_problem.fstar

    def x0(self) -> np.ndarray:
        return np.zeros(self.d)

    def local_full_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        if not 0 <= i < self.n:
            raise IndexError(f"worker {i} out of range for n={self.n}")
        return self.global_problem._matvec(x) - self.local_bs[i]

    def local_stochastic_gradient(self, i: int, x: np.ndarray,
                                  sample_counter: int, seed: int | None = None) -> np.ndarray:
        g = self.local_full_gradient(i, x)
        if self.sigma == 0.0:
            return g
        s = self.seed if seed is None else seed
        return g + self.sigma * _noise(s, i, sample_counter, self.d)

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        return self.global_problem.full_gradient(x)

    def grad_norm_sq(self, x: np.ndarray) -> float:
        return self.global_problem.grad_norm_sq(x)

    def suboptimality(self, x: np.ndarray) -> float:
        return self.global_problem.suboptimality(x)
