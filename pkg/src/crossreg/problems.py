"""Built-in discrete ill-posed test problems.

Each generator discretizes a first-kind integral equation by the midpoint
rule on a uniform grid and returns an entry oracle together with the exact
solution and the consistent right-hand side g_exact = A @ x_exact (computed
row-streamed, the matrix is never stored). ``add_noise`` perturbs g_exact
with a seeded Gaussian vector rescaled to an exact noise norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .oracle import EntryOracle, grid_kernel_oracle, kron_oracle

__all__ = [
    "ProblemCore",
    "ProblemInstance",
    "gravity",
    "baart",
    "baart_g_analytic",
    "phillips",
    "baart2d",
    "add_noise",
    "get_problem",
    "PROBLEM_NAMES",
]

PROBLEM_NAMES = ("gravity", "baart", "phillips", "baart2d")


@dataclass
class ProblemCore:
    """Oracle plus exact solution/data for one test problem."""

    name: str
    n: int
    oracle: EntryOracle
    x_exact: np.ndarray
    g_exact: np.ndarray
    _row_fn: object  # uncounted row access, for dense verification only

    def dense(self) -> np.ndarray:
        """Materialize A without touching the oracle's counters."""
        return np.vstack([self._row_fn(i) for i in range(self.oracle.nrows)])


@dataclass
class ProblemInstance:
    """A problem core with noisy data attached: g = g_exact + e, ||e|| = delta."""

    name: str
    n: int
    oracle: EntryOracle
    x_exact: np.ndarray
    g_exact: np.ndarray
    g_noisy: np.ndarray
    delta: float
    seed: int

    def dense(self) -> np.ndarray:
        return self._core.dense()

    _core: ProblemCore | None = None


def _stream_matvec(row_fn, n, x):
    # g = A x one row at a time; keeps memory at O(n).
    return np.array([row_fn(i) @ x for i in range(n)])


def gravity(n: int, depth: float = 0.25) -> ProblemCore:
    """One-dimensional gravity surveying problem on [0, 1].

    Kernel d * (d^2 + (s - t)^2)^(-3/2) at depth d, midpoint rule with
    weight 1/n; exact solution sin(pi t) + 0.5 sin(2 pi t). The matrix is
    symmetric positive and its singular values decay quickly.
    """
    if n < 8:
        raise ValueError("gravity requires n >= 8")
    t = (np.arange(n) + 0.5) / n
    d = float(depth)

    def kappa(si, tj):
        return d * (d * d + (si - tj) ** 2) ** -1.5

    oracle = grid_kernel_oracle(t, t, 1.0 / n, kappa)
    x_exact = np.sin(np.pi * t) + 0.5 * np.sin(2.0 * np.pi * t)
    row_fn = lambda i: kappa(t[i], t) / n
    g_exact = _stream_matvec(row_fn, n, x_exact)
    return ProblemCore("gravity", n, oracle, x_exact, g_exact, row_fn)


def baart(n: int) -> ProblemCore:
    """Baart's severely ill-posed problem: kernel exp(s cos t).

    s runs over [0, pi/2], t over [0, pi], quadrature weight pi/n; exact
    solution sin(t), with analytic data 2 sinh(s) / s.
    """
    s = (np.arange(n) + 0.5) * (0.5 * np.pi / n)
    t = (np.arange(n) + 0.5) * (np.pi / n)

    def kappa(si, tj):
        return np.exp(si * np.cos(tj))

    w = np.pi / n
    oracle = grid_kernel_oracle(s, t, w, kappa)
    x_exact = np.sin(t)
    row_fn = lambda i: w * kappa(s[i], t)
    g_exact = _stream_matvec(row_fn, n, x_exact)
    return ProblemCore("baart", n, oracle, x_exact, g_exact, row_fn)


def baart_g_analytic(s) -> np.ndarray:
    """Closed-form right-hand side 2 sinh(s)/s of the continuous baart problem."""
    s = np.asarray(s, dtype=np.float64)
    return np.where(s == 0.0, 2.0, 2.0 * np.sinh(s) / np.where(s == 0.0, 1.0, s))


def _phillips_theta(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.abs(x) < 3.0, 1.0 + np.cos(np.pi * x / 3.0), 0.0)


def phillips(n: int) -> ProblemCore:
    """Phillips' problem on [-6, 6]: banded kernel theta(s - t).

    theta(x) = 1 + cos(pi x / 3) inside |x| < 3 and zero outside; the exact
    solution is theta itself. Singular values decay slower than gravity's.
    """
    h = 12.0 / n
    t = -6.0 + (np.arange(n) + 0.5) * h

    def kappa(si, tj):
        return _phillips_theta(si - tj)

    oracle = grid_kernel_oracle(t, t, h, kappa)
    x_exact = _phillips_theta(t)
    row_fn = lambda i: h * kappa(t[i], t)
    g_exact = _stream_matvec(row_fn, n, x_exact)
    return ProblemCore("phillips", n, oracle, x_exact, g_exact, row_fn)


def baart2d(base_n: int = 40) -> ProblemCore:
    """Two-dimensional problem A = B (x) B with B the baart matrix of order base_n.

    Entries of A come from two B entries through Kronecker index splitting;
    A itself (of order base_n^2) is never assembled. Exact solution and data
    are the Kronecker squares of the one-dimensional ones.
    """
    core1d = baart(base_n)
    b = core1d.dense()
    oracle = kron_oracle(b)
    x_exact = np.kron(core1d.x_exact, core1d.x_exact)
    gb = b @ core1d.x_exact
    g_exact = np.kron(gb, gb)
    nb = base_n
    row_fn = lambda i: np.kron(b[i // nb, :], b[i % nb, :])
    return ProblemCore("baart2d", nb * nb, oracle, x_exact, g_exact, row_fn)


def add_noise(
    core: ProblemCore,
    delta: float | None = None,
    delta_rel: float | None = None,
    seed: int = 0,
) -> ProblemInstance:
    """Attach noisy data g = g_exact + e with exactly ||e|| = delta.

    Exactly one of ``delta`` (absolute) or ``delta_rel`` (factor times
    ||g_exact||) must be given. The perturbation direction is a seeded
    standard Gaussian vector, rescaled so the noise norm is exact, which
    makes the discrepancy target deterministic.
    """
    if (delta is None) == (delta_rel is None):
        raise ValueError("give exactly one of delta or delta_rel")
    if delta_rel is not None:
        delta = float(delta_rel) * float(np.linalg.norm(core.g_exact))
    delta = float(delta)
    if delta <= 0:
        raise ValueError("noise bound must be positive")
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(core.g_exact.size)
    e = (delta / np.linalg.norm(w)) * w
    return ProblemInstance(
        name=core.name,
        n=core.n,
        oracle=core.oracle,
        x_exact=core.x_exact,
        g_exact=core.g_exact,
        g_noisy=core.g_exact + e,
        delta=delta,
        seed=seed,
        _core=core,
    )


def get_problem(name: str, n: int) -> ProblemCore:
    """Build a problem by name; for baart2d, n must be a perfect square."""
    name = name.lower()
    if name == "gravity":
        return gravity(n)
    if name == "baart":
        return baart(n)
    if name == "phillips":
        return phillips(n)
    if name == "baart2d":
        base = math.isqrt(n)
        if base * base != n:
            raise ValueError(f"baart2d needs a square size, got n={n}")
        return baart2d(base)
    raise ValueError(f"unknown problem {name!r}; choose from {PROBLEM_NAMES}")
