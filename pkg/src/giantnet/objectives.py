"""Local cost functions held by the agents, and synthetic problem generation.

Each objective family exposes value, gradient and Hessian, and declares
global curvature bounds mu and L such that mu*I <= hessian(x) <= L*I
everywhere. Objectives are immutable after construction and evaluation is
pure, so instances are safe to share across threads.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatch, InvalidSpec
from .numerics import spd_factorize, spd_solve

# Quadratic heterogeneity h maps to per-agent eigenvalues drawn
# log-uniformly from [1, 1 + h * HETEROGENEITY_SPREAD], so h = 1 yields a
# condition spread of 11 across the instance.
HETEROGENEITY_SPREAD = 10.0


class LocalObjective(ABC):
    """A twice-differentiable strongly convex cost over R^d."""

    @property
    @abstractmethod
    def dimension(self) -> int: ...

    @abstractmethod
    def value(self, x: np.ndarray) -> float: ...

    @abstractmethod
    def gradient(self, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def hessian(self, x: np.ndarray) -> np.ndarray: ...

    def _check_point(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise DimensionMismatch(
                f"point has shape {x.shape}, objective dimension is {self.dimension}"
            )
        return x


class QuadraticObjective(LocalObjective):
    """f(x) = 0.5 * x'Ax + b'x + c with symmetric positive definite A."""

    def __init__(self, a: np.ndarray, b: np.ndarray, c: float = 0.0):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or b.shape != (a.shape[0],):
            raise DimensionMismatch(
                f"incompatible quadratic data: A {a.shape}, b {b.shape}"
            )
        self.a = a
        self.b = b
        self.c = float(c)

    @property
    def dimension(self) -> int:
        return self.a.shape[0]

    def value(self, x: np.ndarray) -> float:
        x = self._check_point(x)
        return float(0.5 * x @ self.a @ x + self.b @ x + self.c)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = self._check_point(x)
        return self.a @ x + self.b

    def hessian(self, x: np.ndarray) -> np.ndarray:
        self._check_point(x)
        return self.a.copy()


class LogisticObjective(LocalObjective):
    """Ridge-regularized logistic loss over labelled samples.

    f(x) = (1/m) * sum_j log(1 + exp(-y_j * a_j'x)) + (ridge/2) * ||x||^2

    with features a_j stacked as rows, labels y_j in {-1, +1} and
    ridge > 0, which guarantees mu >= ridge.
    """

    def __init__(self, features: np.ndarray, labels: np.ndarray, ridge: float):
        features = np.asarray(features, dtype=float)
        labels = np.asarray(labels, dtype=float)
        if features.ndim != 2 or labels.shape != (features.shape[0],):
            raise DimensionMismatch(
                f"incompatible sample data: features {features.shape}, labels {labels.shape}"
            )
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise InvalidSpec("labels must be -1 or +1")
        if ridge <= 0:
            raise InvalidSpec("ridge weight must be positive")
        self.features = features
        self.labels = labels
        self.ridge = float(ridge)

    @property
    def dimension(self) -> int:
        return self.features.shape[1]

    def _margins(self, x: np.ndarray) -> np.ndarray:
        return self.labels * (self.features @ x)

    def value(self, x: np.ndarray) -> float:
        x = self._check_point(x)
        losses = np.logaddexp(0.0, -self._margins(x))
        return float(losses.mean() + 0.5 * self.ridge * x @ x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = self._check_point(x)
        # d/dt log(1 + exp(-t)) = -sigmoid(-t)
        coeffs = -self.labels * expit(-self._margins(x))
        m = self.features.shape[0]
        return self.features.T @ coeffs / m + self.ridge * x

    def hessian(self, x: np.ndarray) -> np.ndarray:
        x = self._check_point(x)
        s = expit(self._margins(x))
        weights = s * (1.0 - s)
        m = self.features.shape[0]
        h = (self.features.T * weights) @ self.features / m
        h += self.ridge * np.eye(self.dimension)
        return h


@dataclass(frozen=True)
class ProblemInstance:
    """n local objectives over a shared decision variable, with global bounds.

    ``mu`` and ``lipschitz`` bound every local Hessian from below and above.
    ``reference_solution`` is the minimizer of the averaged cost when known;
    the harness fills it in for families without a closed form.
    ``bounds_estimated`` marks mu/L obtained by sampling rather than by
    construction, which relaxes diagnostic tolerances.
    """

    objectives: tuple[LocalObjective, ...]
    mu: float
    lipschitz: float
    reference_solution: np.ndarray | None = None
    bounds_estimated: bool = False

    def __post_init__(self):
        if not self.objectives:
            raise InvalidSpec("instance needs at least one objective")
        dims = {obj.dimension for obj in self.objectives}
        if len(dims) != 1:
            raise DimensionMismatch(f"objectives disagree on dimension: {sorted(dims)}")
        if not 0 < self.mu <= self.lipschitz:
            raise InvalidSpec(f"bounds must satisfy 0 < mu <= L, got ({self.mu}, {self.lipschitz})")

    @property
    def n_agents(self) -> int:
        return len(self.objectives)

    @property
    def dimension(self) -> int:
        return self.objectives[0].dimension

    def average_value(self, x: np.ndarray) -> float:
        """(1/n) * sum_i f_i(x), the global cost at a single point."""
        return sum(obj.value(x) for obj in self.objectives) / self.n_agents

    def average_gradient(self, x: np.ndarray) -> np.ndarray:
        g = np.zeros(self.dimension)
        for obj in self.objectives:
            g += obj.gradient(x)
        return g / self.n_agents

    def average_hessian(self, x: np.ndarray) -> np.ndarray:
        h = np.zeros((self.dimension, self.dimension))
        for obj in self.objectives:
            h += obj.hessian(x)
        return h / self.n_agents

    def stacked_gradient(self, x: np.ndarray) -> np.ndarray:
        """Row i of the result is grad f_i evaluated at row i of ``x``."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_agents, self.dimension):
            raise DimensionMismatch(
                f"stacked iterate has shape {x.shape}, expected {(self.n_agents, self.dimension)}"
            )
        return np.stack([obj.gradient(x[i]) for i, obj in enumerate(self.objectives)])

    def with_reference(self, x_star: np.ndarray) -> "ProblemInstance":
        return replace(self, reference_solution=np.asarray(x_star, dtype=float))


@dataclass(frozen=True)
class ProblemSpec:
    """Recipe for a synthetic instance; the ``problem`` block of a config file."""

    kind: str
    n: int
    d: int
    samples_per_agent: int = 20
    ridge: float = 0.1
    heterogeneity: float = 0.0

    def __post_init__(self):
        if self.kind not in ("quadratic", "logistic"):
            raise InvalidSpec(f"unknown problem kind {self.kind!r}")
        if self.n < 1 or self.d < 1:
            raise InvalidSpec(f"need n >= 1 and d >= 1, got n={self.n}, d={self.d}")
        if self.heterogeneity < 0:
            raise InvalidSpec("heterogeneity must be nonnegative")
        if self.kind == "logistic":
            if self.ridge <= 0:
                raise InvalidSpec("logistic problems need ridge > 0")
            if self.samples_per_agent < 1:
                raise InvalidSpec("logistic problems need samples_per_agent >= 1")


def _random_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def generate_problem(seed: int, spec: ProblemSpec) -> ProblemInstance:
    """Build a deterministic synthetic instance from a seed and a spec.

    Uses the Philox counter-based generator, so identical (seed, spec)
    pairs reproduce bitwise identical instances on any platform.

    Quadratic instances carry an exact reference solution obtained from
    the averaged normal equations. Logistic instances leave it unset; the
    harness computes one with the centralized Newton oracle.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    if spec.kind == "quadratic":
        return _generate_quadratic(rng, spec)
    return _generate_logistic(rng, spec)


def _generate_quadratic(rng: np.random.Generator, spec: ProblemSpec) -> ProblemInstance:
    n, d, h = spec.n, spec.d, spec.heterogeneity
    top = 1.0 + h * HETEROGENEITY_SPREAD
    mats = []
    for _ in range(n):
        if h == 0.0:
            mats.append(np.eye(d))
            continue
        eigs = np.exp(rng.uniform(0.0, np.log(top), size=d))
        q = _random_orthogonal(rng, d)
        a = (q * eigs) @ q.T
        mats.append(0.5 * (a + a.T))
    b0 = rng.standard_normal(d)
    offsets = b0 + h * rng.standard_normal((n, d))
    objectives = tuple(QuadraticObjective(a, b) for a, b in zip(mats, offsets))

    # Exact minimizer of the averaged cost: (sum A_i) x = -sum b_i.
    a_sum = np.sum(mats, axis=0)
    x_star = spd_solve(spd_factorize(a_sum), -offsets.sum(axis=0))
    return ProblemInstance(
        objectives=objectives, mu=1.0, lipschitz=top, reference_solution=x_star
    )


def _generate_logistic(rng: np.random.Generator, spec: ProblemSpec) -> ProblemInstance:
    n, d, m, h = spec.n, spec.d, spec.samples_per_agent, spec.heterogeneity
    x_true = rng.standard_normal(d)
    objectives = []
    lipschitz = 0.0
    for _ in range(n):
        shift = rng.standard_normal(d)
        feats = rng.standard_normal((m, d)) + h * shift
        probs = expit(feats @ x_true)
        labels = np.where(rng.random(m) < probs, 1.0, -1.0)
        objectives.append(LogisticObjective(feats, labels, spec.ridge))
        gram_top = float(np.linalg.eigvalsh(feats.T @ feats)[-1])
        lipschitz = max(lipschitz, spec.ridge + gram_top / (4.0 * m))
    return ProblemInstance(
        objectives=tuple(objectives), mu=spec.ridge, lipschitz=lipschitz
    )


def estimate_bounds(
    instance: ProblemInstance, sample_points: list[np.ndarray]
) -> tuple[float, float]:
    """Numerically bracket the curvature of an instance over sample points.

    Returns (mu_hat, L_hat): the smallest and largest Hessian eigenvalues
    seen across all objectives and samples.
    """
    if not sample_points:
        raise InvalidSpec("need at least one sample point")
    mu_hat = np.inf
    l_hat = -np.inf
    for x in sample_points:
        for obj in instance.objectives:
            eigs = np.linalg.eigvalsh(obj.hessian(x))
            mu_hat = min(mu_hat, eigs[0])
            l_hat = max(l_hat, eigs[-1])
    return float(mu_hat), float(l_hat)


def finite_difference_gradient(func, x: np.ndarray) -> np.ndarray:
    """Central-difference gradient of a scalar function, step 1e-6 * (1 + ||x||_inf)."""
    x = np.asarray(x, dtype=float)
    h = 1e-6 * (1.0 + np.abs(x).max(initial=0.0))
    grad = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (func(x + e) - func(x - e)) / (2.0 * h)
    return grad


def finite_difference_hessian(grad_func, x: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian of a gradient function; columns are perturbed coordinates."""
    x = np.asarray(x, dtype=float)
    h = 1e-6 * (1.0 + np.abs(x).max(initial=0.0))
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((grad_func(x + e) - grad_func(x - e)) / (2.0 * h))
    return np.stack(cols, axis=1)
