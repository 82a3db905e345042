"""Synthetic stochastic-programming instances with known population optima.

Each family couples a scenario oracle ``f(x, xi)`` (value and gradient, or a
subgradient at kinks) with closed-form or high-precision population
quantities: the objective ``F``, an optimizer, the optimal value, and the
curvature/noise constants the experiment harness needs.  Families declare
which regularity conditions they satisfy via ``assumption_tags``:

    A1  composite smooth + Lipschitz population objective
    A2  everywhere-bounded gradient-noise variance
    A3  scenario-wise strong convexity
    A4  scenario-wise convexity
    A5  Lipschitz in x with a p-th-moment-bounded random constant
    A6  ... with a sub-exponential random constant
    A7  ... with a sub-Gaussian random constant
    A8  strong convexity around the optimum with centered slack
    A9  gradient-noise moment bound over the near-optimal set
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .distributions import (
    DistSpec,
    RngStream,
    coordinate_variances,
    dist_mean,
    marginal,
    marginal_pdf,
    marginal_support,
    moment_parameters,
    sample,
    tail_class,
)
from .geometry import qnorm

__all__ = [
    "FeasibleSet",
    "ProblemInstance",
    "make_quadratic_tracking",
    "make_degenerate_quadratic",
    "make_newsvendor",
    "make_quartic_nonlipschitz",
    "population_gap",
    "distance_to_optimum",
]

FEASIBILITY_TOL = 1e-9


def project_simplex(y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-and-threshold)."""
    y = np.asarray(y, dtype=float)
    s = np.sort(y)[::-1]
    css = np.cumsum(s) - 1.0
    idx = np.arange(1, y.size + 1)
    cond = s - css / idx > 0
    rho = int(np.nonzero(cond)[0][-1])
    theta = css[rho] / (rho + 1.0)
    return np.maximum(y - theta, 0.0)


@dataclass(frozen=True)
class FeasibleSet:
    """Convex feasible region: all of R^d, a box, a euclidean ball, or the simplex."""

    kind: str
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    center: np.ndarray | None = None
    radius: float | None = None

    def __post_init__(self):
        if self.kind not in ("all_space", "box", "ball", "simplex"):
            raise ValueError(f"unknown feasible-set kind {self.kind!r}")
        if self.kind == "box":
            lo = np.asarray(self.lo, dtype=float)
            hi = np.asarray(self.hi, dtype=float)
            if lo.shape != hi.shape or lo.ndim != 1:
                raise ValueError("box bounds must be 1-D vectors of equal length")
            if np.any(lo > hi):
                raise ValueError("box requires lo <= hi componentwise")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)
        elif self.kind == "ball":
            center = np.asarray(self.center, dtype=float)
            if center.ndim != 1:
                raise ValueError("ball center must be a 1-D vector")
            if not self.radius or self.radius <= 0:
                raise ValueError("ball radius must be > 0")
            object.__setattr__(self, "center", center)

    @staticmethod
    def all_space() -> "FeasibleSet":
        return FeasibleSet("all_space")

    @staticmethod
    def box(lo, hi, dim: int | None = None) -> "FeasibleSet":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.ndim == 0:
            if dim is None:
                raise ValueError("scalar box bounds need an explicit dim")
            lo = np.full(dim, float(lo))
            hi = np.full(dim, float(hi))
        return FeasibleSet("box", lo=lo, hi=hi)

    @staticmethod
    def ball(center, radius: float) -> "FeasibleSet":
        return FeasibleSet("ball", center=np.asarray(center, dtype=float), radius=radius)

    @staticmethod
    def simplex() -> "FeasibleSet":
        return FeasibleSet("simplex")

    @property
    def is_bounded(self) -> bool:
        return self.kind != "all_space"

    def project(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y)):
            raise ValueError("cannot project a non-finite point")
        if self.kind == "all_space":
            return y.copy()
        if self.kind == "box":
            return np.clip(y, self.lo, self.hi)
        if self.kind == "ball":
            u = y - self.center
            n = float(np.linalg.norm(u))
            if n <= self.radius:
                return y.copy()
            return self.center + self.radius / n * u
        return project_simplex(y)

    def contains(self, x, tol: float = FEASIBILITY_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.project(x))) <= tol

    def diameter(self, q: float = 2.0) -> float:
        """q-norm diameter; inf for the whole space."""
        if self.kind == "all_space":
            return math.inf
        if self.kind == "box":
            return qnorm(self.hi - self.lo, q)
        if self.kind == "ball":
            d = self.center.size
            # max q-norm over the 2-norm sphere of radius r
            factor = d ** max(1.0 / q - 0.5, 0.0) if not math.isinf(q) else 1.0
            return 2.0 * self.radius * factor
        return 2.0 ** (1.0 / q)  # between two simplex vertices

    def sample_point(self, rng: np.random.Generator, around=None) -> np.ndarray:
        """A random feasible point, used by construction-time spot checks."""
        if self.kind == "box":
            return rng.uniform(self.lo, self.hi)
        if self.kind == "ball":
            d = self.center.size
            u = rng.normal(size=d)
            u /= np.linalg.norm(u)
            r = self.radius * rng.uniform() ** (1.0 / d)
            return self.center + r * u
        if self.kind == "simplex":
            return rng.dirichlet(np.ones(len(around) if around is not None else 2))
        base = np.zeros_like(around) if around is None else np.asarray(around, float)
        return base + 2.0 * rng.normal(size=base.size)


class ProblemInstance:
    """Base class binding a scenario oracle to its population ground truth.

    Subclasses fill in the family-specific oracles; this class holds the
    shared metadata and runs the construction-time consistency checks.
    """

    smooth: bool = True

    def __init__(
        self,
        name: str,
        dim: int,
        noise: DistSpec,
        feasible_set: FeasibleSet,
        x_star: np.ndarray,
        f_star: float,
        constants: dict,
        assumption_tags: frozenset,
        unique_optimum: bool,
        validate: bool = True,
    ):
        self.name = name
        self.dim = dim
        self.noise = noise
        self.feasible_set = feasible_set
        self.x_star = np.asarray(x_star, dtype=float)
        self.f_star = float(f_star)
        self.constants = dict(constants)
        self.assumption_tags = frozenset(assumption_tags)
        self.unique_optimum = unique_optimum
        if validate:
            self._validate()

    # family hooks -------------------------------------------------------
    def scenario_value_and_grad(self, x, xi):
        raise NotImplementedError

    def batch_oracle(self, scenarios: np.ndarray):
        raise NotImplementedError

    def population_objective(self, x) -> float:
        raise NotImplementedError

    def draw_scenarios(self, stream: RngStream, n: int) -> np.ndarray:
        return sample(self.noise, stream, n)

    # shared machinery ----------------------------------------------------
    @property
    def scenario_dim(self) -> int:
        return self.noise.dimension

    def _validate(self):
        if abs(self.population_objective(self.x_star) - self.f_star) > 1e-10 * max(
            1.0, abs(self.f_star)
        ):
            raise AssertionError(
                f"{self.name}: declared optimal value disagrees with the objective"
            )
        rng = np.random.default_rng(0xA5)
        for _ in range(100):
            x = self.feasible_set.sample_point(rng, around=self.x_star)
            if self.population_objective(x) < self.f_star - 1e-9:
                raise AssertionError(
                    f"{self.name}: found feasible point below the declared optimum"
                )


def population_gap(instance: ProblemInstance, x) -> float:
    """Excess ``F(x) - F(x*)``; clamps tiny negative rounding to zero.

    Points within 1e-9 of the feasible set are projected first; anything
    farther is a domain error.
    """
    x = np.asarray(x, dtype=float)
    xp = instance.feasible_set.project(x)
    if float(np.linalg.norm(x - xp)) > FEASIBILITY_TOL:
        raise ValueError("point is infeasible beyond tolerance")
    gap = instance.population_objective(xp) - instance.f_star
    if gap < -1e-9:
        raise AssertionError(f"{instance.name}: negative gap {gap} beyond tolerance")
    return max(gap, 0.0)


def distance_to_optimum(instance: ProblemInstance, x, q: float = 2.0) -> float:
    """Squared q-norm distance to the unique optimizer."""
    if not instance.unique_optimum:
        raise ValueError(
            f"{instance.name} has no unique optimizer; distance metric undefined"
        )
    x = np.asarray(x, dtype=float)
    return qnorm(x - instance.x_star, q) ** 2


# ---------------------------------------------------------------------------
# quadratic tracking: f(x, xi) = mu/2 * ||x - xi||_2^2
# ---------------------------------------------------------------------------


class _QuadraticBatchOracle:
    """Mean of mu/2 ||H(x - xi_j)||^2 over a batch, H an orthogonal projector or I.

    Only the batch mean and one residual scalar are needed, so evaluations
    cost O(d) (O(d^2) with a projector) regardless of batch size.
    """

    def __init__(self, scenarios, mu=1.0, projector=None):
        self.mu = mu
        self.projector = projector
        self.xbar = scenarios.mean(axis=0)
        dev = scenarios - self.xbar
        if projector is not None:
            dev = dev @ projector.T
        self.residual = float(np.mean(np.sum(dev * dev, axis=1)))

    def _apply(self, u):
        return u if self.projector is None else self.projector @ u

    def value(self, x):
        r = self._apply(x - self.xbar)
        return 0.5 * self.mu * (float(r @ r) + self.residual)

    def gradient(self, x):
        return self.mu * self._apply(x - self.xbar)

    def value_and_gradient(self, x):
        return self.value(x), self.gradient(x)


class QuadraticTrackingProblem(ProblemInstance):
    """Strongly convex tracking of a noisy target: f(x, xi) = mu/2 ||x - xi||^2."""

    def __init__(self, dim, mu, noise, feasible_set, validate=True):
        if mu <= 0:
            raise ValueError("mu must be > 0")
        self.mu = float(mu)
        mean = dist_mean(noise)
        total_var = float(coordinate_variances(noise).sum())
        x_star = feasible_set.project(mean)
        f_star = 0.5 * mu * float(np.sum((x_star - mean) ** 2)) + 0.5 * mu * total_var
        self._mean = mean
        self._total_var = total_var
        sigma2_sq = mu**2 * total_var
        constants = {
            "mu": mu,
            "smooth_lipschitz": mu,
            "lipschitz": 0.0,
            "sigma_p": math.sqrt(sigma2_sq),
            "p": 2.0,
            "q": 2.0,
        }
        super().__init__(
            "quadratic_tracking",
            dim,
            noise,
            feasible_set,
            x_star,
            f_star,
            constants,
            frozenset({"A1", "A2", "A3", "A4"}),
            unique_optimum=True,
            validate=validate,
        )

    def scenario_value_and_grad(self, x, xi):
        r = np.asarray(x, float) - np.asarray(xi, float)
        return 0.5 * self.mu * float(r @ r), self.mu * r

    def batch_oracle(self, scenarios):
        return _QuadraticBatchOracle(scenarios, mu=self.mu)

    def population_objective(self, x):
        r = np.asarray(x, float) - self._mean
        return 0.5 * self.mu * (float(r @ r) + self._total_var)

    def population_gradient(self, x):
        return self.mu * (np.asarray(x, float) - self._mean)


def make_quadratic_tracking(
    d: int, mu: float, noise: DistSpec, feasible_set: FeasibleSet | None = None, validate=True
) -> ProblemInstance:
    if noise.dimension != d:
        raise ValueError("noise dimension must match d")
    return QuadraticTrackingProblem(
        d, mu, noise, feasible_set or FeasibleSet.all_space(), validate=validate
    )


# ---------------------------------------------------------------------------
# degenerate quadratic: f(x, xi) = 1/2 ||P x - P xi||_2^2, P a rank-r projector
# ---------------------------------------------------------------------------


class DegenerateQuadraticProblem(ProblemInstance):
    """Convex but not strongly convex: curvature only on a random rank-r subspace."""

    def __init__(self, dim, rank, noise, feasible_set, basis_seed=0, validate=True):
        if not 1 <= rank < dim:
            raise ValueError("rank must satisfy 1 <= rank < dim")
        if not feasible_set.is_bounded:
            raise ValueError("degenerate quadratic requires a bounded feasible set")
        self.rank = int(rank)
        rng = np.random.default_rng(basis_seed)
        basis, _ = np.linalg.qr(rng.normal(size=(dim, rank)))
        self.projector = basis @ basis.T
        mean = dist_mean(noise)
        if not feasible_set.contains(mean):
            raise ValueError(
                "scenario mean must be feasible so the optimal slice meets the set"
            )
        self._mean = mean
        variances = coordinate_variances(noise)
        self._residual = float(np.sum(variances * np.diag(self.projector)))
        x_star = feasible_set.project(mean)
        f_star = 0.5 * self._residual
        sigma2_sq = self._residual  # E ||P(xi - mean)||^2, x-independent
        constants = {
            "smooth_lipschitz": 1.0,
            "lipschitz": 0.0,
            "sigma_p": math.sqrt(sigma2_sq),
            "p": 2.0,
            "q": 2.0,
        }
        super().__init__(
            "degenerate_quadratic",
            dim,
            noise,
            feasible_set,
            x_star,
            f_star,
            constants,
            frozenset({"A1", "A2", "A4"}),
            unique_optimum=False,
            validate=validate,
        )

    def scenario_value_and_grad(self, x, xi):
        r = self.projector @ (np.asarray(x, float) - np.asarray(xi, float))
        return 0.5 * float(r @ r), r

    def batch_oracle(self, scenarios):
        return _QuadraticBatchOracle(scenarios, mu=1.0, projector=self.projector)

    def population_objective(self, x):
        r = self.projector @ (np.asarray(x, float) - self._mean)
        return 0.5 * (float(r @ r) + self._residual)

    def population_gradient(self, x):
        return self.projector @ (np.asarray(x, float) - self._mean)


def make_degenerate_quadratic(
    d: int,
    rank: int,
    noise: DistSpec,
    feasible_set: FeasibleSet,
    basis_seed: int = 0,
    validate=True,
) -> ProblemInstance:
    if noise.dimension != d:
        raise ValueError("noise dimension must match d")
    return DegenerateQuadraticProblem(
        d, rank, noise, feasible_set, basis_seed=basis_seed, validate=validate
    )


# ---------------------------------------------------------------------------
# newsvendor: f(x, xi) = sum_i h (x_i - xi_i)+ + c (xi_i - x_i)+
# ---------------------------------------------------------------------------


class _NewsvendorBatchOracle:
    def __init__(self, scenarios, holding, backlog):
        self.scenarios = scenarios
        self.h = holding
        self.c = backlog
        # per-coordinate sorted columns for the exact separable minimizer
        self.sorted_cols = np.sort(scenarios, axis=0)

    def value(self, x):
        diff = x[None, :] - self.scenarios
        cost = self.h * np.maximum(diff, 0.0) + self.c * np.maximum(-diff, 0.0)
        return float(cost.sum(axis=1).mean())

    def gradient(self, x):
        # subgradient: kink events have probability zero under continuous demand
        over = (self.scenarios < x[None, :]).mean(axis=0)
        under = (self.scenarios > x[None, :]).mean(axis=0)
        return self.h * over - self.c * under

    def value_and_gradient(self, x):
        return self.value(x), self.gradient(x)

    def exact_separable_minimizer(self, lam, anchor, lo, hi):
        """Exact minimizer of the batch cost plus lam/2 ||x - anchor||_2^2 on a box.

        Each coordinate is a 1-D convex piecewise-linear(-plus-quadratic)
        problem whose subdifferential is nondecreasing in x, so the root is
        located against the sorted scenario column.  lam = 0 reduces to the
        c/(c+h) empirical quantile.  Clipping the 1-D minimizer to [lo, hi]
        is exact for convex coordinate costs.
        """
        n, d = self.scenarios.shape
        h, c = self.h, self.c
        out = np.empty(d)
        if lam == 0.0:
            # smallest order statistic with nonnegative right derivative
            k = min(max(int(math.ceil(n * c / (c + h))), 1), n)
            out[:] = self.sorted_cols[k - 1, :]
        else:
            for i in range(d):
                col = self.sorted_cols[:, i]
                a = anchor[i]
                below_l = np.searchsorted(col, col, side="left")
                below_r = np.searchsorted(col, col, side="right")
                d_left = (h * below_l - c * (n - below_l)) / n + lam * (col - a)
                d_right = (h * below_r - c * (n - below_r)) / n + lam * (col - a)
                hits = d_right >= 0.0
                if not hits.any():
                    # minimizer above every scenario: derivative h + lam (x - a)
                    out[i] = a - h / lam
                else:
                    k = int(np.argmax(hits))
                    if d_left[k] <= 0.0:
                        out[i] = col[k]
                    else:
                        # root of the open segment just below col[k]
                        j = below_l[k]
                        out[i] = a - (h * j - c * (n - j)) / (n * lam)
        if lo is not None:
            out = np.clip(out, lo, hi)
        return out


class NewsvendorProblem(ProblemInstance):
    """Separable piecewise-linear inventory cost with holding/backlog prices."""

    smooth = False

    def __init__(self, dim, holding, backlog, demand, feasible_set, validate=True):
        if holding <= 0 or backlog <= 0:
            raise ValueError("holding and backlog costs must be > 0")
        self.h = float(holding)
        self.c = float(backlog)
        self.demand = demand
        critical = self.c / (self.c + self.h)
        x_star = np.array(
            [marginal(demand, i).ppf(critical) for i in range(dim)]
        )
        x_star = feasible_set.project(x_star)
        self._coordinate_cost_cache = {}
        f_star = sum(self._coordinate_cost(i, x_star[i]) for i in range(dim))
        lip = max(self.h, self.c) * math.sqrt(dim)  # 2-norm bound on subgradients
        tags = {"A4", "A5", "A6", "A7"}
        constants = {
            "smooth_lipschitz": 0.0,
            "lipschitz": lip,
            "psi_m": lip,
            "q": 2.0,
            "demand_tail": tail_class(demand).kind,
        }
        super().__init__(
            "newsvendor",
            dim,
            demand,
            feasible_set,
            x_star,
            f_star,
            constants,
            frozenset(tags),
            unique_optimum=True,
            validate=validate,
        )

    def _coordinate_cost(self, i, x):
        """E[h (x - xi_i)+ + c (xi_i - x)+] by adaptive quadrature (tol 1e-10)."""
        key = (i, float(x))
        if key in self._coordinate_cost_cache:
            return self._coordinate_cost_cache[key]
        pdf = marginal_pdf(self.demand, i)
        lo, hi = marginal_support(self.demand, i)
        h, c = self.h, self.c
        total = 0.0
        if lo < x:
            val, _ = integrate.quad(
                lambda s: h * (x - s) * pdf(s), lo, min(x, hi),
                epsabs=1e-11, epsrel=1e-11, limit=200,
            )
            total += val
        if hi > x:
            val, _ = integrate.quad(
                lambda s: c * (s - x) * pdf(s), max(x, lo), hi,
                epsabs=1e-11, epsrel=1e-11, limit=200,
            )
            total += val
        self._coordinate_cost_cache[key] = total
        return total

    def scenario_value_and_grad(self, x, xi):
        x = np.asarray(x, float)
        xi = np.asarray(xi, float)
        diff = x - xi
        value = float(
            np.sum(self.h * np.maximum(diff, 0.0) + self.c * np.maximum(-diff, 0.0))
        )
        grad = np.where(diff > 0, self.h, np.where(diff < 0, -self.c, 0.0))
        return value, grad

    def batch_oracle(self, scenarios):
        return _NewsvendorBatchOracle(scenarios, self.h, self.c)

    def population_objective(self, x):
        x = np.asarray(x, float)
        return sum(self._coordinate_cost(i, x[i]) for i in range(self.dim))

    def population_gradient(self, x):
        x = np.asarray(x, float)
        cdf = np.array([marginal(self.demand, i).cdf(x[i]) for i in range(self.dim)])
        return self.h * cdf - self.c * (1.0 - cdf)


def make_newsvendor(
    d: int,
    holding: float,
    backlog: float,
    demand: DistSpec,
    feasible_set: FeasibleSet | None = None,
    validate=True,
) -> ProblemInstance:
    if demand.dimension != d:
        raise ValueError("demand dimension must match d")
    return NewsvendorProblem(
        d, holding, backlog, demand, feasible_set or FeasibleSet.all_space(), validate=validate
    )


# ---------------------------------------------------------------------------
# quartic growth: f(x, xi) = 1/2 ||x - xi||_2^2 + 1/4 ||x||_2^4, E xi = theta
# ---------------------------------------------------------------------------


class _QuarticBatchOracle:
    def __init__(self, scenarios):
        self.xbar = scenarios.mean(axis=0)
        dev = scenarios - self.xbar
        self.residual = float(np.mean(np.sum(dev * dev, axis=1)))

    def value(self, x):
        r = x - self.xbar
        return 0.5 * (float(r @ r) + self.residual) + 0.25 * float(x @ x) ** 2

    def gradient(self, x):
        return (x - self.xbar) + float(x @ x) * x

    def value_and_gradient(self, x):
        return self.value(x), self.gradient(x)


class QuarticProblem(ProblemInstance):
    """Strongly convex with quartic growth, so grad F is unbounded on R^d.

    Scenarios are theta + centered noise, which keeps the gradient noise at
    the optimum equal to the (centered) noise vector itself; its moment
    bound is therefore inherited directly from the noise spec, and the same
    bound holds on any near-optimal set because the noise is additive and
    x-independent.
    """

    def __init__(self, dim, theta, noise, moment_order=None, validate=True):
        self.theta = np.asarray(theta, dtype=float)
        if self.theta.shape != (dim,):
            raise ValueError("theta must be a length-d vector")
        self._noise_mean = dist_mean(noise)
        self._total_var = float(coordinate_variances(noise).sum())
        nt = float(np.linalg.norm(self.theta))
        if nt == 0.0:
            t = 1.0
            x_star = np.zeros(dim)
        else:
            t = optimize.brentq(
                lambda s: s * (1.0 + s * s * nt * nt) - 1.0, 0.0, 1.0, xtol=1e-14
            )
            x_star = t * self.theta
        f_star = (
            0.5 * float(np.sum((x_star - self.theta) ** 2))
            + 0.25 * float(x_star @ x_star) ** 2
            + 0.5 * self._total_var
        )
        tc = tail_class(noise)
        if moment_order is None:
            # heavy tails: any order strictly below the finiteness threshold
            moment_order = (2.0 + tc.p) / 2.0 if tc.kind == "pth_moment" else 2.0
        mp = moment_parameters(noise, moment_order)
        constants = {
            "mu": 1.0,
            "sigma_p": math.sqrt(self._total_var),
            "psi_p": mp.psi_p,
            "p": moment_order,
            "q": 2.0,
        }
        super().__init__(
            "quartic",
            dim,
            noise,
            FeasibleSet.all_space(),
            x_star,
            f_star,
            constants,
            frozenset({"A3", "A8", "A9"}),
            unique_optimum=True,
            validate=validate,
        )

    def draw_scenarios(self, stream, n):
        raw = sample(self.noise, stream, n)
        return self.theta[None, :] + (raw - self._noise_mean[None, :])

    def scenario_value_and_grad(self, x, xi):
        x = np.asarray(x, float)
        r = x - np.asarray(xi, float)
        sq = float(x @ x)
        return 0.5 * float(r @ r) + 0.25 * sq * sq, r + sq * x

    def batch_oracle(self, scenarios):
        return _QuarticBatchOracle(scenarios)

    def population_objective(self, x):
        x = np.asarray(x, float)
        r = x - self.theta
        return 0.5 * (float(r @ r) + self._total_var) + 0.25 * float(x @ x) ** 2

    def population_gradient(self, x):
        x = np.asarray(x, float)
        return (x - self.theta) + float(x @ x) * x


def make_quartic_nonlipschitz(
    d: int,
    theta,
    noise: DistSpec,
    feasible_set: FeasibleSet | None = None,
    moment_order: float | None = None,
    validate=True,
) -> ProblemInstance:
    if feasible_set is not None and feasible_set.kind != "all_space":
        raise ValueError("quartic family is defined unconstrained")
    if noise.dimension != d:
        raise ValueError("noise dimension must match d")
    return QuarticProblem(d, theta, noise, moment_order=moment_order, validate=validate)
