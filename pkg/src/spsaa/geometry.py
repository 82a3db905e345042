"""q-norm arithmetic, dual exponents, and the anchored squared-norm penalty.

The penalty ``0.5 * ||x - anchor||_{q'}^2`` with ``q'`` in (1, 2] is the
distance-generating function used both by the regularized sample-average
estimator and by the mirror-descent baseline.  Its two workhorse identities,

* the dual-norm identity  ``||grad(x)||_{q'/(q'-1)} == ||x - anchor||_{q'}``,
* ``(q'-1)``-strong convexity with respect to the q'-norm,

are exercised directly by the invariant test suite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GeometryConfig",
    "qnorm",
    "dual_exponent",
    "one_norm_surrogate_exponent",
    "regularizer_value",
    "regularizer_gradient",
]

# Below this q'-norm of (x - anchor) the gradient is set to exactly zero to
# avoid underflow-driven NaN from 0**negative powers.
_TINY_NORM = 1e-300


def _as_finite_vector(v, name: str = "v") -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def qnorm(v, q: float) -> float:
    """Return ``(sum_i |v_i|^q)^(1/q)``; for ``q == inf`` the max-norm.

    Computed with max-rescaling so large exponents do not overflow.
    """
    arr = _as_finite_vector(v)
    if not q >= 1:
        raise ValueError(f"norm exponent must satisfy q >= 1, got {q}")
    if arr.size == 0:
        return 0.0
    a = np.abs(arr)
    m = float(a.max())
    if m == 0.0:
        return 0.0
    if math.isinf(q):
        return m
    return m * float(np.sum((a / m) ** q)) ** (1.0 / q)


def dual_exponent(q: float) -> float:
    """Holder conjugate ``q / (q - 1)``, with the conventions 1 <-> inf."""
    if not q >= 1:
        raise ValueError(f"norm exponent must satisfy q >= 1, got {q}")
    if q == 1.0:
        return math.inf
    if math.isinf(q):
        return 1.0
    return q / (q - 1.0)


def one_norm_surrogate_exponent(d: int) -> float:
    """Exponent ``1 + 1/ln(d)`` used to stand in for the 1-norm when d >= 2.

    For every vector v the sandwich
    ``qnorm(v, 1 + 1/ln d) <= qnorm(v, 1) <= e * qnorm(v, 1 + 1/ln d)``
    holds, so bounds stated for this exponent transfer to the 1-norm at the
    cost of a factor e.
    """
    if d < 2:
        raise ValueError(f"surrogate exponent needs dimension >= 2, got {d}")
    return 1.0 + 1.0 / math.log(d)


@dataclass(frozen=True)
class GeometryConfig:
    """Norm geometry of a problem: primal exponent q, penalty exponent q'.

    ``dual_q`` is derived from ``q`` when not supplied.  ``q = inf`` is
    rejected here (the experiments never optimize in that geometry) even
    though :func:`qnorm` supports it for diagnostics.
    """

    q: float
    q_prime: float
    anchor: np.ndarray
    dual_q: float | None = None

    def __post_init__(self):
        if math.isinf(self.q):
            raise ValueError("q = inf is not supported as an optimization geometry")
        if not self.q >= 1:
            raise ValueError(f"q must satisfy q >= 1, got {self.q}")
        if not (1.0 < self.q_prime <= 2.0):
            raise ValueError(f"q_prime must lie in (1, 2], got {self.q_prime}")
        if self.q_prime > self.q + 1e-12:
            raise ValueError(
                f"q_prime must not exceed q (got q'={self.q_prime}, q={self.q})"
            )
        anchor = _as_finite_vector(self.anchor, "anchor")
        object.__setattr__(self, "anchor", anchor)
        dq = dual_exponent(self.q)
        if self.dual_q is None:
            object.__setattr__(self, "dual_q", dq)
        elif not math.isclose(self.dual_q, dq, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(
                f"dual_q={self.dual_q} inconsistent with q={self.q} (expected {dq})"
            )

    @property
    def dim(self) -> int:
        return self.anchor.size


def penalty_value(u: np.ndarray, q_prime: float) -> float:
    """``0.5 * ||u||_{q'}^2`` for a displacement u already measured from the anchor."""
    return 0.5 * qnorm(u, q_prime) ** 2


def penalty_gradient(u: np.ndarray, q_prime: float) -> np.ndarray:
    """Gradient of :func:`penalty_value` at displacement u.

    Componentwise ``||u||^(2-q') * sign(u_i) * |u_i|^(q'-1)``; the zero
    vector at u = 0 is the continuous extension.
    """
    if not q_prime > 1:
        raise ValueError(f"gradient requires q_prime > 1, got {q_prime}")
    u = np.asarray(u, dtype=float)
    n = qnorm(u, q_prime)
    if n < _TINY_NORM:
        return np.zeros_like(u)
    a = np.abs(u)
    return n ** (2.0 - q_prime) * np.sign(u) * a ** (q_prime - 1.0)


def regularizer_value(x, cfg: GeometryConfig) -> float:
    """Penalty ``0.5 * ||x - anchor||_{q'}^2``; zero exactly at the anchor."""
    x = _as_finite_vector(x, "x")
    if x.size != cfg.anchor.size:
        raise ValueError(
            f"dimension mismatch: x has {x.size} entries, anchor has {cfg.anchor.size}"
        )
    return penalty_value(x - cfg.anchor, cfg.q_prime)


def regularizer_gradient(x, cfg: GeometryConfig) -> np.ndarray:
    """Gradient of :func:`regularizer_value`.

    Satisfies the dual-norm identity
    ``qnorm(grad, q'/(q'-1)) == qnorm(x - anchor, q')`` up to rounding.
    """
    x = _as_finite_vector(x, "x")
    if x.size != cfg.anchor.size:
        raise ValueError(
            f"dimension mismatch: x has {x.size} entries, anchor has {cfg.anchor.size}"
        )
    return penalty_gradient(x - cfg.anchor, cfg.q_prime)
