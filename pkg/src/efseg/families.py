"""Distribution layer for univariate exponential families in minimal
canonical form h(y) exp(theta . T(y) - A(theta)).

Each family knows its sufficient statistic T, log-partition function A,
the gradient map grad A (the mean of T) and its inverse, the segment
contrast cost, and the variance/mean constants (zeta, kappa) used by the
penalized selection theory.  The gradient map is a bijection onto an open
set of componentwise-positive mean vectors; families are restricted so
that E[T] > 0 holds on the whole natural domain (for the Gaussian this
means a positive mean).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BoundaryError, DomainError

__all__ = [
    "Family",
    "Poisson",
    "Exponential",
    "GaussianPositiveMean",
    "Pareto",
    "Gamma",
    "Weibull",
    "Laplace",
    "Binomial",
    "NegativeBinomial",
    "Categorical",
    "ParamBox",
    "TheoryConstants",
    "family_from_name",
    "sufficient_stat",
    "log_partition",
    "grad_log_partition",
    "inv_grad_log_partition",
    "segment_cost",
    "kullback_pointwise",
    "hellinger_sq_pointwise",
    "theory_constants",
    "chi_square",
]

# Cost-kernel codes shared with the dynamic-programming module.  Weibull and
# Laplace reduce to the exponential cost because their statistic is itself
# exponentially distributed.
KC_POISSON = 0
KC_EXPLIKE = 1
KC_GAUSSIAN = 2
KC_PARETO = 3
KC_GAMMA = 4
KC_BINOMIAL = 5
KC_NEGBIN = 6
KC_CATEGORICAL = 7


def _xlogx(v: np.ndarray) -> np.ndarray:
    """x * log(x) with the 0 * log 0 = 0 convention, elementwise."""
    v = np.asarray(v, dtype=float)
    safe = np.where(v > 0.0, v, 1.0)
    return np.where(v > 0.0, v * np.log(safe), 0.0)


@dataclass(frozen=True)
class TheoryConstants:
    """Variance/mean sandwich constants for a parameter box.

    zeta and kappa satisfy zeta * E[T^i] <= Var(T^i) <= kappa * E[T^i] for
    parameters in the box; e_min and e_max bound the componentwise mean of
    the sufficient statistic.  m_eps / M_eps are the categorical convexity
    bounds and are None for other families.
    """

    zeta: float
    kappa: float
    e_min: float
    e_max: float
    m_eps: float | None = None
    M_eps: float | None = None

    def __post_init__(self):
        if not (self.zeta > 0 and self.kappa > 0):
            raise ValueError("zeta and kappa must be positive")
        if self.zeta > self.kappa * (1 + 1e-12):
            raise ValueError(
                f"invalid constants: zeta={self.zeta:.6g} exceeds kappa={self.kappa:.6g} "
                "for this box"
            )
        if not (0 < self.e_min <= self.e_max):
            raise ValueError("expectation bounds must satisfy 0 < e_min <= e_max")


class Family:
    """Base class; concrete families implement the per-distribution maps."""

    name: str = ""
    dim: int = 1
    cost_kernel_id: int = -1

    # -- parameter handling -------------------------------------------------

    def _theta(self, theta) -> np.ndarray:
        arr = np.atleast_1d(np.asarray(theta, dtype=float))
        if arr.shape != (self.dim,):
            raise ValueError(
                f"{self.name}: natural parameter must have length {self.dim}, "
                f"got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise DomainError(f"{self.name}: non-finite natural parameter {arr}")
        return arr

    def _mu(self, mu) -> np.ndarray:
        arr = np.atleast_1d(np.asarray(mu, dtype=float))
        if arr.shape != (self.dim,):
            raise ValueError(
                f"{self.name}: mean vector must have length {self.dim}, "
                f"got shape {arr.shape}"
            )
        return arr

    def validate_theta(self, theta) -> np.ndarray:
        """Return theta as an array, raising DomainError when outside the
        natural domain (which includes E[T] > 0 componentwise)."""
        raise NotImplementedError

    @property
    def cost_kernel_aux(self) -> np.ndarray:
        return np.zeros(1)

    # -- statistic / support -----------------------------------------------

    def stat_one(self, y) -> np.ndarray:
        raise NotImplementedError

    def stats_array(self, data) -> np.ndarray:
        """(n, dim) sufficient statistics; raises DomainError naming the
        first out-of-support index."""
        raise NotImplementedError

    def _support_violation(self, data: np.ndarray, bad: np.ndarray, desc: str):
        if bad.any():
            i = int(np.argmax(bad))
            raise DomainError(
                f"{self.name}: observation {data[i]!r} at index {i} outside support ({desc})"
            )

    # -- log-partition and gradient maps -------------------------------------

    def log_partition(self, theta) -> float:
        raise NotImplementedError

    def grad_log_partition(self, theta) -> np.ndarray:
        raise NotImplementedError

    def inv_grad_log_partition(self, mu) -> np.ndarray:
        raise NotImplementedError

    # -- segment contrast -----------------------------------------------------

    def cost_from_stats(self, sums, lengths, invalid: str = "raise") -> np.ndarray:
        """Vectorized minimal contrast of segments with statistic totals
        `sums` (m, dim) and lengths `lengths` (m,).

        invalid="raise" raises BoundaryError on degenerate segments of
        continuous families; invalid="inf" marks them +inf instead.
        """
        raise NotImplementedError

    def _invalid(self, mask: np.ndarray, costs: np.ndarray, invalid: str, what: str):
        if not mask.any():
            return costs
        if invalid == "inf":
            return np.where(mask, np.inf, costs)
        raise BoundaryError(f"{self.name}: {what}")

    # -- divergences ----------------------------------------------------------

    def hellinger_sq(self, theta1, theta2) -> float:
        raise NotImplementedError(
            f"{self.name}: no closed-form Hellinger distance implemented"
        )

    # -- sampling ---------------------------------------------------------------

    def sample(self, theta, size: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def natural_from_rate(self, rate: float) -> np.ndarray:
        raise NotImplementedError(
            f"{self.name}: no canonical rate parametrization"
        )

    # -- theory constants ---------------------------------------------------------

    def constants(self, box: "ParamBox", eps: float | None = None) -> TheoryConstants:
        raise NotImplementedError

    def _e_bounds_from_corners(self, box: "ParamBox") -> tuple[float, float]:
        """Componentwise extremes of grad A over the box corners (valid here
        because every implemented gradient map is monotone per coordinate)."""
        corners = [box.lower, box.upper]
        if self.dim > 1:
            corners = [
                np.where(np.array(bits), box.upper, box.lower)
                for bits in np.ndindex(*(2,) * self.dim)
            ]
        grads = np.array([self.grad_log_partition(c) for c in corners])
        return float(grads.min()), float(grads.max())

    def __repr__(self):
        return f"{type(self).__name__}()"

    def __eq__(self, other):
        return type(self) is type(other) and self.__dict__ == other.__dict__

    def __hash__(self):
        return hash((type(self).__name__, tuple(sorted(self.__dict__.items()))))


@dataclass(frozen=True)
class ParamBox:
    """Compact axis-aligned box of natural parameters."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __init__(self, lower, upper):
        lo = tuple(float(v) for v in np.atleast_1d(lower))
        hi = tuple(float(v) for v in np.atleast_1d(upper))
        if len(lo) != len(hi):
            raise ValueError("box endpoints must have the same length")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError("box must satisfy lower < upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def validate_for(self, spec: Family):
        if self.dim != spec.dim:
            raise ValueError(f"box dimension {self.dim} != family dimension {spec.dim}")
        spec.validate_theta(np.array(self.lower))
        spec.validate_theta(np.array(self.upper))

    def contains(self, theta) -> bool:
        t = np.atleast_1d(np.asarray(theta, float))
        return bool(np.all(t >= self.lower) and np.all(t <= self.upper))


# ---------------------------------------------------------------------------
# concrete families
# ---------------------------------------------------------------------------


class Poisson(Family):
    """Counts with natural parameter log(lambda); A(theta) = exp(theta)."""

    name = "poisson"
    dim = 1
    cost_kernel_id = KC_POISSON

    def validate_theta(self, theta):
        return self._theta(theta)

    def stat_one(self, y):
        yv = float(y)
        if yv < 0 or yv != math.floor(yv):
            raise DomainError(f"poisson: {y!r} is not a nonnegative integer")
        return np.array([yv])

    def stats_array(self, data):
        arr = np.asarray(data, dtype=float)
        bad = ~np.isfinite(arr) | (arr < 0) | (arr != np.floor(arr))
        self._support_violation(arr, bad, "nonnegative integers")
        return arr[:, None]

    def log_partition(self, theta):
        (t,) = self.validate_theta(theta)
        return float(math.exp(t))

    def grad_log_partition(self, theta):
        (t,) = self.validate_theta(theta)
        return np.array([math.exp(t)])

    def inv_grad_log_partition(self, mu):
        (m,) = self._mu(mu)
        if not m > 0:
            raise BoundaryError(f"poisson: mean {m} not in (0, inf)")
        return np.array([math.log(m)])

    def cost_from_stats(self, sums, lengths, invalid="raise"):
        s = np.asarray(sums, float)[:, 0]
        ln = np.asarray(lengths, float)
        safe = np.where(s > 0, s, 1.0)
        return np.where(s > 0, s - s * np.log(safe / ln), 0.0)

    def hellinger_sq(self, theta1, theta2):
        (t1,) = self.validate_theta(theta1)
        (t2,) = self.validate_theta(theta2)
        l1, l2 = math.exp(t1), math.exp(t2)
        return 1.0 - math.exp(-0.5 * (math.sqrt(l1) - math.sqrt(l2)) ** 2)

    def sample(self, theta, size, rng):
        (t,) = self.validate_theta(theta)
        return rng.poisson(math.exp(t), size=size).astype(float)

    def natural_from_rate(self, rate):
        if not rate > 0:
            raise ValueError("poisson rate must be positive")
        return np.array([math.log(rate)])

    def constants(self, box, eps=None):
        box.validate_for(self)
        e_lo, e_hi = self._e_bounds_from_corners(box)
        return TheoryConstants(zeta=1.0, kappa=1.0, e_min=e_lo, e_max=e_hi)


class _NegativeThetaScalar(Family):
    """Shared machinery for families whose statistic is exponentially
    distributed given theta < 0: A(theta) = -log(-theta)."""

    cost_kernel_id = KC_EXPLIKE

    def validate_theta(self, theta):
        arr = self._theta(theta)
        if not arr[0] < 0:
            raise DomainError(f"{self.name}: theta must be negative, got {arr[0]}")
        return arr

    def log_partition(self, theta):
        (t,) = self.validate_theta(theta)
        return float(-math.log(-t))

    def grad_log_partition(self, theta):
        (t,) = self.validate_theta(theta)
        return np.array([-1.0 / t])

    def inv_grad_log_partition(self, mu):
        (m,) = self._mu(mu)
        if not m > 0:
            raise BoundaryError(f"{self.name}: mean {m} not in (0, inf)")
        return np.array([-1.0 / m])

    def cost_from_stats(self, sums, lengths, invalid="raise"):
        s = np.asarray(sums, float)[:, 0]
        ln = np.asarray(lengths, float)
        bad = ~(s > 0)
        safe = np.where(bad, 1.0, s)
        costs = ln * (1.0 + np.log(safe / ln))
        return self._invalid(bad, costs, invalid, "segment statistic total is zero")

    def _ratio_constants(self, box: "ParamBox") -> TheoryConstants:
        box.validate_for(self)
        lo, hi = box.lower[0], box.upper[0]
        e_lo, e_hi = self._e_bounds_from_corners(box)
        return TheoryConstants(zeta=-1.0 / lo, kappa=-1.0 / hi, e_min=e_lo, e_max=e_hi)

    def constants(self, box, eps=None):
        return self._ratio_constants(box)


class Exponential(_NegativeThetaScalar):
    """Exponential rate model, natural parameter theta = -lambda."""

    name = "exponential"
    dim = 1

    def stat_one(self, y):
        yv = float(y)
        if yv < 0:
            raise DomainError(f"exponential: {y!r} is negative")
        return np.array([yv])

    def stats_array(self, data):
        arr = np.asarray(data, dtype=float)
        bad = ~np.isfinite(arr) | (arr < 0)
        self._support_violation(arr, bad, "nonnegative reals")
        return arr[:, None]

    def hellinger_sq(self, theta1, theta2):
        (t1,) = self.validate_theta(theta1)
        (t2,) = self.validate_theta(theta2)
        l1, l2 = -t1, -t2
        return 1.0 - 2.0 * math.sqrt(l1 * l2) / (l1 + l2)

    def sample(self, theta, size, rng):
        # inverse-CDF transform so streams replicate from raw uniforms
        (t,) = self.validate_theta(theta)
        u = rng.random(size)
        return -np.log1p(-u) / (-t)

    def natural_from_rate(self, rate):
        if not rate > 0:
            raise ValueError("exponential rate must be positive")
        return np.array([-rate])


class GaussianPositiveMean(Family):
    """Gaussian with unknown positive mean and unknown variance;
    theta = (mu/sigma^2, -1/(2 sigma^2)), T = (y, y^2)."""

    name = "gaussian"
    dim = 2
    cost_kernel_id = KC_GAUSSIAN

    def validate_theta(self, theta):
        arr = self._theta(theta)
        if not arr[1] < 0:
            raise DomainError(f"gaussian: theta2 must be negative, got {arr[1]}")
        if not arr[0] > 0:
            raise DomainError(
                f"gaussian: theta1 must be positive (positive-mean restriction), got {arr[0]}"
            )
        return arr

    def stat_one(self, y):
        yv = float(y)
        return np.array([yv, yv * yv])

    def stats_array(self, data):
        arr = np.asarray(data, dtype=float)
        bad = ~np.isfinite(arr)
        self._support_violation(arr, bad, "finite reals")
        return np.column_stack([arr, arr * arr])

    def log_partition(self, theta):
        t1, t2 = self.validate_theta(theta)
        return float(-t1 * t1 / (4.0 * t2) - 0.5 * math.log(-2.0 * t2))

    def grad_log_partition(self, theta):
        t1, t2 = self.validate_theta(theta)
        return np.array([-t1 / (2.0 * t2), t1 * t1 / (4.0 * t2 * t2) - 1.0 / (2.0 * t2)])

    def inv_grad_log_partition(self, mu):
        m1, m2 = self._mu(mu)
        var = m2 - m1 * m1
        if not var > 0:
            raise BoundaryError(f"gaussian: second moment {m2} <= mean^2 {m1 * m1}")
        if not m1 > 0:
            raise BoundaryError(f"gaussian: mean {m1} not positive")
        return np.array([m1 / var, -1.0 / (2.0 * var)])

    def cost_from_stats(self, sums, lengths, invalid="raise"):
        s = np.asarray(sums, float)
        ln = np.asarray(lengths, float)
        m1 = s[:, 0] / ln
        var = s[:, 1] / ln - m1 * m1
        bad = ~(var > 0)
        safe = np.where(bad, 1.0, var)
        costs = ln * 0.5 * (1.0 + np.log(safe))
        return self._invalid(bad, costs, invalid, "segment has zero sample variance")

    def sample(self, theta, size, rng):
        t1, t2 = self.validate_theta(theta)
        var = -1.0 / (2.0 * t2)
        return rng.normal(-t1 / (2.0 * t2), math.sqrt(var), size=size)

    def constants(self, box, eps=None):
        box.validate_for(self)
        (t1_lo, t2_lo), (t1_hi, t2_hi) = box.lower, box.upper
        zeta = min(1.0 / t1_hi, -1.0 / t2_lo)
        kappa = max(1.0 / t1_lo, -2.0 / t2_hi)
        e_lo, e_hi = self._e_bounds_from_corners(box)
        return TheoryConstants(zeta=zeta, kappa=kappa, e_min=e_lo, e_max=e_hi)


@dataclass(frozen=True, eq=False)
class Pareto(Family):
    """Pareto with fixed scale x_m and shape alpha = -theta; T = log(y)."""

    x_m: float

    name = "pareto"
    dim = 1
    cost_kernel_id = KC_PARETO

    def __post_init__(self):
        if not self.x_m > 0:
            raise ValueError("pareto scale x_m must be positive")

    @property
    def cost_kernel_aux(self):
        return np.array([math.log(self.x_m)])

    def validate_theta(self, theta):
        arr = self._theta(theta)
        if not arr[0] < 0:
            raise DomainError(f"pareto: theta must be negative, got {arr[0]}")
        if not math.log(self.x_m) - 1.0 / arr[0] > 0:
            # positivity of E[T] = log x_m + 1/alpha; binding only for x_m < 1
            raise DomainError(
                f"pareto: theta={arr[0]} gives nonpositive mean statistic for x_m={self.x_m}"
            )
        return arr

    def stat_one(self, y):
        yv = float(y)
        if not yv > self.x_m:
            raise DomainError(f"pareto: {y!r} not greater than scale {self.x_m}")
        return np.array([math.log(yv)])

    def stats_array(self, data):
        arr = np.asarray(data, dtype=float)
        bad = ~np.isfinite(arr) | (arr <= self.x_m)
        self._support_violation(arr, bad, f"reals > {self.x_m}")
        return np.log(np.where(bad, self.x_m + 1.0, arr))[:, None]

    def log_partition(self, theta):
        (t,) = self.validate_theta(theta)
        return float(t * math.log(self.x_m) - math.log(-t))

    def grad_log_partition(self, theta):
        (t,) = self.validate_theta(theta)
        return np.array([math.log(self.x_m) - 1.0 / t])

    def inv_grad_log_partition(self, mu):
        (m,) = self._mu(mu)
        c = m - math.log(self.x_m)
        if not (c > 0 and m > 0):
            raise BoundaryError(f"pareto: mean {m} outside image (max(0, log x_m), inf)")
        return np.array([-1.0 / c])

    def cost_from_stats(self, sums, lengths, invalid="raise"):
        s = np.asarray(sums, float)[:, 0]
        ln = np.asarray(lengths, float)
        c = s / ln - math.log(self.x_m)
        bad = ~(c > 0)
        safe = np.where(bad, 1.0, c)
        costs = ln * (1.0 + np.log(safe))
        return self._invalid(bad, costs, invalid, "segment statistic mean at boundary")

    def sample(self, theta, size, rng):
        (t,) = self.validate_theta(theta)
        u = rng.random(size)
        return self.x_m * np.exp(-np.log1p(-u) / (-t))

    def constants(self, box, eps=None):
        if self.x_m >= 1:
            raise ValueError(
                "pareto constants are defined only for x_m < 1 "
                "(shape constraint alpha < -1/log x_m)"
            )
        box.validate_for(self)
        lo, hi = box.lower[0], box.upper[0]
        lxm = math.log(self.x_m)
        zeta = (1.0 / hi) * (1.0 / (hi * lxm - 1.0))
        kappa = lxm / (lo * lxm - 1.0)
        e_lo, e_hi = self._e_bounds_from_corners(box)
        return TheoryConstants(zeta=zeta, kappa=kappa, e_min=e_lo, e_max=e_hi)


@dataclass(frozen=True, eq=False)
class Gamma(_NegativeThetaScalar):
    """Gamma with fixed shape alpha and natural parameter theta = -rate."""

    alpha: float

    name = "gamma"
    dim = 1
    cost_kernel_id = KC_GAMMA

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("gamma shape alpha must be positive")

    @property
    def cost_kernel_aux(self):
        return np.array([self.alpha])

    def stat_one(self, y):
        yv = float(y)
        if not yv > 0:
            raise DomainError(f"gamma: {y!r} not positive")
        return np.array([yv])

    def stats_array(self, data):
        arr = np.asarray(data, dtype=float)
        bad = ~np.isfinite(arr) | (arr <= 0)
        self._support_violation(arr, bad, "positive reals")
        return arr[:, None]

    def log_partition(self, theta):
        (t,) = self.validate_theta(theta)
        return float(-self.alpha * math.log(-t))

    def grad_log_partition(self, theta):
        (t,) = self.validate_theta(theta)
        return np.array([-self.alpha / t])

    def inv_grad_log_partition(self, mu):
        (m,) = self._mu(mu)
        if not m > 0:
            raise BoundaryError(f"gamma: mean {m} not in (0, inf)")
        return np.array([-self.alpha / m])

    def cost_from_stats(self, sums, lengths, invalid="raise"):
        s = np.asarray(sums, float)[:, 0]
        ln = np.asarray(lengths, float)
        bad = ~(s > 0)
        safe = np.where(bad, 1.0, s)
        costs = ln * self.alpha * (1.0 + np.log(safe / ln / self.alpha))
        return self._invalid(bad, costs, invalid, "segment statistic total is zero")

    def sample(self, theta, size, rng):
        (t,) = self.validate_theta(theta)
        return rng.gamma(shape=self.alpha, scale=-1.0 / t, size=size)

    def natural_from_rate(self, rate):
        if not rate > 0:
            raise ValueError("gamma rate must be positive")
        return np.array([-rate])


@dataclass(frozen=True, eq=False)
class Weibull(_NegativeThetaScalar):
    """Weibull with fixed shape k; T = y^k and theta = -scale^{-k}."""

    k: float

    name = "weibull"
    dim = 1

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("weibull shape k must be positive")

    def stat_one(self, y):
        yv = float(y)
        if yv < 0:
            raise DomainError(f"weibull: {y!r} is negative")
        return np.array([yv**self.k])

    def stats_array(self, data):
        arr = np.asarray(data, dtype=float)
        bad = ~np.isfinite(arr) | (arr < 0)
        self._support_violation(arr, bad, "nonnegative reals")
        return np.where(bad, 0.0, arr)[:, None] ** self.k

    def sample(self, theta, size, rng):
        (t,) = self.validate_theta(theta)
        scale = (-t) ** (-1.0 / self.k)
        return scale * rng.weibull(self.k, size=size)


@dataclass(frozen=True, eq=False)
class Laplace(_NegativeThetaScalar):
    """Laplace with fixed positive location mu; T = |y - mu|, theta = -1/b."""

    mu: float

    name = "laplace"
    dim = 1

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("laplace location mu must be positive")

    def stat_one(self, y):
        return np.array([abs(float(y) - self.mu)])

    def stats_array(self, data):
        arr = np.asarray(data, dtype=float)
        bad = ~np.isfinite(arr)
        self._support_violation(arr, bad, "finite reals")
        return np.abs(arr - self.mu)[:, None]

    def sample(self, theta, size, rng):
        (t,) = self.validate_theta(theta)
        return rng.laplace(self.mu, -1.0 / t, size=size)


@dataclass(frozen=True, eq=False)
class Binomial(Family):
    """Binomial with fixed trial count; theta = logit(p), A = n log(1+e^theta)."""

    n_b: int

    name = "binomial"
    dim = 1
    cost_kernel_id = KC_BINOMIAL

    def __post_init__(self):
        if not (isinstance(self.n_b, int) and self.n_b >= 1):
            raise ValueError("binomial trial count must be a positive integer")

    @property
    def cost_kernel_aux(self):
        return np.array([float(self.n_b)])

    def validate_theta(self, theta):
        return self._theta(theta)

    def stat_one(self, y):
        yv = float(y)
        if yv < 0 or yv > self.n_b or yv != math.floor(yv):
            raise DomainError(f"binomial: {y!r} not an integer in [0, {self.n_b}]")
        return np.array([yv])

    def stats_array(self, data):
        arr = np.asarray(data, dtype=float)
        bad = ~np.isfinite(arr) | (arr < 0) | (arr > self.n_b) | (arr != np.floor(arr))
        self._support_violation(arr, bad, f"integers in [0, {self.n_b}]")
        return arr[:, None]

    def log_partition(self, theta):
        (t,) = self.validate_theta(theta)
        # max-shift form of n*log(1+e^t), stable for large |t|
        if t > 0:
            return float(self.n_b * (t + math.log1p(math.exp(-t))))
        return float(self.n_b * math.log1p(math.exp(t)))

    def grad_log_partition(self, theta):
        (t,) = self.validate_theta(theta)
        return np.array([self.n_b / (1.0 + math.exp(-t))])

    def inv_grad_log_partition(self, mu):
        (m,) = self._mu(mu)
        if not (0 < m < self.n_b):
            raise BoundaryError(f"binomial: mean {m} not in (0, {self.n_b})")
        return np.array([math.log(m / (self.n_b - m))])

    def cost_from_stats(self, sums, lengths, invalid="raise"):
        s = np.asarray(sums, float)[:, 0]
        ln = np.asarray(lengths, float)
        total = ln * self.n_b
        f = s / total
        return -total * (_xlogx(f) + _xlogx(1.0 - f))

    def sample(self, theta, size, rng):
        (t,) = self.validate_theta(theta)
        return rng.binomial(self.n_b, 1.0 / (1.0 + math.exp(-t)), size=size).astype(float)

    def constants(self, box, eps=None):
        box.validate_for(self)
        hi = box.upper[0]
        e_lo, e_hi = self._e_bounds_from_corners(box)
        return TheoryConstants(
            zeta=1.0 / (1.0 + math.exp(hi)), kappa=2.0, e_min=e_lo, e_max=e_hi
        )


@dataclass(frozen=True, eq=False)
class NegativeBinomial(Family):
    """Negative binomial with fixed dispersion phi; theta = log(1-p) < 0."""

    phi: float

    name = "negbinomial"
    dim = 1
    cost_kernel_id = KC_NEGBIN

    # numeric-safety margin keeping theta strictly below 0
    THETA_MARGIN = 1e-12

    def __post_init__(self):
        if not self.phi > 0:
            raise ValueError("negative binomial dispersion phi must be positive")

    @property
    def cost_kernel_aux(self):
        return np.array([self.phi])

    def validate_theta(self, theta):
        arr = self._theta(theta)
        if not arr[0] <= -self.THETA_MARGIN:
            raise DomainError(
                f"negbinomial: theta must be <= -{self.THETA_MARGIN}, got {arr[0]}"
            )
        return arr

    def stat_one(self, y):
        yv = float(y)
        if yv < 0 or yv != math.floor(yv):
            raise DomainError(f"negbinomial: {y!r} not a nonnegative integer")
        return np.array([yv])

    def stats_array(self, data):
        arr = np.asarray(data, dtype=float)
        bad = ~np.isfinite(arr) | (arr < 0) | (arr != np.floor(arr))
        self._support_violation(arr, bad, "nonnegative integers")
        return arr[:, None]

    def log_partition(self, theta):
        (t,) = self.validate_theta(theta)
        return float(-self.phi * math.log(-math.expm1(t)))

    def grad_log_partition(self, theta):
        (t,) = self.validate_theta(theta)
        return np.array([self.phi / math.expm1(-t)])

    def inv_grad_log_partition(self, mu):
        (m,) = self._mu(mu)
        if not m > 0:
            raise BoundaryError(f"negbinomial: mean {m} not in (0, inf)")
        return np.array([math.log(m / (m + self.phi))])

    def cost_from_stats(self, sums, lengths, invalid="raise"):
        s = np.asarray(sums, float)
        ln = np.asarray(lengths, float)
        mean = s[:, 0] / ln
        return ln * (_xlogx(mean + self.phi) - _xlogx(np.full_like(mean, self.phi)) - _xlogx(mean))

    def sample(self, theta, size, rng):
        # gamma-Poisson mixture; exact for non-integer dispersion
        (t,) = self.validate_theta(theta)
        p = -math.expm1(t)
        lam = rng.gamma(shape=self.phi, scale=(1.0 - p) / p, size=size)
        return rng.poisson(lam).astype(float)

    def constants(self, box, eps=None):
        box.validate_for(self)
        lo = box.lower[0]
        e_lo, e_hi = self._e_bounds_from_corners(box)
        return TheoryConstants(zeta=1.0, kappa=math.exp(-lo), e_min=e_lo, e_max=e_hi)


@dataclass(frozen=True, eq=False)
class Categorical(Family):
    """Categories 1..d+1 with category d+1 as reference; T^i = 1{y=i},
    A(theta) = log(1 + sum_i exp(theta^i))."""

    d: int

    name = "categorical"
    cost_kernel_id = KC_CATEGORICAL

    def __post_init__(self):
        if not (isinstance(self.d, int) and self.d >= 1):
            raise ValueError("categorical dimension d must be an integer >= 1")

    @property
    def dim(self) -> int:
        return self.d

    def validate_theta(self, theta):
        return self._theta(theta)

    def stat_one(self, y):
        yv = float(y)
        if yv < 1 or yv > self.d + 1 or yv != math.floor(yv):
            raise DomainError(f"categorical: {y!r} not a category in 1..{self.d + 1}")
        out = np.zeros(self.d)
        if yv <= self.d:
            out[int(yv) - 1] = 1.0
        return out

    def stats_array(self, data):
        arr = np.asarray(data, dtype=float)
        bad = ~np.isfinite(arr) | (arr < 1) | (arr > self.d + 1) | (arr != np.floor(arr))
        self._support_violation(arr, bad, f"categories 1..{self.d + 1}")
        return (arr[:, None] == np.arange(1, self.d + 1)[None, :]).astype(float)

    def log_partition(self, theta):
        t = self.validate_theta(theta)
        m = max(0.0, float(t.max()))
        return float(m + math.log(math.exp(-m) + np.exp(t - m).sum()))

    def grad_log_partition(self, theta):
        t = self.validate_theta(theta)
        m = max(0.0, float(t.max()))
        w = np.exp(t - m)
        return w / (math.exp(-m) + w.sum())

    def inv_grad_log_partition(self, mu):
        m = self._mu(mu)
        rest = 1.0 - m.sum()
        if not (np.all(m > 0) and rest > 0):
            raise BoundaryError(
                f"categorical: mean {m} outside open simplex (componentwise > 0, sum < 1)"
            )
        return np.log(m / rest)

    def cost_from_stats(self, sums, lengths, invalid="raise"):
        s = np.asarray(sums, float)
        ln = np.asarray(lengths, float)
        f = s / ln[:, None]
        rest = np.clip(1.0 - f.sum(axis=1), 0.0, 1.0)
        return -ln * (_xlogx(f).sum(axis=1) + _xlogx(rest))

    def probs(self, theta) -> np.ndarray:
        """Full probability vector over categories 1..d+1."""
        g = self.grad_log_partition(theta)
        return np.append(g, 1.0 - g.sum())

    def sample(self, theta, size, rng):
        # inverse-CDF on the category probabilities
        cdf = np.cumsum(self.probs(theta))
        u = rng.random(size)
        return (np.searchsorted(cdf, u, side="right") + 1).astype(float)

    def constants(self, box, eps=None):
        box.validate_for(self)
        lo = np.array(box.lower)
        hi = np.array(box.upper)
        if not (np.allclose(hi, hi[0]) and np.allclose(lo, -hi[0]) and hi[0] > 0):
            raise ValueError(
                "categorical box must be symmetric of the form [-log a, log a]^d with a > 1"
            )
        a = math.exp(hi[0])
        d = self.d
        e_min = 1.0 / (a + a * a * d)
        e_max = a * a / (d + a)
        zeta = (d + a * (1.0 - a)) / (d + a)
        m_eps = None
        if eps is not None:
            if not 0 < eps < e_min:
                raise ValueError(f"epsilon must lie in (0, e_min={e_min:.6g})")
            m_eps = (e_min - eps) ** (d + 1)
        return TheoryConstants(
            zeta=zeta, kappa=2.0, e_min=e_min, e_max=e_max, m_eps=m_eps, M_eps=1.0
        )


_FAMILY_FACTORIES = {
    "poisson": lambda **kw: Poisson(),
    "exponential": lambda **kw: Exponential(),
    "gaussian": lambda **kw: GaussianPositiveMean(),
    "pareto": lambda **kw: Pareto(x_m=kw["x_m"]),
    "gamma": lambda **kw: Gamma(alpha=kw["alpha"]),
    "weibull": lambda **kw: Weibull(k=kw["k"]),
    "laplace": lambda **kw: Laplace(mu=kw["mu"]),
    "binomial": lambda **kw: Binomial(n_b=int(kw["n_b"])),
    "negbinomial": lambda **kw: NegativeBinomial(phi=kw["phi"]),
    "categorical": lambda **kw: Categorical(d=int(kw["d"])),
}


def family_from_name(name: str, **nuisance) -> Family:
    """Build a family spec from its name and nuisance parameters."""
    try:
        factory = _FAMILY_FACTORIES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown family {name!r}; expected one of {sorted(_FAMILY_FACTORIES)}")
    try:
        return factory(**nuisance)
    except KeyError as exc:
        raise ValueError(f"family {name!r} requires nuisance parameter {exc}") from None


# ---------------------------------------------------------------------------
# module-level operation surface
# ---------------------------------------------------------------------------


def sufficient_stat(spec: Family, y) -> np.ndarray:
    """T(y) for a single observation."""
    return spec.stat_one(y)


def log_partition(spec: Family, theta) -> float:
    return spec.log_partition(theta)


def grad_log_partition(spec: Family, theta) -> np.ndarray:
    return spec.grad_log_partition(theta)


def inv_grad_log_partition(spec: Family, mu) -> np.ndarray:
    return spec.inv_grad_log_partition(mu)


def segment_cost(spec: Family, t_sum, length: int) -> float:
    """Minimal contrast of a segment with statistic total t_sum and the given
    length; the base-measure term is dropped (constant in the segmentation)."""
    if length < 1:
        raise ValueError("segment length must be >= 1")
    sums = np.atleast_1d(np.asarray(t_sum, dtype=float))
    if sums.shape != (spec.dim,):
        raise ValueError(f"t_sum must have length {spec.dim}, got shape {sums.shape}")
    return float(spec.cost_from_stats(sums[None, :], np.array([float(length)]))[0])


def kullback_pointwise(spec: Family, theta_true, theta_other) -> float:
    """Per-observation Kullback-Leibler divergence
    grad A(theta).(theta - p) - A(theta) + A(p)."""
    t = spec.validate_theta(theta_true)
    p = spec.validate_theta(theta_other)
    g = spec.grad_log_partition(t)
    val = float(g @ (t - p) - spec.log_partition(t) + spec.log_partition(p))
    # clip tiny negative rounding noise at theta == p
    return max(val, 0.0) if val > -1e-12 else val


def hellinger_sq_pointwise(spec: Family, theta1, theta2) -> float:
    """Per-observation squared Hellinger distance (closed forms for the
    exponential and Poisson families)."""
    return spec.hellinger_sq(theta1, theta2)


def theory_constants(spec: Family, box: ParamBox, eps: float | None = None) -> TheoryConstants:
    """Table-row constants evaluated verbatim at the box endpoints."""
    return spec.constants(box, eps=eps)


def chi_square(partition, prefix, expected: Sequence) -> float:
    """Diagnostic statistic sum_i sum_J (T^i_J - E^i_J)^2 / E^i_J where the
    expected per-segment totals come from per-segment mean vectors."""
    ends = list(partition.ends)
    if ends[-1] != prefix.n:
        raise ValueError("partition length does not match prefix stats")
    if len(expected) != len(ends):
        raise ValueError("need one expected mean vector per segment")
    total = 0.0
    start = 0
    for end, mean in zip(ends, expected):
        m = np.atleast_1d(np.asarray(mean, dtype=float))
        if m.shape != (prefix.dim,):
            raise ValueError(f"expected mean vectors of length {prefix.dim}")
        if not np.all(m > 0):
            raise ValueError("expected means must be strictly positive")
        t_j = prefix.cum[end] - prefix.cum[start]
        e_j = m * (end - start)
        total += float(((t_j - e_j) ** 2 / e_j).sum())
        start = end
    return total
