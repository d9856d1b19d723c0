"""Domains, losses, budgets, trajectories and the regret metrics built on them.

Time is 1-indexed in every docstring below; arrays are 0-indexed, so row
``t - 1`` of a ``(T, d)`` array holds the point for step ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Callable, Optional, Sequence

import numpy as np

if TYPE_CHECKING:
    from .prox import Regularizer

MEMBERSHIP_TOL = 1e-9
BUDGET_TOL = 1e-9


class DynRegError(Exception):
    """Base class for library errors."""


class InvalidParameter(DynRegError, ValueError):
    pass


class NumericalFailure(DynRegError, ArithmeticError):
    pass


class InvariantViolation(DynRegError):
    pass


def _frozen(a, ndim: Optional[int] = None) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    if ndim is not None and arr.ndim != ndim:
        raise InvalidParameter(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# Domain
# ---------------------------------------------------------------------------


class DomainKind(str, Enum):
    BALL = "ball"
    BOX = "box"


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """Convex compact feasible set with declared bounds R (squared diameter)
    and G (squared subgradient norm).

    Build with :meth:`ball` or :meth:`box`. R defaults to the exact squared
    diameter; a larger declared value is accepted, a smaller one is not.
    """

    kind: DomainKind
    center: np.ndarray
    radius: float = 0.0
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    diameter_sq_bound: float = 0.0
    subgrad_sq_bound: float = 1.0

    def __post_init__(self):
        if self.center.ndim != 1 or self.center.size < 1:
            raise InvalidParameter("dimension must be at least 1")
        exact = self.exact_diameter_sq()
        if not exact > 0:
            raise InvalidParameter("domain must have positive diameter")
        if self.diameter_sq_bound < exact * (1 - 1e-12):
            raise InvalidParameter(
                f"declared R={self.diameter_sq_bound} is below the squared diameter {exact}"
            )
        if not self.subgrad_sq_bound > 0:
            raise InvalidParameter("G must be positive")

    @classmethod
    def ball(cls, center, radius: float, subgrad_sq_bound: float = 1.0,
             diameter_sq_bound: Optional[float] = None) -> "DomainSpec":
        c = _frozen(np.atleast_1d(center), ndim=1)
        if not radius > 0:
            raise InvalidParameter("radius must be positive")
        R = 4.0 * radius**2 if diameter_sq_bound is None else float(diameter_sq_bound)
        return cls(DomainKind.BALL, c, radius=float(radius),
                   diameter_sq_bound=R, subgrad_sq_bound=float(subgrad_sq_bound))

    @classmethod
    def unit_ball(cls, dimension: int, subgrad_sq_bound: Optional[float] = None) -> "DomainSpec":
        if dimension < 1:
            raise InvalidParameter("dimension must be at least 1")
        G = float(dimension) if subgrad_sq_bound is None else subgrad_sq_bound
        return cls.ball(np.zeros(dimension), 1.0, subgrad_sq_bound=G)

    @classmethod
    def box(cls, lower, upper, subgrad_sq_bound: float = 1.0,
            diameter_sq_bound: Optional[float] = None) -> "DomainSpec":
        lo = _frozen(np.atleast_1d(lower), ndim=1)
        hi = _frozen(np.atleast_1d(upper), ndim=1)
        if lo.shape != hi.shape:
            raise InvalidParameter("box bounds differ in shape")
        if np.any(hi < lo):
            raise InvalidParameter("box upper bound below lower bound")
        R = float(np.sum((hi - lo) ** 2)) if diameter_sq_bound is None else float(diameter_sq_bound)
        return cls(DomainKind.BOX, _frozen((lo + hi) / 2), lower=lo, upper=hi,
                   diameter_sq_bound=R, subgrad_sq_bound=float(subgrad_sq_bound))

    @property
    def dimension(self) -> int:
        return int(self.center.size)

    @property
    def R(self) -> float:
        return self.diameter_sq_bound

    @property
    def G(self) -> float:
        return self.subgrad_sq_bound

    def exact_diameter_sq(self) -> float:
        if self.kind is DomainKind.BALL:
            return 4.0 * self.radius**2
        return float(np.sum((self.upper - self.lower) ** 2))

    def project(self, z) -> np.ndarray:
        """Euclidean projection; works row-wise on ``(..., d)`` arrays."""
        z = np.asarray(z, dtype=float)
        if self.kind is DomainKind.BOX:
            return np.clip(z, self.lower, self.upper)
        diff = z - self.center
        norm = np.linalg.norm(diff, axis=-1, keepdims=True)
        scale = np.where(norm > self.radius, self.radius / np.maximum(norm, 1e-300), 1.0)
        return self.center + diff * scale

    def residual(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.project(x), axis=-1)

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        return bool(np.all(self.residual(x) <= tol))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Uniform samples from the set, shape ``(n, d)``."""
        d = self.dimension
        if self.kind is DomainKind.BOX:
            return rng.uniform(self.lower, self.upper, size=(n, d))
        g = rng.standard_normal((n, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = self.radius * rng.uniform(size=(n, 1)) ** (1.0 / d)
        return self.center + r * g

    def max_distance(self, point) -> float:
        """max over the set of ||x - point||."""
        p = np.asarray(point, dtype=float)
        if self.kind is DomainKind.BALL:
            return float(np.linalg.norm(p - self.center)) + self.radius
        far = np.maximum(np.abs(p - self.lower), np.abs(p - self.upper))
        return float(np.linalg.norm(far))

    def best_response(self, direction) -> np.ndarray:
        """argmin over the set of <direction, x>."""
        s = np.asarray(direction, dtype=float)
        if self.kind is DomainKind.BOX:
            return np.where(s > 0, self.lower, np.where(s < 0, self.upper, self.center))
        n = np.linalg.norm(s)
        if n == 0.0:
            return self.center.copy()
        return self.center - self.radius * s / n


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def _zero_regularizer() -> "Regularizer":
    from .prox import Regularizer

    return Regularizer.zero()


@dataclass(frozen=True, eq=False)
class LossFunction:
    """f_t = F_t + H: value and subgradient oracles for F_t plus the shared
    regularizer H.

    ``linear_coef`` is set when F_t(x) = <coef, x>; the offline oracle uses it
    to pick an exact solver.
    """

    value_fn: Callable[[np.ndarray], float]
    subgrad_fn: Callable[[np.ndarray], np.ndarray]
    regularizer: "Regularizer" = field(default_factory=_zero_regularizer)
    linear_coef: Optional[np.ndarray] = None
    lipschitz: Optional[float] = None

    def smooth_value(self, x) -> float:
        return float(self.value_fn(np.asarray(x, dtype=float)))

    def subgradient(self, x) -> np.ndarray:
        return np.asarray(self.subgrad_fn(np.asarray(x, dtype=float)), dtype=float)

    def reg_value(self, x) -> float:
        return self.regularizer.value(x)

    def value(self, x) -> float:
        return self.smooth_value(x) + self.reg_value(x)

    def __call__(self, x) -> float:
        return self.value(x)


def linear_loss(coef, regularizer: Optional["Regularizer"] = None) -> LossFunction:
    v = _frozen(np.atleast_1d(coef), ndim=1)
    reg = regularizer if regularizer is not None else _zero_regularizer()
    return LossFunction(lambda x: float(v @ x), lambda x: v, reg,
                        linear_coef=v, lipschitz=float(np.linalg.norm(v)))


def quadratic_loss(curvature: float, anchor, tilt=None,
                   regularizer: Optional["Regularizer"] = None,
                   domain: Optional[DomainSpec] = None) -> LossFunction:
    """F(x) = curvature/2 * ||x - anchor||^2 + <tilt, x>.

    Passing ``domain`` records an upper bound on ||grad F|| over it.
    """
    if curvature < 0:
        raise InvalidParameter("curvature must be nonnegative")
    b = _frozen(np.atleast_1d(anchor), ndim=1)
    c = _frozen(np.zeros_like(b) if tilt is None else np.atleast_1d(tilt), ndim=1)
    a = float(curvature)
    reg = regularizer if regularizer is not None else _zero_regularizer()
    lip = None
    if domain is not None:
        lip = a * domain.max_distance(b) + float(np.linalg.norm(c))
    return LossFunction(
        lambda x: 0.5 * a * float((x - b) @ (x - b)) + float(c @ x),
        lambda x: a * (x - b) + c,
        reg,
        lipschitz=lip,
    )


def abs_loss(shift=0.0, weight: float = 1.0,
             regularizer: Optional["Regularizer"] = None) -> LossFunction:
    """F(x) = weight * ||x - shift||_1; the zero subgradient is used at kinks."""
    s = _frozen(np.atleast_1d(shift), ndim=1)
    w = float(weight)
    reg = regularizer if regularizer is not None else _zero_regularizer()
    return LossFunction(lambda x: w * float(np.sum(np.abs(x - s))),
                        lambda x: w * np.sign(x - s), reg,
                        lipschitz=w * math.sqrt(s.size))


def random_convex_loss(rng: np.random.Generator, domain: DomainSpec,
                       regularizer: Optional["Regularizer"] = None,
                       kinds: Sequence[str] = ("linear", "quadratic", "mixed", "abs")) -> LossFunction:
    """A random convex loss whose subgradients satisfy ||G_t(x)||^2 <= G on
    the domain. Kinds: linear, quadratic, mixed (quadratic plus linear), abs."""
    d, root_g = domain.dimension, math.sqrt(domain.G)
    kind = kinds[int(rng.integers(len(kinds)))]
    if kind == "linear":
        u = rng.standard_normal(d)
        u *= root_g * rng.uniform(0.1, 1.0) / max(np.linalg.norm(u), 1e-12)
        return linear_loss(u, regularizer)
    if kind == "abs":
        shift = domain.sample(rng, 1)[0]
        return abs_loss(shift, root_g / math.sqrt(d) * rng.uniform(0.1, 1.0), regularizer)
    anchor = domain.center + 1.5 * (domain.sample(rng, 1)[0] - domain.center)
    curvature = rng.uniform(0.1, 2.0)
    tilt = 0.5 * rng.standard_normal(d) if kind == "mixed" else np.zeros(d)
    lip = curvature * domain.max_distance(anchor) + float(np.linalg.norm(tilt))
    scale = min(1.0, root_g / lip) * (1 - 1e-9)
    return quadratic_loss(curvature * scale, anchor, tilt * scale, regularizer, domain)


def check_loss(loss: LossFunction, domain: DomainSpec, rng: np.random.Generator,
               samples: int = 200, tol: float = 1e-9) -> None:
    """Sampled checks of the subgradient bound G and of convexity of F_t."""
    xs = domain.sample(rng, samples)
    grads = np.array([loss.subgradient(x) for x in xs])
    vals = np.array([loss.smooth_value(x) for x in xs])
    gsq = np.sum(grads**2, axis=1)
    if np.any(gsq > domain.G * (1 + tol) + tol):
        raise InvariantViolation(
            f"subgradient norm^2 {gsq.max():.6g} exceeds G={domain.G:.6g}")
    # F(y) >= F(x) + <g(x), y - x> for all sampled pairs
    lin = vals[:, None] + np.einsum("id,ijd->ij", grads, xs[None, :, :] - xs[:, None, :])
    gap = vals[None, :] - lin
    if gap.min() < -tol * (1 + np.abs(vals).max()):
        raise InvariantViolation(f"convexity check failed by {-gap.min():.3g}")


# ---------------------------------------------------------------------------
# Budgets
# ---------------------------------------------------------------------------


def _check_beta(beta: float) -> None:
    if not 0.0 <= beta < 1.0:
        raise InvalidParameter(f"beta={beta} outside the valid interval [0, 1)")


@dataclass(frozen=True)
class DynamicsBudget:
    """Comparator class {y : sum_t t^beta ||y_{t+1} - y_t|| <= d_beta}."""

    beta: float = 0.0
    d_beta: float = 0.0

    def __post_init__(self):
        _check_beta(self.beta)
        if not self.d_beta >= 0:
            raise InvalidParameter("d_beta must be nonnegative")

    def admits(self, comparator: "ComparatorSequence", tol: float = BUDGET_TOL) -> bool:
        path = weighted_path_length(comparator.points, self.beta)
        return path <= self.d_beta + tol * max(1.0, self.d_beta)


@dataclass(frozen=True)
class ShiftBudget:
    m: int = 0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 0:
            raise InvalidParameter("shift budget must be a nonnegative integer")

    def check_horizon(self, T: int) -> None:
        if self.m > max(T - 1, 0):
            raise InvalidParameter(f"M={self.m} exceeds T-1={T - 1}")

    def admits(self, comparator: "ComparatorSequence") -> bool:
        return comparator.shift_count <= self.m


# ---------------------------------------------------------------------------
# Sequences
# ---------------------------------------------------------------------------


def _as_points(points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    if p.ndim != 2:
        raise InvalidParameter("points must be shaped (T,) or (T, d)")
    return p


def weighted_path_length(points, beta: float = 0.0) -> float:
    """sum_{t=1}^{T-1} t^beta * ||y_{t+1} - y_t||; 0 for a single point.

    Budgets need beta in [0, 1); the metric itself accepts any beta >= 0.
    """
    p = _as_points(points)
    if p.shape[0] == 0:
        raise InvalidParameter("empty comparator")
    if not beta >= 0:
        raise InvalidParameter(f"beta={beta} must be nonnegative")
    if p.shape[0] == 1:
        return 0.0
    steps = np.linalg.norm(np.diff(p, axis=0), axis=1)
    weights = np.arange(1, p.shape[0], dtype=float) ** beta
    return float(weights @ steps)


def shift_count(points) -> int:
    p = _as_points(points)
    if p.shape[0] == 0:
        raise InvalidParameter("empty comparator")
    return int(np.count_nonzero(np.any(np.diff(p, axis=0) != 0, axis=1)))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Decisions x_1..x_T with suffered losses f_t(x_t).

    ``final`` is x_{T+1}; ``subgradients`` and ``etas`` are kept so the
    per-step inequalities can be re-checked after the fact.
    """

    decisions: np.ndarray
    losses: np.ndarray
    final: Optional[np.ndarray] = None
    subgradients: Optional[np.ndarray] = None
    etas: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "decisions", _frozen(_as_points(self.decisions)))
        object.__setattr__(self, "losses", _frozen(self.losses, ndim=1))
        if self.decisions.shape[0] != self.losses.shape[0]:
            raise InvalidParameter("decisions and losses differ in length")
        for name in ("final", "subgradients", "etas"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _frozen(val))

    @property
    def horizon(self) -> int:
        return int(self.losses.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.decisions.shape[1])

    def check(self, domain: DomainSpec) -> None:
        if not domain.contains(self.decisions):
            raise InvariantViolation("trajectory leaves the domain")


@dataclass(frozen=True, eq=False)
class ComparatorSequence:
    """Reference points y_1..y_T together with their weighted path length and
    number of shifts."""

    points: np.ndarray
    beta: float = 0.0
    weighted_path_length: float = field(init=False)
    shift_count: int = field(init=False)

    def __post_init__(self):
        pts = _frozen(_as_points(self.points))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weighted_path_length", weighted_path_length(pts, self.beta))
        object.__setattr__(self, "shift_count", shift_count(pts))

    @property
    def horizon(self) -> int:
        return int(self.points.shape[0])

    def check(self, domain: DomainSpec, budget: Optional[DynamicsBudget] = None) -> None:
        if not domain.contains(self.points):
            raise InvariantViolation("comparator leaves the domain")
        recomputed = weighted_path_length(self.points, self.beta)
        if abs(recomputed - self.weighted_path_length) > 1e-9:
            raise InvariantViolation("stored path length is stale")
        if budget is not None:
            path = weighted_path_length(self.points, budget.beta)
            if path > budget.d_beta + BUDGET_TOL * max(1.0, budget.d_beta):
                raise InvariantViolation(
                    f"weighted path length {path:.12g} exceeds budget {budget.d_beta:.12g}")


def random_path_comparator(rng: np.random.Generator, domain: DomainSpec, T: int,
                           budget: DynamicsBudget) -> ComparatorSequence:
    """Random member of the budgeted class: random points, shrunk toward the
    domain center until the weighted path fits."""
    pts = domain.sample(rng, T)
    path = weighted_path_length(pts, budget.beta)
    if path > budget.d_beta:
        scale = budget.d_beta / path * (1 - 1e-12)
        pts = domain.center + scale * (pts - domain.center)
    return ComparatorSequence(pts, beta=budget.beta)


def random_shift_comparator(rng: np.random.Generator, domain: DomainSpec, T: int,
                            m: int) -> ComparatorSequence:
    """Piecewise-constant comparator with exactly min(m, T-1) shifts at
    uniformly random times."""
    k = min(m, T - 1)
    cuts = np.sort(rng.choice(np.arange(1, T), size=k, replace=False)) if k else np.array([], int)
    values = domain.sample(rng, k + 1)
    seg = np.searchsorted(cuts, np.arange(T), side="right")
    return ComparatorSequence(values[seg])


# ---------------------------------------------------------------------------
# Regret
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegretReport:
    parameters: dict
    static_regret: Optional[float] = None
    dynamic_regret: Optional[float] = None
    shifting_regret: Optional[float] = None
    theory_upper: Optional[float] = None
    theory_lower: Optional[float] = None
    comparator_gain: Optional[float] = None


def comparator_loss(comparator: ComparatorSequence, losses: Sequence[LossFunction]) -> float:
    return float(sum(f.value(y) for f, y in zip(losses, comparator.points)))


def _check_lengths(traj: Trajectory, comparator: ComparatorSequence, losses) -> None:
    if not (traj.horizon == comparator.horizon == len(losses)):
        raise InvalidParameter(
            f"horizon mismatch: trajectory {traj.horizon}, comparator "
            f"{comparator.horizon}, losses {len(losses)}")


def dynamic_regret(traj: Trajectory, comparator: ComparatorSequence,
                   losses: Sequence[LossFunction]) -> float:
    """sum f_t(x_t) - sum f_t(y_t) against one given comparator."""
    _check_lengths(traj, comparator, losses)
    return float(np.sum(traj.losses)) - comparator_loss(comparator, losses)


def shifting_regret(traj: Trajectory, comparator: ComparatorSequence,
                    losses: Sequence[LossFunction],
                    budget: Optional[ShiftBudget] = None) -> float:
    _check_lengths(traj, comparator, losses)
    if budget is not None and not budget.admits(comparator):
        raise InvariantViolation(
            f"comparator shifts {comparator.shift_count} times, budget is {budget.m}")
    return float(np.sum(traj.losses)) - comparator_loss(comparator, losses)


def static_regret(traj: Trajectory, point, losses: Sequence[LossFunction]) -> float:
    const = ComparatorSequence(np.repeat(_as_points([point]).reshape(1, -1), traj.horizon, axis=0))
    return dynamic_regret(traj, const, losses)
