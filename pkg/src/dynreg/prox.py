"""Proximal operators constrained to the feasible set.

prox_{H,eta}(x') = argmin_{x in X} H(x) + ||x - x'||^2 / (2 eta)
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import DomainKind, DomainSpec, InvalidParameter

BISECTION_TOL = 1e-12


class RegularizerKind(str, Enum):
    ZERO = "zero"
    L1 = "l1"
    INDICATOR = "indicator"


@dataclass(frozen=True)
class Regularizer:
    """Shared regularizer H. The indicator of the domain is 0 on X; H is only
    ever evaluated on feasible points."""

    kind: RegularizerKind = RegularizerKind.ZERO
    weight: float = 0.0

    def __post_init__(self):
        if self.weight < 0:
            raise InvalidParameter("regularizer weight must be nonnegative")

    @classmethod
    def zero(cls) -> "Regularizer":
        return cls(RegularizerKind.ZERO)

    @classmethod
    def l1(cls, weight: float) -> "Regularizer":
        return cls(RegularizerKind.L1, float(weight))

    @classmethod
    def indicator(cls) -> "Regularizer":
        return cls(RegularizerKind.INDICATOR)

    @classmethod
    def parse(cls, text: str) -> "Regularizer":
        """'zero', 'indicator' or 'l1:<weight>'."""
        name, _, arg = text.strip().lower().partition(":")
        if name == "zero":
            return cls.zero()
        if name == "indicator":
            return cls.indicator()
        if name == "l1":
            try:
                return cls.l1(float(arg))
            except ValueError:
                raise InvalidParameter(f"bad l1 weight in {text!r}") from None
        raise InvalidParameter(f"unknown regularizer {text!r}")

    def __str__(self) -> str:
        return f"l1:{self.weight:g}" if self.kind is RegularizerKind.L1 else self.kind.value

    def value(self, x) -> float:
        if self.kind is RegularizerKind.L1:
            return self.weight * float(np.sum(np.abs(x)))
        return 0.0

    def subgradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind is RegularizerKind.L1:
            return self.weight * np.sign(x)
        return np.zeros_like(x)


def project(domain: DomainSpec, z) -> np.ndarray:
    return domain.project(z)


def soft_threshold(z, thresh) -> np.ndarray:
    return np.sign(z) * np.maximum(np.abs(z) - thresh, 0.0)


def _l1_prox_ball(domain: DomainSpec, x_prime: np.ndarray, thresh: float) -> np.ndarray:
    # KKT with multiplier mu on ||x - c||^2 <= r^2; writing theta = eta*mu/(1+eta*mu)
    # in [0, 1), the minimizer is soft((1-theta) x' + theta c, (1-theta) thresh)
    # and its distance to c is nonincreasing in theta.
    c, r = domain.center, domain.radius

    def point(theta):
        return soft_threshold((1 - theta) * x_prime + theta * c, (1 - theta) * thresh)

    p = point(0.0)
    if np.linalg.norm(p - c) <= r:
        return p
    lo, hi = 0.0, 1.0
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if np.linalg.norm(point(mid) - c) > r:
            lo = mid
        else:
            hi = mid
    return domain.project(point(hi))


def prox(reg: Regularizer, domain: DomainSpec, x_prime, eta: float) -> np.ndarray:
    """Constrained proximal map of ``reg`` with step ``eta`` over ``domain``."""
    if not eta > 0:
        raise InvalidParameter("nonpositive step")
    x_prime = np.asarray(x_prime, dtype=float)
    if reg.kind is not RegularizerKind.L1 or reg.weight == 0.0:
        return domain.project(x_prime)
    thresh = eta * reg.weight
    if domain.kind is DomainKind.BOX:
        # separable: each coordinate is a 1-d convex problem, clamping is exact
        return np.clip(soft_threshold(x_prime, thresh), domain.lower, domain.upper)
    return _l1_prox_ball(domain, x_prime, thresh)
