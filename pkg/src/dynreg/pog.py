"""Proximal Online Gradient and its learning-rate schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Protocol

import numpy as np

from .core import (
    DomainSpec,
    InvalidParameter,
    LossFunction,
    NumericalFailure,
    Trajectory,
    _check_beta,
)
from .prox import prox


class ScheduleKind(str, Enum):
    CONSTANT = "constant"
    COROLLARY1 = "corollary1"
    COROLLARY2 = "corollary2"


@dataclass(frozen=True)
class Schedule:
    """eta_t = scale * t^(-gamma) for t = 1..horizon (horizon None: unbounded)."""

    kind: ScheduleKind
    scale: float
    gamma: float = 0.0
    horizon: Optional[int] = None
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.scale > 0 or not math.isfinite(self.scale):
            raise InvalidParameter("schedule scale must be positive and finite")
        if not 0.0 <= self.gamma < 1.0:
            raise InvalidParameter(f"gamma={self.gamma} outside the valid interval [0, 1)")

    def __call__(self, t: int) -> float:
        if t < 1 or (self.horizon is not None and t > self.horizon):
            raise InvalidParameter(f"step {t} outside 1..{self.horizon}")
        return self.scale * t ** (-self.gamma)

    def etas(self, T: Optional[int] = None) -> np.ndarray:
        T = self.horizon if T is None else T
        if T is None:
            raise InvalidParameter("horizon required")
        if self.horizon is not None and T > self.horizon:
            raise InvalidParameter(f"schedule was built for T={self.horizon}")
        return self.scale * np.arange(1, T + 1, dtype=float) ** (-self.gamma)


def schedule_constant(eta: float) -> Schedule:
    return Schedule(ScheduleKind.CONSTANT, float(eta), 0.0, None, {"eta": eta})


def _check_common(R: float, G: float, T: int) -> None:
    if not (R > 0 and G > 0):
        raise InvalidParameter("R and G must be positive")
    if T < 1:
        raise InvalidParameter("horizon must be at least 1")


def schedule_corollary1(gamma: float, beta: float, d_beta: float, R: float, G: float,
                        T: int) -> Schedule:
    """eta_t = t^-gamma * sqrt((1-gamma)(2 sqrt(R) T^(2gamma-beta-1) D + R T^(2gamma-1)) / G)."""
    _check_beta(beta)
    if not (beta <= gamma < 1.0):
        raise InvalidParameter(f"invalid exponent: need beta <= gamma < 1, got gamma={gamma}")
    if d_beta < 0:
        raise InvalidParameter("d_beta must be nonnegative")
    _check_common(R, G, T)
    inner = 2 * math.sqrt(R) * T ** (2 * gamma - beta - 1) * d_beta + R * T ** (2 * gamma - 1)
    scale = math.sqrt((1 - gamma) * inner / G)
    return Schedule(ScheduleKind.COROLLARY1, scale, gamma, T,
                    dict(gamma=gamma, beta=beta, d_beta=d_beta, R=R, G=G, T=T))


def schedule_corollary2(gamma: float, m: int, R: float, G: float, T: int) -> Schedule:
    """eta_t = t^-gamma * sqrt((1-gamma)(2 R T^(2gamma-1) M + R T^(2gamma-1)) / G)."""
    if not 0.0 <= gamma < 1.0:
        raise InvalidParameter(f"invalid exponent: gamma={gamma} outside [0, 1)")
    if m < 0:
        raise InvalidParameter("shift budget must be nonnegative")
    _check_common(R, G, T)
    inner = 2 * R * T ** (2 * gamma - 1) * m + R * T ** (2 * gamma - 1)
    scale = math.sqrt((1 - gamma) * inner / G)
    return Schedule(ScheduleKind.COROLLARY2, scale, gamma, T,
                    dict(gamma=gamma, m=m, R=R, G=G, T=T))


def pog_step(x_t, loss_t: LossFunction, eta_t: float, domain: DomainSpec) -> np.ndarray:
    """x_{t+1} = prox_{H, eta_t}(x_t - eta_t * G_t(x_t))."""
    g = loss_t.subgradient(x_t)
    if not np.all(np.isfinite(g)):
        raise NumericalFailure("bad oracle: non-finite subgradient")
    return prox(loss_t.regularizer, domain, np.asarray(x_t, dtype=float) - eta_t * g, eta_t)


class OnlineLearner(Protocol):
    """Predict-then-observe protocol: ``predict`` for round t must be called
    before ``update`` receives loss t."""

    def predict(self) -> np.ndarray: ...

    def update(self, loss: LossFunction) -> None: ...


class ProximalOnlineGradient:
    """Stateful POG learner; keeps the full record for later verification."""

    def __init__(self, domain: DomainSpec, schedule: Schedule, x1=None):
        self.domain = domain
        self.schedule = schedule
        x1 = domain.center if x1 is None else np.asarray(x1, dtype=float)
        if not domain.contains(x1):
            raise InvalidParameter("x_1 must lie in the domain")
        self.x = np.array(x1, dtype=float)
        self.t = 1
        self._awaiting_loss = False
        self.decisions, self.losses, self.subgradients, self.etas = [], [], [], []

    def predict(self) -> np.ndarray:
        self._awaiting_loss = True
        return self.x.copy()

    def update(self, loss: LossFunction) -> None:
        if not self._awaiting_loss:
            raise InvalidParameter("update called before predict")
        eta = self.schedule(self.t)
        x = self.x
        self.decisions.append(x)
        self.losses.append(loss.value(x))
        self.subgradients.append(loss.subgradient(x))
        self.etas.append(eta)
        self.x = pog_step(x, loss, eta, self.domain)
        self.t += 1
        self._awaiting_loss = False

    def trajectory(self) -> Trajectory:
        return Trajectory(np.array(self.decisions), np.array(self.losses), final=self.x,
                          subgradients=np.array(self.subgradients), etas=np.array(self.etas))


def run_pog(losses: Iterable[LossFunction], schedule: Schedule, domain: DomainSpec,
            x1=None) -> Trajectory:
    """Play POG against a loss stream; the stream is consumed one loss at a
    time after each prediction."""
    learner = ProximalOnlineGradient(domain, schedule, x1)
    for loss in losses:
        learner.predict()
        learner.update(loss)
    if not learner.decisions:
        raise InvalidParameter("empty loss stream")
    return learner.trajectory()


def run_pog_linear_batch(coefs: np.ndarray, etas: np.ndarray, domain: DomainSpec,
                         x1=None) -> tuple[np.ndarray, np.ndarray]:
    """POG with H = 0 on S independent linear-loss games at once.

    ``coefs`` has shape (S, T, d). Returns the cumulative losses (S,) and the
    final points x_{T+1} (S, d). Each game evolves exactly as :func:`run_pog`.
    """
    coefs = np.asarray(coefs, dtype=float)
    S, T, d = coefs.shape
    if etas.shape[0] < T:
        raise InvalidParameter("not enough step sizes")
    x = np.broadcast_to(domain.center if x1 is None else np.asarray(x1, float), (S, d)).copy()
    total = np.zeros(S)
    for t in range(T):
        v = coefs[:, t, :]
        total += np.einsum("sd,sd->s", v, x)
        x = domain.project(x - etas[t] * v)
    return total, x
