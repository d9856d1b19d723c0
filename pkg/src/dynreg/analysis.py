"""Exact checks of the supporting inequalities and the bound evaluators.

Random-walk expectations are computed from exact integer binomials wherever
Python's big integers make that cheap; log-gamma is only used past T = 60.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import (
    ComparatorSequence,
    DynamicsBudget,
    InvalidParameter,
    LossFunction,
    Trajectory,
)
from .pog import Schedule

EXACT_LIMIT = 60
ENUMERATION_LIMIT = 24
LITERAL_ENUMERATION_LIMIT = 20


class WalkMethod(str, Enum):
    CLOSED_FORM = "closed_form"
    ENUMERATION = "enumeration"


@dataclass(frozen=True)
class WalkExpectation:
    horizon: int
    value: float
    method: WalkMethod


# ---------------------------------------------------------------------------
# E|S_T| for a +-1 random walk
# ---------------------------------------------------------------------------


def walk_expectation_exact(T: int) -> Fraction:
    """E|S_T| as an exact rational, any T >= 1."""
    if T < 1:
        raise InvalidParameter("T must be positive")
    total = sum(math.comb(T, m) * abs(2 * m - T) for m in range(T + 1))
    return Fraction(total, 2**T)


def _closed_form_lgamma(T: int) -> float:
    J = T // 2
    return math.exp(math.log(T) + math.lgamma(T + 1) - 2 * math.lgamma(J + 1) - J * math.log(4.0))


def walk_expectation_closed_form(T: int) -> float:
    """E|S_{2J}| = (2J / 4^J) * C(2J, J)."""
    if T < 2 or T % 2:
        raise InvalidParameter(f"closed form needs an even T >= 2, got {T}")
    if T > EXACT_LIMIT:
        return _closed_form_lgamma(T)
    J = T // 2
    return T * math.comb(T, J) / 4**J


def walk_expectation_enumeration(T: int) -> float:
    """sum_m C(T, m) |2m - T| / 2^T; literal enumeration of all 2^T sign
    patterns up to T = 20, binomial weights above."""
    if T < 1:
        raise InvalidParameter("T must be positive")
    if T > ENUMERATION_LIMIT:
        raise InvalidParameter(f"enumeration limited to T <= {ENUMERATION_LIMIT}")
    if T <= LITERAL_ENUMERATION_LIMIT:
        patterns = np.arange(2**T, dtype=np.int64)
        ups = np.zeros_like(patterns)
        for bit in range(T):
            ups += (patterns >> bit) & 1
        return float(np.abs(2 * ups - T).sum()) / 2**T
    return sum(math.comb(T, m) * abs(2 * m - T) for m in range(T + 1)) / 2**T


def walk_expectation(T: int, method: WalkMethod = WalkMethod.CLOSED_FORM) -> WalkExpectation:
    if method is WalkMethod.CLOSED_FORM:
        return WalkExpectation(T, walk_expectation_closed_form(T), method)
    return WalkExpectation(T, walk_expectation_enumeration(T), method)


def expected_abs_walk(T: int) -> float:
    """E|S_T| for any T: closed form when even, exact binomial sum when odd."""
    if T % 2 == 0:
        return walk_expectation_closed_form(T)
    return float(walk_expectation_exact(T))


def central_binomial_floor_holds(n: int) -> bool:
    """Exact integer test of C(2n, n) / 4^n >= 1 / (2 sqrt(n))."""
    if n < 1:
        raise InvalidParameter("n must be positive")
    # square both sides: 4 n C(2n,n)^2 >= 16^n
    return 4 * n * math.comb(2 * n, n) ** 2 >= 16**n


@dataclass(frozen=True)
class WalkCheck:
    dimension: int
    horizon: int
    num_seeds: int
    mean: float
    std_error: float
    exact: float
    floor: float
    ok: bool


def l1_walk_lower_bound_check(d: int, T: int, num_seeds: int, seed: int = 0) -> WalkCheck:
    """Monte-Carlo mean of ||sum_t v_t||_1 against the floor d (sqrt(T/2) - 1)."""
    if num_seeds < 1000:
        raise InvalidParameter("num_seeds must be at least 1000")
    rng = np.random.Generator(np.random.Philox(key=seed))
    sums = np.zeros((num_seeds, d))
    chunk = max(1, 2**22 // max(T * d, 1))
    for start in range(0, num_seeds, chunk):
        n = min(chunk, num_seeds - start)
        v = rng.integers(0, 2, size=(n, T, d), dtype=np.int8) * 2 - 1
        sums[start:start + n] = v.sum(axis=1, dtype=np.int64)
    norms = np.abs(sums).sum(axis=1)
    mean = float(norms.mean())
    se = float(norms.std(ddof=1) / math.sqrt(num_seeds))
    floor = d * (math.sqrt(T / 2) - 1)
    return WalkCheck(d, T, num_seeds, mean, se, d * expected_abs_walk(T), floor,
                     mean >= floor - 3 * se)


# ---------------------------------------------------------------------------
# Series and bound evaluators
# ---------------------------------------------------------------------------


def series_bound_check(gamma: float, T: int) -> tuple[float, float, bool]:
    """sum_{t<=T} t^-gamma against T^(1-gamma) / (1-gamma)."""
    if not 0.0 <= gamma < 1.0:
        raise InvalidParameter(f"gamma={gamma} outside [0, 1)")
    lhs = float(np.sum(np.arange(1, T + 1, dtype=float) ** (-gamma)))
    rhs = T ** (1 - gamma) / (1 - gamma)
    return lhs, rhs, lhs <= rhs + 1e-12


def series_bound_grid(gammas: Sequence[float], T_max: int) -> np.ndarray:
    """Slack rhs - lhs for every (gamma, T) with T = 1..T_max."""
    t = np.arange(1, T_max + 1, dtype=float)
    rows = []
    for g in gammas:
        if not 0.0 <= g < 1.0:
            raise InvalidParameter(f"gamma={g} outside [0, 1)")
        rows.append(t ** (1 - g) / (1 - g) - np.cumsum(t ** (-g)))
    return np.array(rows)


def theorem2_bound(schedule: Schedule, budget: DynamicsBudget, R: float, G: float,
                   H_x1: float, H_xT1: float, T: int) -> float:
    """sqrt(R) max_t 1/(eta_t t^beta) D + R/(2 eta_T) + G/2 sum eta_t + H(x_1) - H(x_{T+1})."""
    etas = schedule.etas(T)
    if np.any(np.diff(etas) > 0):
        raise InvalidParameter("schedule must be non-increasing")
    t = np.arange(1, T + 1, dtype=float)
    worst = float(np.max(1.0 / (etas * t**budget.beta)))
    return (math.sqrt(R) * worst * budget.d_beta + R / (2 * etas[-1])
            + 0.5 * G * float(etas.sum()) + H_x1 - H_xT1)


def corollary1_bound(gamma: float, budget: DynamicsBudget, R: float, G: float, T: int,
                     H_x1: float = 0.0, H_xT1: float = 0.0) -> float:
    """Value of the Corollary 1 optimization, 2 sqrt(A B), which dominates
    :func:`theorem2_bound` under the Corollary 1 schedule:

        sqrt((2 G sqrt(R) D T^(1-beta) + G R T) / (1 - gamma)) + H(x_1) - H(x_{T+1})
    """
    core = 2 * G * math.sqrt(R) * budget.d_beta * T ** (1 - budget.beta) + G * R * T
    return math.sqrt(core / (1 - gamma)) + H_x1 - H_xT1


def theorem1_bound(budget: DynamicsBudget, T: int) -> float:
    """sqrt(D T^(1-beta)) + sqrt(T), up to the unit constant."""
    return math.sqrt(budget.d_beta * T ** (1 - budget.beta)) + math.sqrt(T)


def shift_to_path_budget(m: int, R: float) -> float:
    """Path budget D_0 = M sqrt(R) implied by an M-shift budget."""
    if m < 0 or not R > 0:
        raise InvalidParameter("need M >= 0 and R > 0")
    return m * math.sqrt(R)


# ---------------------------------------------------------------------------
# Verifiers on recorded runs
# ---------------------------------------------------------------------------


def _next_points(traj: Trajectory) -> np.ndarray:
    if traj.final is None:
        raise InvalidParameter("trajectory lacks x_{T+1}")
    return np.vstack([traj.decisions[1:], traj.final[None, :]])


def lemma1_slack(traj: Trajectory, losses: Sequence[LossFunction],
                 comparator: ComparatorSequence) -> np.ndarray:
    """Per-step slack rhs - lhs of

        F_t(x_t) + H(x_{t+1}) - F_t(y_t) - H(y_t)
            <= (||y_t - x_t||^2 - ||y_t - x_{t+1}||^2) / (2 eta_t) + eta_t/2 ||G_t(x_t)||^2
    """
    x, nxt, y = traj.decisions, _next_points(traj), comparator.points
    etas, grads = traj.etas, traj.subgradients
    lhs = np.array([
        f.smooth_value(x[i]) + f.reg_value(nxt[i]) - f.value(y[i])
        for i, f in enumerate(losses)
    ])
    dist_now = np.sum((y - x) ** 2, axis=1)
    dist_next = np.sum((y - nxt) ** 2, axis=1)
    rhs = (dist_now - dist_next) / (2 * etas) + 0.5 * etas * np.sum(grads**2, axis=1)
    return rhs - lhs


def recursive_bound(traj: Trajectory, comparator: ComparatorSequence,
                    R: float) -> tuple[float, float]:
    """(lhs, rhs) of sum_t (||y_t-x_t||^2 - ||y_t-x_{t+1}||^2)/eta_t
    <= 2 sqrt(R) sum_{t<T} ||y_{t+1}-y_t|| / eta_t + R / eta_T."""
    x, nxt, y, etas = traj.decisions, _next_points(traj), comparator.points, traj.etas
    lhs = float(np.sum((np.sum((y - x) ** 2, axis=1) - np.sum((y - nxt) ** 2, axis=1)) / etas))
    moves = np.linalg.norm(np.diff(y, axis=0), axis=1)
    rhs = 2 * math.sqrt(R) * float(np.sum(moves / etas[:-1])) + R / etas[-1]
    return lhs, rhs


@dataclass(frozen=True)
class CheckResult:
    name: str
    inputs: str
    lhs: float
    rhs: float
    ok: bool


def run_lemma_suite(even_T_max: int = 24, floor_T_max: int = 1000, binom_n_max: int = 500,
                    series_T_max: int = 10_000) -> list[CheckResult]:
    """The exact inequality suite; each entry reports the worst case found."""
    out: list[CheckResult] = []

    worst = (0.0, 0)
    for T in range(2, even_T_max + 1, 2):
        diff = abs(walk_expectation_closed_form(T) - walk_expectation_enumeration(T))
        worst = max(worst, (diff, T))
    out.append(CheckResult("closed_form_vs_enumeration", f"even T<={even_T_max}, worst T={worst[1]}",
                           worst[0], 1e-12, worst[0] <= 1e-12))

    worst_gap, worst_T = math.inf, 0
    for T in range(2, floor_T_max + 1, 2):
        exact = walk_expectation_exact(T) if T <= EXACT_LIMIT else None
        if exact is not None:
            # exact comparison: E|S_T|^2 >= T/2
            gap = float(exact**2 - Fraction(T, 2))
        else:
            gap = walk_expectation_closed_form(T) ** 2 - T / 2
        if gap < worst_gap:
            worst_gap, worst_T = gap, T
    out.append(CheckResult("walk_floor_even", f"even T<={floor_T_max}, tightest T={worst_T}",
                           math.sqrt(worst_T / 2), walk_expectation_closed_form(worst_T),
                           worst_gap >= 0))

    worst_gap, worst_T = math.inf, 0
    for T in range(3, min(floor_T_max, ENUMERATION_LIMIT - 1) + 1, 2):
        gap = walk_expectation_enumeration(T) - (math.sqrt(T / 2) - 1)
        if gap < worst_gap:
            worst_gap, worst_T = gap, T
    out.append(CheckResult("walk_floor_odd", f"odd T in [3,23], tightest T={worst_T}",
                           math.sqrt(worst_T / 2) - 1, walk_expectation_enumeration(worst_T),
                           worst_gap >= 0))

    failing = [n for n in range(2, binom_n_max + 1) if not central_binomial_floor_holds(n)]
    out.append(CheckResult("central_binomial_floor", f"n in [2,{binom_n_max}]",
                           float(len(failing)), 0.0, not failing))

    gammas = [round(0.1 * k, 1) for k in range(10)]
    slack = series_bound_grid(gammas, series_T_max)
    g_idx, t_idx = np.unravel_index(np.argmin(slack), slack.shape)
    out.append(CheckResult("series_bound", f"gamma in 0..0.9, T<={series_T_max}, "
                           f"tightest gamma={gammas[g_idx]} T={t_idx + 1}",
                           float(-slack.min()), 1e-12, bool(slack.min() >= -1e-12)))
    return out
