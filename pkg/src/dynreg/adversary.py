"""The Rademacher lower-bound game and its explicit block comparator.

Losses are f_t(x) = <v_t, x> on the unit ball with i.i.d. +-1 coordinates.
The comparator splits the horizon in halves, cuts the first half into N
blocks and holds each block at the radius-1/2 best response to that block's
loss sum. The last first-half block is merged with the whole second half so
the sequence makes only N - 1 moves:

    sum_t t^beta ||y_{t+1} - y_t|| <= sum_{i<N} (i L)^beta * 1 <= (N - 1) T1^beta <= D

since each move has norm <= 1/2 + 1/2, every move happens at t = i L <= T1
(L = floor(T1 / N), the last block absorbs the remainder), and
N = ceil(D / T1^beta) gives N - 1 < D / T1^beta.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .analysis import theorem1_bound, theorem2_bound
from .core import (
    BUDGET_TOL,
    ComparatorSequence,
    DomainSpec,
    DynamicsBudget,
    InvalidParameter,
    InvariantViolation,
    RegretReport,
    linear_loss,
)
from .pog import OnlineLearner

COMPARATOR_RADIUS = 0.5


def rademacher_signs(seed: int, T: int, d: int) -> np.ndarray:
    """(T, d) array of +-1 from a Philox stream keyed by ``seed``."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    return (rng.integers(0, 2, size=(T, d), dtype=np.int8) * 2 - 1).astype(float)


def rademacher_batch(seeds, T: int, d: int) -> np.ndarray:
    """Stack of :func:`rademacher_signs` for each seed, shape (S, T, d)."""
    return np.stack([rademacher_signs(int(s), T, d) for s in seeds])


@dataclass(frozen=True, eq=False)
class RademacherGame:
    dimension: int
    horizon: int
    budget: DynamicsBudget
    seed: int
    signs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.dimension < 1 or self.horizon < 1:
            raise InvalidParameter("dimension and horizon must be positive")
        v = rademacher_signs(self.seed, self.horizon, self.dimension)
        v.setflags(write=False)
        object.__setattr__(self, "signs", v)

    @property
    def domain(self) -> DomainSpec:
        return DomainSpec.unit_ball(self.dimension)

    def losses(self):
        return [linear_loss(v) for v in self.signs]


@dataclass(frozen=True, eq=False)
class BlockComparatorPlan:
    first_half: int
    second_half: int
    n_blocks: int
    starts: np.ndarray
    values: Optional[np.ndarray] = None

    @property
    def bounds(self) -> list[tuple[int, int]]:
        """0-indexed half-open [start, stop) per block; the last runs to T."""
        T = self.first_half + self.second_half
        stops = list(self.starts[1:]) + [T]
        return list(zip(self.starts.tolist(), stops))


def block_layout(T: int, budget: DynamicsBudget) -> BlockComparatorPlan:
    T1 = T // 2
    if T1 == 0 or budget.d_beta == 0:
        n = 1
    else:
        n = max(1, math.ceil(budget.d_beta / T1**budget.beta))
        if n > T1:
            warnings.warn(f"budget asks for {n} blocks in {T1} steps; clamping to {T1}")
            n = T1
    length = T1 // n if n > 1 else T1
    starts = np.arange(n, dtype=int) * length
    return BlockComparatorPlan(T1, T - T1, n, starts)


def _block_sums(signs: np.ndarray, starts: np.ndarray) -> np.ndarray:
    # signs (..., T, d) -> (..., N, d)
    return np.add.reduceat(signs, starts, axis=-2)


def build_plan(game: RademacherGame) -> BlockComparatorPlan:
    layout = block_layout(game.horizon, game.budget)
    sums = _block_sums(game.signs, layout.starts)
    norms = np.linalg.norm(sums, axis=1, keepdims=True)
    # maximizer of <-s_i, z> over ||z|| <= 1/2, i.e. best response to the block losses
    values = np.where(norms > 0, -COMPARATOR_RADIUS * sums / np.where(norms > 0, norms, 1), 0.0)
    return BlockComparatorPlan(layout.first_half, layout.second_half, layout.n_blocks,
                               layout.starts, values)


def build_comparator(game: RademacherGame) -> ComparatorSequence:
    plan = build_plan(game)
    pts = np.empty((game.horizon, game.dimension))
    for (a, b), u in zip(plan.bounds, plan.values):
        pts[a:b] = u
    comp = ComparatorSequence(pts, beta=game.budget.beta)
    limit = game.budget.d_beta + BUDGET_TOL * max(1.0, game.budget.d_beta)
    if comp.weighted_path_length > limit:
        raise InvariantViolation(
            f"block comparator path {comp.weighted_path_length:.12g} exceeds {game.budget.d_beta}")
    return comp


def comparator_gain(game: RademacherGame) -> float:
    """sum_t <-v_t, y_t> for the block comparator: half the summed norms of
    the block loss sums."""
    comp = build_comparator(game)
    return float(-np.sum(game.signs * comp.points))


def batch_comparator_gain(signs: np.ndarray, budget: DynamicsBudget) -> np.ndarray:
    """Block-comparator gain for a stack of games, signs shaped (S, T, d)."""
    layout = block_layout(signs.shape[1], budget)
    sums = _block_sums(signs, layout.starts)
    return COMPARATOR_RADIUS * np.linalg.norm(sums, axis=2).sum(axis=1)


class ZeroLearner:
    """Always plays the origin."""

    def __init__(self, dimension: int):
        self.dimension = dimension

    def predict(self) -> np.ndarray:
        return np.zeros(self.dimension)

    def update(self, loss) -> None:
        pass


def play_game(game: RademacherGame, learner: OnlineLearner) -> RegretReport:
    """Run the learner through the game and report its regret against the
    block comparator."""
    learner_loss = 0.0
    for loss in game.losses():
        x = learner.predict()
        learner_loss += loss.value(x)
        learner.update(loss)
    gain = comparator_gain(game)
    T, budget = game.horizon, game.budget
    upper = None
    schedule = getattr(learner, "schedule", None)
    if schedule is not None:
        dom = game.domain
        upper = theorem2_bound(schedule, budget, dom.R, dom.G, 0.0, 0.0, T)
    params = dict(T=T, beta=budget.beta, d_beta=budget.d_beta, R=4.0,
                  G=float(game.dimension), d=game.dimension, seed=game.seed)
    return RegretReport(params, dynamic_regret=learner_loss + gain, theory_upper=upper,
                        theory_lower=theorem1_bound(budget, T), comparator_gain=gain)


def worst_case_block_path(T: int, budget: DynamicsBudget) -> float:
    """Worst-case weighted path of the block layout (every move of norm 1)."""
    layout = block_layout(T, budget)
    moves = layout.starts[1:].astype(float)
    return float(np.sum(moves**budget.beta))



def random_shift_times(rng: np.random.Generator, T: int, m: int) -> np.ndarray:
    """m distinct 0-indexed positions in 1..T-1 where a new segment starts."""
    if m > T - 1:
        raise InvalidParameter(f"{m} shifts do not fit in horizon {T}")
    return np.sort(rng.choice(np.arange(1, T), size=m, replace=False)) if m else np.zeros(0, int)


def shift_comparator(signs: np.ndarray, shift_times: np.ndarray,
                     domain: DomainSpec) -> ComparatorSequence:
    """Piecewise-constant comparator changing only at ``shift_times``; each
    segment holds the best response over the domain to its loss sum."""
    T = signs.shape[0]
    starts = np.concatenate([[0], np.asarray(shift_times, dtype=int)])
    sums = _block_sums(signs, starts)
    values = np.array([domain.best_response(s) for s in sums])
    seg = np.searchsorted(starts, np.arange(T), side="right") - 1
    return ComparatorSequence(values[seg])
