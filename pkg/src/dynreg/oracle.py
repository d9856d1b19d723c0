"""Offline optimum over the budgeted comparator class

    min  sum_t f_t(y_t)   s.t.  y_t in X,  sum_t t^beta ||y_{t+1} - y_t|| <= D.

Three routes:

* projected subgradient on X^T, the general method. The projection onto the
  budgeted path set is solved through its dual (FISTA on the edge multipliers,
  with an exact weighted group-l1 ball projection inside).
* a Lagrangian path solver for linear losses on an interval (d = 1): for a
  fixed multiplier the penalized problem has a two-level optimum found in one
  forward pass, the multiplier is bisected, and the two bracketing solutions
  are mixed so the budget is met exactly.
* brute-force search over a grid, the independent check for tiny instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .core import (
    BUDGET_TOL,
    ComparatorSequence,
    DomainKind,
    DomainSpec,
    DynamicsBudget,
    InvalidParameter,
    LossFunction,
    NumericalFailure,
)
from .prox import RegularizerKind


MIN_ITERATIONS = 2000


class OracleMethod(str, Enum):
    AUTO = "auto"
    PROJECTED_SUBGRADIENT = "projected_subgradient"
    LAGRANGIAN_PATH = "lagrangian_path"
    GRID_SEARCH = "grid_search"


@dataclass(frozen=True)
class OracleConfig:
    method: OracleMethod = OracleMethod.AUTO
    max_iter: Optional[int] = None  # default max(50 T, MIN_ITERATIONS)
    step_scale: Optional[float] = None  # default sqrt(R / G)
    tol: float = 1e-9
    projection_iter: int = 200  # per outer step; the dual is warm-started
    projection_tol: float = 1e-10
    bisection_iter: int = 100


@dataclass(frozen=True, eq=False)
class OracleSolution:
    comparator: ComparatorSequence
    objective: float
    method: OracleMethod
    iterations: int
    residual: float  # budget + domain violation of the returned sequence
    slack: float  # D minus the weighted path length
    converged: bool = True
    decrease: float = 0.0  # objective decrease over the last 100 iterations
    gap: Optional[float] = None  # certified optimality gap when available

    @property
    def status(self) -> str:
        return "converged" if self.converged else "unconverged"


def path_weights(T: int, beta: float) -> np.ndarray:
    return np.arange(1, T, dtype=float) ** beta


def weighted_tv(y: np.ndarray, w: np.ndarray) -> float:
    return float(w @ np.linalg.norm(np.diff(y, axis=0), axis=1))


def objective(losses: Sequence[LossFunction], y: np.ndarray) -> float:
    return float(sum(f.value(p) for f, p in zip(losses, y)))


def repair(y: np.ndarray, domain: DomainSpec, w: np.ndarray, D: float) -> np.ndarray:
    """Make ``y`` feasible: project into X, then shrink toward the domain
    center (which scales the path length exactly) if over budget."""
    y = domain.project(y)
    tv = weighted_tv(y, w) if len(w) else 0.0
    if tv > D:
        scale = D / tv if tv > 0 else 0.0
        y = domain.center + scale * (y - domain.center)
    return y


# ---------------------------------------------------------------------------
# Projection onto the budgeted path set
# ---------------------------------------------------------------------------


def project_group_l1_ball(p: np.ndarray, w: np.ndarray, D: float) -> np.ndarray:
    """Projection of rows p_t onto {p : sum_t w_t ||p_t|| <= D}."""
    norms = np.linalg.norm(p, axis=1)
    if w @ norms <= D:
        return p.copy()
    if D <= 0:
        return np.zeros_like(p)
    # shrink norms to max(n_t - mu w_t, 0) with the unique mu meeting the budget
    ratio = norms / w
    order = np.argsort(-ratio)
    wn = np.cumsum((w * norms)[order])
    ww = np.cumsum((w * w)[order])
    mus = (wn - D) / ww
    # the largest ratio is always active; rounding can hide that when D ~ 0
    active = np.nonzero(ratio[order] > mus)[0]
    k = int(active[-1]) if active.size else 0
    mu = min(max(mus[k], 0.0), float(ratio.max()))
    shrunk = np.maximum(norms - mu * w, 0.0)
    scale = np.divide(shrunk, norms, out=np.zeros_like(norms), where=norms > 0)
    return p * scale[:, None]


def _adjoint_diff(q: np.ndarray) -> np.ndarray:
    T = q.shape[0] + 1
    out = np.zeros((T, q.shape[1]))
    out[:-1] -= q
    out[1:] += q
    return out


def project_path_set(z: np.ndarray, domain: DomainSpec, w: np.ndarray, D: float,
                     q0: Optional[np.ndarray] = None, max_iter: int = 2000,
                     tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Approximate projection of z (T, d) onto {y in X^T : weighted path <= D}.

    Returns the point and the dual edge multipliers (for warm starts). The
    point may exceed the budget by the dual accuracy; callers :func:`repair`.
    """
    T, d = z.shape
    y0 = domain.project(z)
    if T == 1 or weighted_tv(y0, w) <= D:
        return y0, np.zeros((max(T - 1, 0), d))
    if D == 0:
        const = domain.project(z.mean(axis=0))
        return np.repeat(const[None, :], T, axis=0), np.zeros((T - 1, d))
    # dual ascent on q: y(q) = P_X(z - D^T q), gradient D y(q), Lipschitz <= 4
    step = 0.25
    q = np.zeros((T - 1, d)) if q0 is None else q0.copy()
    p, momentum = q.copy(), 1.0
    for _ in range(max_iter):
        y = domain.project(z - _adjoint_diff(p))
        u = p + step * np.diff(y, axis=0)
        q_next = u - step * project_group_l1_ball(u / step, w, D)
        m_next = 0.5 * (1 + math.sqrt(1 + 4 * momentum**2))
        p = q_next + ((momentum - 1) / m_next) * (q_next - q)
        moved = np.linalg.norm(q_next - q)
        q, momentum = q_next, m_next
        if moved <= tol * (1 + np.linalg.norm(q)):
            break
    return domain.project(z - _adjoint_diff(q)), q


# ---------------------------------------------------------------------------
# Exact route: linear losses on an interval
# ---------------------------------------------------------------------------


def _interval(domain: DomainSpec) -> tuple[float, float]:
    if domain.kind is DomainKind.BALL:
        c = float(domain.center[0])
        return c - domain.radius, c + domain.radius
    return float(domain.lower[0]), float(domain.upper[0])


def _penalized_pass(V: np.ndarray, lo: float, hi: float, jump_w: np.ndarray,
                    lam: np.ndarray, record: bool = False):
    """min_y sum_t v_t y_t + lam sum_t w_t |y_{t+1} - y_t| over y_t in {lo, hi},
    ties broken toward the smaller path length.

    Returns (penalized cost, weighted path length, levels or None)."""
    S, T = V.shape
    width = hi - lo
    c_lo, c_hi = V[:, 0] * lo, V[:, 0] * hi
    p_lo, p_hi = np.zeros(S), np.zeros(S)
    choices = np.empty((T - 1, 2, S), dtype=bool) if record else None
    for t in range(T - 1):
        move = jump_w[t] * width
        jump = lam * move
        # state lo: stay from lo or jump from hi
        a_cost, b_cost = c_lo, c_hi + jump
        a_path, b_path = p_lo, p_hi + move
        stay_lo = (a_cost < b_cost) | ((a_cost == b_cost) & (a_path <= b_path))
        a2_cost, b2_cost = c_hi, c_lo + jump
        a2_path, b2_path = p_hi, p_lo + move
        stay_hi = (a2_cost < b2_cost) | ((a2_cost == b2_cost) & (a2_path <= b2_path))
        new_lo = np.where(stay_lo, a_cost, b_cost) + V[:, t + 1] * lo
        new_hi = np.where(stay_hi, a2_cost, b2_cost) + V[:, t + 1] * hi
        p_lo, p_hi = np.where(stay_lo, a_path, b_path), np.where(stay_hi, a2_path, b2_path)
        c_lo, c_hi = new_lo, new_hi
        if record:
            choices[t, 0], choices[t, 1] = stay_lo, stay_hi
    end_hi = (c_hi < c_lo) | ((c_hi == c_lo) & (p_hi < p_lo))
    cost = np.where(end_hi, c_hi, c_lo)
    path = np.where(end_hi, p_hi, p_lo)
    if not record:
        return cost, path, None
    state = end_hi.copy()
    levels = np.empty((S, T), dtype=bool)
    levels[:, T - 1] = state
    for t in range(T - 2, -1, -1):
        stay = np.where(state, choices[t, 1], choices[t, 0])
        state = np.where(stay, state, ~state)
        levels[:, t] = state
    return cost, path, levels


@dataclass(frozen=True, eq=False)
class LinearPathResult:
    points: np.ndarray  # (S, T)
    objective: np.ndarray  # (S,)
    path: np.ndarray  # (S,)
    gap: np.ndarray  # (S,) certified optimality gap


def solve_linear_path_batch(V: np.ndarray, lo: float, hi: float, beta: float, D: float,
                            bisection_iter: int = 100) -> LinearPathResult:
    """Exact minimizer of sum_t v_t y_t over y_t in [lo, hi] with
    sum_t t^beta |y_{t+1} - y_t| <= D, for S coefficient rows V (S, T) at once."""
    V = np.asarray(V, dtype=float)
    S, T = V.shape
    if D < 0:
        raise InvalidParameter("budget must be nonnegative")
    if T == 1 or D == 0:
        total = V.sum(axis=1, keepdims=True)
        level = np.where(total > 0, lo, hi)
        pts = np.repeat(level, T, axis=1)
        return LinearPathResult(pts, (V * pts).sum(axis=1), np.zeros(S), np.zeros(S))
    w = path_weights(T, beta)
    width = hi - lo
    to_level = lambda b: np.where(b, hi, lo)  # noqa: E731

    zero = np.zeros(S)
    cost0, path0, lev0 = _penalized_pass(V, lo, hi, w, zero, record=True)
    free = path0 <= D
    # a multiplier large enough that no move ever pays off
    lam_hi = (np.abs(V).sum(axis=1) * width + 1.0) / (w.min() * width)
    lam_lo = zero.copy()
    for _ in range(bisection_iter):
        mid = 0.5 * (lam_lo + lam_hi)
        _, path, _ = _penalized_pass(V, lo, hi, w, mid)
        over = path > D
        lam_lo = np.where(over, mid, lam_lo)
        lam_hi = np.where(over, lam_hi, mid)
        if np.all((lam_hi - lam_lo) <= 1e-15 * np.maximum(lam_hi, 1.0)):
            break
    cost_a, path_a, lev_a = _penalized_pass(V, lo, hi, w, lam_lo, record=True)
    cost_b, path_b, lev_b = _penalized_pass(V, lo, hi, w, lam_hi, record=True)
    y_a, y_b = to_level(lev_a), to_level(lev_b)
    denom = np.where(path_a > path_b, path_a - path_b, 1.0)
    theta = np.clip(np.where(path_a > path_b, (D - path_b) / denom, 0.0), 0.0, 1.0)
    pts = theta[:, None] * y_a + (1 - theta[:, None]) * y_b
    pts = np.where(free[:, None], to_level(lev0), pts)
    obj = (V * pts).sum(axis=1)
    path = np.abs(np.diff(pts, axis=1)) @ w
    # weak duality: opt >= cost(lam) - lam D for every lam >= 0
    lower = np.maximum(cost_a - lam_lo * D, cost_b - lam_hi * D)
    gap = np.where(free, 0.0, obj - lower)
    return LinearPathResult(pts, obj, path, gap)


def _linear_interval_case(losses: Sequence[LossFunction], domain: DomainSpec) -> bool:
    return domain.dimension == 1 and all(
        f.linear_coef is not None and f.regularizer.kind is not RegularizerKind.L1
        or (f.linear_coef is not None and f.regularizer.weight == 0.0)
        for f in losses
    )


# ---------------------------------------------------------------------------
# General route: projected subgradient
# ---------------------------------------------------------------------------


def _full_subgradient(f: LossFunction, y: np.ndarray) -> np.ndarray:
    return f.subgradient(y) + f.regularizer.subgradient(y)


def solve_offline(losses: Sequence[LossFunction], domain: DomainSpec,
                  budget: DynamicsBudget, config: Optional[OracleConfig] = None) -> OracleSolution:
    """Approximate (or, for linear losses on an interval, exact) minimizer of
    the total loss over the budgeted comparator class."""
    cfg = config or OracleConfig()
    losses = list(losses)
    T = len(losses)
    if T == 0:
        raise InvalidParameter("empty loss sequence")
    D, beta = budget.d_beta, budget.beta
    w = path_weights(T, beta)
    method = cfg.method
    if method is OracleMethod.AUTO:
        method = (OracleMethod.LAGRANGIAN_PATH if _linear_interval_case(losses, domain)
                  else OracleMethod.PROJECTED_SUBGRADIENT)
    if method is OracleMethod.LAGRANGIAN_PATH:
        if not _linear_interval_case(losses, domain):
            raise InvalidParameter("Lagrangian path solver needs linear losses with d = 1")
        lo, hi = _interval(domain)
        V = np.array([[float(f.linear_coef[0]) for f in losses]])
        res = solve_linear_path_batch(V, lo, hi, beta, D, cfg.bisection_iter)
        y = res.points[0][:, None]
        return _finish(losses, domain, budget, y, method, 1, True, 0.0, float(res.gap[0]))
    if method is not OracleMethod.PROJECTED_SUBGRADIENT:
        raise InvalidParameter(f"solve_offline does not run {method.value}; use grid_oracle")

    max_iter = cfg.max_iter if cfg.max_iter is not None else max(50 * T, MIN_ITERATIONS)
    scale = cfg.step_scale if cfg.step_scale is not None else math.sqrt(domain.R / domain.G)
    y = np.repeat(domain.center[None, :], T, axis=0)
    best_y, best_val = y, objective(losses, y)
    checkpoint, decrease, converged, q = best_val, math.inf, False, None
    k = 0
    for k in range(1, max_iter + 1):
        g = np.array([_full_subgradient(f, p) for f, p in zip(losses, y)])
        if not np.all(np.isfinite(g)):
            raise NumericalFailure("bad oracle: non-finite subgradient")
        z = y - (scale / math.sqrt(k)) * g
        y, q = project_path_set(z, domain, w, D, q, cfg.projection_iter, cfg.projection_tol)
        y = repair(y, domain, w, D)
        val = objective(losses, y)
        if val < best_val:
            best_y, best_val = y, val
        if k % 100 == 0:
            decrease = checkpoint - best_val
            checkpoint = best_val
            if decrease <= cfg.tol * (1 + abs(best_val)):
                converged = True
                break
    return _finish(losses, domain, budget, best_y, method, k, converged,
                   0.0 if decrease is math.inf else decrease, None)


def _finish(losses, domain, budget, y, method, iterations, converged, decrease, gap):
    w = path_weights(len(losses), budget.beta)
    y = repair(y, domain, w, budget.d_beta)
    comp = ComparatorSequence(y, beta=budget.beta)
    path = comp.weighted_path_length
    residual = max(path - budget.d_beta, 0.0) + float(domain.residual(y).max())
    return OracleSolution(comp, objective(losses, y), method, iterations, residual,
                          budget.d_beta - path, converged, decrease, gap)


# ---------------------------------------------------------------------------
# Brute-force grid
# ---------------------------------------------------------------------------

GRID_MAX_DIM = 2
GRID_MAX_T = 4
GRID_MAX_SEQUENCES = 3_000_000_000


def grid_points(domain: DomainSpec, resolution: float) -> np.ndarray:
    """Grid of spacing ``resolution`` over the bounding box, clipped to X,
    always including the interval end points."""
    if domain.kind is DomainKind.BALL:
        lo = domain.center - domain.radius
        hi = domain.center + domain.radius
    else:
        lo, hi = domain.lower, domain.upper
    axes = [np.linspace(a, b, int(round((b - a) / resolution)) + 1) for a, b in zip(lo, hi)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.dimension)
    return mesh[domain.residual(mesh) <= 1e-12]


def grid_oracle(losses: Sequence[LossFunction], domain: DomainSpec, budget: DynamicsBudget,
                resolution: float = 0.01) -> OracleSolution:
    """Exhaustive minimum over grid sequences that satisfy the budget."""
    losses = list(losses)
    T, d = len(losses), domain.dimension
    if T == 0:
        raise InvalidParameter("empty loss sequence")
    pts = grid_points(domain, resolution)
    n = len(pts)
    if d > GRID_MAX_DIM or T > GRID_MAX_T or float(n) ** T > GRID_MAX_SEQUENCES:
        raise InvalidParameter("grid oracle out of range")
    vals = np.array([[f.value(p) for p in pts] for f in losses])
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    w = path_weights(T, budget.beta)
    limit = budget.d_beta + BUDGET_TOL * max(1.0, budget.d_beta)

    tail = min(T, 3)
    lead = T - tail
    best_val, best_idx = math.inf, None
    for prefix in itertools.product(range(n), repeat=lead):
        base_val = sum(vals[t, i] for t, i in enumerate(prefix))
        base_path = sum(w[t] * dist[prefix[t], prefix[t + 1]] for t in range(lead - 1))
        obj = np.full((n,) * tail, base_val)
        path = np.full((n,) * tail, base_path)
        for j in range(tail):
            t = lead + j
            shape = [1] * tail
            shape[j] = n
            obj = obj + vals[t].reshape(shape)
            if j > 0:
                shape2 = [1] * tail
                shape2[j - 1], shape2[j] = n, n
                path = path + w[t - 1] * dist.reshape(shape2)
        if lead:
            shape = [1] * tail
            shape[0] = n
            path = path + w[lead - 1] * dist[prefix[-1]].reshape(shape)
        obj = np.where(path <= limit, obj, np.inf)
        flat = int(np.argmin(obj))
        if obj.flat[flat] < best_val:
            best_val = float(obj.flat[flat])
            best_idx = prefix + np.unravel_index(flat, obj.shape)
    y = pts[list(best_idx)]
    comp = ComparatorSequence(y, beta=budget.beta)
    return OracleSolution(comp, objective(losses, y), OracleMethod.GRID_SEARCH, n**T,
                          max(comp.weighted_path_length - budget.d_beta, 0.0),
                          budget.d_beta - comp.weighted_path_length)


def grid_tolerance(losses: Sequence[LossFunction], domain: DomainSpec, budget: DynamicsBudget,
                   resolution: float) -> float:
    """How far the grid optimum may sit above the true optimum, doubled.

    Snapping to the grid moves each point by at most delta/2 (delta =
    resolution sqrt(d)) and each move by at most delta; shrinking the optimum
    toward the center first frees that much budget. With L the summed
    Lipschitz constants of the f_t this gives

        L (2 delta + sqrt(R) min(1, delta sum_t w_t / D)).
    """
    d = domain.dimension
    delta = resolution * math.sqrt(d)
    lip = 0.0
    for f in losses:
        lf = f.lipschitz if f.lipschitz is not None else math.sqrt(domain.G)
        if f.regularizer.kind is RegularizerKind.L1:
            lf += f.regularizer.weight * math.sqrt(d)
        lip += lf
    T = len(losses)
    if budget.d_beta > 0 and T > 1:
        shrink = min(1.0, delta * float(path_weights(T, budget.beta).sum()) / budget.d_beta)
    else:
        shrink = 0.0
    return lip * (2 * delta + math.sqrt(domain.R) * shrink)
