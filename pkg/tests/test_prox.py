import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynreg.core import DomainSpec, InvalidParameter
from dynreg.prox import Regularizer, RegularizerKind, project, prox, soft_threshold

from reference import grid_argmin_1d

vec2 = st.lists(st.floats(-6, 6, allow_nan=False), min_size=2, max_size=2)
DOMAINS = {
    "ball": DomainSpec.ball([0.2, -0.1], 1.0),
    "box": DomainSpec.box([-1.0, 0.0], [0.5, 2.0]),
}
REGS = [Regularizer.zero(), Regularizer.indicator(), Regularizer.l1(0.0),
        Regularizer.l1(0.4), Regularizer.l1(3.0)]


def test_parse_and_str_roundtrip():
    for text in ("zero", "indicator", "l1:0.25"):
        assert str(Regularizer.parse(text)) == text
    assert Regularizer.parse("L1:2").kind is RegularizerKind.L1
    for bad in ("l2", "l1:x"):
        with pytest.raises(InvalidParameter):
            Regularizer.parse(bad)
    with pytest.raises(InvalidParameter):
        Regularizer.l1(-1.0)


def test_project_examples():
    ball = DomainSpec.unit_ball(2)
    assert np.array_equal(project(ball, [0.3, 0.4]), [0.3, 0.4])
    p = project(ball, [3.0, 4.0])
    assert np.allclose(p, [0.6, 0.8], atol=1e-15)
    assert np.linalg.norm(p) == pytest.approx(1.0, abs=1e-15)
    assert np.array_equal(project(DomainSpec.box([0, 0], [1, 1]), [-1.0, 2.0]), [0.0, 1.0])


def test_prox_examples():
    box = DomainSpec.box([-10.0], [10.0])
    assert prox(Regularizer.zero(), DomainSpec.unit_ball(2), [0.3, 0.4], 1.0).tolist() == [0.3, 0.4]
    # values frozen from a 200001-point grid minimization (tests/reference.py)
    assert prox(Regularizer.l1(0.5), box, [2.0], 1.0)[0] == pytest.approx(1.5, abs=1e-12)
    assert prox(Regularizer.l1(5.0), box, [2.0], 1.0)[0] == 0.0


def test_prox_examples_match_grid_oracle():
    for lam, expected in [(0.5, 1.5), (5.0, 0.0)]:
        x, _ = grid_argmin_1d(lambda x: lam * np.abs(x) + (x - 2) ** 2 / 2, -10, 10)
        assert x == pytest.approx(expected, abs=1e-4)


def test_nonpositive_step():
    for eta in (0.0, -1.0):
        with pytest.raises(InvalidParameter, match="nonpositive step"):
            prox(Regularizer.l1(1.0), DomainSpec.unit_ball(1), [0.0], eta)


def test_soft_threshold():
    assert soft_threshold(np.array([-3.0, 0.5, 2.0]), 1.0).tolist() == [-2.0, 0.0, 1.0]


@pytest.mark.parametrize("kind", sorted(DOMAINS))
@pytest.mark.parametrize("reg", REGS, ids=str)
def test_prox_optimal_against_random_feasible_points(kind, reg):
    dom = DOMAINS[kind]
    rng = np.random.default_rng(0)
    for _ in range(20):
        xp = rng.normal(scale=3, size=2)
        eta = float(rng.uniform(0.05, 2.0))
        p = prox(reg, dom, xp, eta)
        assert dom.contains(p)
        obj = lambda z: reg.value(z) + np.sum((z - xp) ** 2, axis=-1) / (2 * eta)  # noqa: E731
        zs = dom.sample(rng, 100)
        assert obj(p) <= min(reg.value(z) + np.sum((z - xp) ** 2) / (2 * eta) for z in zs) + 1e-7


@settings(max_examples=80, deadline=None)
@given(vec2, vec2, st.sampled_from(sorted(DOMAINS)), st.sampled_from(REGS),
       st.floats(0.01, 5.0))
def test_prox_nonexpansive(a, b, kind, reg, eta):
    dom = DOMAINS[kind]
    pa, pb = prox(reg, dom, a, eta), prox(reg, dom, b, eta)
    assert np.linalg.norm(pa - pb) <= np.linalg.norm(np.subtract(a, b)) + 1e-9


@settings(max_examples=40, deadline=None)
@given(vec2, st.sampled_from(sorted(DOMAINS)), st.sampled_from(REGS))
def test_prox_vanishing_step_is_projection(xp, kind, reg):
    dom = DOMAINS[kind]
    assert np.linalg.norm(prox(reg, dom, xp, 1e-12) - dom.project(xp)) <= 1e-6


@pytest.mark.parametrize("kind", sorted(DOMAINS))
def test_prox_matches_2d_grid(kind):
    dom = DOMAINS[kind]
    rng = np.random.default_rng(1)
    h = 0.005
    lo = dom.center - 2.0
    axes = [np.arange(lo[i], lo[i] + 4.0 + h / 2, h) for i in range(2)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 2)
    pts = pts[dom.residual(pts) <= 1e-12]
    reg = Regularizer.l1(0.7)
    for _ in range(5):
        xp = rng.normal(scale=2, size=2)
        eta = float(rng.uniform(0.2, 1.5))
        vals = reg.weight * np.abs(pts).sum(1) + np.sum((pts - xp) ** 2, 1) / (2 * eta)
        p = prox(reg, dom, xp, eta)
        exact = reg.value(p) + np.sum((p - xp) ** 2) / (2 * eta)
        # the grid only restricts the feasible set
        assert exact <= vals.min() + 1e-12
        assert np.linalg.norm(pts[np.argmin(vals)] - p) <= 3 * h
