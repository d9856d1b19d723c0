import math
from fractions import Fraction

import numpy as np
import pytest

from dynreg.analysis import (
    WalkMethod,
    central_binomial_floor_holds,
    corollary1_bound,
    expected_abs_walk,
    l1_walk_lower_bound_check,
    run_lemma_suite,
    series_bound_check,
    series_bound_grid,
    shift_to_path_budget,
    theorem1_bound,
    theorem2_bound,
    walk_expectation,
    walk_expectation_closed_form,
    walk_expectation_enumeration,
    walk_expectation_exact,
)
from dynreg.core import DomainSpec, DynamicsBudget, InvalidParameter, random_shift_comparator, weighted_path_length
from dynreg.pog import schedule_constant, schedule_corollary1

from reference import walk_abs_exact, walk_abs_literal

# (100 / 4^50) C(100, 50), from exact rational arithmetic in tests/reference.py
E_ABS_S100 = 7.958923738717876


def test_walk_small_examples():
    assert walk_expectation_closed_form(2) == 1.0
    assert walk_expectation_closed_form(4) == 1.5
    assert walk_expectation_enumeration(3) == 1.5
    for T in (2, 3, 4):
        assert walk_abs_literal(T) == walk_abs_exact(T) == walk_expectation_exact(T)
    assert walk_expectation_closed_form(2) >= math.sqrt(2 / 2)


def test_walk_closed_form_errors():
    for T in (0, 3, 7):
        with pytest.raises(InvalidParameter):
            walk_expectation_closed_form(T)
    with pytest.raises(InvalidParameter):
        walk_expectation_enumeration(25)


def test_walk_agreement_even_T():
    for T in range(2, 31, 2):
        if T <= 24:
            assert abs(walk_expectation_closed_form(T) - walk_expectation_enumeration(T)) <= 1e-12
        assert walk_expectation_closed_form(T) == pytest.approx(float(walk_abs_exact(T)), rel=1e-15)
    for T in range(1, 13):
        assert walk_expectation_enumeration(T) == float(walk_abs_literal(T))


def test_walk_large_T_lgamma_accuracy():
    for T in (62, 100, 400, 1000):
        assert walk_expectation_closed_form(T) == pytest.approx(float(walk_abs_exact(T)), rel=1e-10)
    assert walk_expectation_closed_form(100) == pytest.approx(E_ABS_S100, rel=1e-12)
    assert float(walk_abs_exact(100)) == pytest.approx(E_ABS_S100, rel=1e-15)


def test_walk_dataclass_and_odd():
    w = walk_expectation(10, WalkMethod.ENUMERATION)
    assert w.method is WalkMethod.ENUMERATION and w.horizon == 10
    assert expected_abs_walk(5) == float(Fraction(15, 8))


def test_walk_floors():
    for T in range(2, 1001, 2):
        assert walk_expectation_closed_form(T) >= math.sqrt(T / 2) - 1e-12
    for T in range(3, 24, 2):
        assert walk_expectation_enumeration(T) >= math.sqrt(T / 2) - 1


def test_central_binomial_floor():
    assert all(central_binomial_floor_holds(n) for n in range(2, 501))
    for n in (2, 10, 500):
        assert math.comb(2 * n, n) / 4**n >= 1 / (2 * math.sqrt(n))


def test_l1_walk_examples():
    c = l1_walk_lower_bound_check(1, 2, 4000, seed=1)
    assert c.exact == 1.0 and c.ok
    c3 = l1_walk_lower_bound_check(3, 2, 4000, seed=2)
    assert c3.exact == 3.0 and c3.ok
    assert abs(c3.mean - 3.0) <= 3 * c3.std_error
    c100 = l1_walk_lower_bound_check(1, 100, 10_000, seed=3)
    assert c100.ok and abs(c100.mean - E_ABS_S100) <= 3 * c100.std_error
    with pytest.raises(InvalidParameter):
        l1_walk_lower_bound_check(1, 10, 999)


def test_series_examples():
    lhs, rhs, ok = series_bound_check(0.0, 37)
    assert lhs == rhs == 37 and ok
    lhs, rhs, ok = series_bound_check(0.5, 4)
    assert lhs == pytest.approx(1 + 2**-0.5 + 3**-0.5 + 0.5, abs=1e-15)
    assert lhs == pytest.approx(2.784457050376173, abs=1e-12) and rhs == 4.0 and ok
    for g in (0.0, 0.3, 0.99):
        lhs, rhs, ok = series_bound_check(g, 1)
        assert lhs == 1.0 and rhs == pytest.approx(1 / (1 - g)) and ok
    with pytest.raises(InvalidParameter):
        series_bound_check(1.0, 3)


def test_series_grid():
    slack = series_bound_grid([round(0.1 * k, 1) for k in range(10)], 10_000)
    assert slack.shape == (10, 10_000) and slack.min() >= -1e-12


def test_theorem2_examples():
    b0 = DynamicsBudget(0.0, 0.0)
    for eta in (0.05, 0.3):
        s = schedule_constant(eta)
        assert theorem2_bound(s, b0, 2.0, 3.0, 0.0, 0.0, 50) == pytest.approx(
            2.0 / (2 * eta) + 1.5 * 50 * eta, rel=1e-14)
    s = schedule_corollary1(0.0, 0.0, 0.0, 1.0, 1.0, 100)
    assert theorem2_bound(s, b0, 1.0, 1.0, 0.0, 0.0, 100) == pytest.approx(10.0, rel=1e-14)
    # H terms enter unclipped
    assert theorem2_bound(s, b0, 1.0, 1.0, 0.0, 50.0, 100) == pytest.approx(-40.0, rel=1e-14)


def test_theorem2_dominated_by_corollary1_optimum():
    rng = np.random.default_rng(0)
    for _ in range(200):
        beta = float(rng.uniform(0, 0.9))
        gamma = float(rng.uniform(beta, 0.95))
        b = DynamicsBudget(beta, float(rng.uniform(0, 20)))
        R, G, T = rng.uniform(0.5, 5), rng.uniform(0.5, 5), int(rng.integers(1, 3000))
        s = schedule_corollary1(gamma, beta, b.d_beta, R, G, T)
        assert theorem2_bound(s, b, R, G, 0, 0, T) <= corollary1_bound(gamma, b, R, G, T) * (1 + 1e-12)


def test_corollary1_optimum_value():
    # gamma = beta = 0, D = 0, R = G = 1, T = 100: Theorem 2 bound is exactly 10 = sqrt(G R T)
    assert corollary1_bound(0.0, DynamicsBudget(0.0, 0.0), 1.0, 1.0, 100) == pytest.approx(10.0)


def test_theorem1_examples():
    assert theorem1_bound(DynamicsBudget(0.0, 0.0), 100) == 10.0
    assert theorem1_bound(DynamicsBudget(0.0, 4.0), 100) == 30.0
    assert theorem1_bound(DynamicsBudget(0.5, 10.0), 100) == pytest.approx(20.0, rel=1e-15)


def test_shift_to_path_budget():
    assert shift_to_path_budget(0, 3.0) == 0.0
    assert shift_to_path_budget(3, 4.0) == 6.0
    with pytest.raises(InvalidParameter):
        shift_to_path_budget(-1, 1.0)
    rng = np.random.default_rng(0)
    dom = DomainSpec.box([0, 0, 0], [1, 2, 0.5])
    for _ in range(1000):
        m = int(rng.integers(0, 8))
        c = random_shift_comparator(rng, dom, 20, m)
        assert weighted_path_length(c.points, 0.0) <= shift_to_path_budget(m, dom.R) + 1e-12


def test_lemma_suite_passes_quickly():
    import time

    start = time.perf_counter()
    results = run_lemma_suite()
    assert time.perf_counter() - start < 5.0
    assert [r.name for r in results] == ["closed_form_vs_enumeration", "walk_floor_even",
                                         "walk_floor_odd", "central_binomial_floor", "series_bound"]
    assert all(r.ok for r in results)
