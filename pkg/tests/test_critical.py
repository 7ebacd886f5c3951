"""Critical probabilities and the survival recursion."""

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import brentq

import gwboot as gw
from gwboot.critical import pc_closed_form, pc_exact, pc_regular_asymptotic, q_iterate, q_limit
from gwboot.kernels import make_context
from gwboot.offspring import PreconditionError, make_distribution, parse_spec


def regular_r2_oracle(b):
    """Exact rational form 1 - (b-1)^(2b-3) / (b^(b-1) (b-2)^(b-2))."""
    return float(1 - Fraction((b - 1) ** (2 * b - 3), b ** (b - 1) * (b - 2) ** (b - 2)))


# ---------------------------------------------------------------------------
# exact values


def test_pc_regular3_r2():
    res = pc_exact(make_distribution("regular:b=3"), 2)
    assert res.pc == pytest.approx(1 / 9, abs=1e-12)
    assert res.M == pytest.approx(9 / 8, abs=1e-12)


def test_pc_regular_diagonal():
    for b in range(2, 8):
        res = pc_exact(make_distribution(f"regular:b={b}"), b)
        assert res.pc == pytest.approx(1 - 1 / b, abs=1e-12)


def test_pc_heavy_tail_vanishes():
    for r in (2, 3):
        res = pc_exact(make_distribution(f"heavy:r={r}"), r)
        assert res.pc <= 1e-6
        assert res.err > 0  # truncation noise acknowledged, not exactness


def test_pc_mass_below_threshold_is_one():
    res = pc_exact(make_distribution("pmf:1=0.5,3=0.5"), 2)
    assert res.pc == 1.0
    assert res.method == "subcritical-mass"


def test_pc_rejects_r_below_2():
    with pytest.raises(PreconditionError):
        pc_exact(make_distribution("regular:b=3"), 1)


# ---------------------------------------------------------------------------
# closed forms


def test_closed_form_geometric():
    res = pc_closed_form(parse_spec("geometric:b=3"), 2)
    assert res.pc == pytest.approx(1 / 9, abs=1e-15)


def test_closed_form_poisson_b4():
    res = pc_closed_form(parse_spec("poisson:b=4"), 2)
    # direct evaluation of 1 - (b-2) e^((b+1-sqrt((b+3)(b-1)))/2) / (sqrt((b+3)(b-1)) - 2)
    assert res.pc == pytest.approx(0.045843809492090326, abs=1e-14)
    assert res.x_star == pytest.approx((math.sqrt(21) - 1) / 4, abs=1e-14)


def test_closed_form_two_point():
    res = pc_closed_form(parse_spec("twopoint:b=4,a=9"), 2)
    assert res.pc == pytest.approx(0.3, abs=1e-15)


def test_closed_form_absent_cases():
    assert pc_closed_form(parse_spec("twopoint:b=4,a=6"), 2) is None  # a < 2b-1
    assert pc_closed_form(parse_spec("regular:b=7"), 3) is None
    assert pc_closed_form(parse_spec("heavy:r=2"), 2) is None
    assert pc_closed_form(parse_spec("poisson:b=4"), 3) is None


def test_closed_form_agrees_with_maximization_everywhere():
    cases = (
        [(f"regular:b={b}", 2) for b in range(2, 16)]
        + [(f"regular:b={b}", b) for b in range(2, 9)]
        + [(f"poisson:b={b}", 2) for b in (3, 5, 11)]
        + [(f"geometric:b={b}", 2) for b in (3, 5, 11)]
        + [("twopoint:b=3,a=5", 2), ("twopoint:b=4,a=9", 2), ("twopoint:b=5,a=11", 2)]
    )
    for spec_str, r in cases:
        spec = parse_spec(spec_str)
        closed = pc_closed_form(spec, r)
        assert closed is not None
        numeric = pc_exact(make_distribution(spec), r)
        assert numeric.pc == pytest.approx(closed.pc, abs=1e-8)


def test_pc_regular_asymptotic_values():
    assert pc_regular_asymptotic(10, 2) == pytest.approx(1 / 200, abs=1e-15)
    assert pc_regular_asymptotic(3, 3) == pytest.approx((2 / 3) * math.sqrt(2 / 27), abs=1e-12)


def test_pc_regular_asymptotic_ratio_tends_to_one():
    for b in (50, 100):
        exact = regular_r2_oracle(b)
        ratio = exact / pc_regular_asymptotic(b, 2)
        assert abs(ratio - 1) < 0.05


# ---------------------------------------------------------------------------
# survival recursion


def test_q_iterate_p1_collapses():
    tr = q_iterate(make_distribution("regular:b=4"), 2, 1.0, 4)
    assert tr.values[0] == 0.0
    assert all(v == 0.0 for v in tr.values)


def test_q_iterate_p0_stays_at_one():
    tr = q_iterate(make_distribution("geometric:b=3"), 2, 0.0, 6)
    for v in tr.values:
        assert v == pytest.approx(1.0, abs=1e-12)


def test_q_iterate_matches_rational_oracle():
    # 5-fold composition in exact rational arithmetic
    tr = q_iterate(make_distribution("regular:b=3"), 2, 0.2, 5)
    p = Fraction(1, 5)
    q = 1 - p
    exact = [q]
    for _ in range(5):
        x = exact[-1]
        exact.append((1 - p) * (x**3 + 3 * x**2 * (1 - x)))
    for got, want in zip(tr.values, exact):
        assert got == pytest.approx(float(want), abs=1e-13)


def test_q_iterate_non_increasing():
    for spec, r, p in [("regular:b=3", 2, 0.07), ("poisson:b=4", 2, 0.3),
                       ("twopoint:b=3,a=5", 2, 0.15)]:
        tr = q_iterate(make_distribution(spec), r, p, 40)
        diffs = np.diff(tr.values)
        assert np.all(diffs <= 1e-15)


def test_q_limit_edges():
    d = make_distribution("regular:b=3")
    assert q_limit(d, 2, 0.0).value == pytest.approx(1.0)
    assert q_limit(d, 2, 1.0).value == 0.0


def test_q_limit_supercritical_dies():
    d = make_distribution("regular:b=3")
    res = q_limit(d, 2, 0.2, tol=1e-12)
    assert res.converged and res.value < 1e-12


def test_q_limit_subcritical_matches_root_finding():
    # independent oracle: largest root of h(x) - x via bracketing + brentq
    d = make_distribution("regular:b=3")
    r, p = 2, 0.05
    res = q_limit(d, r, p, tol=1e-13)
    assert res.value > 0
    ctx = make_context(d, r)
    f = lambda x: gw.h(ctx, p, x) - x
    lo, hi = res.value - 0.02, min(1.0, res.value + 0.02)
    assert f(lo) > 0 > f(hi)  # attracting fixed point: h above x below it, below x above it
    root = brentq(f, lo, hi, xtol=1e-14)
    assert res.value == pytest.approx(root, abs=1e-10)


def test_q_limit_is_largest_fixed_point():
    # no sign change of h(x) - x above the limit
    for spec, r, p in [("regular:b=3", 2, 0.05), ("geometric:b=4", 2, 0.01)]:
        d = make_distribution(spec)
        res = q_limit(d, r, p, tol=1e-13)
        ctx = make_context(d, r)
        xs = np.linspace(res.value + 1e-6, 1.0, 2000)
        vals = np.array([gw.h(ctx, p, float(x)) - x for x in xs])
        assert np.all(vals < 0)


def test_fixed_point_consistency_near_pc():
    # the step-based stop leaves a terminal value of order tol (1-p)/p when
    # h has slope 1-p at the origin, hence the 1e3 classification margin
    for spec, r in [("regular:b=3", 2), ("geometric:b=3", 2), ("regular:b=5", 3)]:
        d = make_distribution(spec)
        crit = pc_exact(d, r)
        delta = 10 * crit.err
        p_low = crit.pc * 0.99 - delta
        p_high = min(1.0, crit.pc * 1.01 + 1e-6 + delta)
        tol = 1e-12
        res_low = q_limit(d, r, p_low, tol=tol)
        assert res_low.value > 1e-6
        ctx = make_context(d, r)
        assert gw.h(ctx, p_low, res_low.value) == pytest.approx(res_low.value, abs=10 * tol)
        res_high = q_limit(d, r, p_high, tol=tol)
        assert res_high.value < 1e3 * tol


def test_q_limit_iteration_cap_yields_interval(monkeypatch):
    import gwboot.critical as crit_mod

    monkeypatch.setattr(crit_mod, "Q_ITERATION_CAP", 25)
    d = make_distribution("regular:b=3")
    res = q_limit(d, 2, pc_exact(d, 2).pc, tol=1e-16)  # critically slow decay
    assert not res.converged
    assert res.lower == 0.0
    assert res.upper == res.value
    assert res.iterations == 25


def test_pc_monotone_in_regular_degree():
    for r in (2, 3):
        prev = 1.0
        for b in range(max(2, r), 14):
            cur = pc_exact(make_distribution(f"regular:b={b}"), r).pc
            assert cur <= prev + 1e-12
            prev = cur


def test_pc_upper_estimate_M_minus_1():
    # p_c <= M - 1 always
    for spec, r in [("regular:b=4", 2), ("poisson:b=5", 2), ("heavy:r=2", 2)]:
        res = pc_exact(make_distribution(spec), r)
        assert res.pc <= (res.M - 1.0) + 1e-12
