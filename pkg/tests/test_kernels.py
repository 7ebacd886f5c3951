"""Kernel evaluation, mixtures, the survival map, and maximization."""

import math
from math import comb

import pytest

import gwboot as gw
from gwboot.kernels import (
    binom_lte,
    g,
    heavy_tail_deficiency,
    make_context,
    max_G,
)
from gwboot.offspring import PreconditionError, make_distribution

XGRID = [0.0, 1e-9, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0]


def g_reference(k, r, x):
    """Direct rational/float evaluation of the defining polynomial."""
    if x == 0.0:
        return float(r) if k == r else 0.0
    return sum(comb(k, i) * x ** (k - i - 1) * (1 - x) ** i for i in range(r))


# ---------------------------------------------------------------------------
# g itself


def test_g_examples():
    assert g(2, 2, 0.5) == pytest.approx(1.5)  # g_2^2(x) = 2 - x
    for x in XGRID:
        assert g(2, 2, x) == pytest.approx(2 - x, abs=1e-14)
    for r in (2, 3, 4, 5):
        assert g(r, r, 0.0) == r
    assert g(3, 2, 0.75) == pytest.approx(9 / 8, abs=1e-15)


def test_g_rejects_bad_arguments():
    with pytest.raises(PreconditionError):
        g(1, 2, 0.5)
    with pytest.raises(PreconditionError):
        g(3, 1, 0.5)
    with pytest.raises(PreconditionError):
        g(3, 2, 1.5)


def test_g_matches_reference_grid():
    for k in (2, 3, 5, 17, 80, 400):
        for r in (2, 3, 4):
            if k < r:
                continue
            for x in XGRID:
                assert g(k, r, x) == pytest.approx(g_reference(k, r, x), abs=1e-13)


def test_g_large_k_log_space():
    # log-space branch agrees with the binomial-cdf definition
    from scipy.stats import binom

    for k in (600, 2000):
        for x in (0.3, 0.9, 0.999):
            want = binom.cdf(1, k, 1 - x) / x
            assert g(k, 2, x) == pytest.approx(want, rel=1e-11)


def test_binom_lte_small_cases():
    assert binom_lte(4, 0.5, 4) == 1.0
    assert binom_lte(4, 0.5, -1) == 0.0
    assert binom_lte(2, 0.5, 0) == 0.25
    from scipy.stats import binom

    for n in (10, 100, 700):
        for q in (0.01, 0.4, 0.97):
            for m in (0, 1, 3):
                assert binom_lte(n, q, m) == pytest.approx(
                    float(binom.cdf(m, n, q)), rel=1e-10, abs=1e-300
                )


# ---------------------------------------------------------------------------
# the truncated heavy-tail deficiency (dual route at small cutoffs)


@pytest.mark.parametrize("r", [2, 3, 4, 5])
def test_deficiency_matches_direct_sum(r):
    for m in (r, r + 1, 13, 60, 211):
        for x in XGRID:
            direct = sum((r - 1) / (k * (k - 1)) * g_reference(k, r, x) for k in range(r, m + 1))
            assert 1.0 - heavy_tail_deficiency(r, m, x) == pytest.approx(direct, abs=1e-12)


def test_deficiency_bounds():
    for r in (2, 3, 4):
        for m in (100, 10**6, 10**9):
            for x in XGRID:
                dval = heavy_tail_deficiency(r, m, x)
                assert -1e-15 <= dval <= r * (r - 1) / m + 1e-15
            assert heavy_tail_deficiency(r, m, 1.0) == pytest.approx((r - 1) / m, abs=0)
            assert heavy_tail_deficiency(r, m, 0.0) == 0.0


# ---------------------------------------------------------------------------
# the mixture G


def test_G_regular_is_single_kernel():
    for b, r in [(3, 2), (5, 2), (5, 3), (7, 4)]:
        ctx = make_context(make_distribution(f"regular:b={b}"), r)
        for x in XGRID:
            assert gw.G(ctx, x) == pytest.approx(g(b, r, x), abs=1e-12)


def test_G_heavy_tail_is_one():
    ctx = make_context(make_distribution("heavy:r=2"), 2, tail_target=1e-10)
    for x in XGRID:
        assert abs(gw.G(ctx, x) - 1.0) <= ctx.eps_G + 1e-15


def test_G_shifted_geometric_closed_form():
    for b in (3.0, 4.0, 7.5):
        ctx = make_context(make_distribution(f"geometric:b={b}"), 2)
        for x in XGRID:
            want = (2 * (b - 1) - (2 * b - 3) * x) / ((b - 1) - (b - 2) * x) ** 2
            assert gw.G(ctx, x) == pytest.approx(want, abs=ctx.eps_G + 1e-11)
    ctx = make_context(make_distribution("geometric:b=3"), 2)
    assert gw.G(ctx, 0.0) == pytest.approx(1.0, abs=1e-11)


def test_G_shifted_poisson_closed_form():
    for b in (3.0, 4.0, 10.0):
        ctx = make_context(make_distribution(f"poisson:b={b}"), 2)
        for x in XGRID:
            want = math.exp(-(b - 2) * (1 - x)) * (2 + (b - 3) * x - (b - 2) * x**2)
            assert gw.G(ctx, x) == pytest.approx(want, abs=ctx.eps_G + 1e-11)


def test_G_pruned_matches_enumeration_small_b():
    eta = gw.prune_eta(2, 5.0)
    ks, probs = eta.support_probs()
    ctx = make_context(eta, 2)
    for x in XGRID:
        direct = float(sum(p * g_reference(int(k), 2, x) for k, p in zip(ks, probs)))
        assert gw.G(ctx, x) == pytest.approx(direct, abs=1e-12)


# ---------------------------------------------------------------------------
# the survival map h


def test_h_zero_cases():
    ctx = make_context(make_distribution("regular:b=3"), 2)
    for x in XGRID:
        assert gw.h(ctx, 1.0, x) == 0.0
    for p in (0.0, 0.3, 0.99):
        assert gw.h(ctx, p, 0.0) == 0.0


def test_h_at_one():
    ctx = make_context(make_distribution("regular:b=3"), 2)
    assert gw.h(ctx, 0.0, 1.0) == pytest.approx(1.0)


def test_h_equals_xG():
    # the identity needs P(xi < r) = 0, hence r = 2 for the shifted families
    for spec, r in [("regular:b=4", 2), ("regular:b=5", 3), ("geometric:b=3", 2),
                    ("poisson:b=5", 2), ("twopoint:b=4,a=9", 2)]:
        ctx = make_context(make_distribution(spec), r)
        for p in (0.0, 0.2, 0.8):
            for x in XGRID:
                if x == 0.0:
                    continue
                assert gw.h(ctx, p, x) == pytest.approx(
                    x * (1 - p) * gw.G(ctx, x), abs=1e-12
                )


def test_h_with_threshold():
    ctx = make_context(make_distribution("regular:b=2"), 2)
    # s=1: (1-p) P(Bin(b, 1-x) <= 0) = (1-p) x^b
    assert gw.h_with_threshold(ctx, 0.0, 0.5, 1) == pytest.approx(0.25)
    ctx3 = make_context(make_distribution("regular:b=5"), 3)
    for p in (0.0, 0.4):
        for x in XGRID:
            assert gw.h_with_threshold(ctx3, p, x, 3) == pytest.approx(
                gw.h(ctx3, p, x), abs=1e-14
            )
    with pytest.raises(PreconditionError):
        gw.h_with_threshold(ctx3, 0.1, 0.5, 4)
    with pytest.raises(PreconditionError):
        gw.h_with_threshold(ctx3, 0.1, 0.5, 0)


def test_h_positive_iff_x_positive():
    # for p < 1 and any threshold s, h_{s,p}(x) = 0 iff x = 0
    for spec, r in [("regular:b=4", 3), ("geometric:b=3", 2)]:
        ctx = make_context(make_distribution(spec), r)
        for s in range(1, r + 1):
            assert gw.h_with_threshold(ctx, 0.7, 0.0, s) == 0.0
            for x in (1e-9, 0.01, 0.5, 1.0):
                assert gw.h_with_threshold(ctx, 0.7, x, s) > 0.0


def test_h_includes_subthreshold_mass():
    # a law with mass below r: those vertices are never infected from below
    d = make_distribution("pmf:1=0.5,3=0.5")
    ctx = make_context(d, 2)
    # h(x) = (1-p) [0.5 * 1 + 0.5 * P(Bin(3,1-x) <= 1)]
    for x in (0.0, 0.3, 1.0):
        want = 0.7 * (0.5 + 0.5 * binom_lte(3, 1 - x, 1))
        assert gw.h(ctx, 0.3, x) == pytest.approx(want, abs=1e-14)


# ---------------------------------------------------------------------------
# maximization


def test_max_regular2():
    ctx = make_context(make_distribution("regular:b=2"), 2)
    res = max_G(ctx)
    assert res.x_star == pytest.approx(0.0, abs=1e-9)
    assert res.M == pytest.approx(2.0, abs=1e-12)


def test_max_geometric_closed_form():
    for b in (3.0, 5.0, 12.0):
        ctx = make_context(make_distribution(f"geometric:b={b}"), 2)
        res = max_G(ctx)
        want_x = (2 * b - 5) * (b - 1) / ((b - 2) * (2 * b - 3))
        want_M = (2 * b - 3) ** 2 / (4 * (b - 1) * (b - 2))
        assert res.x_star == pytest.approx(want_x, abs=2e-4)
        assert res.M == pytest.approx(want_M, abs=1e-11)


def test_max_shifted_poisson():
    ctx = make_context(make_distribution("poisson:b=4"), 2)
    res = max_G(ctx)
    assert res.x_star == pytest.approx(0.89564392373896, abs=2e-4)
    want_M = math.exp(-0.5 * (5 - math.sqrt(21))) * ((math.sqrt(21) - 2) / 2)
    assert res.M == pytest.approx(want_M, abs=1e-11)


def test_max_result_invariants():
    for spec, r in [("regular:b=6", 2), ("twopoint:b=4,a=9", 2), ("heavy:r=3", 3),
                    ("poisson:b=8", 2), ("pruned:r=2,b=15", 2)]:
        ctx = make_context(make_distribution(spec), r)
        res = max_G(ctx)
        assert res.M >= 1.0 - ctx.eps_G - 1e-10          # M >= G(1) = 1
        assert res.M <= r + ctx.eps_G + 1e-10            # M <= g_r^r(0) = r
        assert 0.0 <= res.x_star <= 1.0


def test_G_dominated_by_diagonal_kernel():
    # G(x) <= g_r^r(x) within the truncation budget
    for spec, r in [("geometric:b=4", 2), ("poisson:b=5", 2), ("twopoint:b=3,a=7", 2)]:
        ctx = make_context(make_distribution(spec), r)
        for x in XGRID:
            assert gw.G(ctx, x) <= g(r, r, x) + ctx.eps_G + 1e-12
