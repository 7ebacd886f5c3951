"""Binomial survival kernels of the fort recursion.

The basic object is

    g_k^r(x) = P(Bin(k, 1-x) <= r-1) / x = sum_{i<r} C(k,i) x^(k-i-1) (1-x)^i,

whose mixture over an offspring law xi,

    G(x) = sum_{k >= r} P(xi = k) g_k^r(x),

controls the critical probability through its maximum M on [0,1]:
p_c = 1 - 1/M.  The one-level survival map is h_{r,p}(x) = x (1-p) G(x),
equal to (1-p) E[P(Bin(xi, 1-x) <= r-1)].

For the heavy-tail law with pmf (r-1)/(k(k-1)) the full mixture is
identically 1, and the deficiency of a truncated mixture,

    D_r(m, x) = 1 - sum_{k=r}^{m} P(xi_r = k) g_k^r(x),

satisfies D_2(m,x) = x^(m-1)/m and

    D_{s+1}(m,x) = s/(s-1) D_s(m,x) + (1-x)/((s-1) x) P(Bin(m-1,1-x) <= s-2),

which lets us evaluate truncations at cutoffs far beyond anything a direct
sum could reach.  The pruned family reuses the same deficiency, shifted by
its two reassigned atoms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from .offspring import (
    HeavyTail,
    OffspringDistribution,
    PreconditionError,
    Pruned,
    TruncatedDistribution,
)

__all__ = [
    "g",
    "binom_lte",
    "GEvalContext",
    "make_context",
    "G",
    "G_minus_1",
    "h",
    "h_with_threshold",
    "MaxResult",
    "max_G",
    "heavy_tail_deficiency",
]

_EXACT_COMB_MAX_K = 500
_ENUM_CAP = 2_000_000

DEFAULT_TAIL_TARGET = 1e-13
DEFAULT_GRID_STEP = 1e-3
BRACKET_WIDTH = 1e-12


def binom_lte(n: int, q: float, m: int) -> float:
    """P(Bin(n, q) <= m) for small m; log-space terms once n is large."""
    if m >= n:
        return 1.0
    if m < 0:
        return 0.0
    if q <= 0.0:
        return 1.0
    if q >= 1.0:
        return 0.0
    if n <= _EXACT_COMB_MAX_K:
        return min(1.0, math.fsum(math.comb(n, i) * q**i * (1 - q) ** (n - i) for i in range(m + 1)))
    lq, l1q = math.log(q), math.log1p(-q)
    total = 0.0
    for i in range(m + 1):
        lg = (
            math.lgamma(n + 1)
            - math.lgamma(i + 1)
            - math.lgamma(n - i + 1)
            + i * lq
            + (n - i) * l1q
        )
        total += math.exp(lg) if lg > -745.0 else 0.0
    return min(1.0, total)


def g(k: int, r: int, x: float) -> float:
    """g_k^r(x), with the polynomial limits at the endpoints.

    At x = 0 the removable singularity resolves to r when k = r and to 0
    when k > r; at x = 1 the value is 1 for every k.
    """
    if r < 2:
        raise PreconditionError("g requires r >= 2")
    if k < r:
        raise PreconditionError("g requires k >= r")
    if not 0.0 <= x <= 1.0:
        raise PreconditionError("g requires x in [0, 1]")
    if x == 0.0:
        return float(r) if k == r else 0.0
    if x == 1.0:
        return 1.0
    if k <= _EXACT_COMB_MAX_K:
        return math.fsum(math.comb(k, i) * x ** (k - i - 1) * (1 - x) ** i for i in range(r))
    lx, l1x = math.log(x), math.log1p(-x)
    total = 0.0
    for i in range(r):
        lg = (
            math.lgamma(k + 1)
            - math.lgamma(i + 1)
            - math.lgamma(k - i + 1)
            + (k - i - 1) * lx
            + i * l1x
        )
        total += math.exp(lg) if lg > -745.0 else 0.0
    return total


def _g_vector(ks: np.ndarray, r: int, x: float) -> np.ndarray:
    """g_k^r(x) for an array of k >= r."""
    if x == 0.0:
        return np.where(ks == r, float(r), 0.0)
    if x == 1.0:
        return np.ones_like(ks, dtype=float)
    lx, l1x = math.log(x), math.log1p(-x)
    lgk = gammaln(ks + 1)
    total = np.zeros(len(ks))
    for i in range(r):
        lg = lgk - gammaln(i + 1) - gammaln(ks - i + 1) + (ks - i - 1) * lx + i * l1x
        np.add(total, np.where(lg > -745.0, np.exp(lg), 0.0), out=total)
    return total


def _binom_lte_vector(ks: np.ndarray, q: float, m: int) -> np.ndarray:
    """P(Bin(k, q) <= m) over an array of k, small m."""
    if q <= 0.0:
        return np.ones_like(ks, dtype=float)
    if q >= 1.0:
        return (ks <= m).astype(float)
    lq, l1q = math.log(q), math.log1p(-q)
    lgk = gammaln(ks + 1)
    total = np.zeros(len(ks))
    for i in range(m + 1):
        lg = np.where(
            ks >= i,
            lgk - gammaln(i + 1) - gammaln(np.maximum(ks - i, 0) + 1) + i * lq + (ks - i) * l1q,
            -np.inf,
        )
        np.add(total, np.where(lg > -745.0, np.exp(lg), 0.0), out=total)
    out = np.minimum(total, 1.0)
    out[ks <= m] = 1.0
    return out


def heavy_tail_deficiency(r: int, m: int, x: float) -> float:
    """D_r(m, x) = 1 - sum_{k=r}^m (r-1)/(k(k-1)) g_k^r(x).

    Always in [0, r (r-1)/m]; equals (r-1)/m at x = 1 and 0 at x = 0.
    """
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return (r - 1) / m
    lx = math.log(x)
    d = math.exp((m - 1) * lx) / m if (m - 1) * lx > -745.0 else 0.0
    for s in range(2, r):
        d = s / (s - 1) * d + (1 - x) / ((s - 1) * x) * binom_lte(m - 1, 1.0 - x, s - 2)
    return d


# ---------------------------------------------------------------------------
# evaluation contexts


@dataclass
class GEvalContext:
    """Frozen ingredients for evaluating G at many points.

    ``eps_G`` bounds |G_true - G_computed| from the truncation of an
    infinite support: the tail mass times g_r^r <= r.  Exact (0) for finite
    or analytically summed supports. ``pc_is_one`` marks laws with mass
    below the threshold, whose trees never fully infect for p < 1.
    """

    dist: OffspringDistribution
    r: int
    cutoff: int
    eps_G: float
    truncation: Optional[TruncatedDistribution]
    pc_is_one: bool
    analytic: bool
    ks: Optional[np.ndarray] = None          # support >= r (generic path)
    weights: Optional[np.ndarray] = None
    ks_all: Optional[np.ndarray] = None      # full support incl. k < r
    weights_all: Optional[np.ndarray] = None


def make_context(
    dist: OffspringDistribution,
    r: int,
    tail_target: float = DEFAULT_TAIL_TARGET,
) -> GEvalContext:
    if r < 2:
        raise PreconditionError("threshold r must be >= 2")
    pc_is_one = dist.prob_below(r) > 0.0
    analytic = isinstance(dist, (HeavyTail, Pruned))
    if analytic:
        cutoff = dist.truncation_cutoff(tail_target)
        trunc = None
        eps = 0.0
        if isinstance(dist, HeavyTail):
            trunc = TruncatedDistribution(base=dist, cutoff=cutoff)
            eps = r * trunc.tail_mass
        return GEvalContext(
            dist=dist, r=r, cutoff=cutoff, eps_G=eps, truncation=trunc,
            pc_is_one=pc_is_one, analytic=True,
        )
    cutoff = dist.truncation_cutoff(tail_target)
    if cutoff > _ENUM_CAP:
        raise PreconditionError(
            f"support enumeration to {cutoff} is infeasible; no analytic path for this family"
        )
    ks_all, w_all = dist.support_probs(upto=cutoff)
    mask = ks_all >= r
    trunc = None
    eps = 0.0
    if dist.support_max is None:
        trunc = TruncatedDistribution(base=dist, cutoff=cutoff)
        eps = r * trunc.tail_mass
    return GEvalContext(
        dist=dist, r=r, cutoff=int(cutoff), eps_G=eps, truncation=trunc,
        pc_is_one=pc_is_one, analytic=False,
        ks=ks_all[mask], weights=w_all[mask], ks_all=ks_all, weights_all=w_all,
    )


def G_minus_1(ctx: GEvalContext, x: float) -> float:
    """G(x) - 1, computed without cancellation on the analytic path."""
    if not 0.0 <= x <= 1.0:
        raise PreconditionError("x must lie in [0, 1]")
    d = ctx.dist
    if ctx.analytic:
        if isinstance(d, Pruned):
            r = ctx.r
            if r != d.r:
                return _mismatched_analytic_G(ctx, x) - 1.0
            defic = heavy_tail_deficiency(r, d.k1, x)
            return (
                d.alpha * d.A * g(r, r, x)
                + (1 - d.alpha) * d.A * g(2 * r + 1, r, x)
                - defic
            )
        # heavy tail
        if ctx.r != d.r:
            return _mismatched_analytic_G(ctx, x) - 1.0
        return -heavy_tail_deficiency(ctx.r, ctx.cutoff, x)
    if len(ctx.ks) == 1:  # point mass: skip the vectorized machinery
        return float(ctx.weights[0]) * g(int(ctx.ks[0]), ctx.r, x) - 1.0
    return float(np.dot(ctx.weights, _g_vector(ctx.ks, ctx.r, x))) - 1.0


def G(ctx: GEvalContext, x: float) -> float:
    """The mixture sum_{k >= r} pmf(k) g_k^r(x) over the context's support."""
    return 1.0 + G_minus_1(ctx, x)


def _mismatched_analytic_G(ctx: GEvalContext, x: float) -> float:
    # threshold differs from the law's own r: no closed form, fall back to a
    # capped direct sum with the remaining mass absorbed into eps_G
    d = ctx.dist
    cap = min(ctx.cutoff, _ENUM_CAP)
    ks, w = d.support_probs(upto=cap)
    mask = ks >= ctx.r
    ctx.eps_G = max(ctx.eps_G, ctx.r * d.tail(cap))
    return float(np.dot(w[mask], _g_vector(ks[mask], ctx.r, x)))


def h(ctx: GEvalContext, p: float, x: float) -> float:
    """h_{r,p}(x) = (1-p) E[P(Bin(xi, 1-x) <= r-1)].

    Child counts below the threshold contribute probability one: a vertex
    with fewer than r children in its subtree can never be infected from
    below.  This agrees with x (1-p) G(x) whenever P(xi < r) = 0.
    """
    if not 0.0 <= p <= 1.0:
        raise PreconditionError("p must lie in [0, 1]")
    if not 0.0 <= x <= 1.0:
        raise PreconditionError("x must lie in [0, 1]")
    return h_with_threshold(ctx, p, x, ctx.r)


def h_with_threshold(ctx: GEvalContext, p: float, x: float, s: int) -> float:
    """h_{s,p}(x) for 1 <= s <= r; s = r-1 gives the non-root fort map."""
    if not 1 <= s <= ctx.r:
        raise PreconditionError("threshold s must satisfy 1 <= s <= r")
    if p >= 1.0:
        return 0.0
    if ctx.analytic:
        if s == ctx.r == ctx.dist.r:
            return (1.0 - p) * x * G(ctx, x)
        d = ctx.dist
        cap = min(ctx.cutoff, _ENUM_CAP)
        ks, w = d.support_probs(upto=cap)
        val = float(np.dot(w, _binom_lte_vector(ks, 1.0 - x, s - 1)))
        return (1.0 - p) * (val + d.tail(cap) * 0.5)  # remainder in [0, tail]
    # truncated mass (if any) would add at most tail * 1; kept sub-probabilistic
    val = float(np.dot(ctx.weights_all, _binom_lte_vector(ctx.ks_all, 1.0 - x, s - 1)))
    return (1.0 - p) * val


# ---------------------------------------------------------------------------
# maximization


@dataclass(frozen=True)
class MaxResult:
    """Location and value of the maximum of G on [0, 1]."""

    x_star: float
    M: float
    bracket_width: float
    err: float

    @property
    def M_minus_1(self) -> float:
        return self.M - 1.0


def _golden_max(f: Callable[[float], float], a: float, b: float, tol: float) -> tuple[float, float]:
    """Golden-section maximum of a unimodal f on [a, b]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    invphi2 = (3.0 - math.sqrt(5.0)) / 2.0
    h_ = b - a
    c, dd = a + invphi2 * h_, a + invphi * h_
    fc, fd = f(c), f(dd)
    while h_ > tol:
        if fc >= fd:
            b, dd, fd = dd, c, fc
            h_ = b - a
            c = a + invphi2 * h_
            fc = f(c)
        else:
            a, c, fc = c, dd, fd
            h_ = b - a
            dd = a + invphi * h_
            fd = f(dd)
    if fc >= fd:
        return c, fc
    return dd, fd


def max_G(ctx: GEvalContext, grid_step: float = DEFAULT_GRID_STEP) -> MaxResult:
    """Global maximum of G over [0, 1].

    Dense grid scan followed by golden-section refinement on every local
    bracket (endpoints included); modes of all supported families are wide
    relative to the default step, which is exposed as a tunable anyway.
    Ties report the smallest attaining x.
    """
    f = lambda x: G_minus_1(ctx, x)
    n = max(8, int(round(1.0 / grid_step)))
    xs = np.linspace(0.0, 1.0, n + 1)
    vals = np.array([f(float(x)) for x in xs])

    candidates: list[tuple[float, float]] = [(0.0, vals[0]), (1.0, vals[-1])]
    brackets = []
    for i in range(1, n):
        if vals[i] < vals[i - 1] or vals[i] < vals[i + 1]:
            continue
        # plateaus of exactly equal values spawn no brackets except at
        # their strict edges, so flat stretches cost nothing
        if vals[i] > vals[i - 1] or vals[i] > vals[i + 1]:
            brackets.append((xs[i - 1], xs[i + 1]))
    if vals[0] > vals[1]:
        brackets.append((0.0, xs[1]))
    if vals[-1] > vals[-2]:
        brackets.append((xs[-2], 1.0))
    for a, b in brackets:
        xb, fb = _golden_max(f, float(a), float(b), BRACKET_WIDTH)
        candidates.append((xb, fb))

    best = max(fb for _, fb in candidates)
    x_star = min(xb for xb, fb in candidates if fb >= best - 1e-10)
    m_minus_1 = best
    return MaxResult(
        x_star=float(x_star),
        M=1.0 + m_minus_1,
        bracket_width=BRACKET_WIDTH,
        err=ctx.eps_G + 1e-10,
    )
