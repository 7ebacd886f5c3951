"""Offspring distributions for Galton-Watson trees.

Every distribution here is an integer law with support contained in
{1, 2, 3, ...}; mass at 0 is rejected because the corresponding tree would
be finite with positive probability.  Supported families:

* ``regular(b)``        -- point mass at b (the b-ary tree)
* ``two_point(b, a)``   -- mass (a-b)/(a-2) at 2 and (b-2)/(a-2) at a, mean b
* ``shifted_poisson(b)``   -- 2 + Poisson(b-2), mean b
* ``shifted_geometric(b)`` -- 2 + Geometric_0(1/(b-1)), mean b
* ``heavy_tail(r)``     -- pmf (r-1)/(k(k-1)) on k >= r, infinite mean
* ``pruned(r, b)``      -- heavy_tail(r) truncated to {r..k1} with the
  removed mass reassigned to r and 2r+1 so that the mean equals b exactly
* ``explicit_pmf``      -- finite list of (k, probability) atoms

PMFs of the rational families (regular, two_point, heavy_tail and the
pruned body) are exposed as ``fractions.Fraction`` values; the shifted
families are floating point.  Moments that diverge are reported as the
distinguished value ``math.inf`` rather than raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import mpmath
import numpy as np
from scipy.special import digamma

__all__ = [
    "SpecError",
    "PreconditionError",
    "DistributionSpec",
    "OffspringDistribution",
    "TruncatedDistribution",
    "make_distribution",
    "parse_spec",
    "prune_eta",
    "mean",
    "second_factorial_moment",
    "alpha_moment",
    "harmonic_tail_moment",
    "fort_upper_moment",
    "harmonic_number",
]

INF = math.inf

FAMILIES = (
    "regular",
    "two_point",
    "shifted_poisson",
    "shifted_geometric",
    "heavy_tail",
    "pruned",
    "explicit_pmf",
)

_PMF_MASS_TOL = 1e-12


class SpecError(ValueError):
    """A distribution spec violates its invariants or cannot be parsed."""


class PreconditionError(ValueError):
    """An operation was called outside its stated precondition."""


# ---------------------------------------------------------------------------
# harmonic numbers

_HARMONIC_CACHE_N = 20000


def _harmonic_prefix(n: int) -> np.ndarray:
    # compensated cumulative sum: per-entry error stays at machine epsilon
    out = np.empty(n + 1)
    out[0] = 0.0
    s = 0.0
    c = 0.0
    for i in range(1, n + 1):
        y = 1.0 / i - c
        t = s + y
        c = (t - s) - y
        s = t
        out[i] = s
    return out


_harmonic_cache = _harmonic_prefix(_HARMONIC_CACHE_N)


def harmonic_number(n: int) -> float:
    """H_n = sum_{i=1}^n 1/i, with H_0 = 0.  Uses digamma beyond the cache."""
    if n < 0:
        raise ValueError("harmonic_number needs n >= 0")
    if n <= _HARMONIC_CACHE_N:
        return float(_harmonic_cache[n])
    return float(digamma(n + 1) + np.euler_gamma)


# ---------------------------------------------------------------------------
# spec objects


@dataclass(frozen=True)
class DistributionSpec:
    """Validated description of an offspring law."""

    family: str
    b: Optional[float] = None
    a: Optional[int] = None
    r: Optional[int] = None
    pmf: Optional[tuple[tuple[int, float], ...]] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise SpecError(f"unknown family {self.family!r}")
        f = self.family
        if f == "regular":
            if self.b is None or self.b != int(self.b) or self.b < 1:
                raise SpecError("regular requires integer b >= 1")
        elif f == "two_point":
            if self.a is None or self.b is None:
                raise SpecError("two_point requires parameters b and a")
            if int(self.a) != self.a:
                raise SpecError("two_point requires integer a")
            if not self.a >= self.b:
                raise SpecError("two_point requires a >= b")
            if not self.b > 2:
                raise SpecError("two_point requires b > 2")
        elif f in ("shifted_poisson", "shifted_geometric"):
            if self.b is None or not self.b > 2:
                raise SpecError(f"{f} requires b > 2")
        elif f == "heavy_tail":
            if self.r is None or self.r < 2:
                raise SpecError("heavy_tail requires integer r >= 2")
        elif f == "pruned":
            if self.r is None or self.r < 2:
                raise SpecError("pruned requires integer r >= 2")
            if self.b is None or self.b < (self.r - 1) * math.log(4 * math.e * self.r):
                raise SpecError(
                    "pruned requires b >= (r-1)*log(4*e*r) "
                    f"= {(self.r - 1) * math.log(4 * math.e * self.r):.6f}"
                )
        elif f == "explicit_pmf":
            if not self.pmf:
                raise SpecError("explicit_pmf requires at least one atom")
            total = 0.0
            seen = set()
            for k, p in self.pmf:
                if int(k) != k or k < 1:
                    raise SpecError("explicit_pmf support points must be integers >= 1 (mass at 0 rejected)")
                if k in seen:
                    raise SpecError(f"duplicate support point {k}")
                seen.add(k)
                if p < 0:
                    raise SpecError(f"negative probability at k={k}")
                total += p
            if abs(total - 1.0) > _PMF_MASS_TOL:
                raise SpecError(f"probabilities sum to {total!r}, not 1")

    def label(self) -> str:
        f = self.family
        if f == "regular":
            return f"regular:b={_fmt(self.b)}"
        if f == "two_point":
            return f"twopoint:b={_fmt(self.b)},a={self.a}"
        if f == "shifted_poisson":
            return f"poisson:b={_fmt(self.b)}"
        if f == "shifted_geometric":
            return f"geometric:b={_fmt(self.b)}"
        if f == "heavy_tail":
            return f"heavy:r={self.r}"
        if f == "pruned":
            return f"pruned:r={self.r},b={_fmt(self.b)}"
        return "pmf:" + ",".join(f"{k}={_fmt(p)}" for k, p in self.pmf)


def _fmt(x) -> str:
    if x == int(x):
        return str(int(x))
    return repr(float(x))


def _parse_real(tok: str) -> float:
    tok = tok.strip()
    if "/" in tok:
        num, den = tok.split("/", 1)
        return float(Fraction(int(num), int(den)))
    return float(tok)


_SPEC_ALIASES = {
    "regular": "regular",
    "twopoint": "two_point",
    "two_point": "two_point",
    "poisson": "shifted_poisson",
    "geometric": "shifted_geometric",
    "heavy": "heavy_tail",
    "heavytail": "heavy_tail",
    "pruned": "pruned",
    "pmf": "explicit_pmf",
}


def parse_spec(text: str) -> DistributionSpec:
    """Parse a CLI distribution string such as ``regular:b=5`` or ``pmf:2=0.5,4=0.5``.

    Family names are case-insensitive; real parameters accept decimals or
    rationals ``p/q``.
    """
    text = text.strip()
    if ":" not in text:
        raise SpecError(f"malformed distribution spec {text!r} (expected family:params)")
    head, rest = text.split(":", 1)
    family = _SPEC_ALIASES.get(head.strip().lower())
    if family is None:
        raise SpecError(f"unknown family {head!r}")
    try:
        if family == "explicit_pmf":
            atoms = []
            for item in rest.split(","):
                k, p = item.split("=", 1)
                atoms.append((int(k), _parse_real(p)))
            return DistributionSpec(family=family, pmf=tuple(atoms))
        params = {}
        for item in rest.split(","):
            key, val = item.split("=", 1)
            params[key.strip().lower()] = val.strip()
        kwargs = {}
        if "b" in params:
            kwargs["b"] = _parse_real(params["b"])
        if "a" in params:
            kwargs["a"] = int(params["a"])
        if "r" in params:
            kwargs["r"] = int(params["r"])
        extra = set(params) - {"b", "a", "r"}
        if extra:
            raise SpecError(f"unknown parameters {sorted(extra)} for family {family}")
        return DistributionSpec(family=family, **kwargs)
    except SpecError:
        raise
    except Exception as exc:
        raise SpecError(f"cannot parse {text!r}: {exc}") from None


# ---------------------------------------------------------------------------
# distributions


class OffspringDistribution:
    """Common interface: pmf / tail mass / moments / sampling.

    ``support_max`` is None for the genuinely infinite families; the pruned
    family is finite but its support is far too large to enumerate, so it
    reports ``enumerable = False`` like the heavy tail.
    """

    spec: DistributionSpec
    support_min: int
    support_max: Optional[int]
    enumerable: bool = True

    def pmf(self, k: int):
        raise NotImplementedError

    def tail(self, m: int) -> float:
        """P(xi > m)."""
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def second_factorial_moment(self) -> float:
        """E(xi(xi-1))."""
        raise NotImplementedError

    def alpha_moment(self, alpha: float) -> float:
        """E(xi^(1+alpha)) for 0 < alpha <= 1."""
        if not 0 < alpha <= 1:
            raise PreconditionError("alpha must lie in (0, 1]")
        return self._alpha_moment(alpha)

    def _alpha_moment(self, alpha: float) -> float:
        raise NotImplementedError

    def harmonic_tail_moment(self, r: int) -> float:
        """E(H_{xi-r}); requires P(xi < r) = 0."""
        if self.prob_below(r) > 0:
            raise PreconditionError("harmonic_tail_moment requires support >= r")
        return self._harmonic_tail_moment(r)

    def _harmonic_tail_moment(self, r: int) -> float:
        raise NotImplementedError

    def fort_upper_moment(self) -> float:
        """E(1/((xi-1)(2xi-3))); requires support >= 2."""
        if self.support_min < 2:
            raise PreconditionError("fort_upper_moment requires support >= 2")
        return self._fort_upper_moment()

    def _fort_upper_moment(self) -> float:
        raise NotImplementedError

    def inverse_square_moment(self) -> float:
        """E(1/xi^2)."""
        raise NotImplementedError

    def prob_below(self, r: int) -> float:
        """P(xi < r)."""
        raise NotImplementedError

    def truncation_cutoff(self, tail_target: float) -> int:
        """Smallest convenient K with tail(K) <= tail_target."""
        raise NotImplementedError

    def support_probs(self, upto: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
        """(ks, probs) arrays for the support truncated at ``upto``."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def label(self) -> str:
        return self.spec.label()

    def __repr__(self):
        return f"<{type(self).__name__} {self.label()}>"


class Regular(OffspringDistribution):
    def __init__(self, spec: DistributionSpec):
        self.spec = spec
        self.b = int(spec.b)
        self.support_min = self.b
        self.support_max = self.b

    def pmf(self, k):
        return Fraction(1) if k == self.b else Fraction(0)

    def tail(self, m):
        return 1.0 if m < self.b else 0.0

    def mean(self):
        return float(self.b)

    def second_factorial_moment(self):
        return float(self.b * (self.b - 1))

    def _alpha_moment(self, alpha):
        return float(self.b) ** (1.0 + alpha)

    def _harmonic_tail_moment(self, r):
        return harmonic_number(self.b - r)

    def _fort_upper_moment(self):
        return 1.0 / ((self.b - 1) * (2 * self.b - 3))

    def inverse_square_moment(self):
        return 1.0 / self.b**2

    def prob_below(self, r):
        return 1.0 if self.b < r else 0.0

    def truncation_cutoff(self, tail_target):
        return self.b

    def support_probs(self, upto=None):
        return np.array([self.b]), np.array([1.0])

    def sample(self, rng, size):
        return np.full(size, self.b, dtype=np.int64)


class TwoPoint(OffspringDistribution):
    """Mass at 2 and at a, tuned so the mean equals b."""

    def __init__(self, spec: DistributionSpec):
        self.spec = spec
        self.b = spec.b
        self.a = int(spec.a)
        if float(self.b) == int(self.b):
            bq = Fraction(int(self.b))
        else:
            bq = Fraction(self.b).limit_denominator(10**12)
        self.p2 = Fraction(self.a - bq, self.a - 2)
        self.pa = Fraction(bq - 2, self.a - 2)
        self.support_min = 2
        self.support_max = self.a

    def pmf(self, k):
        if k == 2:
            return self.p2
        if k == self.a:
            return self.pa
        return Fraction(0)

    def tail(self, m):
        if m < 2:
            return 1.0
        if m < self.a:
            return float(self.pa)
        return 0.0

    def mean(self):
        return float(2 * self.p2 + self.a * self.pa)

    def second_factorial_moment(self):
        return float(2 * self.p2 + self.a * (self.a - 1) * self.pa)

    def _alpha_moment(self, alpha):
        return float(self.p2) * 2.0 ** (1 + alpha) + float(self.pa) * float(self.a) ** (1 + alpha)

    def _harmonic_tail_moment(self, r):
        return float(self.p2) * harmonic_number(2 - r) + float(self.pa) * harmonic_number(self.a - r)

    def _fort_upper_moment(self):
        return float(self.p2) + float(self.pa) / ((self.a - 1) * (2 * self.a - 3))

    def inverse_square_moment(self):
        return float(self.p2) / 4.0 + float(self.pa) / self.a**2

    def prob_below(self, r):
        if r <= 2:
            return 0.0
        if r <= self.a:
            return float(self.p2)
        return 1.0

    def truncation_cutoff(self, tail_target):
        return self.a

    def support_probs(self, upto=None):
        return np.array([2, self.a]), np.array([float(self.p2), float(self.pa)])

    def sample(self, rng, size):
        u = rng.random(size)
        return np.where(u < float(self.p2), 2, self.a).astype(np.int64)


class ShiftedPoisson(OffspringDistribution):
    """2 + Poisson(b-2)."""

    def __init__(self, spec: DistributionSpec):
        self.spec = spec
        self.b = float(spec.b)
        self.lam = self.b - 2.0
        self.support_min = 2
        self.support_max = None

    def pmf(self, k):
        if k < 2:
            return 0.0
        j = k - 2
        return math.exp(-self.lam + j * math.log(self.lam) - math.lgamma(j + 1)) if self.lam > 0 else (1.0 if j == 0 else 0.0)

    def tail(self, m):
        if m < 2:
            return 1.0
        from scipy.stats import poisson

        return float(poisson.sf(m - 2, self.lam))

    def mean(self):
        return self.b

    def second_factorial_moment(self):
        return self.b**2 - 2.0

    def _alpha_moment(self, alpha):
        return _series_vs_pmf(self, lambda k: float(k) ** (1 + alpha))

    def _harmonic_tail_moment(self, r):
        return _series_vs_pmf(self, lambda k: harmonic_number(k - r))

    def _fort_upper_moment(self):
        return _series_vs_pmf(self, lambda k: 1.0 / ((k - 1) * (2 * k - 3)))

    def inverse_square_moment(self):
        return _series_vs_pmf(self, lambda k: 1.0 / k**2)

    def prob_below(self, r):
        if r <= 2:
            return 0.0
        return 1.0 - self.tail(r - 1)

    def truncation_cutoff(self, tail_target):
        k = int(self.lam + 10 * math.sqrt(self.lam + 1) + 20) + 2
        while self.tail(k) > tail_target:
            k = int(1.5 * k) + 10
        return k

    def support_probs(self, upto=None):
        K = upto if upto is not None else self.truncation_cutoff(1e-13)
        ks = np.arange(2, K + 1)
        j = ks - 2
        from scipy.stats import poisson

        return ks, poisson.pmf(j, self.lam)

    def sample(self, rng, size):
        return 2 + rng.poisson(self.lam, size).astype(np.int64)


class ShiftedGeometric(OffspringDistribution):
    """P(xi = k+2) = (1/(b-1)) ((b-2)/(b-1))^k, k >= 0."""

    def __init__(self, spec: DistributionSpec):
        self.spec = spec
        self.b = float(spec.b)
        self.rho = (self.b - 2.0) / (self.b - 1.0)
        self.support_min = 2
        self.support_max = None

    def pmf(self, k):
        if k < 2:
            return 0.0
        return (1.0 / (self.b - 1.0)) * self.rho ** (k - 2)

    def tail(self, m):
        if m < 1:
            return 1.0
        return self.rho ** (m - 1)

    def mean(self):
        return self.b

    def second_factorial_moment(self):
        return 2.0 * (self.b - 1.0) ** 2

    def _alpha_moment(self, alpha):
        return _series_vs_pmf(self, lambda k: float(k) ** (1 + alpha))

    def _harmonic_tail_moment(self, r):
        return _series_vs_pmf(self, lambda k: harmonic_number(k - r))

    def _fort_upper_moment(self):
        return _series_vs_pmf(self, lambda k: 1.0 / ((k - 1) * (2 * k - 3)))

    def inverse_square_moment(self):
        return _series_vs_pmf(self, lambda k: 1.0 / k**2)

    def prob_below(self, r):
        if r <= 2:
            return 0.0
        return 1.0 - self.tail(r - 1)

    def truncation_cutoff(self, tail_target):
        k = 2 + int(math.log(tail_target) / math.log(self.rho)) + 2
        while self.tail(k) > tail_target:
            k += 10
        return k

    def support_probs(self, upto=None):
        K = upto if upto is not None else self.truncation_cutoff(1e-13)
        ks = np.arange(2, K + 1)
        return ks, (1.0 / (self.b - 1.0)) * self.rho ** (ks - 2)

    def sample(self, rng, size):
        # numpy's geometric counts trials (>= 1); we want failures before success
        return 2 + (rng.geometric(1.0 / (self.b - 1.0), size) - 1).astype(np.int64)


class HeavyTail(OffspringDistribution):
    """pmf (r-1)/(k(k-1)) on k >= r; infinite mean, tail (r-1)/m."""

    enumerable = False

    def __init__(self, spec: DistributionSpec):
        self.spec = spec
        self.r = int(spec.r)
        self.support_min = self.r
        self.support_max = None

    def pmf(self, k):
        if k < self.r:
            return Fraction(0)
        return Fraction(self.r - 1, k * (k - 1))

    def tail(self, m):
        if m < self.r:
            return 1.0
        return (self.r - 1) / m

    def mean(self):
        return INF

    def second_factorial_moment(self):
        return INF

    def _alpha_moment(self, alpha):
        # terms behave like k^(alpha-1): divergent for every alpha > 0
        return INF

    def _harmonic_tail_moment(self, r):
        rr = self.r
        head = math.fsum(
            (rr - 1) / (k * (k - 1)) * harmonic_number(k - r) for k in range(rr, 2001)
        )
        f = lambda k: (rr - 1) / (k * (k - 1)) * (mpmath.psi(0, k - r + 1) + mpmath.euler)
        return head + float(mpmath.sumem(f, [2001, mpmath.inf]))

    def _fort_upper_moment(self):
        rr = self.r
        K = 20000
        head = math.fsum(
            (rr - 1) / (k * (k - 1)) * (1.0 / ((k - 1) * (2 * k - 3))) for k in range(max(rr, 2), K + 1)
        )
        # remainder below sum of 2(r-1) k^-4
        return head + 2 * (rr - 1) / (3 * K**3)

    def inverse_square_moment(self):
        rr = self.r
        K = 20000
        head = math.fsum((rr - 1) / (k**3 * (k - 1)) for k in range(rr, K + 1))
        return head + (rr - 1) / (3 * K**3)

    def prob_below(self, r):
        if r <= self.r:
            return 0.0
        return 1.0 - self.tail(r - 1)

    def truncation_cutoff(self, tail_target):
        return max(self.r, math.ceil((self.r - 1) / tail_target))

    def support_probs(self, upto=None):
        if upto is None or upto > 5_000_000:
            raise PreconditionError("heavy_tail support cannot be enumerated without a cutoff <= 5e6")
        ks = np.arange(self.r, upto + 1)
        return ks, (self.r - 1.0) / (ks * (ks - 1.0))

    def sample(self, rng, size):
        u = rng.random(size)
        k = np.ceil((self.r - 1) / (1.0 - u)).astype(np.int64)
        return np.maximum(k, self.r)


class Pruned(OffspringDistribution):
    """Heavy tail truncated at k1 with the freed mass moved to r and 2r+1.

    k0 is the largest m with (r-1)(H_{m-1} - H_{r-2}) <= b, k1 = k0 - 2r,
    A = (r-1)/k1 is the truncated mass, and alpha in (0,1) solves
    K/A = alpha r + (1-alpha)(2r+1) with K the unallocated part of the mean,
    which makes the mean exactly b.
    """

    enumerable = False

    def __init__(self, spec: DistributionSpec):
        self.spec = spec
        self.r = int(spec.r)
        self.b = float(spec.b)
        r, b = self.r, self.b
        self.k0 = _k0_search(r, b)
        if self.k0 <= 4 * r:
            raise PreconditionError(f"pruned construction needs k0 > 4r; got k0={self.k0}")
        self.k1 = self.k0 - 2 * r
        self.A = (r - 1) / self.k1
        body_mean = (r - 1) * (harmonic_number(self.k1 - 1) - harmonic_number(r - 2))
        self.K = b - body_mean
        ratio = self.K / self.A
        self.alpha = (2 * r + 1 - ratio) / (r + 1)
        if not 0.0 < self.alpha < 1.0:
            raise PreconditionError(
                f"pruned construction inconsistent: alpha={self.alpha!r} outside (0,1)"
            )
        self.support_min = r
        self.support_max = self.k1

    def _base(self, k: int) -> Fraction:
        if self.r <= k <= self.k1:
            return Fraction(self.r - 1, k * (k - 1))
        return Fraction(0)

    def pmf(self, k):
        base = self._base(k)
        if k == self.r:
            return float(base) + self.alpha * self.A
        if k == 2 * self.r + 1:
            return float(base) + (1.0 - self.alpha) * self.A
        return base

    def tail(self, m):
        r = self.r
        if m < r:
            return 1.0
        if m >= self.k1:
            return 0.0
        body = (r - 1) / m - (r - 1) / self.k1  # base mass on (m, k1]
        extra = 0.0 if m >= 2 * r + 1 else (1.0 - self.alpha) * self.A
        return body + extra

    def mean(self):
        body = (self.r - 1) * (harmonic_number(self.k1 - 1) - harmonic_number(self.r - 2))
        return body + self.A * (self.alpha * self.r + (1.0 - self.alpha) * (2 * self.r + 1))

    def second_factorial_moment(self):
        r = self.r
        body = (r - 1) * (self.k1 - r + 1)
        atoms = self.alpha * self.A * r * (r - 1) + (1 - self.alpha) * self.A * (2 * r + 1) * (2 * r)
        return float(body + atoms)

    def _alpha_moment(self, alpha):
        r = self.r
        f = lambda k: float(k) ** (1 + alpha) * (r - 1) / (k * (k - 1))
        head_top = min(self.k1, 2000)
        total = math.fsum(f(k) for k in range(r, head_top + 1))
        if self.k1 > head_top:
            g = lambda k: k ** (1 + alpha) * (r - 1) / (k * (k - 1))
            total += float(mpmath.sumem(g, [head_top + 1, self.k1]))
        total += self.alpha * self.A * r ** (1 + alpha)
        total += (1 - self.alpha) * self.A * (2 * r + 1) ** (1 + alpha)
        return total

    def _harmonic_tail_moment(self, r):
        rr = self.r
        head_top = min(self.k1, 2000)
        total = math.fsum(
            (rr - 1) / (k * (k - 1)) * harmonic_number(k - r) for k in range(rr, head_top + 1)
        )
        if self.k1 > head_top:
            f = lambda k: (rr - 1) / (k * (k - 1)) * (mpmath.psi(0, k - r + 1) + mpmath.euler)
            total += float(mpmath.sumem(f, [head_top + 1, self.k1]))
        total += self.alpha * self.A * harmonic_number(rr - r)
        total += (1 - self.alpha) * self.A * harmonic_number(2 * rr + 1 - r)
        return total

    def _fort_upper_moment(self):
        r = self.r
        K = min(self.k1, 20000)
        total = math.fsum(
            (r - 1) / (k * (k - 1)) * (1.0 / ((k - 1) * (2 * k - 3))) for k in range(max(r, 2), K + 1)
        )
        if self.k1 > K:
            total += 2 * (r - 1) / (3 * K**3)
        total += self.alpha * self.A / ((r - 1) * (2 * r - 3)) if r > 2 else self.alpha * self.A * 1.0
        total += (1 - self.alpha) * self.A / ((2 * r) * (4 * r - 1))
        return total

    def inverse_square_moment(self):
        r = self.r
        K = min(self.k1, 20000)
        total = math.fsum((r - 1) / (k**3 * (k - 1)) for k in range(r, K + 1))
        if self.k1 > K:
            total += (r - 1) / (3 * K**3)
        total += self.alpha * self.A / r**2 + (1 - self.alpha) * self.A / (2 * r + 1) ** 2
        return total

    def prob_below(self, r):
        if r <= self.r:
            return 0.0
        return 1.0 - self.tail(r - 1)

    def truncation_cutoff(self, tail_target):
        return self.k1

    def support_probs(self, upto=None):
        top = self.k1 if upto is None else min(self.k1, upto)
        if top > 5_000_000:
            raise PreconditionError("pruned support too large to enumerate; use the analytic path")
        ks = np.arange(self.r, top + 1)
        probs = (self.r - 1.0) / (ks * (ks - 1.0))
        probs[0] += self.alpha * self.A
        if 2 * self.r + 1 <= top:
            probs[self.r + 1] += (1 - self.alpha) * self.A  # index of k = 2r+1
        return ks, probs

    def sample(self, rng, size):
        r, A, al, k1 = self.r, self.A, self.alpha, self.k1
        u = rng.random(size)
        out = np.empty(size, dtype=np.int64)
        c_r = 1.0 / r + al * A                    # F(r)
        c_mid = 1.0 - (r - 1) / (2 * r) + al * A  # F(2r)
        c_atom = 1.0 - (r - 1) / (2 * r + 1) + A  # F(2r+1)
        lo = u <= c_r
        mid = (~lo) & (u <= c_mid)
        atom = (~lo) & (~mid) & (u <= c_atom)
        hi = ~(lo | mid | atom)
        out[lo] = r
        out[mid] = np.clip(
            np.ceil((r - 1) / (1.0 - (u[mid] - al * A))).astype(np.int64), r + 1, 2 * r
        )
        out[atom] = 2 * r + 1
        out[hi] = np.clip(
            np.ceil((r - 1) / (1.0 - (u[hi] - A))).astype(np.int64), 2 * r + 2, k1
        )
        return out


class ExplicitPMF(OffspringDistribution):
    def __init__(self, spec: DistributionSpec):
        self.spec = spec
        atoms = sorted(spec.pmf)
        self.ks = np.array([k for k, _ in atoms], dtype=np.int64)
        self.ps = np.array([p for _, p in atoms], dtype=float)
        self.support_min = int(self.ks[0])
        self.support_max = int(self.ks[-1])

    def pmf(self, k):
        idx = np.searchsorted(self.ks, k)
        if idx < len(self.ks) and self.ks[idx] == k:
            return float(self.ps[idx])
        return 0.0

    def tail(self, m):
        return float(self.ps[self.ks > m].sum())

    def mean(self):
        return float(np.dot(self.ks, self.ps))

    def second_factorial_moment(self):
        return float(np.dot(self.ks * (self.ks - 1), self.ps))

    def _alpha_moment(self, alpha):
        return float(np.dot(self.ks.astype(float) ** (1 + alpha), self.ps))

    def _harmonic_tail_moment(self, r):
        return float(sum(p * harmonic_number(int(k) - r) for k, p in zip(self.ks, self.ps)))

    def _fort_upper_moment(self):
        return float(np.dot(1.0 / ((self.ks - 1) * (2 * self.ks - 3)), self.ps))

    def inverse_square_moment(self):
        return float(np.dot(1.0 / self.ks.astype(float) ** 2, self.ps))

    def prob_below(self, r):
        return float(self.ps[self.ks < r].sum())

    def truncation_cutoff(self, tail_target):
        return self.support_max

    def support_probs(self, upto=None):
        return self.ks.copy(), self.ps.copy()

    def sample(self, rng, size):
        return rng.choice(self.ks, size=size, p=self.ps / self.ps.sum())


@dataclass(frozen=True)
class TruncatedDistribution:
    """Bookkeeping for a truncated view of an infinite-support law.

    Probabilities are kept as-is (sub-probability) unless renormalized;
    ``tail_mass`` equals ``base.tail(cutoff)`` exactly.
    """

    base: OffspringDistribution
    cutoff: int
    renormalized: bool = False

    @property
    def tail_mass(self) -> float:
        return self.base.tail(self.cutoff)

    @property
    def retained_mass(self) -> float:
        return 1.0 - self.tail_mass


# ---------------------------------------------------------------------------
# series summation with geometric remainder control


def _series_vs_pmf(dist, f, rel_tol: float = 1e-13, hard_cap: int = 2_000_000) -> float:
    """Sum f(k) pmf(k) over the support of a light-tailed infinite law.

    For the shifted Poisson / geometric families the term ratios are
    eventually decreasing (pmf ratio decreasing, f at most polynomial), so
    once the current ratio q is below 1 the remainder is bounded by the
    geometric tail term * q / (1 - q); stop when that bound is negligible.
    """
    k = dist.support_min
    mean_hint = dist.mean()
    prev = float(dist.pmf(k)) * f(k)
    total = prev
    k += 1
    while k < hard_cap:
        p = float(dist.pmf(k))
        term = p * f(k)
        total += term
        if term > 0 and prev > 0:
            ratio = term / prev
            if ratio < 1.0 and k > mean_hint:
                rem = term * ratio / (1.0 - ratio)
                if rem <= rel_tol * max(abs(total), 1e-300):
                    return total
        prev = term if term > 0 else prev
        k += 1
    return total


# ---------------------------------------------------------------------------
# pruned construction helpers


def _prune_score(r: int, m: int, b: float) -> float:
    return (r - 1) * (harmonic_number(m - 1) - harmonic_number(r - 2)) - b


def _k0_search(r: int, b: float) -> int:
    """Largest m with (r-1)(H_{m-1} - H_{r-2}) <= b.

    The gap between consecutive values of the left side is (r-1)/m, far
    above digamma's ~1e-15 evaluation error for every reachable m, so a
    float bisection plus an integer scan of the boundary is reliable.
    """
    lo, hi = r, 2 * r
    while _prune_score(r, hi, b) <= 0:
        lo, hi = hi, hi * 4
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _prune_score(r, mid, b) <= 0:
            lo = mid
        else:
            hi = mid
    while _prune_score(r, lo + 1, b) <= 0:
        lo += 1
    while lo > r and _prune_score(r, lo, b) > 0:
        lo -= 1
    return lo


# ---------------------------------------------------------------------------
# public constructors and functional wrappers


_CLASS_FOR_FAMILY = {
    "regular": Regular,
    "two_point": TwoPoint,
    "shifted_poisson": ShiftedPoisson,
    "shifted_geometric": ShiftedGeometric,
    "heavy_tail": HeavyTail,
    "pruned": Pruned,
    "explicit_pmf": ExplicitPMF,
}


def make_distribution(spec: DistributionSpec | str) -> OffspringDistribution:
    """Build an offspring distribution from a validated spec or CLI string."""
    if isinstance(spec, str):
        spec = parse_spec(spec)
    return _CLASS_FOR_FAMILY[spec.family](spec)


def prune_eta(r: int, b: float) -> Pruned:
    """The pruned heavy-tail law with threshold r and mean exactly b."""
    return make_distribution(DistributionSpec(family="pruned", r=r, b=float(b)))


def mean(d: OffspringDistribution) -> float:
    return d.mean()


def second_factorial_moment(d: OffspringDistribution) -> float:
    return d.second_factorial_moment()


def alpha_moment(d: OffspringDistribution, alpha: float) -> float:
    return d.alpha_moment(alpha)


def harmonic_tail_moment(d: OffspringDistribution, r: int) -> float:
    return d.harmonic_tail_moment(r)


def fort_upper_moment(d: OffspringDistribution) -> float:
    return d.fort_upper_moment()
