"""Analytic lower and upper bounds on the critical probability.

Lower bounds: the branching-moment bound exp(-(E(xi)-1)/(r-1) - E(H_{xi-r}))
and its simplified form c_r e^{-b/(r-1)}/b; the (1+alpha)-moment bound
c_{r,alpha} (E xi^{1+alpha})^{-1/alpha}; and for r = 2 the per-atom
domination bound and the second-factorial-moment bound.

Upper bounds: E(1/((xi-1)(2xi-3))) and the weaker E(4/xi^2) for r = 2;
r/d for the d-regular tree; and 2er(r-1)e^{-b/(r-1)} for the pruned family.

Bounds with infinite moments degrade to the vacuous 0 or 1 with an explicit
flag instead of raising, so a report can always be assembled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .offspring import OffspringDistribution, PreconditionError, Pruned
from .critical import CriticalResult, pc_exact

__all__ = [
    "BoundEntry",
    "BoundsReport",
    "lb_branching_exact",
    "lb_branching_simplified",
    "ub_pruned",
    "alpha_bound_constant",
    "lb_alpha_moment",
    "lb_fort",
    "ub_fort",
    "ub_fort_weak",
    "lb_second_moment",
    "lb_second_moment_weak",
    "ub_regular_rd",
    "bounds_report",
    "sandwich_violations",
]


@dataclass(frozen=True)
class BoundEntry:
    name: str
    kind: str  # "lower" | "upper"
    value: float  # clamped to [0, 1]
    raw: float    # as computed, possibly outside [0, 1]
    valid: bool
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "value": self.value,
            "raw": self.raw,
            "valid": self.valid,
            "note": self.note,
        }


@dataclass
class BoundsReport:
    entries: list[BoundEntry]
    pc_ref: Optional[CriticalResult]

    def lower(self) -> list[BoundEntry]:
        return [e for e in self.entries if e.kind == "lower" and e.valid]

    def upper(self) -> list[BoundEntry]:
        return [e for e in self.entries if e.kind == "upper" and e.valid]


def _clamp(x: float) -> float:
    return min(1.0, max(0.0, x))


def lb_branching_exact(d: OffspringDistribution, r: int) -> float:
    """exp(-(E(xi)-1)/(r-1) - E(H_{xi-r})).  Vacuous 0 for infinite mean."""
    if d.prob_below(r) > 0:
        raise PreconditionError("lb_branching_exact requires support >= r")
    b = d.mean()
    if math.isinf(b):
        return 0.0
    return math.exp(-(b - 1.0) / (r - 1.0) - d.harmonic_tail_moment(r))


def lb_branching_simplified(b: float, r: int) -> float:
    """e^{-(r-2)/(r-1)} e^{-b/(r-1)} / b, a function of the mean alone."""
    if not b >= r:
        raise PreconditionError("lb_branching_simplified requires b >= r")
    return math.exp(-(r - 2.0) / (r - 1.0)) * math.exp(-b / (r - 1.0)) / b


def ub_pruned(r: int, b: float) -> tuple[float, bool]:
    """(2er(r-1) e^{-b/(r-1)}, validity); valid once b > (r-1) log(4er)."""
    value = 2.0 * math.e * r * (r - 1) * math.exp(-b / (r - 1.0))
    valid = b > (r - 1) * math.log(4 * math.e * r)
    return value, valid


def _h_alpha(r: int, alpha: float, y: float) -> float:
    if r == 2:
        return 1.0
    return 1.0 - alpha * (y - 2.0 * y ** (r - 1 + alpha))


def alpha_bound_constant(r: int, alpha: float) -> float:
    """c_{r,alpha} = ((r-1)/r) min(c', c'').

    c' = (h(b*)/(2(1+alpha)))^(1/alpha) with b* the minimizer of
    h(y) = 1 - alpha(y - 2 y^(r-1+alpha)) (h == 1 when r = 2);
    c'' = ((1-alpha)/(4 alpha (1+alpha)))^(1/alpha) for r = 2 and
    (r-2) (h(b*)/(6 alpha (1+alpha)))^(1/alpha) for r >= 3.
    """
    if not 0.0 < alpha < 1.0:
        raise PreconditionError("alpha must lie in (0, 1)")
    if r < 2:
        raise PreconditionError("r must be >= 2")
    if r == 2:
        h_min = 1.0
        c1 = (h_min / (2.0 * (1.0 + alpha))) ** (1.0 / alpha)
        c2 = ((1.0 - alpha) / (4.0 * alpha * (1.0 + alpha))) ** (1.0 / alpha)
    else:
        b_star = (1.0 / (2.0 * (r + alpha - 1.0))) ** (1.0 / (r + alpha - 2.0))
        h_min = _h_alpha(r, alpha, b_star)
        c1 = (h_min / (2.0 * (1.0 + alpha))) ** (1.0 / alpha)
        c2 = (r - 2) * (h_min / (6.0 * alpha * (1.0 + alpha))) ** (1.0 / alpha)
    return (r - 1.0) / r * min(c1, c2)


def lb_alpha_moment(d: OffspringDistribution, r: int, alpha: float) -> float:
    """c_{r,alpha} (E xi^{1+alpha})^{-1/alpha}; vacuous 0 for infinite moment."""
    m = d.alpha_moment(alpha)
    if math.isinf(m):
        return 0.0
    return alpha_bound_constant(r, alpha) * m ** (-1.0 / alpha)


def lb_fort(d: OffspringDistribution) -> float:
    """Best per-atom domination lower bound for r = 2; may be negative.

    Per-atom kernel maxima: g_2^2 peaks at 2; g_k^2 peaks at
    k^(k-1) (k-2)^(k-2) / (k-1)^(2k-3) for k >= 3.  Atoms with zero mass
    contribute nothing, and beyond the truncation cutoff the terms only
    fall further (the peak tends to 1 while the mass vanishes).
    """
    if d.support_min < 2:
        raise PreconditionError("lb_fort requires support >= 2")
    if d.support_max is not None and not isinstance(d, Pruned):
        ks, probs = d.support_probs()
    else:
        ks, probs = d.support_probs(upto=min(d.truncation_cutoff(1e-13), 200_000))
    ks = np.asarray(ks, dtype=float)
    probs = np.asarray(probs, dtype=float)
    pos = probs > 0.0
    ks, probs = ks[pos], probs[pos]
    if len(ks) == 0:
        raise PreconditionError("empty support")
    # log of max_x g_k^2: log 2 at k = 2, else the peak-value formula
    log_maxg = np.where(
        ks == 2,
        math.log(2.0),
        (ks - 1) * np.log(ks) + (ks - 2) * np.log(np.maximum(ks - 2, 1)) - (2 * ks - 3) * np.log(ks - 1),
    )
    return float(np.max(1.0 - np.exp(-log_maxg) / probs))


def ub_fort(d: OffspringDistribution) -> float:
    """E(1/((xi-1)(2xi-3))), an upper bound on p_c for r = 2."""
    return d.fort_upper_moment()


def ub_fort_weak(d: OffspringDistribution) -> float:
    """E(4/xi^2), the looser companion of ub_fort."""
    return 4.0 * d.inverse_square_moment()


def lb_second_moment(d: OffspringDistribution) -> float:
    """Second-factorial-moment lower bound for r = 2.

    The quadratic minorant of G peaks at x_v = 1 - 1/(E(xi)_2 - 2); the
    usual form 1/(2 E(xi)_2 - 3) assumes x_v in [0,1], i.e. E(xi)_2 >= 3.
    Below that the maximum sits at x = 0 and the bound is 1 - 2/(6 - E(xi)_2)
    (the two agree at E(xi)_2 = 3; near-degenerate laws like the point mass
    at 2 would otherwise receive an invalid bound above their true p_c).
    """
    m2 = d.second_factorial_moment()
    if math.isinf(m2):
        return 0.0
    if m2 >= 3.0:
        return 1.0 / (2.0 * m2 - 3.0)
    return 1.0 - 2.0 / (6.0 - m2)


def lb_second_moment_weak(d: OffspringDistribution) -> float:
    """1/(2 E(xi^2)), the looser companion of lb_second_moment."""
    m2 = d.second_factorial_moment()
    mu = d.mean()
    if math.isinf(m2) or math.isinf(mu):
        return 0.0
    return 1.0 / (2.0 * (m2 + mu))


def ub_regular_rd(d_reg: int, r: int) -> float:
    """r/d for the (d+1)-regular tree."""
    if d_reg < r:
        raise PreconditionError("ub_regular_rd requires d >= r")
    return r / d_reg


def bounds_report(
    d: OffspringDistribution,
    r: int,
    alpha: float = 0.5,
    with_reference: bool = True,
) -> BoundsReport:
    """Assemble every applicable bound for (d, r) with validity flags."""
    entries: list[BoundEntry] = []
    mean_val = d.mean()
    below = d.prob_below(r) > 0

    if not below:
        if math.isinf(mean_val):
            entries.append(BoundEntry("lb_branching_exact", "lower", 0.0, 0.0, False,
                                      "vacuous: infinite mean"))
        else:
            v = lb_branching_exact(d, r)
            entries.append(BoundEntry("lb_branching_exact", "lower", _clamp(v), v, True))
            if mean_val >= r:
                v = lb_branching_simplified(mean_val, r)
                entries.append(BoundEntry("lb_branching_simplified", "lower", _clamp(v), v, True))

    m_alpha = d.alpha_moment(alpha) if 0 < alpha < 1 else math.inf
    if math.isinf(m_alpha):
        entries.append(BoundEntry("lb_alpha_moment", "lower", 0.0, 0.0, False,
                                  f"vacuous: infinite (1+{alpha:g})-moment"))
    else:
        v = lb_alpha_moment(d, r, alpha)
        entries.append(BoundEntry("lb_alpha_moment", "lower", _clamp(v), v, True,
                                  f"alpha={alpha:g}"))

    if r == 2 and d.support_min >= 2:
        v = lb_fort(d)
        entries.append(BoundEntry("lb_fort", "lower", _clamp(v), v, True,
                                  "negative values are vacuous but correct" if v < 0 else ""))
        m2 = d.second_factorial_moment()
        if math.isinf(m2):
            entries.append(BoundEntry("lb_second_moment", "lower", 0.0, 0.0, False,
                                      "vacuous: infinite second moment"))
        else:
            v = lb_second_moment(d)
            entries.append(BoundEntry("lb_second_moment", "lower", _clamp(v), v, True))
            v = lb_second_moment_weak(d)
            entries.append(BoundEntry("lb_second_moment_weak", "lower", _clamp(v), v, True))
        v = ub_fort(d)
        entries.append(BoundEntry("ub_fort", "upper", _clamp(v), v, True))
        v = ub_fort_weak(d)
        entries.append(BoundEntry("ub_fort_weak", "upper", _clamp(v), v, True))

    if d.spec.family == "regular" and int(d.spec.b) >= r:
        v = ub_regular_rd(int(d.spec.b), r)
        entries.append(BoundEntry("ub_regular_rd", "upper", _clamp(v), v, True))

    if isinstance(d, Pruned) and d.r == r:
        v, valid = ub_pruned(r, d.b)
        entries.append(BoundEntry("ub_pruned", "upper", _clamp(v), v, valid,
                                  "" if valid else "below validity threshold"))

    pc_ref = pc_exact(d, r) if with_reference else None
    return BoundsReport(entries=entries, pc_ref=pc_ref)


def sandwich_violations(report: BoundsReport, tol: float = 1e-8) -> list[str]:
    """Valid lower bounds above p_c or uppers below it, within solver error."""
    if report.pc_ref is None:
        return []
    pc = report.pc_ref.pc
    slack = tol + report.pc_ref.err
    problems = []
    for e in report.lower():
        if e.raw > pc + slack:
            problems.append(f"{e.name} = {e.raw!r} exceeds pc = {pc!r}")
    for e in report.upper():
        if e.raw < pc - slack:
            problems.append(f"{e.name} = {e.raw!r} is below pc = {pc!r}")
    return problems
