"""Galton-Watson tree sampling and bootstrap dynamics.

Trees are stored breadth-first to a fixed depth n: vertices at depth n keep
no children, matching the truncated-tree semantics of the survival
recursion.  Two independent oracles decide the fate of the root:

* ``run_bootstrap`` iterates the infection update rule (neighbourhood =
  parent + children) to its fixed point;
* ``root_fort_status`` runs the bottom-up blocking-set recursion: a vertex
  is safe iff it is initially healthy and at most r-1 of its children are
  unsafe, leaves being safe iff healthy.

On any finite tree the eternally healthy set is exactly the union of
initially healthy blocking sets, so the two must agree on the root.

Monte Carlo replicates draw from counter-based Philox streams keyed by
(master seed, replicate index); the estimate is an order-insensitive
integer sum, so the result is bit-identical however replicates are
scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .offspring import OffspringDistribution, PreconditionError

__all__ = [
    "DEFAULT_BUDGET",
    "SampledTree",
    "sample_tree",
    "sample_marks",
    "run_bootstrap",
    "root_fort_status",
    "SimEstimate",
    "estimate_qn",
    "replicate_rng",
]

DEFAULT_BUDGET = 10_000_000


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Philox stream for one replicate: key = master seed, counter = index."""
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, index]))


@dataclass
class SampledTree:
    """Breadth-first tree: children of vertex v occupy
    child_start[v] .. child_start[v] + counts[v]."""

    counts: np.ndarray
    child_start: np.ndarray
    depth: np.ndarray
    level_start: list[int]  # level_start[i] .. level_start[i+1] is level i
    n: int
    budget: int
    truncated: bool

    @property
    def n_vertices(self) -> int:
        return len(self.counts)

    @property
    def n_levels(self) -> int:
        return len(self.level_start) - 1

    def level(self, i: int) -> slice:
        return slice(self.level_start[i], self.level_start[i + 1])

    def parents(self) -> np.ndarray:
        par = np.empty(self.n_vertices, dtype=np.int64)
        par[0] = -1
        if self.n_vertices > 1:
            par[1:] = np.repeat(np.arange(self.n_vertices), self.counts)
        return par


def _levels_to_tree(level_counts: list[np.ndarray], n: int, budget: int,
                    truncated: bool) -> SampledTree:
    sizes = [len(c) for c in level_counts]
    if truncated:
        # vertices of the last generated level become leaves
        level_counts = level_counts[:-1] + [np.zeros(sizes[-1], dtype=np.int64)]
    counts = np.concatenate(level_counts) if level_counts else np.zeros(1, dtype=np.int64)
    child_start = np.empty(len(counts), dtype=np.int64)
    child_start[0] = 1
    np.cumsum(counts[:-1], out=child_start[1:])
    child_start[1:] += 1
    depth = np.repeat(np.arange(len(sizes)), sizes).astype(np.int32)
    level_start = np.concatenate([[0], np.cumsum(sizes)]).tolist()
    return SampledTree(
        counts=counts.astype(np.int64), child_start=child_start, depth=depth,
        level_start=level_start, n=n, budget=budget, truncated=truncated,
    )


def sample_tree(
    d: OffspringDistribution,
    n: int,
    budget: int = DEFAULT_BUDGET,
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> SampledTree:
    """First n+1 levels of a Galton-Watson tree, child counts i.i.d. from d.

    Exceeding the vertex budget is not an error: generation stops and the
    result carries ``truncated=True``.
    """
    if n < 0:
        raise PreconditionError("depth must be >= 0")
    if budget < 1:
        raise PreconditionError("budget must be >= 1")
    if rng is None:
        rng = np.random.Generator(np.random.Philox(key=0 if seed is None else seed))
    level_counts: list[np.ndarray] = []
    width = 1
    total = 1
    truncated = False
    for _ in range(n):
        counts = d.sample(rng, width)
        level_counts.append(counts.astype(np.int64))
        width = int(counts.sum())
        total += width
        if total > budget:
            truncated = True
            break
    if not truncated:
        level_counts.append(np.zeros(width, dtype=np.int64))
    return _levels_to_tree(level_counts, n, budget, truncated)


def sample_marks(tree: SampledTree, p: float, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. Bernoulli(p) initial-infection marks, one per vertex."""
    if not 0.0 <= p <= 1.0:
        raise PreconditionError("p must lie in [0, 1]")
    return rng.random(tree.n_vertices) < p


def run_bootstrap(tree: SampledTree, marks: np.ndarray, r: int) -> np.ndarray:
    """Final infected set of the update dynamics on the sampled tree."""
    if len(marks) != tree.n_vertices:
        raise PreconditionError("marks must cover all vertices")
    n_v = tree.n_vertices
    parent = tree.parents()
    infected = np.asarray(marks, dtype=bool).copy()
    cnt = np.zeros(n_v, dtype=np.int64)
    stack = list(np.flatnonzero(infected))
    counts = tree.counts
    child_start = tree.child_start
    while stack:
        u = stack.pop()
        neigh = list(range(child_start[u], child_start[u] + counts[u]))
        if parent[u] >= 0:
            neigh.append(parent[u])
        for v in neigh:
            if not infected[v]:
                cnt[v] += 1
                if cnt[v] >= r:
                    infected[v] = True
                    stack.append(v)
    return infected


def _segment_sums(values: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Sum of ``values`` over the contiguous child segments given by counts."""
    cs = np.concatenate([[0], np.cumsum(values)])
    ends = np.cumsum(counts)
    starts = ends - counts
    return cs[ends] - cs[starts]


def root_fort_status(tree: SampledTree, marks: np.ndarray, r: int) -> bool:
    """True iff the root stays healthy forever (lies in a healthy blocking set)."""
    if len(marks) != tree.n_vertices:
        raise PreconditionError("marks must cover all vertices")
    healthy = ~np.asarray(marks, dtype=bool)
    top = tree.n_levels - 1
    safe = healthy[tree.level(top)]
    for lev in range(top - 1, -1, -1):
        sl = tree.level(lev)
        counts = tree.counts[sl]
        unsafe_children = _segment_sums(~safe, counts)
        safe = healthy[sl] & (unsafe_children <= r - 1)
    return bool(safe[0])


@dataclass(frozen=True)
class SimEstimate:
    """Monte Carlo estimate of the root-survival probability q_n."""

    estimate: float
    se: float
    replicates: int
    effective: int
    truncated: int
    seed: int
    p: float
    n: int
    r: int

    def as_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "se": self.se,
            "replicates": self.replicates,
            "effective": self.effective,
            "truncated": self.truncated,
            "seed": self.seed,
            "p": self.p,
            "n": self.n,
            "r": self.r,
        }


def _replicate_safe(d: OffspringDistribution, r: int, p: float, n: int,
                    budget: int, rng: np.random.Generator) -> Optional[bool]:
    """Root-survival indicator for one replicate; None if budget-truncated.

    Stream order is fixed: child counts top-down, then one uniform draw per
    vertex in breadth-first order; the tree never needs to be materialized
    beyond its level arrays.
    """
    level_counts = []
    sizes = [1]
    width = 1
    total = 1
    for _ in range(n):
        counts = d.sample(rng, width)
        level_counts.append(counts)
        width = int(counts.sum())
        sizes.append(width)
        total += width
        if total > budget:
            return None
    healthy = rng.random(total) >= p
    hi = total
    safe = healthy[hi - width:]
    hi -= width
    for counts, size in zip(reversed(level_counts), reversed(sizes[:-1])):
        unsafe_children = _segment_sums(~safe, counts)
        safe = healthy[hi - size:hi] & (unsafe_children <= r - 1)
        hi -= size
    return bool(safe[0])


def estimate_qn(
    d: OffspringDistribution,
    r: int,
    p: float,
    n: int,
    replicates: int,
    seed: int,
    budget: int = DEFAULT_BUDGET,
) -> SimEstimate:
    """Mean of the root-survival indicator over independent (tree, mark) pairs.

    Deterministic given (seed, replicates): replicate i consumes only its
    own Philox stream, and the reduction is a sum of integers.
    Budget-truncated replicates are excluded from the estimate and counted.
    """
    if not 0.0 <= p <= 1.0:
        raise PreconditionError("p must lie in [0, 1]")
    if replicates < 1:
        raise PreconditionError("need at least one replicate")
    safe_count = 0
    truncated = 0
    # one local Philox whose counter is reset per replicate: identical
    # streams to replicate_rng(seed, i), without the construction overhead
    bitgen = np.random.Philox(key=seed)
    for i in range(replicates):
        state = bitgen.state
        state["state"]["counter"][:] = 0
        state["state"]["counter"][3] = i
        state["buffer_pos"] = 4
        bitgen.state = state
        res = _replicate_safe(d, r, p, n, budget, np.random.Generator(bitgen))
        if res is None:
            truncated += 1
        elif res:
            safe_count += 1
    effective = replicates - truncated
    if effective == 0:
        raise PreconditionError("every replicate exceeded the node budget")
    qhat = safe_count / effective
    se = math.sqrt(qhat * (1.0 - qhat) / effective)
    return SimEstimate(
        estimate=qhat, se=se, replicates=replicates, effective=effective,
        truncated=truncated, seed=seed, p=p, n=n, r=r,
    )
