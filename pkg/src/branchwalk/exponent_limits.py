"""Limiting piecewise-linear exponents x_v(t) by slope tracking.

Traits are born when a parent's exponent reaches lambda(0) * label, and an
alive trait inherits a larger slope when a faster incoming neighbour gets
lambda(0) * label ahead of it. Everything is exact rational arithmetic, so
simultaneous events are detected by equality and handled as sets.
"""

from __future__ import annotations

import logging
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .trait_graph import TraitGraph, check_non_increasing
from .walk_calculus import admissible_set

__all__ = [
    "PiecewiseLinear",
    "StepEvent",
    "ExponentResult",
    "NonPositiveWildGrowth",
    "NotNonIncreasing",
    "run_exponent_algorithm",
    "corollary_mono_directional",
    "corollary_non_increasing",
]

log = logging.getLogger(__name__)

INF = None  # candidate time "never"


class NonPositiveWildGrowth(ValueError):
    pass


class NotNonIncreasing(ValueError):
    pass


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear function on [0, inf).

    ``knots[0] == 0``; ``slopes[i]`` applies on ``[knots[i], knots[i+1])`` and
    the last slope extends to infinity.
    """

    knots: tuple[Fraction, ...]
    values: tuple[Fraction, ...]
    slopes: tuple[Fraction, ...]

    def __call__(self, t):
        i = max(bisect_right(self.knots, t) - 1, 0)
        return self.values[i] + self.slopes[i] * (t - self.knots[i])

    @classmethod
    def positive_part(cls, slope, start) -> "PiecewiseLinear":
        """slope * (t - start)_+"""
        slope, start = Fraction(slope), Fraction(start)
        if start <= 0:
            return cls((Fraction(0),), (slope * -start,), (slope,))
        return cls((Fraction(0), start), (Fraction(0), Fraction(0)), (Fraction(0), slope))

    def canonical(self) -> "PiecewiseLinear":
        """Drop knots across which the slope does not change."""
        keep = [0] + [i for i in range(1, len(self.knots)) if self.slopes[i] != self.slopes[i - 1]]
        return PiecewiseLinear(
            tuple(self.knots[i] for i in keep),
            tuple(self.values[i] for i in keep),
            tuple(self.slopes[i] for i in keep),
        )

    def breakpoints(self) -> tuple[Fraction, ...]:
        return self.canonical().knots[1:]

    def is_continuous(self) -> bool:
        for i in range(1, len(self.knots)):
            left = self.values[i - 1] + self.slopes[i - 1] * (self.knots[i] - self.knots[i - 1])
            if left != self.values[i]:
                return False
        return True

    def is_non_decreasing(self) -> bool:
        return all(s >= 0 for s in self.slopes)

    def to_dict(self) -> dict:
        c = self.canonical()
        return {
            "knots": [str(k) for k in c.knots],
            "values": [str(v) for v in c.values],
            "slopes": [str(s) for s in c.slopes],
        }


@dataclass
class StepEvent:
    """One induction step of the slope-tracking algorithm."""

    index: int
    time: Fraction
    births: dict[int, tuple[int, ...]] = field(default_factory=dict)  # v -> nu(v)
    takeovers: dict[int, tuple[int, ...]] = field(default_factory=dict)  # driver v -> nu(v)
    nu_minus: dict[int, tuple[int, ...]] = field(default_factory=dict)
    nu_plus: dict[int, tuple[int, ...]] = field(default_factory=dict)
    slopes: dict[int, Fraction] = field(default_factory=dict)  # after the step
    driven: dict[int, tuple[int, ...]] = field(default_factory=dict)  # C_{j+1}
    flags: list[str] = field(default_factory=list)

    @property
    def kinds(self) -> list[str]:
        out = []
        if self.births:
            out.append("Birth")
        if self.takeovers:
            out.append("SlopeTakeover")
        return out

    def to_dict(self) -> dict:
        def sets(d):
            return {str(k): list(v) for k, v in sorted(d.items())}

        return {
            "index": self.index,
            "time": str(self.time),
            "kinds": self.kinds,
            "births": sets(self.births),
            "takeovers": sets(self.takeovers),
            "nu_minus": sets(self.nu_minus),
            "nu_plus": sets(self.nu_plus),
            "slopes": {str(k): str(v) for k, v in sorted(self.slopes.items())},
            "driven": sets(self.driven),
            "flags": list(self.flags),
        }


@dataclass
class ExponentResult:
    exponents: dict[int, PiecewiseLinear]
    breakpoints: tuple[Fraction, ...]  # Delta_0 = 0 < Delta_1 < ...
    events: list[StepEvent]

    def __getitem__(self, v: int) -> PiecewiseLinear:
        return self.exponents[v]


def _lt(a: Fraction | None, b: Fraction | None) -> bool:
    if a is None:
        return False
    return b is None or a < b


def run_exponent_algorithm(graph: TraitGraph, max_steps: int | None = None) -> ExponentResult:
    lam0 = graph.wild_growth
    if lam0 <= 0:
        raise NonPositiveWildGrowth("lambda(0) must be positive")
    k = graph.n_traits
    if max_steps is None:
        max_steps = max(k * k, 1) + k
    in_edges: list[list] = [[] for _ in range(k)]
    for e in graph.edges:
        in_edges[e.dst].append(e)

    alive = {0}
    slope = {v: (lam0 if v == 0 else Fraction(0)) for v in range(k)}
    x = {v: Fraction(0) for v in range(k)}
    # driven-by forest: parent[u] = trait currently driving u's growth
    parent: dict[int, int] = {}
    delta = Fraction(0)
    knots = [Fraction(0)]
    history = {v: ([Fraction(0)], [Fraction(0)], [slope[v]]) for v in range(k)}
    events: list[StepEvent] = []

    def driven_set(v: int) -> set[int]:
        out = set()
        stack = [v]
        while stack:
            w = stack.pop()
            for u, p in parent.items():
                if p == w and u not in out:
                    out.add(u)
                    stack.append(u)
        return out

    for step in range(max_steps + 1):
        cand: dict[int, Fraction | None] = {}
        nu: dict[int, set[int]] = {}
        for v in range(k):
            if v not in alive:
                best, who = None, set()
                for e in in_edges[v]:
                    u = e.src
                    if u not in alive:
                        continue
                    need = lam0 * e.label - x[u]
                    if need <= 0:
                        d = delta
                    elif slope[u] > 0:
                        d = delta + need / slope[u]
                    else:
                        continue
                    if _lt(d, best):
                        best, who = d, {u}
                    elif d == best:
                        who.add(u)
                cand[v], nu[v] = best, who
            else:
                best, who = None, set()
                for e in graph.out_edges[v]:
                    u = e.dst
                    if u not in alive or not slope[v] > slope[u]:
                        continue
                    gap = x[u] + lam0 * e.label - x[v]
                    d = delta if gap <= 0 else delta + gap / (slope[v] - slope[u])
                    if _lt(d, best):
                        best, who = d, {u}
                    elif d == best:
                        who.add(u)
                cand[v], nu[v] = best, who

        finite = [d for d in cand.values() if d is not None]
        if not finite:
            break
        if step == max_steps:
            raise RuntimeError(
                f"slope tracking did not terminate after {max_steps} steps; "
                f"alive={sorted(alive)} slopes={slope}"
            )
        new_delta = min(finite)
        group = {v for v, d in cand.items() if d == new_delta}
        for v in range(k):
            x[v] = x[v] + slope[v] * (new_delta - delta)
        delta = new_delta

        ev = StepEvent(index=len(events) + 1, time=delta)
        newborn = {v for v in group if v not in alive}
        drivers = {v for v in group if v in alive}
        old_slope = dict(slope)

        for v in sorted(drivers):
            minus = {
                u
                for u in nu[v]
                if any(old_slope[w] > old_slope[v] and u in nu[w] for w in drivers)
            }
            ev.takeovers[v] = tuple(sorted(nu[v]))
            if minus:
                ev.nu_minus[v] = tuple(sorted(minus))
            for u in sorted(nu[v] - minus):
                parent[u] = v
        # Roots of the driven-by forest keep their slope; every driven trait
        # (with its own driven set) follows its root. A driver taken over in
        # the same step thus passes its new slope on to what it just captured.
        for v in alive:
            root = v
            seen = {v}
            while root in parent:
                root = parent[root]
                if root in seen:
                    raise AssertionError("cycle in driven-by relation")
                seen.add(root)
            slope[v] = old_slope[root]

        for v in sorted(newborn):
            top = max(slope[u] for u in nu[v])
            slope[v] = max(graph.growth(v), top)
            ev.births[v] = tuple(sorted(nu[v]))
            # Register v as mutation-driven only when an inflowing slope
            # reaches its own rate; otherwise its slopes would differ from
            # its driver's.
            if top >= graph.growth(v):
                plus = tuple(sorted(u for u in nu[v] if slope[u] == top))
                ev.nu_plus[v] = plus
                parent[v] = plus[0]
                if top == graph.growth(v):
                    ev.flags.append(f"equality: birth slope of {v} equals its own rate")
            else:
                ev.flags.append(f"intrinsic: {v} grows at its own rate {graph.growth(v)}")
        alive |= newborn

        for a, b in parent.items():
            if slope[a] != slope[b]:
                raise AssertionError(f"driven trait {a} slope differs from driver {b}")
        for v in range(k):
            if slope[v] < old_slope[v]:
                raise AssertionError(f"slope of {v} decreased at {delta}")

        ev.slopes = {v: slope[v] for v in sorted(alive)}
        ev.driven = {v: tuple(sorted(driven_set(v))) for v in sorted(alive) if driven_set(v)}
        events.append(ev)
        if delta != knots[-1]:
            knots.append(delta)
        for v in range(k):
            ks, vs, ss = history[v]
            if ks[-1] == delta:
                ss[-1] = slope[v]
            else:
                ks.append(delta)
                vs.append(x[v])
                ss.append(slope[v])

    exps = {
        v: PiecewiseLinear(tuple(ks), tuple(vs), tuple(ss)).canonical()
        for v, (ks, vs, ss) in history.items()
    }
    return ExponentResult(exps, tuple(knots), events)


def corollary_mono_directional(
    lambdas: Sequence, labels: Sequence
) -> list[PiecewiseLinear]:
    """Closed form on a chain 0 -> 1 -> ... with growth rates ``lambdas``."""
    lams = [Fraction(v) for v in lambdas]
    labs = [Fraction(v) for v in labels]
    if len(labs) != len(lams) - 1:
        raise ValueError("need one label per consecutive pair")
    lam0 = lams[0]
    out = []
    running_max = lams[0]
    start = Fraction(0)
    for i, lam in enumerate(lams):
        if i > 0:
            start += labs[i - 1] * lam0 / running_max
            running_max = max(running_max, lam)
        out.append(PiecewiseLinear.positive_part(running_max, start))
    return out


def corollary_non_increasing(graph: TraitGraph) -> dict[int, PiecewiseLinear]:
    if not check_non_increasing(graph):
        raise NotNonIncreasing("graph has a trait with lambda(v) > lambda(0)")
    lam0 = graph.wild_growth
    return {
        v: PiecewiseLinear.positive_part(lam0, admissible_set(graph, v).t_v)
        for v in graph.vertices
    }
