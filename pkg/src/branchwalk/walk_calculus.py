"""Walks from the wild type: lengths, neutral counts, admissible sets and weights."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from .polynomial import PiecewisePolynomial
from .trait_graph import TraitGraph

__all__ = [
    "Walk",
    "WalkWeight",
    "AdmissibleSet",
    "TraitWeightSum",
    "SelectiveVertexOnWalk",
    "make_walk",
    "enumerate_simple_paths",
    "admissible_set",
    "walk_weight",
    "trait_weight_sum",
    "analyze_graph",
]


class SelectiveVertexOnWalk(ValueError):
    pass


@dataclass(frozen=True)
class Walk:
    vertices: tuple[int, ...]
    prefix_lengths: tuple[Fraction, ...]
    neutral_positions: tuple[int, ...]

    @property
    def length(self) -> Fraction:
        return self.prefix_lengths[-1]

    @property
    def theta(self) -> int:
        return len(self.neutral_positions)

    @property
    def end(self) -> int:
        return self.vertices[-1]

    def is_simple(self) -> bool:
        return len(set(self.vertices)) == len(self.vertices)

    def __str__(self) -> str:
        return "(" + ",".join(map(str, self.vertices)) + ")"


def make_walk(graph: TraitGraph, vertices: Sequence[int]) -> Walk:
    vertices = tuple(int(v) for v in vertices)
    if not vertices or vertices[0] != 0:
        raise ValueError("walks start at the wild type 0")
    lam0 = graph.wild_growth
    prefix = [Fraction(0)]
    for a, b in zip(vertices, vertices[1:]):
        if (a, b) not in graph.edge_map:
            raise ValueError(f"({a},{b}) is not an edge")
        prefix.append(prefix[-1] + graph.label(a, b))
    neutral = tuple(i for i in range(1, len(vertices)) if graph.growth(vertices[i]) == lam0)
    return Walk(vertices, tuple(prefix), neutral)


def enumerate_simple_paths(graph: TraitGraph, target: int) -> list[Walk]:
    """All directed simple paths 0 -> target, in lexicographic vertex order."""
    found: list[tuple[int, ...]] = []
    if target == 0:
        return [make_walk(graph, (0,))]
    stack = [0]
    on_path = {0}

    def dfs(v: int) -> None:
        for e in graph.out_edges[v]:
            u = e.dst
            if u in on_path:
                continue
            stack.append(u)
            if u == target:
                found.append(tuple(stack))
            else:
                on_path.add(u)
                dfs(u)
                on_path.discard(u)
            stack.pop()

    dfs(0)
    found.sort()
    return [make_walk(graph, p) for p in found]


@dataclass(frozen=True)
class AdmissibleSet:
    target: int
    t_v: Fraction
    theta_v: int
    walks: tuple[Walk, ...]
    all_minimal: tuple[Walk, ...]
    all_paths: tuple[Walk, ...]


def admissible_set(graph: TraitGraph, target: int) -> AdmissibleSet:
    # Labels are positive, so removing a cycle from a walk strictly shortens it;
    # minimizers of the length over all walks 0 -> target are simple paths.
    paths = enumerate_simple_paths(graph, target)
    if not paths:
        raise ValueError(f"vertex {target} is unreachable")
    t_v = min(p.length for p in paths)
    minimal = tuple(p for p in paths if p.length == t_v)
    theta_v = max(p.theta for p in minimal)
    adm = tuple(p for p in minimal if p.theta == theta_v)
    return AdmissibleSet(target, t_v, theta_v, adm, minimal, tuple(paths))


@dataclass(frozen=True)
class WalkWeight:
    walk: Walk
    const_del: Fraction
    const_neut: Fraction
    integral: PiecewisePolynomial

    @property
    def constant(self) -> Fraction:
        return self.const_del * self.const_neut

    @property
    def weight(self) -> PiecewisePolynomial:
        return self.integral.scale(self.constant)

    def __call__(self, t):
        return self.constant * self.integral(t)


def walk_weight(graph: TraitGraph, walk: Walk | Sequence[int]) -> WalkWeight:
    """Weight of a walk by appending one vertex at a time.

    Deleterious head: multiply by 2 alpha mu / (lambda(0) - lambda(head)).
    Neutral head: multiply by 2 alpha mu / lambda(0) and integrate from the
    length of the extended walk, i.e. the first time the head can appear.
    """
    if not isinstance(walk, Walk):
        walk = make_walk(graph, walk)
    lam0 = graph.wild_growth
    vs = walk.vertices
    for v in vs[1:]:
        if graph.growth(v) > lam0:
            raise SelectiveVertexOnWalk(f"vertex {v} on walk {walk} has lambda > lambda(0)")
    c_del = Fraction(1)
    c_neut = Fraction(1)
    integral = PiecewisePolynomial.constant(1)
    for i in range(1, len(vs)):
        prev, head = vs[i - 1], vs[i]
        factor = 2 * graph.birth[prev] * graph.mu(prev, head)
        lam = graph.growth(head)
        if lam == lam0:
            c_neut *= factor / lam0
            integral = integral.integrate_from(walk.prefix_lengths[i])
        else:
            c_del *= factor / (lam0 - lam)
    return WalkWeight(walk, c_del, c_neut, integral)


@dataclass(frozen=True)
class TraitWeightSum:
    target: int
    weights: tuple[WalkWeight, ...]
    total: PiecewisePolynomial

    def __call__(self, t):
        return self.total(t)


def trait_weight_sum(graph: TraitGraph, target: int) -> TraitWeightSum:
    adm = admissible_set(graph, target)
    weights = tuple(walk_weight(graph, w) for w in adm.walks)
    total = PiecewisePolynomial.zero()
    for w in weights:
        total = total + w.weight
    return TraitWeightSum(target, weights, total)


@dataclass(frozen=True)
class TraitAnalysis:
    target: int
    admissible: AdmissibleSet
    weight_sum: TraitWeightSum | None  # None when a selective vertex blocks weights


def analyze_graph(graph: TraitGraph) -> dict[int, TraitAnalysis]:
    return _analyze_cached(graph)


@lru_cache(maxsize=64)
def _analyze_cached(graph: TraitGraph) -> dict[int, TraitAnalysis]:
    out = {}
    for v in graph.vertices:
        adm = admissible_set(graph, v)
        try:
            ws = trait_weight_sum(graph, v)
        except SelectiveVertexOnWalk:
            ws = None
        out[v] = TraitAnalysis(v, adm, ws)
    return out
