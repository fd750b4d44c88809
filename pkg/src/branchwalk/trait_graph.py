"""Labeled directed trait graph with birth/death rates and power-law mutation kernel."""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

__all__ = [
    "Edge",
    "TraitGraph",
    "GrowthClass",
    "ValidationReport",
    "MutationOverflow",
    "to_fraction",
    "validate",
    "classify",
    "check_non_increasing",
    "mutation_probability",
    "total_mutation_probability",
]


class MutationOverflow(ValueError):
    """Total mutation probability of a trait exceeds one for the requested n."""


def to_fraction(value) -> Fraction:
    """Exact conversion; floats go through their shortest decimal repr."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rates")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a rational")


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    label: Fraction
    mu: Fraction


class GrowthClass(enum.Enum):
    NEUTRAL = "neutral"
    DELETERIOUS = "deleterious"
    SELECTIVE = "selective"


@dataclass(frozen=True)
class TraitGraph:
    """Trait space ``0..k-1`` (0 is the wild type) with rates and mutation edges.

    ``birth``/``death`` hold alpha(v)/beta(v); each edge carries its power-law
    exponent ``label`` and its limit constant ``mu``. All values are exact
    rationals. Construction does not validate; call :func:`validate`.
    """

    birth: tuple[Fraction, ...]
    death: tuple[Fraction, ...]
    edges: tuple[Edge, ...]
    names: tuple[str, ...] = field(default=())

    @classmethod
    def build(
        cls,
        birth: Sequence,
        death: Sequence,
        edges: Iterable[tuple],
        names: Sequence[str] | None = None,
    ) -> "TraitGraph":
        """``edges`` items are ``(src, dst, label, mu)``."""
        birth_q = tuple(to_fraction(a) for a in birth)
        death_q = tuple(to_fraction(b) for b in death)
        edge_list = tuple(
            Edge(int(s), int(d), to_fraction(lab), to_fraction(m)) for s, d, lab, m in edges
        )
        if names is None:
            names = tuple(str(i) for i in range(len(birth_q)))
        return cls(birth_q, death_q, edge_list, tuple(names))

    @property
    def n_traits(self) -> int:
        return len(self.birth)

    @property
    def vertices(self) -> range:
        return range(self.n_traits)

    def growth(self, v: int) -> Fraction:
        return self.birth[v] - self.death[v]

    @property
    def wild_growth(self) -> Fraction:
        return self.growth(0)

    @cached_property
    def edge_map(self) -> dict[tuple[int, int], Edge]:
        return {(e.src, e.dst): e for e in self.edges}

    @cached_property
    def out_edges(self) -> tuple[tuple[Edge, ...], ...]:
        out: list[list[Edge]] = [[] for _ in range(self.n_traits)]
        for e in self.edges:
            if 0 <= e.src < self.n_traits:
                out[e.src].append(e)
        return tuple(tuple(sorted(lst, key=lambda e: e.dst)) for lst in out)

    def label(self, v: int, u: int) -> Fraction:
        return self.edge_map[(v, u)].label

    def mu(self, v: int, u: int) -> Fraction:
        return self.edge_map[(v, u)].mu

    def relabel(self, perm: Sequence[int]) -> "TraitGraph":
        """Return the graph with vertex ``v`` renamed ``perm[v]``; ``perm[0]`` must be 0."""
        if perm[0] != 0 or sorted(perm) != list(range(self.n_traits)):
            raise ValueError("perm must be a permutation fixing 0")
        k = self.n_traits
        birth = [Fraction(0)] * k
        death = [Fraction(0)] * k
        names = [""] * k
        for v in range(k):
            birth[perm[v]] = self.birth[v]
            death[perm[v]] = self.death[v]
            names[perm[v]] = self.names[v] if self.names else str(v)
        edges = tuple(Edge(perm[e.src], perm[e.dst], e.label, e.mu) for e in self.edges)
        return TraitGraph(tuple(birth), tuple(death), edges, tuple(names))


@dataclass
class ValidationReport:
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate(graph: TraitGraph) -> ValidationReport:
    """Collect every violated model assumption; an empty report means valid."""
    out: list[str] = []
    k = graph.n_traits
    if k == 0:
        return ValidationReport(["graph has no vertices"])
    if len(graph.death) != k:
        out.append(f"birth/death length mismatch ({k} vs {len(graph.death)})")
    if graph.names and len(graph.names) != k:
        out.append("names length mismatch")
    for v in range(k):
        if graph.birth[v] < 0:
            out.append(f"negative birth rate at vertex {v}")
        if v < len(graph.death) and graph.death[v] < 0:
            out.append(f"negative death rate at vertex {v}")
    seen: set[tuple[int, int]] = set()
    for e in graph.edges:
        tag = f"({e.src},{e.dst})"
        if not (0 <= e.src < k and 0 <= e.dst < k):
            out.append(f"edge {tag} references unknown vertex")
            continue
        if e.src == e.dst:
            out.append(f"self-loop {tag}")
        if (e.src, e.dst) in seen:
            out.append(f"duplicate edge {tag}")
        seen.add((e.src, e.dst))
        if e.label <= 0:
            out.append(f"non-positive label on edge {tag}")
        if e.mu < 0:
            out.append(f"negative mu on edge {tag}")
    if len(graph.death) == k and graph.growth(0) <= 0:
        out.append("wild-type growth rate lambda(0) must be > 0")

    reached = {0}
    queue = deque([0])
    adjacency: dict[int, list[int]] = {}
    for e in graph.edges:
        if 0 <= e.src < k and 0 <= e.dst < k and e.src != e.dst:
            adjacency.setdefault(e.src, []).append(e.dst)
    while queue:
        v = queue.popleft()
        for u in adjacency.get(v, ()):
            if u not in reached:
                reached.add(u)
                queue.append(u)
    for v in range(k):
        if v not in reached:
            out.append(f"unreachable vertex {v}")
    return ValidationReport(out)


def classify(graph: TraitGraph) -> dict[int, GrowthClass]:
    lam0 = graph.wild_growth
    classes = {}
    for v in graph.vertices:
        lam = graph.growth(v)
        if lam == lam0:
            classes[v] = GrowthClass.NEUTRAL
        elif lam < lam0:
            classes[v] = GrowthClass.DELETERIOUS
        else:
            classes[v] = GrowthClass.SELECTIVE
    return classes


def check_non_increasing(graph: TraitGraph) -> bool:
    lam0 = graph.wild_growth
    return all(graph.growth(v) <= lam0 for v in graph.vertices)


def mutation_probability(edge: Edge, n: int) -> Fraction:
    """mu * n**(-label) as a rational.

    Exact for integer labels. Otherwise n**(-label) is irrational and the
    correctly rounded double is converted exactly, so downstream channel
    arithmetic stays exact on the value actually simulated.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if edge.mu == 0:
        return Fraction(0)
    if edge.label.denominator == 1:
        return edge.mu / Fraction(n) ** int(edge.label)
    return edge.mu * Fraction(float(n) ** (-float(edge.label)))


def total_mutation_probability(graph: TraitGraph, scaling, v: int) -> Fraction:
    """Sum of mu^(n)(v,u) over out-edges of ``v``; ``scaling`` is an int n or has ``.n``."""
    n = scaling if isinstance(scaling, int) else scaling.n
    total = sum((mutation_probability(e, n) for e in graph.out_edges[v]), Fraction(0))
    if total > 1:
        raise MutationOverflow(
            f"total mutation probability {float(total):.6g} > 1 at vertex {v} for n={n}"
        )
    return total
