"""Finite-n scalings, normalizers and first-order size predictions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .exponent_limits import NotNonIncreasing
from .trait_graph import TraitGraph, check_non_increasing, mutation_probability
from .walk_calculus import analyze_graph

__all__ = [
    "ScalingParams",
    "WLaw",
    "ExtinctLineage",
    "AsymptoticPredictor",
    "sample_W",
    "default_phi",
    "default_psi",
]


class ExtinctLineage(ValueError):
    pass


def default_phi(n: int) -> float:
    return math.log(math.log(n))


def default_psi(n: int) -> float:
    return math.log(n) ** 0.75


@dataclass(frozen=True)
class ScalingParams:
    n: int
    theta_max: int
    phi_n: float
    h_n: float
    psi_n: float
    lam0: float
    mu_n: dict = field(default_factory=dict, compare=False)  # (v, u) -> Fraction

    @classmethod
    def from_graph(
        cls,
        graph: TraitGraph,
        n: int,
        phi: Callable[[int], float] | float | None = None,
        psi: Callable[[int], float] | float | None = None,
    ) -> "ScalingParams":
        if n < 2:
            raise ValueError("n must be >= 2")
        analysis = analyze_graph(graph)
        theta_max = max((analysis[v].admissible.theta_v for v in graph.vertices if v != 0), default=0)
        phi_n = _resolve(phi, default_phi, n)
        psi_n = _resolve(psi, default_psi, n)
        log_n = math.log(n)
        h_n = log_n / (math.log(log_n) * theta_max + phi_n)
        mu_n = {(e.src, e.dst): mutation_probability(e, n) for e in graph.edges}
        return cls(n, theta_max, phi_n, h_n, psi_n, float(graph.wild_growth), mu_n)

    @property
    def log_n(self) -> float:
        return math.log(self.n)

    def time_scale(self, t: float) -> float:
        """Deterministic time t * log(n) / lambda(0)."""
        return float(t) * self.log_n / self.lam0

    def level(self, t: float) -> int:
        """Smallest integer population size >= n**t."""
        target = float(self.n) ** float(t)
        c = math.ceil(target)
        if c - 1 >= target * (1 - 1e-12):
            c -= 1
        return max(int(c), 1)


def _resolve(policy, default, n):
    if policy is None:
        return default(n)
    if callable(policy):
        return float(policy(n))
    return float(policy)


@dataclass(frozen=True)
class WLaw:
    """Bernoulli(lambda/alpha) x Exponential(lambda/alpha)."""

    alpha0: float
    beta0: float

    @classmethod
    def from_graph(cls, graph: TraitGraph) -> "WLaw":
        return cls(float(graph.birth[0]), float(graph.death[0]))

    @property
    def lam0(self) -> float:
        return self.alpha0 - self.beta0

    @property
    def atom_at_zero(self) -> float:
        return self.beta0 / self.alpha0

    @property
    def rate(self) -> float:
        return self.lam0 / self.alpha0

    @property
    def conditional_mean(self) -> float:
        return 1.0 / self.rate

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        pos = 1.0 - np.exp(-self.rate * np.clip(x, 0.0, None))
        return np.where(x < 0, 0.0, self.atom_at_zero + (1 - self.atom_at_zero) * pos)

    def positive_cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 0.0, 1.0 - np.exp(-self.rate * np.clip(x, 0.0, None)))


def sample_W(rng: np.random.Generator, graph: TraitGraph, size=None):
    law = WLaw.from_graph(graph)
    if law.lam0 <= 0:
        raise ValueError("lambda(0) must be positive")
    survive = rng.random(size) >= law.atom_at_zero
    draws = rng.exponential(1.0 / law.rate, size)
    return np.where(survive, draws, 0.0) if size is not None else float(draws if survive else 0.0)


class AsymptoticPredictor:
    """Normalizers and predicted sizes for one graph at one ``n``."""

    def __init__(self, graph: TraitGraph, scaling: ScalingParams):
        self.graph = graph
        self.scaling = scaling
        self.analysis = analyze_graph(graph)
        self.law = WLaw.from_graph(graph)
        self.non_increasing = check_non_increasing(graph)

    @classmethod
    def for_n(cls, graph: TraitGraph, n: int, **kw) -> "AsymptoticPredictor":
        return cls(graph, ScalingParams.from_graph(graph, n, **kw))

    def t_v(self, v: int) -> Fraction:
        return self.analysis[v].admissible.t_v

    def theta_v(self, v: int) -> int:
        return self.analysis[v].admissible.theta_v

    def regime(self, v: int, t: float) -> int:
        """1: before t(v) - 1/h_n, 2: transition window, 3: t >= t(v)."""
        tv = float(self.t_v(v))
        if t >= tv:
            return 3
        if t >= tv - 1.0 / self.scaling.h_n:
            return 2
        return 1

    def normalizer(self, v: int, t: float, s: float = 0.0) -> float:
        sc = self.scaling
        theta = self.theta_v(v)
        r = self.regime(v, t)
        if r == 1:
            return 1.0
        if r == 2:
            return sc.psi_n * sc.log_n ** (theta - 1)
        return sc.n ** (t - float(self.t_v(v))) * sc.log_n**theta * math.exp(sc.lam0 * s)

    def weight(self, v: int, t: float) -> float:
        ws = self.analysis[v].weight_sum
        if ws is None:
            raise NotNonIncreasing(f"trait {v} has no weight (selective vertex on a walk)")
        tq = Fraction(t) if isinstance(t, (int, Fraction)) else t
        return float(ws(tq))

    def _gate(self):
        if not self.non_increasing:
            raise NotNonIncreasing("size predictions need lambda(v) <= lambda(0) for all v")

    def predict_deterministic(self, v: int, t: float, s: float, w_sample: float) -> float:
        self._gate()
        if self.regime(v, t) != 3:
            return 0.0
        return float(w_sample) * self.weight(v, t) * self.normalizer(v, t, s)

    def predict_random_scale(self, v: int, t: float, s: float) -> float:
        """Limit conditional on survival; multiply by survival probability for the mean."""
        self._gate()
        if self.regime(v, t) != 3:
            return 0.0
        return self.weight(v, t) * self.normalizer(v, t, s)

    @property
    def survival_probability(self) -> float:
        return self.law.rate

    def predicted_stopping_time(self, t: float, w: float) -> float:
        if w <= 0:
            raise ExtinctLineage("W = 0: the wild-type lineage dies out")
        return self.scaling.time_scale(t) - math.log(w) / self.scaling.lam0

    def upper_bound_regime(self, v: int) -> dict:
        """Window [t(v) - 1/h_n, t(v)) where only an upper bound on growth is known."""
        tv = float(self.t_v(v))
        theta = self.theta_v(v)
        return {
            "start": tv - 1.0 / self.scaling.h_n,
            "end": tv,
            "bound": self.scaling.psi_n * self.scaling.log_n ** (theta - 1),
            "flag": "theta_zero" if theta == 0 else None,
        }
