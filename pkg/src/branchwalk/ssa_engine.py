"""Exact stochastic simulation of the birth/death/mutation branching process.

Cells are aggregated into compartments. In the default mode a compartment is
a trait. In walk mode each compartment is a walk from the wild type (the
walk ``(0,)`` is the primary population, cells without mutant ancestry);
walks beyond the tracked set fall into one remainder bucket per trait.
The dynamics are identical in both modes since all rates are linear in the
counts.
"""

from __future__ import annotations

import copy
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction

import numba
import numpy as np

from .asymptotic_predictor import ScalingParams
from .trait_graph import TraitGraph, mutation_probability, total_mutation_probability

__all__ = [
    "Channel",
    "EventRateTable",
    "CompartmentModel",
    "PopulationState",
    "RunConfig",
    "Trajectory",
    "ExtinctPopulation",
    "HorizonExceeded",
    "build_model",
    "step",
    "run",
    "stochastic_exponent",
    "write_event_log",
    "read_event_log",
    "EVENT_LOG_MAGIC",
    "EVENT_LOG_VERSION",
]

STATUS_HORIZON = 0
STATUS_EXTINCT = 1
STATUS_BUDGET = 2
STATUS_STOPPED = 3
STATUS_WILD_EXTINCT = 4
STATUS_NAMES = {0: "horizon", 1: "extinct", 2: "budget_exceeded", 3: "threshold", 4: "wild_extinct"}

KIND_CLEAN, KIND_ONE, KIND_TWO = 0, 1, 2


class ExtinctPopulation(RuntimeError):
    pass


class HorizonExceeded(ValueError):
    pass


@dataclass(frozen=True)
class Channel:
    """One birth outcome of a trait-``src`` cell, with its exact probability."""

    kind: int
    targets: tuple[int, ...]  # mutant daughter traits
    probability: Fraction


@dataclass(frozen=True)
class EventRateTable:
    """Exact birth-outcome probabilities per trait at a given n."""

    graph: TraitGraph
    n: int
    channels: tuple[tuple[Channel, ...], ...]

    @classmethod
    def build(cls, graph: TraitGraph, n: int) -> "EventRateTable":
        per_trait = []
        for v in graph.vertices:
            mu_bar = total_mutation_probability(graph, n, v)
            outs = [(e.dst, mutation_probability(e, n)) for e in graph.out_edges[v]]
            chans = [Channel(KIND_CLEAN, (), (1 - mu_bar) ** 2)]
            for u, m in outs:
                chans.append(Channel(KIND_ONE, (u,), 2 * m * (1 - mu_bar)))
            for i, (u, mu_u) in enumerate(outs):
                chans.append(Channel(KIND_TWO, (u, u), mu_u * mu_u))
                for w, mu_w in outs[i + 1:]:
                    chans.append(Channel(KIND_TWO, (u, w), 2 * mu_u * mu_w))
            per_trait.append(tuple(c for c in chans if c.probability > 0))
        return cls(graph, n, tuple(per_trait))

    def probability_sum(self, v: int) -> Fraction:
        return sum((c.probability for c in self.channels[v]), Fraction(0))

    def rates(self, v: int, z_v: int) -> dict:
        """Absolute rates of every event of trait v given ``z_v`` cells."""
        a, b = self.graph.birth[v], self.graph.death[v]
        out = {("death",): z_v * b}
        for c in self.channels[v]:
            out[(("clean", "one", "two")[c.kind],) + c.targets] = z_v * a * c.probability
        return out


@dataclass
class CompartmentModel:
    graph: TraitGraph
    n: int
    labels: list[str]
    walks: list[tuple[int, ...] | None]  # None for remainder buckets
    trait: np.ndarray
    rate: np.ndarray
    death_frac: np.ndarray
    out_ptr: np.ndarray
    out_cum: np.ndarray
    out_self: np.ndarray
    out_a: np.ndarray
    out_b: np.ndarray
    out_kind: np.ndarray
    out_edge_a: np.ndarray
    out_edge_b: np.ndarray
    edge_index: dict
    primary: int  # compartment holding primary wild-type cells, -1 if untracked
    walk_mode: bool

    @property
    def n_compartments(self) -> int:
        return len(self.labels)


def _walk_allowed(walk: tuple[int, ...], cycle_allowance: int) -> bool:
    return len(walk) - len(set(walk)) <= cycle_allowance


def build_model(
    graph: TraitGraph,
    n: int,
    walk_mode: bool = False,
    cycle_allowance: int = 0,
    max_compartments: int = 5000,
) -> CompartmentModel:
    table = EventRateTable.build(graph, n)
    edge_index = {(e.src, e.dst): i for i, e in enumerate(graph.edges)}
    labels: list[str] = []
    walks: list[tuple[int, ...] | None] = []
    trait: list[int] = []
    index: dict = {}

    def add(key, tr, label, walk):
        index[key] = len(labels)
        labels.append(label)
        walks.append(walk)
        trait.append(tr)
        return index[key]

    if walk_mode:
        add(("walk", (0,)), 0, "(0)", (0,))
        frontier = [(0,)]
        while frontier:
            nxt = []
            for w in frontier:
                for e in graph.out_edges[w[-1]]:
                    cand = w + (e.dst,)
                    if _walk_allowed(cand, cycle_allowance) and len(labels) < max_compartments:
                        add(("walk", cand), e.dst, "(" + ",".join(map(str, cand)) + ")", cand)
                        nxt.append(cand)
            frontier = nxt
        for v in graph.vertices:
            add(("rest", v), v, f"rest[{v}]", None)
    else:
        for v in graph.vertices:
            add(("trait", v), v, graph.names[v] if graph.names else str(v), None)

    def child(c: int, u: int) -> int:
        if not walk_mode:
            return index[("trait", u)]
        w = walks[c]
        if w is not None and ("walk", w + (u,)) in index:
            return index[("walk", w + (u,))]
        return index[("rest", u)]

    C = len(labels)
    rate = np.empty(C)
    death_frac = np.empty(C)
    ptr = [0]
    cum, self_d, oa, ob, kind, ea, eb = [], [], [], [], [], [], []
    for c in range(C):
        v = trait[c]
        a, b = graph.birth[v], graph.death[v]
        rate[c] = float(a + b)
        death_frac[c] = float(b / (a + b)) if a + b > 0 else 1.0
        acc = Fraction(0)
        chans = table.channels[v]
        for i, ch in enumerate(chans):
            acc += ch.probability
            cum.append(1.0 if i == len(chans) - 1 else float(acc))
            kind.append(ch.kind)
            if ch.kind == KIND_CLEAN:
                self_d.append(1)
                oa.append(-1)
                ob.append(-1)
                ea.append(-1)
                eb.append(-1)
            elif ch.kind == KIND_ONE:
                u = ch.targets[0]
                self_d.append(0)
                oa.append(child(c, u))
                ob.append(-1)
                ea.append(edge_index[(v, u)])
                eb.append(-1)
            else:
                u, w = ch.targets
                self_d.append(-1)
                oa.append(child(c, u))
                ob.append(child(c, w))
                ea.append(edge_index[(v, u)])
                eb.append(edge_index[(v, w)] if w != u else -1)
        ptr.append(len(cum))
    i64 = np.int64
    return CompartmentModel(
        graph=graph,
        n=n,
        labels=labels,
        walks=walks,
        trait=np.array(trait, dtype=i64),
        rate=rate,
        death_frac=death_frac,
        out_ptr=np.array(ptr, dtype=i64),
        out_cum=np.array(cum, dtype=float),
        out_self=np.array(self_d, dtype=i64),
        out_a=np.array(oa, dtype=i64),
        out_b=np.array(ob, dtype=i64),
        out_kind=np.array(kind, dtype=i64),
        out_edge_a=np.array(ea, dtype=i64),
        out_edge_b=np.array(eb, dtype=i64),
        edge_index=edge_index,
        primary=index[("walk", (0,))] if walk_mode else -1,
        walk_mode=walk_mode,
    )


# ---------------------------------------------------------------------------
# numba kernel


@numba.njit(cache=True)
def _log_push(log_time, log_trait, log_delta, pos, t, tr, d):
    if pos < log_time.shape[0]:
        log_time[pos] = t
        log_trait[pos] = tr
        log_delta[pos] = d
    return pos + 1


@numba.njit(cache=True)
def _kernel(
    rng,
    counts,
    trait,
    tcount,
    rate,
    death_frac,
    out_ptr,
    out_cum,
    out_self,
    out_a,
    out_b,
    out_kind,
    out_edge_a,
    out_edge_b,
    t_end,
    obs_times,
    obs_counts,
    wild_levels,
    total_levels,
    primary,
    eta_out,
    sigma_out,
    tau_out,
    stop_wild,
    stop_total,
    stop_wild_extinct,
    max_events,
    k_counts,
    h_counts,
    log_time,
    log_trait,
    log_delta,
    record_log,
    debug_check,
):
    C = counts.shape[0]
    K = obs_times.shape[0]
    L = wild_levels.shape[0]
    t = 0.0
    n_events = 0
    log_pos = 0
    total = 0
    for i in range(tcount.shape[0]):
        total += tcount[i]
    wild = tcount[0]
    prim = counts[primary] if primary >= 0 else 0
    oi = 0
    li_w = 0
    li_s = 0
    li_p = 0
    while li_w < L and wild >= wild_levels[li_w]:
        eta_out[li_w] = 0.0
        li_w += 1
    while li_s < L and total >= total_levels[li_s]:
        sigma_out[li_s] = 0.0
        li_s += 1
    while primary >= 0 and li_p < L and prim >= wild_levels[li_p]:
        tau_out[li_p] = 0.0
        li_p += 1
    status = 0
    while True:
        if (stop_wild > 0 and wild >= stop_wild) or (stop_total > 0 and total >= stop_total):
            status = 3
            break
        if stop_wild_extinct and wild == 0 and li_s == L:
            # the wild-type levels can no longer be reached
            status = 4
            break
        rtot = 0.0
        for c in range(C):
            rtot += counts[c] * rate[c]
        if rtot <= 0.0:
            status = 1
            break
        if n_events >= max_events:
            status = 2
            break
        t_new = t + rng.exponential(1.0) / rtot
        while oi < K and obs_times[oi] < t_new:
            if obs_times[oi] > t_end:
                break
            for c in range(C):
                obs_counts[oi, c] = counts[c]
            oi += 1
        if t_new > t_end:
            status = 0
            break
        t = t_new
        n_events += 1
        x = rng.random() * rtot
        c = 0
        acc = counts[0] * rate[0]
        while acc <= x and c < C - 1:
            c += 1
            acc += counts[c] * rate[c]
        while counts[c] == 0:  # float edge case at the upper end
            c -= 1
        v = trait[c]
        if rng.random() < death_frac[c]:
            counts[c] -= 1
            tcount[v] -= 1
            total -= 1
            if record_log:
                log_pos = _log_push(log_time, log_trait, log_delta, log_pos, t, v, -1)
        else:
            r = rng.random()
            j = out_ptr[c]
            last = out_ptr[c + 1] - 1
            while j < last and out_cum[j] <= r:
                j += 1
            kd = out_kind[j]
            if kd == 0:
                counts[c] += 1
                tcount[v] += 1
                total += 1
                if record_log:
                    log_pos = _log_push(log_time, log_trait, log_delta, log_pos, t, v, 1)
            elif kd == 1:
                a = out_a[j]
                counts[a] += 1
                tcount[trait[a]] += 1
                total += 1
                k_counts[out_edge_a[j]] += 1
                if record_log:
                    log_pos = _log_push(log_time, log_trait, log_delta, log_pos, t, trait[a], 1)
            else:
                a = out_a[j]
                b = out_b[j]
                counts[c] -= 1
                tcount[v] -= 1
                counts[a] += 1
                counts[b] += 1
                tcount[trait[a]] += 1
                tcount[trait[b]] += 1
                total += 1
                h_counts[out_edge_a[j]] += 1
                if out_edge_b[j] >= 0:
                    h_counts[out_edge_b[j]] += 1
                if record_log:
                    log_pos = _log_push(log_time, log_trait, log_delta, log_pos, t, v, -1)
                    if trait[a] == trait[b]:
                        log_pos = _log_push(log_time, log_trait, log_delta, log_pos, t, trait[a], 2)
                    else:
                        log_pos = _log_push(log_time, log_trait, log_delta, log_pos, t, trait[a], 1)
                        log_pos = _log_push(log_time, log_trait, log_delta, log_pos, t, trait[b], 1)
        wild = tcount[0]
        if primary >= 0:
            prim = counts[primary]
        while li_w < L and wild >= wild_levels[li_w]:
            eta_out[li_w] = t
            li_w += 1
        while li_s < L and total >= total_levels[li_s]:
            sigma_out[li_s] = t
            li_s += 1
        while primary >= 0 and li_p < L and prim >= wild_levels[li_p]:
            tau_out[li_p] = t
            li_p += 1
        if debug_check:
            for i in range(tcount.shape[0]):
                s = 0
                for cc in range(C):
                    if trait[cc] == i:
                        s += counts[cc]
                if s != tcount[i] or tcount[i] < 0:
                    return t, n_events, -1, log_pos
    if status == 1 or status == 0:
        # extinct: the state is frozen from here on; horizon: fill up to t_end
        while oi < K and (status == 1 or obs_times[oi] <= t_end):
            for c in range(C):
                obs_counts[oi, c] = counts[c]
            oi += 1
    return t, n_events, status, log_pos


# ---------------------------------------------------------------------------
# python-level API


@dataclass
class PopulationState:
    time: float
    counts: np.ndarray  # per compartment
    k_counts: np.ndarray
    h_counts: np.ndarray

    @classmethod
    def initial(cls, model: CompartmentModel) -> "PopulationState":
        counts = np.zeros(model.n_compartments, dtype=np.int64)
        counts[model.primary if model.primary >= 0 else 0] = 1
        E = len(model.graph.edges)
        return cls(0.0, counts, np.zeros(E, dtype=np.int64), np.zeros(E, dtype=np.int64))

    def trait_counts(self, model: CompartmentModel) -> np.ndarray:
        return _to_traits(model, self.counts)


def step(state: PopulationState, model: CompartmentModel, rng: np.random.Generator):
    """One exact event. Returns ``(event, new_state)``; the input state is not modified."""
    props = state.counts * model.rate
    rtot = float(props.sum())
    if rtot <= 0:
        raise ExtinctPopulation("no individuals left")
    dt = rng.exponential(1.0 / rtot)
    c = int(np.searchsorted(np.cumsum(props), rng.random() * rtot, side="right"))
    c = min(c, model.n_compartments - 1)
    new = PopulationState(
        state.time + dt, state.counts.copy(), state.k_counts.copy(), state.h_counts.copy()
    )
    v = int(model.trait[c])
    if rng.random() < model.death_frac[c]:
        new.counts[c] -= 1
        return ("death", v), new
    lo, hi = model.out_ptr[c], model.out_ptr[c + 1]
    j = lo + int(np.searchsorted(model.out_cum[lo:hi], rng.random(), side="right"))
    j = min(j, hi - 1)
    kind = model.out_kind[j]
    if kind == KIND_CLEAN:
        new.counts[c] += 1
        return ("clean", v), new
    a = int(model.out_a[j])
    if kind == KIND_ONE:
        new.counts[a] += 1
        new.k_counts[model.out_edge_a[j]] += 1
        return ("one", v, int(model.trait[a])), new
    b = int(model.out_b[j])
    new.counts[c] -= 1
    new.counts[a] += 1
    new.counts[b] += 1
    new.h_counts[model.out_edge_a[j]] += 1
    if model.out_edge_b[j] >= 0:
        new.h_counts[model.out_edge_b[j]] += 1
    return ("two", v, int(model.trait[a]), int(model.trait[b])), new


@dataclass
class RunConfig:
    det_grid: list[tuple[float, float]] = field(default_factory=list)  # (t, s)
    random_grid: list[tuple[str, float, float]] = field(default_factory=list)  # (eta|sigma, t, s)
    levels: list[float] = field(default_factory=list)  # stopping-time thresholds t
    times: list[float] = field(default_factory=list)  # absolute observation times
    horizon_t: float | None = None
    stop_level_t: float | None = None  # stop once the wild type reaches n**t
    stop_total_t: float | None = None
    walk_mode: bool = False
    cycle_allowance: int = 0
    max_events: int = 10**8
    record_log: bool = False
    log_capacity: int = 10**7
    debug_check: bool = False


@dataclass
class Trajectory:
    model: CompartmentModel
    scaling: ScalingParams
    status: str
    n_events: int
    final_time: float
    final_counts: np.ndarray  # per compartment
    observations: dict  # (scale, t, s) -> per-trait counts, or None if not covered
    compartment_observations: dict
    observation_times: dict  # (scale, t, s) -> absolute time or None
    stopping: dict  # 'eta'|'sigma'|'tau' -> {t: time or None}
    k_counts: np.ndarray
    h_counts: np.ndarray
    log_time: np.ndarray | None = None
    log_trait: np.ndarray | None = None
    log_delta: np.ndarray | None = None
    log_truncated: bool = False
    horizon_time: float = math.nan  # state is known on [0, horizon_time]

    @property
    def budget_exceeded(self) -> bool:
        return self.status == "budget_exceeded"

    @property
    def final_trait_counts(self) -> np.ndarray:
        return _to_traits(self.model, self.final_counts)

    def count(self, v: int, t: float, s: float = 0.0, scale: str = "det"):
        obs = self.observations.get((scale, float(t), float(s)))
        if obs is None:
            raise HorizonExceeded(f"no observation at {(scale, t, s)}")
        return int(obs[v])

    def counts_at(self, time: float) -> np.ndarray:
        """Trait counts at an absolute time, rebuilt from the event log."""
        if self.log_time is None:
            raise ValueError("run with record_log=True to query arbitrary times")
        if self.log_truncated:
            raise ValueError("event log was truncated")
        if time > self.horizon_time:
            raise HorizonExceeded(f"time {time} is beyond the simulated horizon")
        k = int(np.searchsorted(self.log_time, time, side="right"))
        out = np.zeros(self.model.graph.n_traits, dtype=np.int64)
        out[0] = 1
        np.add.at(out, self.log_trait[:k], self.log_delta[:k].astype(np.int64))
        return out


def _run_once(
    model, scaling, rng, obs_times, t_end, levels, stop_wild, stop_total, cfg, stop_wild_extinct=False
):
    C = model.n_compartments
    state = PopulationState.initial(model)
    counts = state.counts
    tcount = state.trait_counts(model)
    K = len(obs_times)
    obs_counts = np.full((K, C), -1, dtype=np.int64)
    L = len(levels)
    wild_levels = np.array([scaling.level(t) for t in levels], dtype=np.int64)
    eta = np.full(L, np.nan)
    sigma = np.full(L, np.nan)
    tau = np.full(L, np.nan)
    E = max(len(model.graph.edges), 1)
    kc = np.zeros(E, dtype=np.int64)
    hc = np.zeros(E, dtype=np.int64)
    cap = cfg.log_capacity if cfg.record_log else 0
    lt = np.zeros(cap, dtype=np.float64)
    ltr = np.zeros(cap, dtype=np.int32)
    ld = np.zeros(cap, dtype=np.int8)
    t, n_events, status, log_len = _kernel(
        rng,
        counts,
        model.trait,
        tcount,
        model.rate,
        model.death_frac,
        model.out_ptr,
        model.out_cum,
        model.out_self,
        model.out_a,
        model.out_b,
        model.out_kind,
        model.out_edge_a,
        model.out_edge_b,
        float(t_end),
        np.asarray(obs_times, dtype=np.float64),
        obs_counts,
        wild_levels,
        wild_levels.copy(),
        model.primary,
        eta,
        sigma,
        tau,
        int(stop_wild),
        int(stop_total),
        bool(stop_wild_extinct),
        int(cfg.max_events),
        kc,
        hc,
        lt,
        ltr,
        ld,
        bool(cfg.record_log),
        bool(cfg.debug_check),
    )
    if status == -1:
        raise AssertionError("walk-sum count identity violated")
    return dict(
        t=t,
        n_events=n_events,
        status=STATUS_NAMES[status],
        counts=counts,
        obs_counts=obs_counts,
        eta=eta,
        sigma=sigma,
        tau=tau,
        k=kc[: len(model.graph.edges)],
        h=hc[: len(model.graph.edges)],
        log=(lt[: min(log_len, cap)], ltr[: min(log_len, cap)], ld[: min(log_len, cap)]),
        log_truncated=log_len > cap,
    )


def run(
    graph: TraitGraph,
    scaling: ScalingParams,
    config: RunConfig,
    rng: np.random.Generator,
    model: CompartmentModel | None = None,
) -> Trajectory:
    """Simulate from one wild-type cell and record the requested observations.

    Random-scale observations need the crossing time first, so the run is
    replayed from a copy of the generator state; the replay is the same
    trajectory event for event.
    """
    if model is None:
        model = build_model(graph, scaling.n, config.walk_mode, config.cycle_allowance)
    det_keys = [("det", float(t), float(s)) for t, s in config.det_grid]
    det_times = [max(scaling.time_scale(t) + s, 0.0) for _, t, s in det_keys]
    det_keys += [("abs", float(x), 0.0) for x in config.times]
    det_times += [max(float(x), 0.0) for x in config.times]
    rand_keys = [(str(sc), float(t), float(s)) for sc, t, s in config.random_grid]
    for sc, _, _ in rand_keys:
        if sc not in ("eta", "sigma"):
            raise ValueError(f"unknown random scale {sc!r}")
    levels = sorted({float(t) for t in config.levels} | {t for _, t, _ in rand_keys})

    t_end = math.inf
    stop_wild = stop_total = 0
    levels_only = False
    if config.horizon_t is not None:
        t_end = scaling.time_scale(config.horizon_t)
    elif det_times:
        t_end = max(det_times)
    if config.stop_level_t is not None:
        stop_wild = scaling.level(config.stop_level_t)
    if config.stop_total_t is not None:
        stop_total = scaling.level(config.stop_total_t)
    if math.isinf(t_end) and not (stop_wild or stop_total):
        if not levels:
            raise ValueError("need a horizon, observation grid, stopping levels or a threshold")
        # every level is crossed by the total once the wild type crosses the top one
        stop_wild = scaling.level(levels[-1])
        levels_only = True

    replay_rng = copy.deepcopy(rng) if rand_keys else None
    order = sorted(range(len(det_times)), key=lambda i: det_times[i])
    res = _run_once(
        model,
        scaling,
        rng,
        [det_times[i] for i in order],
        t_end,
        levels,
        stop_wild,
        stop_total,
        config,
        stop_wild_extinct=levels_only,
    )

    stopping = {
        "eta": {t: _nan_none(x) for t, x in zip(levels, res["eta"])},
        "sigma": {t: _nan_none(x) for t, x in zip(levels, res["sigma"])},
        "tau": {t: _nan_none(x) for t, x in zip(levels, res["tau"])} if model.walk_mode else {},
    }
    comp_obs: dict = {}
    obs_time: dict = {}
    for rank, i in enumerate(order):
        row = res["obs_counts"][rank]
        comp_obs[det_keys[i]] = None if row[0] < 0 else row.copy()
        obs_time[det_keys[i]] = det_times[i]

    if rand_keys:
        pending = []
        for key in rand_keys:
            sc, t, s = key
            base = stopping[sc][t]
            obs_time[key] = None if base is None else max(base + s, 0.0)
            comp_obs[key] = None
            if base is not None:
                pending.append(key)
        if pending:
            pending.sort(key=lambda k: obs_time[k])
            times = [obs_time[k] for k in pending]
            res2 = _run_once(model, scaling, replay_rng, times, times[-1], [], 0, 0, config)
            for rank, key in enumerate(pending):
                row = res2["obs_counts"][rank]
                comp_obs[key] = None if row[0] < 0 else row.copy()
            # both passes follow the same path; keep the one that went further
            if _covered_until(res2["status"], res2["t"], times[-1]) > _covered_until(
                res["status"], res["t"], t_end
            ):
                res = dict(res2, eta=res["eta"], sigma=res["sigma"], tau=res["tau"])
                t_end = times[-1]

    observations = {
        k: None if v is None else _to_traits(model, v) for k, v in comp_obs.items()
    }
    lt, ltr, ld = res["log"]
    return Trajectory(
        model=model,
        scaling=scaling,
        status=res["status"],
        n_events=int(res["n_events"]),
        final_time=float(res["t"]),
        final_counts=res["counts"],
        observations=observations,
        compartment_observations=comp_obs,
        observation_times=obs_time,
        stopping=stopping,
        k_counts=res["k"],
        h_counts=res["h"],
        log_time=lt if config.record_log else None,
        log_trait=ltr if config.record_log else None,
        log_delta=ld if config.record_log else None,
        log_truncated=res["log_truncated"],
        horizon_time=_covered_until(res["status"], res["t"], t_end),
    )


def _covered_until(status: str, t_last: float, t_end: float) -> float:
    if status == "extinct":
        return math.inf
    if status == "horizon":
        return t_end
    return t_last


def _to_traits(model: CompartmentModel, counts: np.ndarray) -> np.ndarray:
    out = np.zeros(model.graph.n_traits, dtype=np.int64)
    np.add.at(out, model.trait, counts)
    return out


def _nan_none(x: float):
    return None if math.isnan(x) else float(x)


def stochastic_exponent(trajectory: Trajectory, v: int, t: float, scaling=None) -> float:
    """lambda(0) * log+(Z_v at the deterministic time of t) / log(n)."""
    sc = scaling or trajectory.scaling
    z = trajectory.count(v, t, 0.0, "det")
    return sc.lam0 * math.log(z) / sc.log_n if z > 1 else 0.0


# ---------------------------------------------------------------------------
# binary event log

EVENT_LOG_MAGIC = b"BWEVLOG\x00"
EVENT_LOG_VERSION = 1
_HEADER = struct.Struct("<8sIIQ")  # magic, version, n_traits, n_records
_RECORD = np.dtype([("time", "<f8"), ("trait", "<i4"), ("delta", "i1")])


def write_event_log(path, trajectory: Trajectory) -> None:
    if trajectory.log_time is None:
        raise ValueError("trajectory has no event log")
    recs = np.empty(len(trajectory.log_time), dtype=_RECORD)
    recs["time"] = trajectory.log_time
    recs["trait"] = trajectory.log_trait
    recs["delta"] = trajectory.log_delta
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(EVENT_LOG_MAGIC, EVENT_LOG_VERSION, trajectory.model.graph.n_traits, len(recs))
        )
        fh.write(recs.tobytes())


def read_event_log(path):
    with open(path, "rb") as fh:
        magic, version, n_traits, n = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != EVENT_LOG_MAGIC:
            raise ValueError("not an event log")
        if version != EVENT_LOG_VERSION:
            raise ValueError(f"unsupported event-log version {version}")
        recs = np.frombuffer(fh.read(), dtype=_RECORD, count=n)
    return n_traits, recs
