"""Replicate ensembles, summary statistics and comparisons with the limit theory."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats as sps

from .asymptotic_predictor import AsymptoticPredictor, ScalingParams, WLaw
from .exponent_limits import ExponentResult, NotNonIncreasing
from .ssa_engine import RunConfig, build_model, run
from .trait_graph import TraitGraph, check_non_increasing

__all__ = [
    "Thresholds",
    "EnsembleConfig",
    "ReplicateRecord",
    "EnsembleStats",
    "SampleSummary",
    "ComparisonReport",
    "DegenerateSample",
    "run_ensemble",
    "replicate_rng",
    "compare_size_limits",
    "compare_exponent_limits",
    "ks_test",
    "binomial_band",
    "trend_decreasing",
    "regression_slope",
    "write_raw_csv",
    "CSV_FIELDS",
]


class DegenerateSample(ValueError):
    pass


@dataclass(frozen=True)
class Thresholds:
    ks_p_floor: float = 0.01
    ci_level: float = 0.99
    trend_se_slack: float = 2.0


@dataclass
class EnsembleConfig:
    graph: TraitGraph
    n_values: list[int]
    replicates: int
    det_grid: list[tuple[float, float]] = field(default_factory=list)
    random_grid: list[tuple[str, float, float]] = field(default_factory=list)
    levels: list[float] = field(default_factory=list)
    times: list[float] = field(default_factory=list)  # absolute observation times
    conditioning: str = "survival"  # or "all"
    root_seed: int = 0
    thresholds: Thresholds = field(default_factory=Thresholds)
    phi: float | None = None  # override of phi_n (default log log n)
    psi: float | None = None
    horizon_t: float | None = None
    walk_mode: bool = False
    cycle_allowance: int = 0
    max_events: int = 10**8
    min_survivors: int = 0  # keep adding replicates until this many survive
    threads: int = 1
    chunk_size: int = 50

    def validate(self) -> None:
        if self.replicates < 2:
            raise ValueError("need at least 2 replicates")
        if not self.n_values or any(n < 2 for n in self.n_values):
            raise ValueError("n values must be >= 2")
        if not (self.det_grid or self.random_grid or self.levels or self.times):
            raise ValueError("observation grids are empty")
        if self.conditioning not in ("survival", "all"):
            raise ValueError(f"unknown conditioning policy {self.conditioning!r}")

    def scaling(self, n: int) -> ScalingParams:
        return ScalingParams.from_graph(self.graph, n, phi=self.phi, psi=self.psi)

    def run_config(self) -> RunConfig:
        return RunConfig(
            det_grid=list(self.det_grid),
            random_grid=list(self.random_grid),
            levels=list(self.levels),
            times=list(self.times),
            horizon_t=self.horizon_t,
            walk_mode=self.walk_mode,
            cycle_allowance=self.cycle_allowance,
            max_events=self.max_events,
        )


@dataclass
class ReplicateRecord:
    replicate_id: int
    n: int
    status: str
    survived: bool
    n_events: int
    observations: dict  # (scale, t, s) -> tuple of per-trait counts, or None
    stopping: dict  # 'eta'|'sigma'|'tau' -> {t: time or None}

    @property
    def overflow(self) -> bool:
        return self.status == "budget_exceeded"

    @property
    def usable(self) -> bool:
        """Survived and every observation was reached within the event budget."""
        return self.survived and not self.overflow


def replicate_rng(root_seed: int, n: int, replicate: int) -> np.random.Generator:
    """Independent Philox stream per (root seed, n, replicate)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([root_seed, n, replicate])))


def _run_chunk(args) -> list[ReplicateRecord]:
    graph, n, scaling, run_cfg, root_seed, ids = args
    model = build_model(graph, n, run_cfg.walk_mode, run_cfg.cycle_allowance)
    out = []
    for rid in ids:
        tr = run(graph, scaling, run_cfg, replicate_rng(root_seed, n, rid), model=model)
        obs = {k: (None if v is None else tuple(int(x) for x in v)) for k, v in tr.observations.items()}
        out.append(
            ReplicateRecord(
                replicate_id=rid,
                n=n,
                status=tr.status,
                # W > 0 is read off as "population not extinct when the run ended";
                # a wild type lost before its levels were reached also means W = 0
                survived=tr.status not in ("extinct", "wild_extinct"),
                n_events=tr.n_events,
                observations=obs,
                stopping=tr.stopping,
            )
        )
    return out


def _execute(config: EnsembleConfig, n: int, ids: Sequence[int], pool) -> list[ReplicateRecord]:
    scaling = config.scaling(n)
    run_cfg = config.run_config()
    chunks = [list(ids[i : i + config.chunk_size]) for i in range(0, len(ids), config.chunk_size)]
    tasks = [(config.graph, n, scaling, run_cfg, config.root_seed, c) for c in chunks]
    if pool is None:
        results = [_run_chunk(t) for t in tasks]
    else:
        results = list(pool.map(_run_chunk, tasks))  # map preserves submission order
    recs = [r for chunk in results for r in chunk]
    recs.sort(key=lambda r: r.replicate_id)
    return recs


def run_ensemble(config: EnsembleConfig, progress: Callable[[str], None] | None = None) -> "EnsembleStats":
    config.validate()
    threads = config.threads if config.threads > 0 else (os.cpu_count() or 1)
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    records: list[ReplicateRecord] = []
    try:
        for n in config.n_values:
            recs = _execute(config, n, range(config.replicates), pool)
            next_id = config.replicates
            while config.min_survivors and sum(r.usable for r in recs) < config.min_survivors:
                missing = config.min_survivors - sum(r.usable for r in recs)
                extra = max(missing * 2, config.chunk_size)
                recs += _execute(config, n, range(next_id, next_id + extra), pool)
                next_id += extra
            if config.min_survivors:
                # cut at the replicate holding the last needed survivor
                kept, alive = [], 0
                for r in recs:
                    if alive >= config.min_survivors:
                        break
                    kept.append(r)
                    alive += r.usable
                recs = kept
            if progress:
                progress(f"n={n}: {len(recs)} replicates, {sum(r.survived for r in recs)} surviving")
            records += recs
    finally:
        if pool is not None:
            pool.shutdown()
    return EnsembleStats(config, records)


@dataclass(frozen=True)
class SampleSummary:
    count: int
    mean: float
    variance: float
    se: float
    q05: float
    q50: float
    q95: float

    @classmethod
    def of(cls, values: Iterable[float]) -> "SampleSummary":
        x = np.asarray(list(values), dtype=float)
        if x.size == 0:
            nan = math.nan
            return cls(0, nan, nan, nan, nan, nan, nan)
        var = float(x.var(ddof=1)) if x.size > 1 else 0.0
        q = np.quantile(x, [0.05, 0.5, 0.95])
        return cls(int(x.size), float(x.mean()), var, math.sqrt(var / x.size), *map(float, q))


class EnsembleStats:
    """Raw per-replicate observables with derived summaries (computed in replicate order)."""

    def __init__(self, config: EnsembleConfig, records: list[ReplicateRecord]):
        self.config = config
        self.records = records
        self._pred: dict[int, AsymptoticPredictor] = {}

    def predictor(self, n: int) -> AsymptoticPredictor:
        if n not in self._pred:
            self._pred[n] = AsymptoticPredictor(self.config.graph, self.config.scaling(n))
        return self._pred[n]

    def for_n(self, n: int, conditioned: bool | None = None) -> list[ReplicateRecord]:
        if conditioned is None:
            conditioned = self.config.conditioning == "survival"
        return [r for r in self.records if r.n == n and (r.usable or not conditioned)]

    @property
    def n_values(self) -> list[int]:
        return list(dict.fromkeys(r.n for r in self.records))

    def survival(self, n: int) -> dict:
        recs = [r for r in self.records if r.n == n]
        alive = sum(r.survived for r in recs)
        return {
            "replicates": len(recs),
            "survived": alive,
            "extinct": len(recs) - alive,
            "overflow": sum(r.overflow for r in recs),
            "fraction": alive / len(recs) if recs else math.nan,
        }

    # -- per-replicate observables -------------------------------------

    def counts(self, n, scale, v, t, s, conditioned=None) -> np.ndarray:
        key = (scale, float(t), float(s))
        vals = [r.observations.get(key) for r in self.for_n(n, conditioned)]
        return np.array([c[v] for c in vals if c is not None], dtype=float)

    def normalizer(self, n, v, t, s, scale="det") -> float:
        if scale == "abs":
            return 1.0
        return self.predictor(n).normalizer(v, t, s)

    def ratios(self, n, scale, v, t, s, conditioned=None) -> np.ndarray:
        return self.counts(n, scale, v, t, s, conditioned) / self.normalizer(n, v, t, s, scale)

    def ratio_summary(self, n, scale, v, t, s, conditioned=None) -> SampleSummary:
        return SampleSummary.of(self.ratios(n, scale, v, t, s, conditioned))

    def exponents(self, n, v, t, conditioned=None) -> np.ndarray:
        sc = self.predictor(n).scaling
        z = self.counts(n, "det", v, t, 0.0, conditioned)
        return sc.lam0 * np.log(np.maximum(z, 1.0)) / sc.log_n

    def stopping_times(self, n, which, t, conditioned=None) -> np.ndarray:
        vals = [r.stopping[which].get(float(t)) for r in self.for_n(n, conditioned)]
        return np.array([x for x in vals if x is not None], dtype=float)

    def eta_scaled_error(self, n, t) -> np.ndarray:
        """|eta_t lambda(0) / log n - t| over replicates where eta_t is finite."""
        sc = self.predictor(n).scaling
        return np.abs(self.stopping_times(n, "eta", t) * sc.lam0 / sc.log_n - t)

    def eta_w_estimate(self, n, t) -> np.ndarray:
        """exp(-lambda(0) (eta_t - t log n / lambda(0))), the stopping-time proxy for W."""
        sc = self.predictor(n).scaling
        return np.exp(-sc.lam0 * (self.stopping_times(n, "eta", t) - sc.time_scale(t)))

    def sigma_eta_gap(self, n, t) -> np.ndarray:
        out = []
        for r in self.for_n(n):
            e, s = r.stopping["eta"].get(float(t)), r.stopping["sigma"].get(float(t))
            if e is not None and s is not None:
                out.append(e - s)
        return np.array(out, dtype=float)

    def mutant_fraction(self, n, v, t, s=0.0, scale="det") -> float:
        """Fraction of all replicates holding any trait-v cell at the observation point."""
        c = self.counts(n, scale, v, t, s, conditioned=False)
        return float(np.mean(c > 0)) if c.size else math.nan

    # -- output -----------------------------------------------------------

    def rows(self) -> Iterable[dict]:
        g = self.config.graph
        for r in self.records:
            for (scale, t, s), obs in r.observations.items():
                for v in g.vertices:
                    d = self.normalizer(r.n, v, t, s, scale)
                    count = None if obs is None else obs[v]
                    yield {
                        "replicate_id": r.replicate_id,
                        "n": r.n,
                        "scale": scale,
                        "v": v,
                        "t": t,
                        "s": s,
                        "count": "" if count is None else count,
                        "normalizer": repr(d),
                        "ratio": "" if count is None else repr(count / d),
                        "survived": int(r.survived),
                    }

    def summary(self) -> dict:
        out: dict = {"survival": {}, "ratios": [], "stopping": []}
        g = self.config.graph
        for n in self.n_values:
            out["survival"][str(n)] = self.survival(n)
            keys = [("det", t, s) for t, s in self.config.det_grid] + list(self.config.random_grid)
            keys += [("abs", x, 0.0) for x in self.config.times]
            for scale, t, s in keys:
                for v in g.vertices:
                    summ = self.ratio_summary(n, scale, v, t, s)
                    out["ratios"].append(
                        {"n": n, "scale": scale, "v": v, "t": t, "s": s, **asdict(summ)}
                    )
            for t in sorted({float(x) for x in self.config.levels} | {x[1] for x in self.config.random_grid}):
                out["stopping"].append(
                    {
                        "n": n,
                        "t": t,
                        "eta_scaled_error": asdict(SampleSummary.of(self.eta_scaled_error(n, t))),
                        "eta_minus_sigma": asdict(SampleSummary.of(self.sigma_eta_gap(n, t))),
                        "w_proxy": asdict(SampleSummary.of(self.eta_w_estimate(n, t))),
                    }
                )
        return out


CSV_FIELDS = ["replicate_id", "n", "scale", "v", "t", "s", "count", "normalizer", "ratio", "survived"]


def write_raw_csv(stats: EnsembleStats, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        for row in stats.rows():
            w.writerow(row)


# ---------------------------------------------------------------------------
# statistics helpers


def ks_test(sample, distribution) -> tuple[float, float]:
    """Two-sided KS test. A ``WLaw`` is compared on the positive part of the sample.

    ``distribution`` may also be a frozen scipy distribution or a cdf callable.
    """
    x = np.asarray(sample, dtype=float)
    if isinstance(distribution, WLaw):
        x = x[x > 0]
        cdf = distribution.positive_cdf
    elif hasattr(distribution, "cdf"):
        cdf = distribution.cdf
    else:
        cdf = distribution
    if x.size < 8:
        raise DegenerateSample(f"need at least 8 values, got {x.size}")
    if np.all(x == x[0]):
        raise DegenerateSample("all sample values are equal")
    res = sps.kstest(x, cdf)
    return float(res.statistic), float(res.pvalue)


def binomial_band(n_trials: int, p: float, level: float = 0.99) -> tuple[float, float]:
    """Central ``level`` band of Binomial(n_trials, p) / n_trials."""
    lo, hi = sps.binom.interval(level, n_trials, p)
    return lo / n_trials, hi / n_trials


def trend_decreasing(
    values: Sequence[float], ses: Sequence[float], slack: float = 2.0, max_inversions: int = 1
) -> bool:
    """Each step goes down, except up to ``max_inversions`` rises within ``slack`` standard errors."""
    inversions = 0
    for i in range(len(values) - 1):
        a, b = values[i], values[i + 1]
        if not (math.isfinite(a) and math.isfinite(b)):
            return False
        if b < a:
            continue
        tol = slack * math.hypot(ses[i], ses[i + 1])
        if b - a > tol:
            return False
        inversions += 1
    return inversions <= max_inversions


def regression_slope(ts, values) -> float:
    res = sps.linregress(np.asarray(ts, dtype=float), np.asarray(values, dtype=float))
    return float(res.slope)


# ---------------------------------------------------------------------------
# comparisons


@dataclass
class ComparisonReport:
    entries: list[dict]
    trends: list[dict]
    verdict: bool
    sup: list[dict] = field(default_factory=list)  # reported, never gated

    def to_dict(self) -> dict:
        return {"entries": self.entries, "trends": self.trends, "verdict": self.verdict, "sup": self.sup}


def compare_size_limits(stats: EnsembleStats, predictor_for_n=None) -> ComparisonReport:
    """Sample means of Z_v / d_v against the first-order limits.

    Deterministic scale: E[W | W > 0] w_v(t) (E[W | W > 0] = alpha(0) / lambda(0)
    analytically). Random scales: w_v(t). Before t(v) - 1/h_n the fraction of
    replicates holding a v cell is reported; in the transition window the
    fraction exceeding the psi_n log^(theta-1) n bound is flagged.
    """
    g = stats.config.graph
    if not check_non_increasing(g):
        raise NotNonIncreasing("first-order size limits need lambda(v) <= lambda(0)")
    predictor_for_n = predictor_for_n or stats.predictor
    slack = stats.config.thresholds.trend_se_slack
    entries = []
    keys = [("det", t, s) for t, s in stats.config.det_grid] + list(stats.config.random_grid)
    for n in stats.n_values:
        p = predictor_for_n(n)
        for scale, t, s in keys:
            for v in g.vertices:
                if v == 0:
                    continue
                e = {"n": n, "scale": scale, "v": v, "t": t, "s": s}
                reg = p.regime(v, t)
                e["regime"] = reg
                if reg == 1:
                    e["any_mutant_fraction"] = stats.mutant_fraction(n, v, t, s, scale)
                elif reg == 2:
                    c = stats.counts(n, scale, v, t, s)
                    bound = p.upper_bound_regime(v)["bound"]
                    e["bound"] = bound
                    e["exceed_fraction"] = float(np.mean(c > bound)) if c.size else math.nan
                else:
                    summ = stats.ratio_summary(n, scale, v, t, s)
                    w = p.weight(v, t)
                    pred = w * (p.law.conditional_mean if scale == "det" else 1.0)
                    e.update(
                        prediction=pred,
                        mean=summ.mean,
                        se=summ.se,
                        median=summ.q50,
                        count=summ.count,
                        rel_error=abs(summ.mean - pred) / pred if pred else math.nan,
                        rel_error_se=summ.se / pred if pred else math.nan,
                    )
                entries.append(e)
    trends = []
    groups: dict = {}
    for e in entries:
        groups.setdefault((e["scale"], e["v"], e["t"], e["s"]), []).append(e)
    for (scale, v, t, s), es in groups.items():
        es = sorted(es, key=lambda e: e["n"])
        if all("rel_error" in e for e in es):
            vals = [e["rel_error"] for e in es]
            ses = [e["rel_error_se"] for e in es]
        elif all("any_mutant_fraction" in e for e in es):
            vals = [e["any_mutant_fraction"] for e in es]
            ses = [
                math.sqrt(max(f * (1 - f), 0.0) / max(stats.survival(e["n"])["replicates"], 1))
                for f, e in zip(vals, es)
            ]
        else:
            continue
        trends.append(
            {
                "scale": scale,
                "v": v,
                "t": t,
                "s": s,
                "n": [e["n"] for e in es],
                "values": vals,
                "decreasing": len(es) < 2 or trend_decreasing(vals, ses, slack),
            }
        )
    # worst late-regime relative error over the grid, per n and trait
    sup: dict = {}
    for e in entries:
        if "rel_error" in e and not math.isnan(e["rel_error"]):
            key = (e["n"], e["scale"], e["v"])
            sup[key] = max(sup.get(key, 0.0), e["rel_error"])
    sup_rows = [{"n": n, "scale": sc, "v": v, "sup_rel_error": x} for (n, sc, v), x in sorted(sup.items())]
    return ComparisonReport(entries, trends, all(tr["decreasing"] for tr in trends), sup_rows)


def compare_exponent_limits(
    stats: EnsembleStats,
    limits: ExponentResult,
    window: tuple[float, float] | None = None,
    slope_tolerance: float = 0.10,
) -> ComparisonReport:
    """Empirical exponents X_v on the deterministic t-grid against x_v(t)."""
    g = stats.config.graph
    ts = sorted({t for t, s in stats.config.det_grid if s == 0})
    if window is None:
        window = (ts[len(ts) // 2], ts[-1]) if ts else (0.0, 0.0)
    late = [t for t in ts if window[0] <= t <= window[1]]
    entries, trends = [], []
    ok = True
    for n in stats.n_values:
        extinct_zero = True
        for r in stats.for_n(n, conditioned=False):
            if not r.survived:
                for t in ts:
                    obs = r.observations.get(("det", float(t), 0.0))
                    if obs is not None and any(obs):
                        extinct_zero = False
        for v in g.vertices:
            x = limits[v]
            X = {t: stats.exponents(n, v, t, conditioned=True) for t in ts}
            limit = np.array([float(x(Fraction(t))) for t in ts])
            sup = [
                float(np.max(np.abs(row - limit)))
                for row in (np.array(xs) for xs in zip(*(X[t] for t in ts)))
            ]
            e = {
                "n": n,
                "v": v,
                "survivors": len(X[ts[0]]) if ts else 0,
                "mean_sup_distance": float(np.mean(sup)) if sup else math.nan,
                "extinct_zero": extinct_zero,
            }
            if len(late) >= 2:
                means = [float(np.mean(X[t])) for t in late]
                slope = regression_slope(late, means)
                lim_slopes = {float(x.slopes[i]) for i, k in enumerate(x.knots) if k < window[1]
                              and (i + 1 == len(x.knots) or x.knots[i + 1] > window[0])}
                lim = float(x(Fraction(late[-1])) - x(Fraction(late[0]))) / (late[-1] - late[0])
                e.update(
                    window=list(window),
                    slope=slope,
                    limit_slope=lim,
                    limit_linear_on_window=len(lim_slopes) == 1,
                    slope_rel_error=abs(slope - lim) / lim if lim else abs(slope),
                )
                if lim and e["slope_rel_error"] > slope_tolerance:
                    ok = False
            ok = ok and extinct_zero
            entries.append(e)
    by_v: dict = {}
    for e in entries:
        by_v.setdefault(e["v"], []).append(e)
    for v, es in by_v.items():
        es.sort(key=lambda e: e["n"])
        vals = [e["mean_sup_distance"] for e in es]
        trends.append({"v": v, "n": [e["n"] for e in es], "mean_sup_distance": vals})
    return ComparisonReport(entries, trends, ok)
