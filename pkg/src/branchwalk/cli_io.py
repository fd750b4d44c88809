"""Scenario configs, report bundles and the ``branchwalk`` command line."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .asymptotic_predictor import ScalingParams
from .ensemble_harness import (
    EnsembleConfig,
    Thresholds,
    compare_size_limits,
    compare_exponent_limits,
    replicate_rng,
    run_ensemble,
    write_raw_csv,
)
from .exponent_limits import (
    NotNonIncreasing,
    corollary_mono_directional,
    corollary_non_increasing,
    run_exponent_algorithm,
)
from .ssa_engine import RunConfig, run, write_event_log
from .trait_graph import TraitGraph, check_non_increasing, validate
from .walk_calculus import analyze_graph

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "ReportBundle",
    "load_config",
    "load_fixture",
    "fixture_path",
    "cmd_analyze",
    "cmd_exponents",
    "cmd_simulate",
    "cmd_ensemble",
    "cmd_verify",
    "main",
]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_BUDGET = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = "", line: int | None = None):
        self.path = path
        self.line = line
        where = path or "<config>"
        if line is not None:
            where += f" (line {line})"
        super().__init__(f"{where}: {message}")


def parse_rational(value, path: str = "", lines: dict | None = None) -> Fraction:
    """Exact rational from an int, a decimal or 'p/q' string, or a float literal."""
    if isinstance(value, bool) or value is None:
        raise ConfigError(f"expected a number, got {value!r}", path, (lines or {}).get(path))
    try:
        if isinstance(value, float):
            return Fraction(repr(value))
        return Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a rational number: {value!r}", path, (lines or {}).get(path)) from exc


def _fmt(q: Fraction) -> str:
    return str(q)


def _line_map(text: str) -> dict:
    """Dotted field path -> 1-based source line, from the YAML node tree."""
    out: dict = {}

    def walk(node, path):
        out.setdefault(path, node.start_mark.line + 1)
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                walk(v, f"{path}.{k.value}" if path else str(k.value))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, f"{path}[{i}]")

    root = yaml.compose(text)
    if root is not None:
        walk(root, "")
    return out


@dataclass
class ScenarioConfig:
    name: str
    vertices: list[tuple[str, Fraction, Fraction]]  # name, birth, death; first is the wild type
    edges: list[tuple[str, str, Fraction, Fraction]]  # src, dst, label, mu
    n_values: list[int] = field(default_factory=lambda: [1000])
    phi: Fraction | None = None
    psi: Fraction | None = None
    det_grid: list[tuple[Fraction, Fraction]] = field(default_factory=list)
    random_grid: list[tuple[str, Fraction, Fraction]] = field(default_factory=list)
    levels: list[Fraction] = field(default_factory=list)
    horizon_t: Fraction | None = None
    walk_mode: bool = False
    cycle_allowance: int = 0
    max_events: int = 10**8
    record_log: bool = False
    replicates: int = 100
    conditioning: str = "survival"
    min_survivors: int = 0
    thresholds: dict = field(
        default_factory=lambda: {
            "ks_p_floor": Fraction(1, 100),
            "ci_level": Fraction(99, 100),
            "trend_se_slack": Fraction(2),
        }
    )
    output: str = "out"
    seed: int = 0

    # -- parsing --------------------------------------------------------

    @classmethod
    def from_text(cls, text: str) -> "ScenarioConfig":
        try:
            data = yaml.safe_load(text)
            lines = _line_map(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ConfigError(f"invalid YAML: {exc}", "", mark.line + 1 if mark else None) from exc
        return cls.from_dict(data, lines)

    @classmethod
    def from_dict(cls, data, lines: dict | None = None) -> "ScenarioConfig":
        lines = lines or {}

        def err(msg, path):
            return ConfigError(msg, path, lines.get(path))

        def need(d, key, path):
            if not isinstance(d, dict) or key not in d:
                raise err(f"missing field '{key}'", path)
            return d[key]

        def rat(v, path):
            return parse_rational(v, path, lines)

        def opt_rat(v, path):
            return None if v is None else rat(v, path)

        def integer(v, path, lo=None):
            if isinstance(v, bool) or not isinstance(v, int):
                raise err(f"expected an integer, got {v!r}", path)
            if lo is not None and v < lo:
                raise err(f"must be >= {lo}", path)
            return v

        if not isinstance(data, dict):
            raise err("config must be a mapping", "")
        unknown = set(data) - {"name", "graph", "scaling", "simulation", "ensemble", "output", "seed"}
        if unknown:
            raise err(f"unknown top-level fields {sorted(unknown)}", "")
        graph = need(data, "graph", "")
        verts = need(graph, "vertices", "graph")
        if not isinstance(verts, list) or not verts:
            raise err("need a non-empty vertex list", "graph.vertices")
        vertices = []
        for i, v in enumerate(verts):
            p = f"graph.vertices[{i}]"
            vertices.append(
                (
                    str(need(v, "name", p)),
                    rat(need(v, "birth", p), p + ".birth"),
                    rat(need(v, "death", p), p + ".death"),
                )
            )
        names = [v[0] for v in vertices]
        if len(set(names)) != len(names):
            raise err("vertex names must be unique", "graph.vertices")
        edges = []
        for i, e in enumerate(graph.get("edges") or []):
            p = f"graph.edges[{i}]"
            src, dst = str(need(e, "src", p)), str(need(e, "dst", p))
            for key, nm in (("src", src), ("dst", dst)):
                if nm not in names:
                    raise err(f"unknown vertex {nm!r}", f"{p}.{key}")
            label = rat(need(e, "label", p), p + ".label")
            if label <= 0:
                raise err(f"non-positive label on edge ({src},{dst})", p + ".label")
            edges.append((src, dst, label, rat(e.get("mu", 1), p + ".mu")))

        sc = data.get("scaling") or {}
        n_raw = sc.get("n", [1000])
        n_values = [integer(x, f"scaling.n[{i}]", 2) for i, x in enumerate(n_raw if isinstance(n_raw, list) else [n_raw])]
        sim = data.get("simulation") or {}
        det_grid = []
        for i, ts in enumerate(sim.get("det_grid") or []):
            p = f"simulation.det_grid[{i}]"
            if not isinstance(ts, list) or len(ts) != 2:
                raise err("expected [t, s]", p)
            det_grid.append((rat(ts[0], p + "[0]"), rat(ts[1], p + "[1]")))
        random_grid = []
        for i, ts in enumerate(sim.get("random_grid") or []):
            p = f"simulation.random_grid[{i}]"
            if not isinstance(ts, list) or len(ts) != 3 or ts[0] not in ("eta", "sigma"):
                raise err("expected [eta|sigma, t, s]", p)
            random_grid.append((ts[0], rat(ts[1], p + "[1]"), rat(ts[2], p + "[2]")))
        levels = [rat(x, f"simulation.levels[{i}]") for i, x in enumerate(sim.get("levels") or [])]
        ens = data.get("ensemble") or {}
        cond = ens.get("conditioning", "survival")
        if cond not in ("survival", "all"):
            raise err("must be 'survival' or 'all'", "ensemble.conditioning")
        thresholds = {
            "ks_p_floor": Fraction(1, 100),
            "ci_level": Fraction(99, 100),
            "trend_se_slack": Fraction(2),
        }
        for k, v in (ens.get("thresholds") or {}).items():
            if k not in thresholds:
                raise err(f"unknown threshold {k!r}", "ensemble.thresholds")
            thresholds[k] = rat(v, f"ensemble.thresholds.{k}")
        cfg = cls(
            name=str(data.get("name", "scenario")),
            vertices=vertices,
            edges=edges,
            n_values=n_values,
            phi=opt_rat(sc.get("phi"), "scaling.phi"),
            psi=opt_rat(sc.get("psi"), "scaling.psi"),
            det_grid=det_grid,
            random_grid=random_grid,
            levels=levels,
            horizon_t=opt_rat(sim.get("horizon_t"), "simulation.horizon_t"),
            walk_mode=bool(sim.get("walk_mode", False)),
            cycle_allowance=integer(sim.get("cycle_allowance", 0), "simulation.cycle_allowance", 0),
            max_events=integer(sim.get("max_events", 10**8), "simulation.max_events", 1),
            record_log=bool(sim.get("record_log", False)),
            replicates=integer(ens.get("replicates", 100), "ensemble.replicates", 2),
            conditioning=cond,
            min_survivors=integer(ens.get("min_survivors", 0), "ensemble.min_survivors", 0),
            thresholds=thresholds,
            output=str(data.get("output", "out")),
            seed=integer(data.get("seed", 0), "seed", 0),
        )
        report = validate(cfg.graph())
        if not report.ok:
            raise err("; ".join(report.violations), "graph")
        return cfg

    # -- serialization --------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "graph": {
                "vertices": [
                    {"name": n, "birth": _fmt(a), "death": _fmt(b)} for n, a, b in self.vertices
                ],
                "edges": [
                    {"src": s, "dst": d, "label": _fmt(l), "mu": _fmt(m)} for s, d, l, m in self.edges
                ],
            },
            "scaling": {
                "n": list(self.n_values),
                "phi": None if self.phi is None else _fmt(self.phi),
                "psi": None if self.psi is None else _fmt(self.psi),
            },
            "simulation": {
                "det_grid": [[_fmt(t), _fmt(s)] for t, s in self.det_grid],
                "random_grid": [[sc, _fmt(t), _fmt(s)] for sc, t, s in self.random_grid],
                "levels": [_fmt(t) for t in self.levels],
                "horizon_t": None if self.horizon_t is None else _fmt(self.horizon_t),
                "walk_mode": self.walk_mode,
                "cycle_allowance": self.cycle_allowance,
                "max_events": self.max_events,
                "record_log": self.record_log,
            },
            "ensemble": {
                "replicates": self.replicates,
                "conditioning": self.conditioning,
                "min_survivors": self.min_survivors,
                "thresholds": {k: _fmt(v) for k, v in self.thresholds.items()},
            },
            "output": self.output,
            "seed": self.seed,
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    # -- derived objects ------------------------------------------------

    def graph(self) -> TraitGraph:
        idx = {n: i for i, (n, _, _) in enumerate(self.vertices)}
        return TraitGraph.build(
            [a for _, a, _ in self.vertices],
            [b for _, _, b in self.vertices],
            [(idx[s], idx[d], l, m) for s, d, l, m in self.edges],
            names=[n for n, _, _ in self.vertices],
        )

    def run_config(self) -> RunConfig:
        return RunConfig(
            det_grid=[(float(t), float(s)) for t, s in self.det_grid],
            random_grid=[(sc, float(t), float(s)) for sc, t, s in self.random_grid],
            levels=[float(t) for t in self.levels],
            horizon_t=None if self.horizon_t is None else float(self.horizon_t),
            walk_mode=self.walk_mode,
            cycle_allowance=self.cycle_allowance,
            max_events=self.max_events,
            record_log=self.record_log,
        )

    def ensemble_config(self, threads: int = 1) -> EnsembleConfig:
        return EnsembleConfig(
            graph=self.graph(),
            n_values=list(self.n_values),
            replicates=self.replicates,
            det_grid=[(float(t), float(s)) for t, s in self.det_grid],
            random_grid=[(sc, float(t), float(s)) for sc, t, s in self.random_grid],
            levels=[float(t) for t in self.levels],
            conditioning=self.conditioning,
            root_seed=self.seed,
            thresholds=Thresholds(**{k: float(v) for k, v in self.thresholds.items()}),
            phi=None if self.phi is None else float(self.phi),
            psi=None if self.psi is None else float(self.psi),
            horizon_t=None if self.horizon_t is None else float(self.horizon_t),
            walk_mode=self.walk_mode,
            cycle_allowance=self.cycle_allowance,
            max_events=self.max_events,
            min_survivors=self.min_survivors,
            threads=threads,
        )

    def scaling(self, n: int | None = None) -> ScalingParams:
        return ScalingParams.from_graph(
            self.graph(),
            n if n is not None else self.n_values[0],
            phi=None if self.phi is None else float(self.phi),
            psi=None if self.psi is None else float(self.psi),
        )


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from exc
    return ScenarioConfig.from_text(text)


def fixture_path(name: str) -> Path:
    if not name.endswith(".yaml"):
        name += ".yaml"
    return Path(str(resources.files("branchwalk") / "fixtures" / name))


def load_fixture(name: str) -> ScenarioConfig:
    return load_config(fixture_path(name))


# ---------------------------------------------------------------------------
# report bundle


@dataclass
class ReportBundle:
    command: str
    config: ScenarioConfig | None
    out_dir: Path
    data: dict = field(default_factory=dict)  # json-serializable payloads, name -> obj
    files: list[str] = field(default_factory=list)
    overflow: int = 0
    passed: bool = True

    def manifest(self) -> dict:
        return {
            "tool": "branchwalk",
            "version": __version__,
            "command": self.command,
            "config_hash": self.config.config_hash() if self.config else None,
            "seed": self.config.seed if self.config else None,
            "files": sorted(self.files),
            "budget_overflow": self.overflow,
            "passed": self.passed,
        }

    def add_json(self, name: str, obj) -> None:
        self.data[name] = obj
        self._write(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def add_text(self, name: str, text: str) -> None:
        self._write(name, text)

    def _write(self, name: str, text: str) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / name).write_text(text)
        if name not in self.files:
            self.files.append(name)

    def path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        if name not in self.files:
            self.files.append(name)
        return self.out_dir / name

    def finalize(self) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        if self.config is not None:
            (self.out_dir / "config.yaml").write_text(self.config.to_yaml())
            if "config.yaml" not in self.files:
                self.files.append("config.yaml")
        p = self.out_dir / "manifest.json"
        p.write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")
        return p


def _out_dir(cfg: ScenarioConfig | None, out) -> Path:
    if out is not None:
        return Path(out)
    return Path(cfg.output if cfg else "out")


# ---------------------------------------------------------------------------
# commands


def analysis_tables(graph: TraitGraph) -> dict:
    analysis = analyze_graph(graph)
    traits = []
    for v in graph.vertices:
        a = analysis[v]
        adm = a.admissible
        entry = {
            "v": v,
            "name": graph.names[v] if graph.names else str(v),
            "lambda": str(graph.growth(v)),
            "t_v": str(adm.t_v),
            "theta_v": adm.theta_v,
            "paths": [{"walk": list(p.vertices), "t": str(p.length), "theta": p.theta} for p in adm.all_paths],
            "admissible": [list(w.vertices) for w in adm.walks],
            # mu = 0 edges stay in the enumeration; their walks carry zero weight
            "zero_mu_walks": [
                list(w.vertices)
                for w in adm.walks
                if any(graph.mu(a, b) == 0 for a, b in zip(w.vertices, w.vertices[1:]))
            ],
        }
        if a.weight_sum is None:
            entry["weight"] = None
        else:
            ws = a.weight_sum
            entry["weight"] = {
                "total": ws.total.to_dict(),
                "total_text": ws.total.describe(),
                "walks": [
                    {
                        "walk": list(w.walk.vertices),
                        "constant": str(w.constant),
                        "integral": w.integral.to_dict(),
                        "integral_text": w.integral.describe(),
                    }
                    for w in ws.weights
                ],
            }
        traits.append(entry)
    return {"traits": traits}


def cmd_analyze(cfg: ScenarioConfig, out=None) -> ReportBundle:
    b = ReportBundle("analyze", cfg, _out_dir(cfg, out))
    tables = analysis_tables(cfg.graph())
    b.add_json("analysis.json", tables)
    lines = []
    for tr in tables["traits"]:
        w = tr["weight"]["total_text"] if tr["weight"] else "n/a (selective vertex on a walk)"
        lines.append(
            f"{tr['v']}\t{tr['name']}\tt={tr['t_v']}\ttheta={tr['theta_v']}\t"
            f"|A|={len(tr['admissible'])}\tw(t)={w}"
            + (f"\tzero-mu walks={tr['zero_mu_walks']}" if tr["zero_mu_walks"] else "")
        )
    b.add_text("analysis.txt", "\n".join(lines) + "\n")
    return b


def exponent_tables(graph: TraitGraph) -> dict:
    res = run_exponent_algorithm(graph)
    corollary = None
    cor_name = None
    if check_non_increasing(graph):
        corollary, cor_name = corollary_non_increasing(graph), "non_increasing"
    else:
        chain = _as_chain(graph)
        if chain is not None:
            lams, labels = chain
            corollary = dict(enumerate(corollary_mono_directional(lams, labels)))
            cor_name = "mono_directional"
    rows = []
    for v in graph.vertices:
        x = res[v]
        for i, k in enumerate(x.knots):
            row = {"v": v, "knot": str(k), "value": str(x.values[i]), "slope": str(x.slopes[i])}
            if corollary is not None:
                c = corollary[v]
                row["corollary_value"] = str(c(k))
                row["corollary_slope"] = str(c.slopes[max(i for i, kk in enumerate(c.knots) if kk <= k)])
                row["agrees"] = c.canonical() == x.canonical()
            rows.append(row)
    return {
        "breakpoints": [str(d) for d in res.breakpoints],
        "exponents": {str(v): res[v].to_dict() for v in graph.vertices},
        "events": [e.to_dict() for e in res.events],
        "corollary": cor_name,
        "rows": rows,
    }


def _as_chain(graph: TraitGraph):
    """(lambdas, labels) if the graph is exactly 0 -> 1 -> ... -> k-1."""
    k = graph.n_traits
    if len(graph.edges) != k - 1:
        return None
    labels = []
    for i in range(k - 1):
        if (i, i + 1) not in graph.edge_map:
            return None
        labels.append(graph.label(i, i + 1))
    return [graph.growth(v) for v in graph.vertices], labels


def cmd_exponents(cfg: ScenarioConfig, out=None) -> ReportBundle:
    b = ReportBundle("exponents", cfg, _out_dir(cfg, out))
    tables = exponent_tables(cfg.graph())
    b.add_json("exponents.json", tables)
    fields = ["v", "knot", "value", "slope", "corollary_value", "corollary_slope", "agrees"]
    with open(b.path("exponents.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, restval="")
        w.writeheader()
        w.writerows(tables["rows"])
    return b


def cmd_simulate(cfg: ScenarioConfig, out=None) -> ReportBundle:
    b = ReportBundle("simulate", cfg, _out_dir(cfg, out))
    graph = cfg.graph()
    n = cfg.n_values[0]
    scaling = cfg.scaling(n)
    tr = run(graph, scaling, cfg.run_config(), replicate_rng(cfg.seed, n, 0))
    payload = {
        "n": n,
        "status": tr.status,
        "events": tr.n_events,
        "final_time": tr.final_time,
        "final_counts": [int(x) for x in tr.final_trait_counts],
        "compartments": {lab: int(c) for lab, c in zip(tr.model.labels, tr.final_counts)},
        "observations": [
            {
                "scale": k[0],
                "t": k[1],
                "s": k[2],
                "time": tr.observation_times.get(k),
                "counts": None if v is None else [int(x) for x in v],
            }
            for k, v in tr.observations.items()
        ],
        "stopping": {w: {str(t): x for t, x in d.items()} for w, d in tr.stopping.items()},
        "mutations_one": {f"{e.src}->{e.dst}": int(tr.k_counts[i]) for i, e in enumerate(graph.edges)},
        "mutations_two": {f"{e.src}->{e.dst}": int(tr.h_counts[i]) for i, e in enumerate(graph.edges)},
    }
    if cfg.record_log:
        p = b.path("events.bin")
        write_event_log(p, tr)
        payload["event_log_sha256"] = hashlib.sha256(p.read_bytes()).hexdigest()
        payload["event_log_truncated"] = tr.log_truncated
    b.add_json("trajectory.json", payload)
    b.overflow = int(tr.budget_exceeded)
    return b


def cmd_ensemble(cfg: ScenarioConfig, out=None, threads: int = 1) -> ReportBundle:
    b = ReportBundle("ensemble", cfg, _out_dir(cfg, out))
    ecfg = cfg.ensemble_config(threads)
    stats = run_ensemble(ecfg, progress=log.info)
    write_raw_csv(stats, b.path("raw.csv"))
    b.add_json("summary.json", _jsonable(stats.summary()))
    comparisons = {}
    if check_non_increasing(ecfg.graph) and (ecfg.det_grid or ecfg.random_grid):
        comparisons["size_limits"] = compare_size_limits(stats).to_dict()
    if any(s == 0 for _, s in ecfg.det_grid):
        comparisons["exponents"] = compare_exponent_limits(stats, run_exponent_algorithm(ecfg.graph)).to_dict()
    b.add_json("comparison.json", _jsonable(comparisons))
    b.overflow = sum(r.overflow for r in stats.records)
    return b


def cmd_verify(only=None, out=None, threads: int = 1, seed: int | None = None) -> ReportBundle:
    from .acceptance import run_all

    b = ReportBundle("verify", None, Path(out or "verify_out"))
    results = run_all(only=only, threads=threads, seed=seed, log=lambda s: print(s, flush=True))
    b.add_json("verify.json", _jsonable([r.to_dict() for r in results]))
    b.passed = all(r.passed for r in results)
    return b


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="branchwalk", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("analyze", "exponents", "simulate", "ensemble", "verify"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="scenario YAML file (or fixture:NAME)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="root seed override")
        sp.add_argument("--threads", type=int, default=1, help="worker processes (0 = all cores)")
        sp.add_argument("--n-override", help="comma-separated n values")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "verify":
            sp.add_argument("--only", help="comma-separated criterion numbers")
    return p


def _resolve_config(args) -> ScenarioConfig:
    if not args.config:
        raise ConfigError("--config is required for this command")
    spec = args.config
    cfg = load_fixture(spec.split(":", 1)[1]) if spec.startswith("fixture:") else load_config(spec)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.n_override:
        try:
            ns = [int(x) for x in args.n_override.split(",") if x.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad --n-override {args.n_override!r}") from exc
        if not ns or any(n < 2 for n in ns):
            raise ConfigError("--n-override values must be integers >= 2")
        cfg.n_values = ns
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "verify":
            only = [int(x) for x in args.only.split(",")] if args.only else None
            bundle = cmd_verify(only, args.out, args.threads, args.seed)
        else:
            cfg = _resolve_config(args)
            if args.command == "analyze":
                bundle = cmd_analyze(cfg, args.out)
            elif args.command == "exponents":
                bundle = cmd_exponents(cfg, args.out)
            elif args.command == "simulate":
                bundle = cmd_simulate(cfg, args.out)
            else:
                bundle = cmd_ensemble(cfg, args.out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotNonIncreasing as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = bundle.finalize()
    print(f"wrote {manifest}")
    if not bundle.passed:
        return EXIT_VERIFY
    if bundle.overflow:
        print(f"{bundle.overflow} run(s) exceeded the event budget", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
