import csv
import math

import numpy as np
import pytest
from scipy import stats as sps

from branchwalk.asymptotic_predictor import WLaw, sample_W
from branchwalk.ensemble_harness import (
    CSV_FIELDS,
    DegenerateSample,
    EnsembleConfig,
    binomial_band,
    compare_size_limits,
    compare_exponent_limits,
    ks_test,
    regression_slope,
    run_ensemble,
    trend_decreasing,
    write_raw_csv,
)
from branchwalk.exponent_limits import NotNonIncreasing, run_exponent_algorithm
from branchwalk.trait_graph import TraitGraph


def chain():
    return TraitGraph.build([1, 1], ["1/2", "1/2"], [(0, 1, 1, 1)])


def small_config(**kw):
    base = dict(
        graph=chain(),
        n_values=[100, 1000],
        replicates=30,
        det_grid=[(0.2, 0.0), (1.2, 0.0)],
        random_grid=[("eta", 1.0, 0.0)],
        levels=[1.0],
        root_seed=11,
    )
    base.update(kw)
    return EnsembleConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        small_config(replicates=1).validate()
    with pytest.raises(ValueError):
        small_config(n_values=[1]).validate()
    with pytest.raises(ValueError):
        small_config(det_grid=[], random_grid=[], levels=[]).validate()


def test_reproducible_and_schedule_independent():
    a = run_ensemble(small_config())
    b = run_ensemble(small_config())
    c = run_ensemble(small_config(threads=2, chunk_size=4))
    ra = [vars(r) for r in a.records]
    assert ra == [vars(r) for r in b.records] == [vars(r) for r in c.records]
    assert a.summary() == c.summary()


def test_counts_reconcile_and_conditioning_identity():
    st = run_ensemble(small_config())
    for n in (100, 1000):
        s = st.survival(n)
        assert s["survived"] + s["extinct"] == s["replicates"] == 30
        allv = st.ratios(n, "det", 1, 1.2, 0.0, conditioned=False)
        cond = st.ratios(n, "det", 1, 1.2, 0.0, conditioned=True)
        # extinct replicates contribute zeros, so the identity is exact over the sample
        frac = cond.size / allv.size
        assert allv.mean() == pytest.approx(frac * cond.mean(), rel=1e-12)


def test_csv_schema(tmp_path):
    st = run_ensemble(small_config(n_values=[100], random_grid=[], levels=[]))
    p = tmp_path / "raw.csv"
    write_raw_csv(st, p)
    rows = list(csv.DictReader(open(p)))
    assert list(rows[0].keys()) == CSV_FIELDS
    assert len(rows) == 30 * 2 * 2  # replicates x grid points x traits
    r = rows[0]
    if r["count"]:
        assert float(r["ratio"]) == pytest.approx(int(r["count"]) / float(r["normalizer"]))


def test_survival_fraction_band():
    g = TraitGraph.build([1], ["1/2"], [])
    cfg = EnsembleConfig(g, [100], 4000, times=[6.0], conditioning="all", root_seed=2)
    st = run_ensemble(cfg)
    alive = np.mean(st.counts(100, "abs", 0, 6.0, 0.0) > 0)
    # P(alive at 6) = lambda / (alpha - beta e^{-lambda 6})
    p6 = 0.5 / (1 - 0.5 * math.exp(-3.0))
    lo, hi = binomial_band(4000, p6, 0.99)
    assert lo <= alive <= hi


def test_ks_self_test_and_power():
    rng = np.random.default_rng(0)
    g = chain()
    w = sample_W(rng, g, 10**5)
    _, p = ks_test(w, WLaw.from_graph(g))
    assert p > 0.01
    wrong = rng.exponential(1.0, 10**4)  # rate 1 instead of 1/2
    _, p = ks_test(wrong, WLaw.from_graph(g))
    assert p < 1e-6
    _, p = ks_test(rng.exponential(2.0, 500), sps.expon(scale=2.0))
    assert p > 1e-4
    with pytest.raises(DegenerateSample):
        ks_test(np.ones(50), sps.expon())
    with pytest.raises(DegenerateSample):
        ks_test([1.0, 2.0], sps.expon())


def test_trend_helper():
    assert trend_decreasing([3, 2, 1], [0.1] * 3)
    assert trend_decreasing([3, 3.1, 1], [0.1] * 3)  # one rise within 2 SE
    assert not trend_decreasing([3, 3.1, 3.2], [0.1] * 3)
    assert not trend_decreasing([3, 4, 1], [0.1] * 3)
    assert not trend_decreasing([3, float("nan")], [0.1] * 2)
    assert regression_slope([0, 1, 2], [1, 3, 5]) == pytest.approx(2.0)


def test_compare_size_limits_report_shape():
    st = run_ensemble(small_config())
    rep = compare_size_limits(st)
    regimes = {(e["n"], e["t"], e["scale"]): e["regime"] for e in rep.entries}
    assert regimes[(100, 0.2, "det")] == 1
    assert regimes[(100, 1.2, "det")] == 3
    e = next(e for e in rep.entries if e["regime"] == 3 and e["scale"] == "det")
    assert e["prediction"] == pytest.approx(2.0 * 4 * 0.2)
    early = next(e for e in rep.entries if e["regime"] == 1)
    assert 0.0 <= early["any_mutant_fraction"] <= 1.0
    assert any(tr["scale"] == "eta" for tr in rep.trends)
    late = [x for x in rep.entries if "rel_error" in x and x["n"] == 100 and x["scale"] == "det"]
    sup = next(x for x in rep.sup if x["n"] == 100 and x["scale"] == "det")
    assert sup["sup_rel_error"] == max(x["rel_error"] for x in late)


def test_compare_size_limits_gate():
    g = TraitGraph.build([1, 3], ["1/2", "1/2"], [(0, 1, 1, 1)])
    st = run_ensemble(small_config(graph=g, n_values=[100], det_grid=[(0.5, 0.0)], random_grid=[], levels=[]))
    with pytest.raises(NotNonIncreasing):
        compare_size_limits(st)


def test_compare_exponent_limits_extinct_zero():
    g = TraitGraph.build(["3/2", "5/2"], ["1/2", "1/2"], [(0, 1, 1, 1)])
    cfg = EnsembleConfig(g, [100], 40, det_grid=[(t, 0.0) for t in (1.0, 1.1, 1.2, 1.3)], root_seed=3)
    st = run_ensemble(cfg)
    rep = compare_exponent_limits(st, run_exponent_algorithm(g), window=(1.1, 1.3), slope_tolerance=1.0)
    e1 = next(e for e in rep.entries if e["v"] == 1)
    assert e1["extinct_zero"]
    assert e1["limit_slope"] == pytest.approx(2.0)
    assert e1["survivors"] == sum(r.usable for r in st.records)
