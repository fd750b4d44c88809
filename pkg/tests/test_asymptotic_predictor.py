import math
from fractions import Fraction

import numpy as np
import pytest

from branchwalk.asymptotic_predictor import (
    AsymptoticPredictor,
    ExtinctLineage,
    ScalingParams,
    WLaw,
    default_phi,
    sample_W,
)
from branchwalk.exponent_limits import NotNonIncreasing
from branchwalk.trait_graph import TraitGraph


def chain():
    return TraitGraph.build([1, 1], ["1/2", "1/2"], [(0, 1, 1, 1)])


def test_scaling_defaults():
    sc = ScalingParams.from_graph(chain(), 10**4)
    ln = math.log(10**4)
    assert sc.theta_max == 1
    assert sc.phi_n == pytest.approx(math.log(ln))
    assert sc.h_n == pytest.approx(ln / (2 * math.log(ln)))
    assert sc.time_scale(1) == pytest.approx(ln / 0.5)
    assert sc.mu_n[(0, 1)] == Fraction(1, 10**4)


def test_levels_are_ceilings():
    sc = ScalingParams.from_graph(chain(), 100)
    assert sc.level(0) == 1
    assert sc.level(1) == 100
    assert sc.level(0.5) == 10
    assert sc.level(0.25) == 4  # 100**0.25 = 3.16...


def test_scaling_rejects_small_n():
    with pytest.raises(ValueError):
        ScalingParams.from_graph(chain(), 1)


def test_normalizer_regimes():
    p = AsymptoticPredictor.for_n(chain(), 100)
    # regime 3 example: n^(t - t(v)) log(n)^theta = 10 * log(100)
    assert p.normalizer(1, 1.5, 0) == pytest.approx(46.0517, rel=1e-5)
    assert p.regime(1, 1.0) == 3
    t2 = 1.0 - 0.5 / p.scaling.h_n
    assert p.regime(1, t2) == 2
    assert p.normalizer(1, t2) == pytest.approx(p.scaling.psi_n)
    assert p.regime(1, 0.0) == 1 and p.normalizer(1, 0.0) == 1.0
    assert p.normalizer(1, 1.5, 2.0) == pytest.approx(46.0517 * math.e, rel=1e-5)


def test_predictions():
    p = AsymptoticPredictor.for_n(chain(), 1000)
    # w_1(t) = 2 alpha mu / lambda * (t - 1) = 4 (t - 1)
    assert p.weight(1, 1.5) == pytest.approx(2.0)
    assert p.predict_random_scale(1, 1.5, 0) == pytest.approx(2.0 * p.normalizer(1, 1.5, 0))
    assert p.predict_deterministic(1, 1.5, 0, 3.0) == pytest.approx(6.0 * p.normalizer(1, 1.5, 0))
    assert p.predict_deterministic(1, 0.5, 0, 3.0) == 0.0
    assert p.survival_probability == pytest.approx(0.5)


def test_predictions_need_non_increasing():
    g = TraitGraph.build([1, 3], ["1/2", "1/2"], [(0, 1, 1, 1)])
    p = AsymptoticPredictor.for_n(g, 100)
    with pytest.raises(NotNonIncreasing):
        p.predict_random_scale(1, 2.0, 0)


def test_stopping_time_prediction():
    p = AsymptoticPredictor.for_n(chain(), 100)
    assert p.predicted_stopping_time(1, 1.0) == pytest.approx(p.scaling.time_scale(1))
    with pytest.raises(ExtinctLineage):
        p.predicted_stopping_time(1, 0.0)


def test_w_law():
    law = WLaw(1.0, 0.5)
    assert law.atom_at_zero == 0.5 and law.rate == 0.5 and law.conditional_mean == 2.0
    assert law.cdf(-1) == 0 and law.cdf(0) == pytest.approx(0.5)
    assert law.cdf(1e9) == pytest.approx(1.0)


def test_sample_w_moments():
    rng = np.random.default_rng(0)
    w = sample_W(rng, chain(), 200_000)
    assert np.mean(w == 0) == pytest.approx(0.5, abs=0.01)
    assert w[w > 0].mean() == pytest.approx(2.0, rel=0.02)


def test_upper_bound_window():
    p = AsymptoticPredictor.for_n(chain(), 10**4)
    win = p.upper_bound_regime(1)
    assert win["end"] == 1.0 and win["start"] < 1.0
    assert default_phi(10**4) == pytest.approx(math.log(math.log(10**4)))
