from fractions import Fraction

import pytest
from hypothesis import given

from branchwalk.exponent_limits import (
    NonPositiveWildGrowth,
    NotNonIncreasing,
    PiecewiseLinear,
    corollary_mono_directional,
    corollary_non_increasing,
    run_exponent_algorithm,
)
from branchwalk.trait_graph import TraitGraph

from strategies import chains, general_graphs, non_increasing_graphs


def walk_max_oracle(g: TraitGraph, v: int, t: Fraction, max_len: int = 8) -> Fraction:
    """x_v(t) as the best exponent over walks 0 -> v.

    Along a fixed walk each trait starts once its predecessor's exponent
    reaches lambda(0) * label and then grows at the larger of its own rate
    and the inherited slope. Enumerates all walks of bounded length.
    """
    lam0 = g.wild_growth
    best = Fraction(0)
    stack = [((0,), PiecewiseLinear.positive_part(lam0, 0))]
    while stack:
        walk, x = stack.pop()
        if walk[-1] == v:
            best = max(best, x(t))
        if len(walk) > max_len:
            continue
        for e in g.out_edges[walk[-1]]:
            # first time x reaches lam0 * label, from the knots of x
            target = lam0 * e.label
            start = None
            for i, k in enumerate(x.knots):
                end_val = x.values[i + 1] if i + 1 < len(x.knots) else None
                if x.values[i] >= target:
                    start = k
                    break
                if x.slopes[i] > 0 and (end_val is None or end_val >= target):
                    start = k + (target - x.values[i]) / x.slopes[i]
                    break
            if start is None or start > t:
                continue
            # the child grows from 0 at ``start`` with the larger of its own rate
            # and the parent's slope, following later parent slope changes
            knots = [Fraction(0), start]
            vals = [Fraction(0), Fraction(0)]
            slopes = [Fraction(0), max(g.growth(e.dst), x.slopes[_idx(x, start)])]
            for i, k in enumerate(x.knots):
                if k > start:
                    knots.append(k)
                    vals.append(vals[-1] + slopes[-1] * (k - knots[-2]))
                    slopes.append(max(g.growth(e.dst), x.slopes[i]))
            stack.append((walk + (e.dst,), PiecewiseLinear(tuple(knots), tuple(vals), tuple(slopes))))
    return best


def _idx(x, t):
    return max(i for i, k in enumerate(x.knots) if k <= t)


def test_positive_part_and_canonical():
    f = PiecewiseLinear.positive_part(2, 1)
    assert f(Fraction(0)) == 0 and f(Fraction(3)) == 4
    assert f.breakpoints() == (1,)
    assert f.is_continuous() and f.is_non_decreasing()


def test_golden_matches_non_increasing_closed_form():
    half = Fraction(1, 2)
    death = [half] * 8
    death[3] = Fraction(3, 4)
    g = TraitGraph.build([1] * 8, death, [
        (0, 1, 1, 1), (1, 2, 2, 1), (2, 3, 1, 1), (0, 4, 2, 1), (4, 3, 2, 1),
        (0, 5, 2, 1), (5, 6, 2, 1), (6, 7, 2, 1), (7, 3, 1, 1)])
    res = run_exponent_algorithm(g)
    cor = corollary_non_increasing(g)
    for v in g.vertices:
        assert res[v] == cor[v].canonical()
    assert res[3] == PiecewiseLinear.positive_part(half, 4).canonical()


def test_selective_back_edge_takeover():
    g = TraitGraph.build([1, "1/2", 2], [0, 0, 0], [(0, 1, 1, 1), (1, 2, 1, 1), (2, 1, 1, 1)])
    res = run_exponent_algorithm(g)
    assert res[1].knots == (0, 1, 4)
    assert res[1].slopes == (0, 1, 2)
    assert res[2] == PiecewiseLinear.positive_part(2, 2).canonical()
    kinds = [k for e in res.events for k in e.kinds]
    assert "SlopeTakeover" in kinds
    take = next(e for e in res.events if e.takeovers)
    assert take.time == 4 and take.takeovers == {2: (1,)}


def test_mono_chain_with_selective_middle():
    lams = [Fraction(1), Fraction(1, 2), Fraction(3, 2), Fraction(1)]
    labels = [Fraction(1, 2), Fraction(1), Fraction(3, 4)]
    cor = corollary_mono_directional(lams, labels)
    assert cor[3] == PiecewiseLinear.positive_part(Fraction(3, 2), 2)


def test_errors():
    with pytest.raises(NonPositiveWildGrowth):
        run_exponent_algorithm(TraitGraph.build([1], [1], []))
    with pytest.raises(NotNonIncreasing):
        corollary_non_increasing(TraitGraph.build([1, 3], [0, 0], [(0, 1, 1, 1)]))
    with pytest.raises(ValueError):
        corollary_mono_directional([1, 1], [])


@given(chains())
def test_chain_equals_mono_directional_formula(g):
    res = run_exponent_algorithm(g)
    cor = corollary_mono_directional([g.growth(v) for v in g.vertices],
                                     [g.label(i, i + 1) for i in range(g.n_traits - 1)])
    for v in g.vertices:
        assert res[v] == cor[v].canonical()


@given(non_increasing_graphs())
def test_non_increasing_equals_closed_form(g):
    res = run_exponent_algorithm(g)
    cor = corollary_non_increasing(g)
    for v in g.vertices:
        assert res[v] == cor[v].canonical()


@given(general_graphs(max_vertices=5))
def test_exponents_continuous_non_decreasing_with_increasing_slopes(g):
    res = run_exponent_algorithm(g)
    for v in g.vertices:
        x = res[v]
        assert x.is_continuous() and x.is_non_decreasing()
        assert list(x.slopes) == sorted(x.slopes)
        assert x(Fraction(0)) == 0
    assert list(res.breakpoints) == sorted(res.breakpoints)


@given(general_graphs(max_vertices=4))
def test_exponent_equals_best_walk(g):
    res = run_exponent_algorithm(g)
    horizon = max(res.breakpoints) + 2
    for v in g.vertices:
        for k in range(0, 9):
            t = horizon * k / 8
            assert res[v](t) == walk_max_oracle(g, v, t)
