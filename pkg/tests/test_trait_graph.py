from fractions import Fraction

import pytest
from hypothesis import given

from branchwalk.trait_graph import (
    GrowthClass,
    MutationOverflow,
    TraitGraph,
    check_non_increasing,
    classify,
    mutation_probability,
    to_fraction,
    total_mutation_probability,
    validate,
)

from strategies import general_graphs


def two_trait(label=1, mu=1):
    return TraitGraph.build([1, 1], ["1/2", "1/2"], [(0, 1, label, mu)])


def test_growth_rates_are_exact():
    g = TraitGraph.build(["3/2", 1], ["1/2", "3/4"], [(0, 1, 1, 1)])
    assert g.wild_growth == 1
    assert g.growth(1) == Fraction(1, 4)


@pytest.mark.parametrize("raw,expected", [("1/3", Fraction(1, 3)), ("0.1", Fraction(1, 10)), (0.5, Fraction(1, 2)), (2, 2)])
def test_to_fraction(raw, expected):
    assert to_fraction(raw) == expected


def test_to_fraction_rejects_bool_and_nan():
    with pytest.raises(TypeError):
        to_fraction(True)
    with pytest.raises(ValueError):
        to_fraction(float("nan"))


def test_valid_graph_has_empty_report():
    assert validate(two_trait()).ok


def test_self_loop_and_unreachable_are_reported():
    g = TraitGraph.build([1, 1, 1], [0, 0, 0], [(0, 0, 1, 1), (0, 1, 1, 1)])
    report = validate(g)
    assert "self-loop (0,0)" in report.violations
    assert "unreachable vertex 2" in report.violations


def test_zero_label_names_the_edge():
    report = validate(two_trait(label=0))
    assert report.violations == ["non-positive label on edge (0,1)"]


def test_duplicate_edge_and_bad_wild_type():
    g = TraitGraph.build([1, 1], [1, 0], [(0, 1, 1, 1), (0, 1, 2, 1)])
    v = validate(g).violations
    assert "duplicate edge (0,1)" in v
    assert any("lambda(0)" in m for m in v)


def test_classify():
    g = TraitGraph.build([1, 1, 1, 3], ["1/2", "1/2", "3/4", "1/2"], [(0, 1, 1, 1), (0, 2, 1, 1), (0, 3, 1, 1)])
    c = classify(g)
    assert c[1] is GrowthClass.NEUTRAL
    assert c[2] is GrowthClass.DELETERIOUS
    assert c[3] is GrowthClass.SELECTIVE
    assert not check_non_increasing(g)


def test_mutation_probability_integer_label_is_exact():
    g = two_trait(label=2, mu=3)
    assert mutation_probability(g.edges[0], 10) == Fraction(3, 100)


def test_mutation_probability_fractional_label():
    g = two_trait(label="1/2")
    p = mutation_probability(g.edges[0], 100)
    assert p == Fraction(0.1)  # the double nearest 100**-0.5, converted exactly


def test_total_mutation_overflow():
    g = TraitGraph.build([1, 1, 1], [0, 0, 0], [(0, 1, 1, 2), (0, 2, 1, 2)])
    assert total_mutation_probability(g, 4, 0) == 1
    with pytest.raises(MutationOverflow):
        total_mutation_probability(g, 3, 0)


def test_relabel_requires_fixed_wild_type():
    with pytest.raises(ValueError):
        two_trait().relabel([1, 0])


@given(general_graphs())
def test_generated_graphs_are_valid(g):
    assert validate(g).ok
