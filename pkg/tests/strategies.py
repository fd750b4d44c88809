"""Hypothesis strategies for random trait graphs."""

from fractions import Fraction

from hypothesis import strategies as st

from branchwalk.trait_graph import TraitGraph

labels = st.sampled_from([Fraction(1, 3), Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(2)])
births = st.sampled_from([Fraction(k, 2) for k in range(1, 7)])
deaths = st.sampled_from([Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(1)])


@st.composite
def chains(draw, max_len=8):
    k = draw(st.integers(2, max_len))
    birth = [draw(births) for _ in range(k)]
    death = [draw(deaths) for _ in range(k)]
    if birth[0] <= death[0]:
        birth[0] = death[0] + Fraction(1, 2)
    edges = [(i, i + 1, draw(labels), 1) for i in range(k - 1)]
    return TraitGraph.build(birth, death, edges)


@st.composite
def non_increasing_graphs(draw, max_vertices=7, allow_cycles=True):
    k = draw(st.integers(1, max_vertices))
    lam0 = Fraction(1)
    birth, death = [Fraction(2)], [Fraction(1)]
    for _ in range(1, k):
        lam = draw(st.sampled_from([lam0, lam0, Fraction(3, 4), Fraction(1, 2), Fraction(0), Fraction(-1)]))
        a = max(draw(births), lam + Fraction(1, 2))
        birth.append(a)
        death.append(a - lam)
    edges = {}
    for v in range(1, k):
        u = draw(st.integers(0, v - 1))
        edges[(u, v)] = draw(labels)
    extra = draw(st.lists(st.tuples(st.integers(0, k - 1), st.integers(0, k - 1)), max_size=2 * k))
    for u, v in extra:
        if u != v and v != 0 and (u, v) not in edges and (allow_cycles or u < v):
            edges[(u, v)] = draw(labels)
    mus = {e: draw(st.sampled_from([Fraction(1, 2), Fraction(1), Fraction(2)])) for e in edges}
    return TraitGraph.build(birth, death, [(u, v, l, mus[(u, v)]) for (u, v), l in sorted(edges.items())])


@st.composite
def general_graphs(draw, max_vertices=6):
    """Any rates (selective traits allowed), every vertex reachable from 0."""
    k = draw(st.integers(1, max_vertices))
    birth = [draw(births) for _ in range(k)]
    death = [draw(deaths) for _ in range(k)]
    if birth[0] <= death[0]:
        birth[0] = death[0] + Fraction(1, 2)
    edges = {}
    for v in range(1, k):
        edges[(draw(st.integers(0, v - 1)), v)] = draw(labels)
    for u, v in draw(st.lists(st.tuples(st.integers(0, k - 1), st.integers(0, k - 1)), max_size=2 * k)):
        if u != v and v != 0 and (u, v) not in edges:
            edges[(u, v)] = draw(labels)
    return TraitGraph.build(birth, death, [(u, v, l, 1) for (u, v), l in sorted(edges.items())])


@st.composite
def relabelings(draw, k):
    rest = draw(st.permutations(list(range(1, k))))
    return [0] + list(rest)
