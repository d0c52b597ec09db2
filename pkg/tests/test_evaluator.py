import itertools

import pytest
from hypothesis import given, settings, strategies as st

from cfokit.corpus import cycle, gen_boolean_algebra, gen_random_bounded_degree, gurevich_phi, phi1, SentenceGenerator
from cfokit.evaluator import (
    EvaluationError,
    agree_on_corpus,
    check_invariance_exhaustive,
    check_invariance_sampled,
    evaluate,
    sample_orders,
)
from cfokit.formula import Var, parse_formula
from cfokit.graph import ColouredGraph, OrderedGraph
from cfokit.rng import SplitMix64

A0 = Var("a", 0)
RED_BLUE = ColouredGraph.from_edges(2, [], ["Red", "Blue"], {0: ["Red"], 1: ["Blue"]})
COLOUR_ORDER = parse_formula("exists x[eps,0] . (Red(x[eps,0]) & exists x[a,0] . x[a,0] < x[eps,0])")


def triangle():
    return ColouredGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)], [], {})


def test_triangle_detected_under_every_order_and_start():
    g = triangle()
    for seq in itertools.permutations(range(3)):
        for v in range(3):
            assert evaluate(OrderedGraph(g, seq), {Var("", 0): 0, A0: v}, phi1())


def test_no_triangle_in_cycle_six():
    g = cycle(6)
    for seq in sample_orders(6, 10, 3):
        for v in range(6):
            assert not evaluate(OrderedGraph(g, seq), {Var("", 0): 0, A0: v}, phi1())


def test_empty_domain():
    g = ColouredGraph.from_edges(0, [], [], {})
    assert not evaluate(OrderedGraph.identity(g), {}, parse_formula("exists x[eps,0] . true"))


def test_inconsistent_valuation_rejected():
    g = cycle(6)
    f = parse_formula("E(x[eps,1], x[eps,0])")
    with pytest.raises(EvaluationError):
        evaluate(OrderedGraph.identity(g), {Var("", 0): 0, Var("", 1): 3}, f)


def test_invariant_non_minimal_element():
    f = parse_formula("exists x[eps,0] . exists x[a,0] . x[a,0] < x[eps,0]")
    v = check_invariance_exhaustive(RED_BLUE, f)
    assert v.invariant and v.value is True and v.orders_tested == 2


def test_colour_order_sentence_is_not_invariant():
    v = check_invariance_exhaustive(RED_BLUE, COLOUR_ORDER)
    assert not v.invariant
    assert set(v.witness) == {(0, 1), (1, 0)}


def test_gurevich_on_four_element_algebra_is_invariant_and_true():
    v = check_invariance_exhaustive(gen_boolean_algebra(2), gurevich_phi())
    assert v.invariant and v.value is True and v.orders_tested == 24


def test_gurevich_on_eight_element_algebra_sampled_false():
    v = check_invariance_sampled(gen_boolean_algebra(3), gurevich_phi(), 200, 11)
    assert v.invariant and v.value is False


def test_sampled_disagreement_found():
    assert not check_invariance_sampled(RED_BLUE, COLOUR_ORDER, 50, 5).invariant


def test_exhaustive_guard():
    with pytest.raises(EvaluationError):
        check_invariance_exhaustive(cycle(9), COLOUR_ORDER)


def test_corpus_agreement():
    og = OrderedGraph.identity(RED_BLUE)
    assert agree_on_corpus(og, og, [COLOUR_ORDER]) == (True, None)
    other = OrderedGraph(RED_BLUE, (1, 0))
    assert agree_on_corpus(og, other, [COLOUR_ORDER]) == (False, COLOUR_ORDER)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32))
def test_restricted_guards_give_the_same_answer(n, seed):
    rng = SplitMix64(seed)
    g = gen_random_bounded_degree(n, 3, ["Red"], seed)
    og = OrderedGraph(g, tuple(rng.permutation(n)))
    f = SentenceGenerator(rng, ["Red"]).sentence(rng.randint(1, 3))
    assert evaluate(og, {}, f) == evaluate(og, {}, f, restrict_guards=True)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2**32))
def test_order_preserving_isomorphic_copies_agree(n, seed):
    rng = SplitMix64(seed)
    g = gen_random_bounded_degree(n, 3, ["Red"], seed)
    perm = rng.permutation(n)
    h = g.relabel(perm)
    og = OrderedGraph.identity(g)
    oh = OrderedGraph(h, tuple(perm[v] for v in range(n)))
    fs = [SentenceGenerator(rng, ["Red"]).sentence(rng.randint(1, 3)) for _ in range(5)]
    assert agree_on_corpus(og, oh, fs) == (True, None)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**32))
def test_generated_invariant_sentences_are_invariant(n, seed):
    rng = SplitMix64(seed)
    g = gen_random_bounded_degree(n, 2, ["Red"], seed)
    f = SentenceGenerator(rng, ["Red"], invariant=True).sentence(rng.randint(1, 3))
    assert check_invariance_exhaustive(g, f).invariant
