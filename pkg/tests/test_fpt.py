import pytest
from hypothesis import given, settings, strategies as st

from cfokit.contexts import outer_context
from cfokit.corpus import SentenceGenerator, gen_boolean_algebra, gen_random_bounded_degree, gurevich_phi
from cfokit.evaluator import EvaluationError, evaluate
from cfokit.formula import And, Compare, Edge, Exists, Not, TrueF, Var, parse_formula
from cfokit.fpt import ClusterFrame, InvarianceViolation, decompose_top, fpt_check, fpt_report, mc, root_frame
from cfokit.graph import ColouredGraph, OrderedGraph
from cfokit.rng import SplitMix64

ROOT = Var("", 0)
RED_BLUE = ColouredGraph.from_edges(2, [], ["Red", "Blue"], {0: ["Red"], 1: ["Blue"]})


def test_decomposition_shapes():
    psi = Exists(ROOT, TrueF())
    assert decompose_top(psi).op == "leaf"
    tree = decompose_top(And(Not(psi), Exists(ROOT, Edge(ROOT, ROOT))))
    assert tree.op == "and" and tree.children[0].op == "not" and len(tree.leaves()) == 2
    assert decompose_top(TrueF()).op == "const"
    with pytest.raises(ValueError):
        decompose_top(Exists(Var("", 1), TrueF(), ROOT))


def test_edge_atom_read_from_outer_context():
    g = ColouredGraph.from_edges(3, [(0, 1), (1, 2)], [], {})
    og = OrderedGraph.identity(g)
    o = outer_context(og, 1, 1)
    frame = root_frame(2, o)
    ext = frame.replace(ClusterFrame("", o, (o.centre, 0)))
    assert mc(1, ext, Edge(Var("", 1), ROOT))
    ext_self = frame.replace(ClusterFrame("", o, (o.centre, o.centre)))
    assert not mc(1, ext_self, Edge(Var("", 1), ROOT))


def test_child_in_leftmost_interval_precedes_every_ball_element():
    # Three vertices in a path, root at the middle; a child placed in the
    # leftmost outer interval is smaller than any constant of the root cluster.
    g = ColouredGraph.from_edges(4, [(1, 2), (2, 3)], [], {})
    og = OrderedGraph.identity(g)
    o = outer_context(og, 2, 2)
    for r in range(o.size):
        fr = root_frame(3, o).replace(ClusterFrame("", o, (r,), frozenset({("a", "I", 0)})))
        child = outer_context(og, 0, 1)
        fr = fr.replace(ClusterFrame("a", child, (child.centre,)))
        assert mc(0, fr, Compare(Var("a", 0), "<", ROOT))


def test_rank_overflow_rejected():
    o = outer_context(OrderedGraph.identity(RED_BLUE), 0, 0)
    with pytest.raises(EvaluationError):
        mc(1, root_frame(1, o), Exists(Var("a", 0), TrueF()))


def test_gurevich_values():
    assert fpt_check(gen_boolean_algebra(4), gurevich_phi())
    assert not fpt_check(gen_boolean_algebra(3), gurevich_phi())


def test_paranoid_mode_catches_non_invariant_sentence():
    f = parse_formula("exists x[eps,0] . (Red(x[eps,0]) & exists x[a,0] . x[a,0] < x[eps,0])")
    values = set()
    for seed in range(20):
        try:
            values.add(fpt_report(RED_BLUE, f, paranoid=True, seed=seed).value)
        except InvarianceViolation:
            return
    pytest.fail(f"no disagreement over 20 seeds, values {values}")


def test_timings_reported():
    rep = fpt_report(gen_boolean_algebra(2), gurevich_phi())
    assert set(rep.timings_ms) == {"contexts", "mc"} and rep.leaves == 1


@settings(max_examples=120, deadline=None)
@given(st.integers(1, 20), st.integers(0, 3), st.integers(1, 3), st.integers(0, 2**32))
def test_invariant_sentences_agree_with_naive_evaluation(n, d, k, seed):
    rng = SplitMix64(seed)
    g = gen_random_bounded_degree(n, d, ["Red"], seed)
    f = SentenceGenerator(rng, ["Red"], invariant=True).sentence(k)
    want = evaluate(OrderedGraph.identity(g), {}, f, restrict_guards=True)
    assert fpt_check(g, f) == want
    other = OrderedGraph(g, tuple(rng.permutation(n)))
    assert evaluate(other, {}, f, restrict_guards=True) == want


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 15), st.integers(0, 3), st.integers(1, 3), st.integers(0, 2**32))
def test_any_sentence_matches_naive_under_id_order(n, d, k, seed):
    rng = SplitMix64(seed)
    g = gen_random_bounded_degree(n, d, ["Red"], seed)
    f = SentenceGenerator(rng, ["Red"]).sentence(k)
    assert fpt_check(g, f) == evaluate(OrderedGraph.identity(g), {}, f, restrict_guards=True)
