"""One test per acceptance criterion; each prints a ``criterion`` line."""

import itertools
import math
import statistics
import time

from cfokit.cli import pipeline_main_theorem
from cfokit.contexts import clear_caches, context, outer_context, project
from cfokit.corpus import (
    SentenceGenerator,
    cycle,
    gen_boolean_algebra,
    gen_cfo_sentences,
    gen_random_bounded_degree,
    gurevich_phi,
)
from cfokit.evaluator import check_invariance_exhaustive, evaluate, evaluate_fo, sample_orders
from cfokit.formula import (
    And,
    Colour,
    Compare,
    Edge,
    Exists,
    FoVar,
    Not,
    Or,
    Var,
    fo_to_cfo_bounded_diameter,
    parse_formula,
    quantifier_rank,
    validate,
)
from cfokit.fpt import fpt_check
from cfokit.game import solve_game
from cfokit.graph import OrderedGraph, diameter
from cfokit.order_builder import BuildError, build_kf_order, plan_kf_order
from cfokit.rng import SplitMix64


def verdict(report, number, ok, detail):
    report(f"criterion {number} {'pass' if ok else 'fail'} {detail}")
    assert ok, detail


def test_criterion_1_qeven(report):
    phi = gurevich_phi()
    bad = []
    for s in range(5):
        g = gen_boolean_algebra(s)
        want = s % 2 == 0
        orders = [tuple(range(g.n))] + sample_orders(g.n, 100, 1000 + s)
        values = {evaluate(OrderedGraph(g, seq), {}, phi, restrict_guards=True) for seq in orders}
        if values != {want} or fpt_check(g, phi) != want:
            bad.append(s)
        if s <= 2:
            v = check_invariance_exhaustive(g, phi)
            if not (v.invariant and v.value == want and v.orders_tested == math.factorial(g.n)):
                bad.append(f"exhaustive {s}")
    verdict(report, 1, not bad, f"sizes 0..4 with 101 orders each, exhaustive up to 2, failing {bad}")


def test_criterion_2_fpt_matches_naive(report):
    rng = SplitMix64(2)
    mismatches = 0
    for t in range(200):
        g = gen_random_bounded_degree(rng.randint(1, 40), rng.randint(0, 3), ["Red", "Blue"], rng.next_u64())
        f = SentenceGenerator(rng.fork(), ["Red", "Blue"], invariant=True).sentence(rng.randint(1, 3))
        got = fpt_check(g, f)
        orders = [tuple(range(g.n))] + sample_orders(g.n, 20, t)
        if any(evaluate(OrderedGraph(g, seq), {}, f, restrict_guards=True) != got for seq in orders):
            mismatches += 1
    verdict(report, 2, mismatches == 0, f"200 pairs under id and 20 sampled orders, mismatches {mismatches}")


SCALING_SENTENCE = ("exists x[eps,0] . ((exists x[a,0] . (x[a,0] < x[eps,0] | x[a,0] > x[eps,0]))"
                    " & exists x[eps,1] adj x[eps,0] . E(x[eps,1],x[eps,0]))")


def test_criterion_3_scaling(report):
    f = parse_formula(SCALING_SENTENCE)
    assert quantifier_rank(f) == 2
    sizes = [1000, 2000, 4000, 8000]
    times = []
    for n in sizes:
        g = cycle(n)
        best = math.inf
        for _ in range(3):
            clear_caches()
            t0 = time.perf_counter()
            assert fpt_check(g, f)
            best = min(best, time.perf_counter() - t0)
        times.append(best)
    fit = statistics.linear_regression([math.log(n) for n in sizes], [math.log(t) for t in times])
    ms = ",".join(f"{t * 1000:.1f}" for t in times)
    verdict(report, 3, 0.8 <= fit.slope <= 2.3, f"exponent {fit.slope:.2f} times_ms {ms}")


def _instance(rng, idx):
    k = rng.randint(1, 2)
    n_a = rng.randint(1, 5)
    ga = gen_random_bounded_degree(n_a, 2, ["Red"], rng.next_u64())
    oa = OrderedGraph(ga, tuple(rng.permutation(n_a)))
    if idx % 4 == 0:
        perm = rng.permutation(n_a)
        gb = ga.relabel(perm)
        ob = OrderedGraph(gb, tuple(perm[v] for v in oa.seq))
    else:
        n_b = rng.randint(1, 5)
        gb = gen_random_bounded_degree(n_b, 2, ["Red"], rng.next_u64())
        ob = OrderedGraph(gb, tuple(rng.permutation(n_b)))
    return oa, ob, k


def test_criterion_4_cef_soundness(report):
    rng = SplitMix64(4)
    corpora = {k: gen_cfo_sentences(k, ["Red"], 500, 40 + k) for k in (1, 2)}
    violations = 0
    wins = {"Duplicator": 0, "Spoiler": 0}
    for idx in range(100):
        oa, ob, k = _instance(rng, idx)
        winner = solve_game(oa, ob, k).winner
        wins[winner] += 1
        disagree = any(evaluate(oa, {}, f, True) != evaluate(ob, {}, f, True) for f in corpora[k])
        if (winner == "Duplicator" and disagree) or (disagree and winner != "Spoiler"):
            violations += 1
    detail = f"instances 100 duplicator {wins['Duplicator']} spoiler {wins['Spoiler']} violations {violations}"
    verdict(report, 4, violations == 0 and min(wins.values()) > 0, detail)


def test_criterion_5_projection(report):
    rng = SplitMix64(5)
    triples = failures = 0
    while triples < 10_000:
        n = rng.randint(1, 12)
        g = gen_random_bounded_degree(n, rng.randint(0, 3), ["Red"], rng.next_u64())
        og = OrderedGraph(g, tuple(rng.permutation(n)))
        for v in range(n):
            k = rng.randint(1, 2)
            outer = rng.below(2) == 1
            make = outer_context if outer else context
            if project(make(og, v, k)) is not make(og, v, k - 1):
                failures += 1
            triples += 1
    verdict(report, 5, failures == 0, f"triples {triples} failures {failures}")


def test_criterion_6_order_construction(report):
    n0 = plan_kf_order(cycle(2000), 1).fts.t
    failures = []
    borders = {}
    for n in range(n0, 10 * n0 + 1):
        try:
            o, rep = build_kf_order(cycle(n), 1)
        except BuildError as e:
            failures.append(f"{n}:{e.kind}")
            continue
        if not rep.check.ok:
            failures.append(f"{n}:check")
        borders[n] = len(o.border())
    try:
        build_kf_order(cycle(n0 - 1), 1)
        below = "builds"
    except BuildError:
        below = "richness"
    constant = borders.get(n0) is not None and borders.get(n0) == borders.get(10 * n0)
    detail = (f"N0 {n0} sizes {n0}..{10 * n0} failures {failures} border {borders.get(n0)} "
              f"border_at_10N0 {borders.get(10 * n0)} below_N0 {below}")
    verdict(report, 6, not failures and constant, detail)


def test_criterion_7_pipeline(report):
    lines = []
    ok = True
    for n in (20, 200):
        rep = pipeline_main_theorem(cycle(n), cycle(n + 1), 1, corpus_size=200, seed=7)
        ok &= rep.ok
        strategy = next(d for name, _, d in rep.stages if name == "strategy") if len(rep.stages) > 5 else "missing"
        lines.append(f"C{n}/C{n + 1} {'pass' if rep.ok else 'fail'} ({strategy})")
    informational = pipeline_main_theorem(cycle(100), cycle(101), 2, 50, 7, "realised-seeded")
    report("criterion 7 info k=2 realised-seeded C100/C101: " + " | ".join(informational.lines()))
    verdict(report, 7, ok, "; ".join(lines))


def _violating(rng, k):
    base = SentenceGenerator(rng, ["Red"]).sentence(k)
    word = rng.choice(["", "a"])
    bound = quantifier_rank(base) - len(word) - 1
    bad = Var(word, max(bound, 0) + rng.randint(1, 3))
    atom = rng.choice([Compare(bad, "=", bad), Colour("Red", bad), Edge(bad, bad)])
    return And(base, Exists(Var("", 0), atom)) if rng.below(2) else Or(Exists(Var("", 0), Not(atom)), base)


def test_criterion_8_namespace(report):
    rng = SplitMix64(8)
    conforming = [SentenceGenerator(rng, ["Red"]).sentence(rng.randint(1, 4)) for _ in range(100)]
    violating = [_violating(rng, rng.randint(1, 4)) for _ in range(100)]
    accepted = sum(validate(f).ok for f in conforming)
    rejected = sum("namespace" in validate(f).rules() for f in violating)
    verdict(report, 8, accepted == 100 and rejected == 100, f"conforming_accepted {accepted} violating_rejected {rejected}")


def _random_fo(rng, depth, bound):
    if depth == 0 or (bound and rng.below(3) == 0):
        if not bound:
            return Exists(FoVar("v0"), Colour("Red", FoVar("v0")))
        x, y = rng.choice(bound), rng.choice(bound)
        return rng.choice([Edge(x, y), Colour("Red", x), Compare(x, "=", y)])
    roll = rng.below(4)
    if roll == 0 and bound:
        return Not(_random_fo(rng, depth, bound))
    if roll == 1 and bound:
        return rng.choice([And, Or])(_random_fo(rng, depth - 1, bound), _random_fo(rng, depth, bound))
    v = FoVar(f"v{len(bound)}")
    body = _random_fo(rng, depth - 1, bound + [v])
    return Exists(v, body) if rng.below(2) else Not(Exists(v, Not(body)))


def test_criterion_9_bounded_diameter(report):
    rng = SplitMix64(9)
    sentences = []
    while len(sentences) < 20:
        f = _random_fo(rng, 2, [])
        if quantifier_rank(f) <= 2:
            sentences.append(f)
    translated = [fo_to_cfo_bounded_diameter(f, 3) for f in sentences]
    graphs = []
    while len(graphs) < 50:
        g = gen_random_bounded_degree(rng.randint(1, 6), rng.randint(1, 5), ["Red"], rng.next_u64())
        if diameter(g) <= 3:
            graphs.append(g)
    mismatches = checks = 0
    for g in graphs:
        for seq in itertools.permutations(range(g.n)):
            og = OrderedGraph(g, seq)
            for fo, cfo in zip(sentences, translated):
                checks += 1
                if evaluate_fo(og, fo) != evaluate(og, {}, cfo, restrict_guards=True, check=False):
                    mismatches += 1
    assert all(validate(c).ok for c in translated)
    verdict(report, 9, mismatches == 0, f"graphs 50 sentences 20 checks {checks} mismatches {mismatches}")
