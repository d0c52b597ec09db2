"""Deterministic graph generators, named formulas and random sentence corpora."""

from __future__ import annotations

from typing import Sequence

from .formula import (
    And,
    Colour,
    Compare,
    Edge,
    Exists,
    FalseF,
    FoVar,
    Formula,
    Implies,
    Not,
    Or,
    TrueF,
    Var,
    conj,
    disj,
    exists_adj,
    forall,
    iff,
    next_index,
    quantifier_rank,
    relativize_to_root,
)
from .graph import ColouredGraph, GraphError
from .rng import SplitMix64

# ------------------------------------------------------------------ graphs


def cycle(n: int, colours: Sequence[str] = (), colour_of: dict | None = None) -> ColouredGraph:
    if n < 3:
        raise GraphError("a cycle needs at least 3 vertices")
    return ColouredGraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)], colours, colour_of)


def path(n: int, colours: Sequence[str] = (), colour_of: dict | None = None) -> ColouredGraph:
    return ColouredGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)], colours, colour_of)


MAX_SET_SIZE = 4


def gen_boolean_algebra(set_size: int, parity_colour: bool = False) -> ColouredGraph:
    """Subsets of ``{0..set_size-1}`` as bitmask vertices, edges for strict inclusion.

    ``parity_colour`` adds an ``odd`` colour on odd-size subsets.
    """
    if not 0 <= set_size <= MAX_SET_SIZE:
        raise GraphError(f"set size must be in 0..{MAX_SET_SIZE}")
    n = 1 << set_size
    edges = [(u, v) for u in range(n) for v in range(n) if u != v and u & v == u]
    if parity_colour:
        odd = {v: ["odd"] for v in range(n) if bin(v).count("1") % 2}
        return ColouredGraph.from_edges(n, edges, ["odd"], odd)
    return ColouredGraph.from_edges(n, edges)


def gen_random_bounded_degree(n: int, d: int, colours: Sequence[str] = (), seed: int = 0) -> ColouredGraph:
    """Random graph with maximum degree at most ``d``; one uniform colour per vertex."""
    if n < 0 or d < 0:
        raise GraphError(f"infeasible parameters n={n} d={d}")
    rng = SplitMix64(seed)
    deg = [0] * n
    edges: set[tuple[int, int]] = set()
    if n >= 2 and d > 0:
        for _ in range(n * d):
            u, v = rng.below(n), rng.below(n)
            if u == v or deg[u] >= d or deg[v] >= d:
                continue
            e = (min(u, v), max(u, v))
            if e in edges:
                continue
            edges.add(e)
            deg[u] += 1
            deg[v] += 1
    colour_of = {}
    if colours:
        colour_of = {v: [colours[rng.below(len(colours))]] for v in range(n)}
    g = ColouredGraph.from_edges(n, sorted(edges), colours, colour_of)
    assert g.max_degree <= d
    return g


# ----------------------------------------------------------- named formulas

ROOT = Var("", 0)


def _v(word: str, i: int) -> Var:
    return Var(word, i)


def phi1(letter: str = "a") -> Formula:
    """A triangle through ``x[letter,0]`` inside its cluster."""
    a0, a1, a2 = _v(letter, 0), _v(letter, 1), _v(letter, 2)
    return exists_adj(a1, a0, exists_adj(a2, a1, Edge(a2, a0)))


def phi2(letter: str = "a") -> Formula:
    """A neighbour of the root such that the order interval between them holds a triangle vertex.

    The triangle test sits inside the scope of the child-cluster variable
    that it talks about.
    """
    e1, a0 = _v("", 1), _v(letter, 0)
    between = Or(
        And(Compare(ROOT, "<", a0), Compare(a0, "<", e1)),
        And(Compare(e1, "<", a0), Compare(a0, "<", ROOT)),
    )
    return exists_adj(e1, ROOT, Exists(a0, And(between, phi1(letter))))


def phi2_literal(letter: str = "a") -> Formula:
    """The same shape with the triangle test outside the child-cluster scope."""
    e1, a0 = _v("", 1), _v(letter, 0)
    between = Or(
        And(Compare(ROOT, "<", a0), Compare(a0, "<", e1)),
        And(Compare(e1, "<", a0), Compare(a0, "<", ROOT)),
    )
    return exists_adj(e1, ROOT, And(Exists(a0, between), phi1(letter)))


def phi1_closure() -> Formula:
    return Exists(ROOT, Exists(_v("a", 0), phi1("a")))


def phi2_closure() -> Formula:
    return Exists(ROOT, phi2("a"))


# Gurevich sentence ------------------------------------------------------


def _psi() -> Formula:
    """The root is adjacent to every other vertex of a connected structure.

    Three parts: every vertex within distance two of the root is its
    neighbour; every component has diameter at most two; the least vertex
    of each component is the least vertex overall.
    """
    e1, e2 = _v("", 1), _v("", 2)
    central = forall(e1, forall(e2, Or(Compare(e2, "=", ROOT), Edge(e2, ROOT)), guard=e1), guard=ROOT)

    a0, a1, a2, a3, a4 = (_v("a", i) for i in range(5))
    near = Or(Or(Compare(a3, "=", a0), Edge(a3, a0)), exists_adj(a4, a0, Edge(a4, a3)))
    small_diameter = forall(a0, forall(a1, forall(a2, forall(a3, near, guard=a2), guard=a1), guard=a0))

    b0 = _v("ab", 0)
    least_in_component = And(
        forall(a1, Compare(a0, "<", a1), guard=a0),
        forall(a1, forall(a2, Or(Compare(a0, "<", a2), Compare(a0, "=", a2)), guard=a1), guard=a0),
    )
    unique_component = forall(a0, Implies(least_in_component, Not(Exists(b0, Compare(b0, "<", a0)))))
    return conj([central, small_diameter, unique_component])


def gurevich_inner_fo() -> Formula:
    """Order-invariant FO sentence on the root's neighbourhood: even number of atoms.

    The domain is the boolean algebra minus one pole, with comparability as
    the only relation. The remaining pole ``b`` is the vertex adjacent to all
    others. An extremal vertex ``e`` (not strictly between two comparable
    vertices) plays the role of a reference atom; relative to it, ``c`` lies
    below ``a`` iff every common neighbour of ``e`` and ``a`` other than
    ``b`` is a neighbour of ``c``. Atoms are ``e`` and the minimal vertices
    incomparable with ``e``. Parity is then the usual alternating argument:
    some ``z`` contains the least atom, consecutive atoms disagree on
    membership, and the greatest atom is outside ``z``.
    """
    b, e, z, a, a2, a3, c, w, l, h = (FoVar(s) for s in ("b", "e", "z", "a", "a2", "a3", "c", "w", "l", "h"))

    def eq(x, y):
        return Compare(x, "=", y)

    def lt(x, y):
        return Compare(x, "<", y)

    bottom = forall(w, Or(eq(w, b), Edge(w, b)))

    middle = Exists(l, Exists(h, conj([
        Not(eq(l, b)), Not(eq(h, b)), Edge(l, e), Edge(h, e), Edge(l, h),
        forall(w, Implies(And(Not(eq(w, b)), Edge(w, e)), disj([eq(w, l), eq(w, h), Edge(w, l), Edge(w, h)]))),
    ])))
    extremal = And(Not(eq(e, b)), Not(middle))

    def is_atom(x: FoVar) -> Formula:
        below = Exists(c, conj([
            Not(eq(c, b)), Not(eq(c, e)), Not(Edge(c, e)), Edge(c, x),
            forall(w, Implies(conj([Not(eq(w, b)), Edge(w, e), Edge(w, x)]), Edge(w, c))),
        ]))
        return Or(eq(x, e), conj([Not(eq(x, b)), Not(Edge(x, e)), Not(below)]))

    def member(x: FoVar) -> Formula:
        return Or(eq(x, z), And(Edge(x, z), Not(eq(z, b))))

    least = forall(a, Implies(And(is_atom(a), forall(a2, Implies(is_atom(a2), Not(lt(a2, a))))), member(a)))
    greatest = forall(a, Implies(And(is_atom(a), forall(a2, Implies(is_atom(a2), Not(lt(a, a2))))), Not(member(a))))
    alternate = Not(Exists(a, Exists(a2, conj([
        lt(a, a2),
        iff(member(a), member(a2)),
        is_atom(a),
        is_atom(a2),
        Not(Exists(a3, conj([lt(a, a3), lt(a3, a2), is_atom(a3)]))),
    ]))))
    parity = Exists(z, conj([least, greatest, alternate]))
    return Exists(b, conj([bottom, Exists(e, And(extremal, parity))]))


def gurevich_phi() -> Formula:
    """Sentence true exactly on boolean algebras with an even number of atoms."""
    e1 = _v("", 1)
    no_cone = Not(exists_adj(e1, ROOT, TrueF()))
    return Exists(ROOT, And(_psi(), Or(no_cone, relativize_to_root(gurevich_inner_fo()))))


NAMED = {
    "phi1": phi1,
    "phi2": phi2,
    "phi1-closure": phi1_closure,
    "phi2-closure": phi2_closure,
    "gurevich": gurevich_phi,
}


# -------------------------------------------------------- random sentences


class SentenceGenerator:
    """Random well-formed CFO formulas built rule by rule.

    With ``invariant`` set, order atoms only occur as ``x < y | x > y``,
    which does not depend on the order, so every output is order-invariant.
    """

    def __init__(self, rng: SplitMix64, colours: Sequence[str] = (), invariant: bool = False,
                 letters: str = "ab", max_width: int = 2):
        self.rng = rng
        self.colours = list(colours)
        self.invariant = invariant
        self.letters = letters
        self.max_width = max_width

    def atom(self, s: frozenset) -> Formula:
        rng = self.rng
        vs = sorted(Var(w, i) for w, i in s)
        if not vs:
            return TrueF() if rng.below(2) else FalseF()
        x = rng.choice(vs)
        kinds = ["edge", "cmp", "cmp"] + (["colour"] if self.colours else [])
        kind = rng.choice(kinds)
        if kind == "colour":
            return Colour(rng.choice(self.colours), x)
        if kind == "edge":
            return Edge(x, rng.choice([y for y in vs if y.word == x.word]))
        partners = [y for y in vs if y.word == x.word
                    or (y.index == 0 and y.word[:-1] == x.word and len(y.word) == len(x.word) + 1)
                    or (x.index == 0 and x.word[:-1] == y.word and len(x.word) == len(y.word) + 1)]
        y = rng.choice(partners)
        op = rng.choice(["<", "=", ">"])
        if op == "=" or not self.invariant:
            return Compare(x, op, y)
        return Or(Compare(x, "<", y), Compare(x, ">", y))

    def quantifier(self, s: frozenset, depth: int, exact: bool) -> Formula:
        rng = self.rng
        options = []
        if not s:
            options.append("root")
        else:
            roots = sorted(w for w, i in s if i == 0)
            options.extend(["child", "cont", "cont"])
        kind = rng.choice(options)
        if kind == "root":
            return Exists(ROOT, self.formula(s | {("", 0)}, depth - 1, exact))
        if kind == "child":
            w = rng.choice(roots)
            fresh = [w + a for a in self.letters if (w + a, 0) not in s]
            if not fresh:
                kind = "cont"
            else:
                v = Var(fresh[0], 0)
                return Exists(v, self.formula(s | {v.key}, depth - 1, exact))
        words = sorted({w for w, _ in s})
        w = rng.choice(words)
        i = next_index(s, w)
        g = Var(w, rng.below(i))
        v = Var(w, i)
        body = self.formula(s | {v.key}, depth - 1, exact)
        if rng.below(3) == 0:
            return forall(v, body, guard=g)
        return exists_adj(v, g, body)

    def formula(self, s: frozenset, depth: int, exact: bool = False) -> Formula:
        """Formula valid under ``s`` with rank at most ``depth`` (exactly, if ``exact``)."""
        rng = self.rng
        if depth == 0:
            f = self.atom(s)
            return Not(f) if rng.below(4) == 0 else f
        roll = rng.below(10)
        if exact or roll < 5:
            q = self.quantifier(s, depth, exact)
            if rng.below(3) == 0:
                other = self.formula(s, rng.below(depth + 1), False)
                return (And if rng.below(2) else Or)(q, other) if rng.below(2) else Or(other, q)
            return Not(q) if rng.below(4) == 0 else q
        if roll < 8 and self.max_width > 1:
            op = rng.choice([And, Or, Implies])
            return op(self.formula(s, depth - 1 if rng.below(2) else depth, False), self.formula(s, depth - 1, False))
        if roll < 9:
            return Not(self.formula(s, depth, False))
        return self.atom(s)

    def sentence(self, rank: int) -> Formula:
        return self.formula(frozenset(), rank, exact=True)


def gen_cfo_sentences(
    k: int,
    colours: Sequence[str] = (),
    count: int = 0,
    seed: int = 0,
    invariant: bool = False,
    anchors: bool = True,
) -> list[Formula]:
    """``count`` random sentences of rank 1..k, cycling through the ranks.

    The two anchor closures come first whenever their rank is at most ``k``.
    """
    if k < 1:
        raise ValueError("rank must be at least 1")
    out: list[Formula] = []
    if anchors:
        out.extend(f for f in (phi1_closure(), phi2_closure()) if quantifier_rank(f) <= k)
    gen = SentenceGenerator(SplitMix64(seed), colours, invariant)
    for t in range(count):
        out.append(gen.sentence(1 + t % k))
    return out
