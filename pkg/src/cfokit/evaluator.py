"""Reference semantics for CFO on ordered graphs and order-invariance checks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .formula import (
    And,
    Colour,
    Compare,
    Edge,
    Exists,
    FalseF,
    Formula,
    Implies,
    Not,
    Or,
    TrueF,
    Var,
    free_index_set,
    free_vars,
    is_valid_index_set,
    validate,
)
from .graph import ColouredGraph, OrderedGraph
from .rng import SplitMix64


class EvaluationError(ValueError):
    pass


def check_consistent(og: OrderedGraph, valuation: Mapping[Var, int]) -> None:
    """Raise unless ``valuation`` is a consistent valuation on a valid index set."""
    keys = {v.key for v in valuation}
    if not is_valid_index_set(keys):
        raise EvaluationError(f"valuation domain is not a valid index set: {sorted(keys)}")
    for v, a in valuation.items():
        og.graph.check_vertex(a)
        if v.index > 0:
            earlier = [valuation[Var(v.word, j)] for j in range(v.index)]
            if not any(og.graph.has_edge(a, b) for b in earlier):
                raise EvaluationError(f"{v} is not adjacent to an earlier variable of its cluster")


def _holds(og: OrderedGraph, f: Formula, env: dict, restrict: bool) -> bool:
    g = og.graph
    if isinstance(f, Edge):
        return env[f.right] in g.adj[env[f.left]]
    if isinstance(f, Compare):
        a, b = og.rank[env[f.left]], og.rank[env[f.right]]
        if f.op == "<":
            return a < b
        if f.op == ">":
            return a > b
        return a == b
    if isinstance(f, Colour):
        return g.has_colour(env[f.var], f.name)
    if isinstance(f, And):
        return _holds(og, f.left, env, restrict) and _holds(og, f.right, env, restrict)
    if isinstance(f, Or):
        return _holds(og, f.left, env, restrict) or _holds(og, f.right, env, restrict)
    if isinstance(f, Not):
        return not _holds(og, f.body, env, restrict)
    if isinstance(f, Implies):
        return (not _holds(og, f.left, env, restrict)) or _holds(og, f.right, env, restrict)
    if isinstance(f, Exists):
        if restrict and f.guard is not None:
            domain: Iterable[int] = sorted(g.adj[env[f.guard]])
        else:
            domain = range(g.n)
        saved = env.get(f.var, _MISSING)
        try:
            for a in domain:
                env[f.var] = a
                if _holds(og, f.body, env, restrict):
                    return True
            return False
        finally:
            if saved is _MISSING:
                env.pop(f.var, None)
            else:
                env[f.var] = saved
    if isinstance(f, TrueF):
        return True
    if isinstance(f, FalseF):
        return False
    raise TypeError(f"not a formula node: {f!r}")


_MISSING = object()


def evaluate(
    og: OrderedGraph,
    valuation: Mapping[Var, int] | None,
    f: Formula,
    restrict_guards: bool = False,
    check: bool = True,
) -> bool:
    """Truth of ``f`` in ``og`` under ``valuation``.

    Quantifiers range over every vertex and the guard atom in the body does
    the filtering. With ``restrict_guards`` a guarded quantifier only visits
    the neighbours of its guard, which gives the same answer faster.
    """
    valuation = dict(valuation or {})
    if check:
        s = free_index_set(f) | {v.key for v in valuation}
        report = validate(f, s)
        if not report.ok:
            raise EvaluationError("formula does not validate: " + "; ".join(report.lines()))
        missing = [v for v in free_vars(f) if v not in valuation]
        if missing:
            raise EvaluationError(f"unassigned free variables {sorted(missing)}")
        check_consistent(og, valuation)
    return _holds(og, f, valuation, restrict_guards)


def evaluate_fo(og: OrderedGraph, f: Formula, env: Mapping | None = None) -> bool:
    """Plain first-order evaluation with no CFO discipline."""
    return _holds(og, f, dict(env or {}), False)


@dataclass(frozen=True)
class InvarianceVerdict:
    invariant: bool
    value: bool | None
    witness: tuple[tuple[int, ...], tuple[int, ...]] | None
    orders_tested: int
    mode: str


MAX_EXHAUSTIVE_N = 8


def check_invariance_exhaustive(
    g: ColouredGraph, f: Formula, force: bool = False, restrict_guards: bool = True
) -> InvarianceVerdict:
    """Evaluate ``f`` under all ``n!`` orders of ``g``."""
    if g.n > MAX_EXHAUSTIVE_N and not force:
        raise EvaluationError(f"{math.factorial(g.n)} orders exceed the exhaustive guard")
    first: tuple[int, ...] | None = None
    value = None
    count = 0
    for perm in itertools.permutations(range(g.n)):
        count += 1
        v = evaluate(OrderedGraph(g, perm), {}, f, restrict_guards, check=count == 1)
        if first is None:
            first, value = perm, v
        elif v != value:
            return InvarianceVerdict(False, None, (first, perm), count, "exhaustive")
    return InvarianceVerdict(True, value, None, count, "exhaustive")


def sample_orders(n: int, trials: int, seed: int) -> list[tuple[int, ...]]:
    rng = SplitMix64(seed)
    return [tuple(rng.permutation(n)) for _ in range(trials)]


def check_invariance_sampled(
    g: ColouredGraph, f: Formula, trials: int, seed: int, restrict_guards: bool = True
) -> InvarianceVerdict:
    """Evaluate ``f`` under ``trials`` seeded random orders."""
    if trials < 2:
        raise EvaluationError("need at least two trials")
    first: tuple[int, ...] | None = None
    value = None
    for count, perm in enumerate(sample_orders(g.n, trials, seed), start=1):
        v = evaluate(OrderedGraph(g, perm), {}, f, restrict_guards, check=count == 1)
        if first is None:
            first, value = perm, v
        elif v != value:
            return InvarianceVerdict(False, None, (first, perm), count, "sampled")
    return InvarianceVerdict(True, value, None, trials, "sampled")


def agree_on_corpus(
    og_a: OrderedGraph, og_b: OrderedGraph, corpus: Sequence[Formula], restrict_guards: bool = True
) -> tuple[bool, Formula | None]:
    for f in corpus:
        if evaluate(og_a, {}, f, restrict_guards) != evaluate(og_b, {}, f, restrict_guards):
            return False, f
    return True, None
