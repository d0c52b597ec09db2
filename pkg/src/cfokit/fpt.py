"""Model checking order-invariant CFO sentences through outer contexts.

The sentence is split into a boolean combination of root introductions
``exists x[eps,0] . psi``. Each one is decided by trying every outer
context realised under the id order and running ``mc`` on ``psi``: ``mc``
never looks at the graph again, only at the outer contexts recorded for
each cluster, the ball positions of the cluster's variables, and where
each child cluster's root sits relative to its parent's ball.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

from .contexts import Context, clear_caches, realised_outer_contexts
from .evaluator import EvaluationError
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
    quantifier_rank,
    validate,
)
from .graph import ColouredGraph, OrderedGraph
from .rng import SplitMix64, default_seed


# Top-level decomposition.


@dataclass(frozen=True)
class BoolTree:
    """``op`` is one of leaf, const, not, and, or, implies."""

    op: str
    children: tuple["BoolTree", ...] = ()
    leaf: Formula | None = None
    value: bool | None = None

    def leaves(self) -> list[Formula]:
        if self.op == "leaf":
            return [self.leaf]
        return [x for c in self.children for x in c.leaves()]

    def combine(self, decide: Callable[[Formula], bool]) -> bool:
        if self.op == "leaf":
            return decide(self.leaf)
        if self.op == "const":
            return bool(self.value)
        vals = [c.combine(decide) for c in self.children]
        if self.op == "not":
            return not vals[0]
        if self.op == "and":
            return vals[0] and vals[1]
        if self.op == "or":
            return vals[0] or vals[1]
        return (not vals[0]) or vals[1]


ROOT = Var("", 0)


def decompose_top(f: Formula) -> BoolTree:
    """Boolean combination of root-introduction subsentences."""
    if isinstance(f, Exists):
        if f.var != ROOT:
            raise ValueError(f"top-level quantifier must introduce {ROOT}")
        return BoolTree("leaf", leaf=f)
    if isinstance(f, TrueF):
        return BoolTree("const", value=True)
    if isinstance(f, FalseF):
        return BoolTree("const", value=False)
    if isinstance(f, Not):
        return BoolTree("not", (decompose_top(f.body),))
    for cls, op in ((And, "and"), (Or, "or"), (Implies, "implies")):
        if isinstance(f, cls):
            return BoolTree(op, (decompose_top(f.left), decompose_top(f.right)))
    raise ValueError(f"not a sentence at top level: {f}")


# Frames.


@dataclass(frozen=True)
class ClusterFrame:
    """One cluster: its outer context, ball positions of its variables by
    index, and the placement of child roots as (letter, kind, position)
    with kind ``I`` for an outer interval and ``E`` for a ball element."""

    word: str
    outer: Context
    consts: tuple[int, ...]
    h: frozenset = frozenset()

    def placement(self, letter: str) -> tuple[str, int]:
        for a, kind, pos in self.h:
            if a == letter:
                return kind, pos
        raise EvaluationError(f"no placement recorded for child {self.word + letter!r}")


@dataclass(frozen=True)
class McFrame:
    k: int
    clusters: tuple[ClusterFrame, ...] = field(default=())

    def cluster(self, word: str) -> ClusterFrame:
        for c in self.clusters:
            if c.word == word:
                return c
        raise EvaluationError(f"cluster {word or 'eps'!r} is not in the frame")

    def index_set(self) -> frozenset:
        return frozenset((c.word, i) for c in self.clusters for i in range(len(c.consts)))

    def replace(self, new: ClusterFrame) -> "McFrame":
        rest = [c for c in self.clusters if c.word != new.word]
        return McFrame(self.k, tuple(sorted(rest + [new], key=lambda c: c.word)))

    def check(self) -> None:
        for c in self.clusters:
            want = self.k - len(c.word) - 1
            if c.outer.depth != want:
                raise EvaluationError(f"cluster {c.word!r}: outer context depth {c.outer.depth}, expected {want}")
            if any(not 0 <= i < c.outer.size for i in c.consts):
                raise EvaluationError(f"cluster {c.word!r}: constant outside its ball")
            letters = [a for a, _, _ in c.h]
            if len(letters) != len(set(letters)):
                raise EvaluationError(f"cluster {c.word!r}: a child is placed twice")
            for a, kind, pos in c.h:
                limit = c.outer.size + 1 if kind == "I" else c.outer.size
                if kind not in "IE" or not 0 <= pos < limit:
                    raise EvaluationError(f"cluster {c.word!r}: bad placement of child {a!r}")


def root_frame(k: int, o: Context) -> McFrame:
    centre = o.centre if o.depth else 0
    return McFrame(k, (ClusterFrame("", o, (centre,)),))


# The checker.


def _colours_at(o: Context, i: int) -> tuple[str, ...]:
    return o.g[i].colours if o.depth else o.colours


def _has_edge(o: Context, i: int, j: int) -> bool:
    return o.depth > 0 and o.has_edge(i, j)


def _cmp(op: str, a: int, b: int) -> bool:
    return a < b if op == "<" else a > b if op == ">" else a == b


def _child_vs_parent(frame: McFrame, child: Var, parent: Var) -> int:
    """-1, 0 or 1 as the child root is before, on or after the parent variable."""
    pc = frame.cluster(parent.word)
    r = pc.consts[parent.index]
    kind, pos = pc.placement(child.word[-1])
    if kind == "E":
        return (pos > r) - (pos < r)
    return -1 if pos <= r else 1


class _Checker:
    def __init__(self):
        self.memo: dict = {}
        self.calls = 0

    def run(self, f: Formula, frame: McFrame) -> bool:
        key = (id(f), frame)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        self.calls += 1
        out = self._eval(f, frame)
        self.memo[key] = out
        return out

    def _eval(self, f: Formula, frame: McFrame) -> bool:
        if isinstance(f, TrueF):
            return True
        if isinstance(f, FalseF):
            return False
        if isinstance(f, Not):
            return not self.run(f.body, frame)
        if isinstance(f, And):
            return self.run(f.left, frame) and self.run(f.right, frame)
        if isinstance(f, Or):
            return self.run(f.left, frame) or self.run(f.right, frame)
        if isinstance(f, Implies):
            return (not self.run(f.left, frame)) or self.run(f.right, frame)
        if isinstance(f, Colour):
            c = frame.cluster(f.var.word)
            return f.name in _colours_at(c.outer, c.consts[f.var.index])
        if isinstance(f, Edge):
            c = frame.cluster(f.left.word)
            return _has_edge(c.outer, c.consts[f.left.index], c.consts[f.right.index])
        if isinstance(f, Compare):
            a, b = f.left, f.right
            if a.word == b.word:
                c = frame.cluster(a.word)
                return _cmp(f.op, c.consts[a.index], c.consts[b.index])
            if len(a.word) > len(b.word):
                return _cmp(f.op, _child_vs_parent(frame, a, b), 0)
            return _cmp(f.op, 0, _child_vs_parent(frame, b, a))
        if isinstance(f, Exists):
            return self._exists(f, frame)
        raise TypeError(f"not a formula node: {f!r}")

    def _exists(self, f: Exists, frame: McFrame) -> bool:
        v = f.var
        if v.index == 0:
            if v.word == "":
                raise EvaluationError("root introduction below the top level")
            parent = frame.cluster(v.word[:-1])
            o = parent.outer
            if o.depth == 0:
                raise EvaluationError("rank overflow: no depth left for a child cluster")
            letter = v.word[-1]
            base_h = frozenset(x for x in parent.h if x[0] != letter)
            for t, gap in enumerate(o.f):
                placed = frame.replace(ClusterFrame(parent.word, o, parent.consts, base_h | {(letter, "I", t)}))
                for sub in sorted(gap, key=Context.digest):
                    child = ClusterFrame(v.word, sub, (sub.centre if sub.depth else 0,))
                    if self.run(f.body, placed.replace(child)):
                        return True
            for e, sub in enumerate(o.g):
                placed = frame.replace(ClusterFrame(parent.word, o, parent.consts, base_h | {(letter, "E", e)}))
                child = ClusterFrame(v.word, sub, (sub.centre if sub.depth else 0,))
                if self.run(f.body, placed.replace(child)):
                    return True
            return False
        c = frame.cluster(v.word)
        if f.guard is None or not isinstance(f.guard, Var) or f.guard.word != v.word:
            raise EvaluationError(f"continuation on {v} lacks a guard in its cluster")
        o = c.outer
        if o.depth == 0:
            return False
        consts = c.consts[: v.index]
        for nb in o.neighbours(c.consts[f.guard.index]):
            ext = ClusterFrame(c.word, o, consts + (nb,), c.h)
            if self.run(f.body, frame.replace(ext)):
                return True
        return False


def mc(n: int, frame: McFrame, phi: Formula) -> bool:
    """Truth of ``phi`` for the valuation described by ``frame``."""
    if quantifier_rank(phi) > n or n >= frame.k:
        raise EvaluationError(f"rank overflow: rank {quantifier_rank(phi)}, bound {n}, ambient {frame.k}")
    frame.check()
    report = validate(phi, frame.index_set())
    if not report.ok:
        raise EvaluationError("formula does not validate: " + "; ".join(report.lines()))
    return _Checker().run(phi, frame)


# Driver.


class InvarianceViolation(RuntimeError):
    pass


@dataclass
class FptReport:
    value: bool
    timings_ms: dict = field(default_factory=dict)
    leaves: int = 0
    mc_calls: int = 0
    paranoid_value: bool | None = None


def _decide(og: OrderedGraph, tree: BoolTree, timings: dict, checker: _Checker) -> bool:
    cache: dict[int, bool] = {}

    def decide(leaf: Formula) -> bool:
        if id(leaf) in cache:
            return cache[id(leaf)]
        assert isinstance(leaf, Exists)
        k = quantifier_rank(leaf)
        t0 = time.perf_counter()
        table = realised_outer_contexts(og, k - 1)
        t1 = time.perf_counter()
        out = False
        for o in sorted(table.realised, key=Context.digest):
            if checker.run(leaf.body, root_frame(k, o)):
                out = True
                break
        t2 = time.perf_counter()
        timings["contexts"] = timings.get("contexts", 0.0) + (t1 - t0) * 1000
        timings["mc"] = timings.get("mc", 0.0) + (t2 - t1) * 1000
        cache[id(leaf)] = out
        return out

    return tree.combine(decide)


def fpt_report(g: ColouredGraph, f: Formula, paranoid: bool = False, seed: int | None = None) -> FptReport:
    report = validate(f)
    if not report.ok:
        raise EvaluationError("formula does not validate: " + "; ".join(report.lines()))
    tree = decompose_top(f)
    timings: dict[str, float] = {}
    checker = _Checker()
    value = _decide(OrderedGraph.identity(g), tree, timings, checker)
    out = FptReport(value, timings, len(tree.leaves()), checker.calls)
    if paranoid:
        rng = SplitMix64(default_seed() if seed is None else seed)
        other = OrderedGraph(g, tuple(rng.permutation(g.n)))
        out.paranoid_value = _decide(other, tree, {}, _Checker())
        if out.paranoid_value != value:
            raise InvarianceViolation("sentence changes truth value between two orders")
    return out


def fpt_check(g: ColouredGraph, f: Formula, paranoid: bool = False, seed: int | None = None) -> bool:
    """Decide an order-invariant CFO sentence on ``g``.

    The answer is only meaningful for order-invariant sentences. With
    ``paranoid`` a second random order is tried and disagreement raises.
    """
    return fpt_report(g, f, paranoid, seed).value


__all__ = [
    "BoolTree",
    "ClusterFrame",
    "FptReport",
    "InvarianceViolation",
    "McFrame",
    "clear_caches",
    "decompose_top",
    "fpt_check",
    "fpt_report",
    "mc",
    "root_frame",
]
