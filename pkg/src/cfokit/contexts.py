"""Contexts and outer contexts of vertices in ordered graphs.

A depth-0 context is the colour set of a vertex. A depth-k context records
the ball of radius k around the vertex renamed ``0..m-1`` by order rank,
the depth-(k-1) context of every ball element (``g``) and, for each gap
between consecutive ball elements, the set of depth-(k-1) contexts found
strictly inside the gap (``f``). Outer contexts add the two unbounded gaps
before the first and after the last ball element, and every nested
description is itself outer.

Contexts are interned, so equal contexts are the same object and equality
is identity. ``digest`` gives a stable 128-bit name: blake2b with a 16-byte
output over the canonical text

* depth 0: ``C0:`` followed by the JSON list of sorted colour names;
* depth k: ``C<k>`` (``O<k>`` when outer), then ``:m=<size>:c=<centre>``,
  ``:e=`` with edges as ``i-j`` pairs (i < j, sorted, comma separated),
  ``:g=`` with the hex digests of the ball contexts in rank order, and
  ``:f=`` with one ``[...]`` group per gap listing sorted hex digests.
"""

from __future__ import annotations

import bisect
import functools
import hashlib
import itertools
import json
import math
import weakref
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .graph import (
    ColouredGraph,
    NeighbourhoodType,
    OrderedGraph,
    ball,
    ball_of_set,
    distances,
    pointed_type,
    type_census,
)
from .rng import SplitMix64


class Context:
    """Interned context value. Build with ``make_context``."""

    __slots__ = ("depth", "outer", "colours", "centre", "edges", "g", "f", "_hash", "_digest", "__weakref__")

    depth: int
    outer: bool
    colours: tuple[str, ...]
    centre: int
    edges: tuple[tuple[int, int], ...]
    g: tuple["Context", ...]
    f: tuple[frozenset, ...]

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other

    def __repr__(self):
        kind = "OuterContext" if self.outer else "Context"
        return f"{kind}(depth={self.depth}, size={self.size}, digest={self.digest()[:12]})"

    @property
    def size(self) -> int:
        return len(self.g) if self.depth else 1

    @property
    def gaps(self) -> int:
        return len(self.f)

    def key(self) -> tuple:
        return (self.depth, self.outer, self.colours, self.centre, self.edges, self.g, self.f)

    def has_edge(self, i: int, j: int) -> bool:
        a, b = (i, j) if i < j else (j, i)
        return (a, b) in self.edges

    def neighbours(self, i: int) -> list[int]:
        out = []
        for a, b in self.edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)

    def canonical_text(self) -> str:
        if self.depth == 0:
            return "C0:" + json.dumps(sorted(self.colours))
        tag = ("O" if self.outer else "C") + str(self.depth)
        edges = ",".join(f"{a}-{b}" for a, b in self.edges)
        gs = ",".join(c.digest() for c in self.g)
        fs = ",".join("[" + ",".join(sorted(c.digest() for c in s)) + "]" for s in self.f)
        return f"{tag}:m={len(self.g)}:c={self.centre}:e={edges}:g={gs}:f={fs}"

    def digest(self) -> str:
        if self._digest is None:
            self._digest = hashlib.blake2b(self.canonical_text().encode(), digest_size=16).hexdigest()
        return self._digest


_TABLE: "weakref.WeakValueDictionary[tuple, Context]" = weakref.WeakValueDictionary()


def make_context(
    depth: int,
    outer: bool,
    colours: Iterable[str],
    centre: int = 0,
    edges: Iterable[tuple[int, int]] = (),
    g: Sequence[Context] = (),
    f: Sequence[Iterable[Context]] = (),
) -> Context:
    """Interned context from its parts; validates shape."""
    if depth == 0:
        key = (0, False, tuple(sorted(colours)), 0, (), (), ())
    else:
        g = tuple(g)
        f = tuple(frozenset(s) for s in f)
        m = len(g)
        want = m + 1 if outer else m - 1
        if m == 0 or not 0 <= centre < m or len(f) != want:
            raise ValueError(f"malformed depth-{depth} context: size {m}, centre {centre}, {len(f)} gaps")
        for c in itertools.chain(g, *f):
            if c.depth != depth - 1 or (c.outer != (outer and depth > 1)):
                raise ValueError("sub-context has the wrong depth or kind")
        edges = tuple(sorted((min(a, b), max(a, b)) for a, b in edges))
        key = (depth, bool(outer), g[centre].colours, centre, edges, g, f)
    found = _TABLE.get(key)
    if found is not None:
        return found
    c = Context.__new__(Context)
    c.depth, c.outer, c.colours, c.centre, c.edges, c.g, c.f = key
    c._hash = hash(key)
    c._digest = None
    _TABLE[key] = c
    return c


def colour_context(names: Iterable[str]) -> Context:
    return make_context(0, False, names)


def _ball_sorted(og: OrderedGraph, v: int, k: int) -> list[int]:
    return sorted(ball(og.graph, v, k), key=og.rank.__getitem__)


def _ball_edges(og: OrderedGraph, members: Sequence[int]) -> list[tuple[int, int]]:
    index = {u: i for i, u in enumerate(members)}
    adj = og.graph.adj
    return [(index[u], index[w]) for u in members for w in adj[u] if w in index and index[u] < index[w]]


def _direct(og: OrderedGraph, v: int, k: int, outer: bool, memo: dict) -> Context:
    key = (v, k)
    if key in memo:
        return memo[key]
    g = og.graph
    if k == 0:
        out = colour_context(g.colour_names(v))
    else:
        members = _ball_sorted(og, v, k)
        ranks = [og.rank[u] for u in members]
        sub = tuple(_direct(og, u, k - 1, outer, memo) for u in members)
        gaps = []
        if outer:
            gaps.append(frozenset(_direct(og, x, k - 1, outer, memo) for x in og.seq[: ranks[0]]))
        for a, b in zip(ranks, ranks[1:]):
            gaps.append(frozenset(_direct(og, x, k - 1, outer, memo) for x in og.seq[a + 1 : b]))
        if outer:
            gaps.append(frozenset(_direct(og, x, k - 1, outer, memo) for x in og.seq[ranks[-1] + 1 :]))
        out = make_context(k, outer, (), members.index(v), _ball_edges(og, members), sub, gaps)
    memo[key] = out
    return out


def context(og: OrderedGraph, v: int, k: int) -> Context:
    """The depth-``k`` context of ``v``, by direct recursion."""
    og.graph.check_vertex(v)
    if k < 0:
        raise ValueError("depth must be non-negative")
    return _direct(og, v, k, False, {})


def outer_context(og: OrderedGraph, v: int, k: int) -> Context:
    """The depth-``k`` outer context of ``v``, by direct recursion."""
    og.graph.check_vertex(v)
    if k < 0:
        raise ValueError("depth must be non-negative")
    return _direct(og, v, k, True, {})


def context_elements(og: OrderedGraph, v: int, k: int) -> set[int]:
    """Element set of the depth-``k`` context: the ball plus, recursively,
    the element sets of every vertex lying inside a gap of the ball."""
    og.graph.check_vertex(v)
    if k < 0:
        raise ValueError("depth must be non-negative")
    memo: dict[tuple[int, int], frozenset[int]] = {}

    def rec(u: int, j: int) -> frozenset[int]:
        if (u, j) in memo:
            return memo[(u, j)]
        if j == 0:
            out = frozenset([u])
        else:
            members = _ball_sorted(og, u, j)
            acc = set(members)
            lo, hi = og.rank[members[0]], og.rank[members[-1]]
            inside = set(members)
            for x in og.seq[lo + 1 : hi]:
                if x not in inside:
                    acc |= rec(x, j - 1)
            out = frozenset(acc)
        memo[(u, j)] = out
        return out

    return set(rec(v, k))


def demote(c: Context) -> Context:
    """Forget the two unbounded gaps, recursively."""
    if c.depth == 0 or not c.outer:
        return c
    return _demote(c)


@functools.lru_cache(maxsize=1 << 16)
def _demote(c: Context) -> Context:
    g = tuple(demote(x) for x in c.g)
    f = [frozenset(demote(x) for x in s) for s in c.f[1:-1]]
    return make_context(c.depth, False, (), c.centre, c.edges, g, f)


@functools.lru_cache(maxsize=1 << 16)
def project(c: Context) -> Context:
    """The depth-(k-1) context determined by a depth-k context.

    Keeps the ball elements within distance k-1 of the centre; removed ball
    elements and gap contents fall into the gap that now surrounds them.
    """
    if c.depth == 0:
        raise ValueError("cannot project a depth-0 context")
    if c.depth == 1:
        return c.g[c.centre]
    m = len(c.g)
    adj: list[list[int]] = [[] for _ in range(m)]
    for a, b in c.edges:
        adj[a].append(b)
        adj[b].append(a)
    dist = {c.centre: 0}
    queue = deque([c.centre])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    keep = [i for i in range(m) if dist.get(i, m + 1) <= c.depth - 1]
    kept = set(keep)
    new_index = {old: i for i, old in enumerate(keep)}
    # Walk elements and gaps left to right, collecting projected contents.
    offset = 1 if c.outer else 0
    buckets: list[set[Context]] = [set()]
    if c.outer:
        buckets[0] |= {project(x) for x in c.f[0]}
    for i in range(m):
        if i in kept:
            buckets.append(set())
        else:
            buckets[-1].add(project(c.g[i]))
        if i < m - 1:
            buckets[-1] |= {project(x) for x in c.f[i + offset]}
    if c.outer:
        buckets[-1] |= {project(x) for x in c.f[m]}
        gaps = buckets
    else:
        gaps = buckets[1:-1]
    g = [project(c.g[i]) for i in keep]
    edges = [(new_index[a], new_index[b]) for a, b in c.edges if a in kept and b in kept]
    return make_context(c.depth - 1, c.outer, (), new_index[c.centre], edges, g, gaps)


def project_to(c: Context, depth: int) -> Context:
    while c.depth > depth:
        c = project(c)
    return c


# Level-by-level computation of every vertex's context.


class _RangeSets:
    """Which contexts occur at order positions strictly between two ranks."""

    def __init__(self, by_rank: Sequence[Context]):
        self.by_rank = by_rank
        self.positions: dict[Context, list[int]] = {}
        for p, c in enumerate(by_rank):
            self.positions.setdefault(c, []).append(p)
        self.distinct = list(self.positions.items())

    def between(self, lo: int, hi: int) -> frozenset:
        if hi - lo - 1 <= 2 * len(self.distinct) + 8:
            return frozenset(self.by_rank[lo + 1 : hi])
        out = []
        for c, pos in self.distinct:
            i = bisect.bisect_right(pos, lo)
            if i < len(pos) and pos[i] < hi:
                out.append(c)
        return frozenset(out)


_LEVELS: "weakref.WeakKeyDictionary[OrderedGraph, dict]" = weakref.WeakKeyDictionary()


def _levels(og: OrderedGraph, k: int, outer: bool) -> list[tuple[Context, ...]]:
    store = _LEVELS.setdefault(og, {})
    tables: list[tuple[Context, ...]] = store.setdefault(outer, [])
    g = og.graph
    if not tables:
        tables.append(tuple(colour_context(g.colour_names(v)) for v in range(g.n)))
    n, seq, rank = g.n, og.seq, og.rank
    while len(tables) <= k:
        j = len(tables)
        prev = tables[-1]
        ranges = _RangeSets([prev[u] for u in seq])
        row = []
        for v in range(n):
            members = _ball_sorted(og, v, j)
            ranks = [rank[u] for u in members]
            gaps = []
            if outer:
                gaps.append(ranges.between(-1, ranks[0]))
            for a, b in zip(ranks, ranks[1:]):
                gaps.append(ranges.between(a, b))
            if outer:
                gaps.append(ranges.between(ranks[-1], n))
            sub = tuple(prev[u] for u in members)
            row.append(make_context(j, outer, (), members.index(v), _ball_edges(og, members), sub, gaps))
        tables.append(tuple(row))
    return tables


@dataclass(frozen=True)
class RealisedContexts:
    depth: int
    outer: bool
    per_vertex: tuple[Context, ...]
    realised: frozenset


def realised_outer_contexts(og: OrderedGraph, k: int) -> RealisedContexts:
    """Outer depth-``k`` contexts of all vertices, computed level by level."""
    if k < 0:
        raise ValueError("depth must be non-negative")
    row = _levels(og, k, True)[k]
    return RealisedContexts(k, True, row, frozenset(row))


def realised_contexts(og: OrderedGraph, k: int) -> RealisedContexts:
    """Inner depth-``k`` contexts of all vertices, computed level by level."""
    if k < 0:
        raise ValueError("depth must be non-negative")
    row = _levels(og, k, False)[k]
    return RealisedContexts(k, False, row, frozenset(row))


def clear_caches() -> None:
    _LEVELS.clear()
    _demote.cache_clear()
    project.cache_clear()


# Frequency analysis.


class FrequencyError(ValueError):
    def __init__(self, message: str, failing_type: NeighbourhoodType | None = None):
        super().__init__(message)
        self.failing_type = failing_type


@dataclass(frozen=True)
class FrequentTypeSet:
    graph: ColouredGraph
    k: int
    F: frozenset
    t: int
    m: int
    r: int
    witnesses: dict = field(default_factory=dict)
    rare_vertices: frozenset = frozenset()
    type_of: tuple = ()

    def is_frequent_vertex(self, v: int) -> bool:
        return self.type_of[v] in self.F


def greedy_threshold(m: int, r: int, s: int, type_count: int, max_ball: int) -> int:
    """Number of occurrences per type that always suffices for greedy
    scattering of ``m`` witnesses per type away from ``s`` blocked vertices."""
    return (s + m * type_count) * max_ball + m


def frequent_types(g: ColouredGraph, k: int, m: int, r: int) -> FrequentTypeSet:
    """Split types into frequent and rare, then pick scattered witnesses."""
    if m < 1 or r < 1:
        raise ValueError("m and r must be positive")
    census = type_census(g, k)
    counts = census.counts
    max_ball = max((len(ball(g, v, r)) for v in range(g.n)), default=0)
    s = 0
    while True:
        t = greedy_threshold(m, r, s, len(counts), max_ball)
        rare_total = sum(c for c in counts.values() if c < t)
        if rare_total == s:
            break
        s = rare_total
    freq = frozenset(tau for tau, c in counts.items() if c >= t)
    rare = frozenset(v for v in range(g.n) if census.type_of[v] not in freq)
    blocked = ball_of_set(g, rare, r) if rare else set()
    witnesses: dict[NeighbourhoodType, list[int]] = {}
    for tau in sorted(freq, key=lambda x: x.canonical_code):
        chosen = []
        for v in range(g.n):
            if len(chosen) == m:
                break
            if census.type_of[v] == tau and v not in blocked:
                chosen.append(v)
                blocked |= ball(g, v, r)
        if len(chosen) < m:
            raise FrequencyError(f"only {len(chosen)} of {m} scattered witnesses for a frequent type", tau)
        witnesses[tau] = chosen
    out = FrequentTypeSet(g, k, freq, t, m, r, witnesses, rare, census.type_of)
    verify_witnesses(out)
    return out


def verify_witnesses(fts: FrequentTypeSet) -> None:
    """BFS check that witnesses are pairwise and rare-wise more than r apart."""
    g, r = fts.graph, fts.r
    all_w = [w for ws in fts.witnesses.values() for w in ws]
    if len(set(all_w)) != len(all_w):
        raise FrequencyError("a vertex was chosen twice as witness")
    targets = set(all_w) | set(fts.rare_vertices)
    for w in all_w:
        near = distances(g, w, r)
        clash = [u for u in near if u in targets and u != w]
        if clash:
            raise FrequencyError(f"witness {w} is within distance {r} of {clash[0]}")


# Synthesis of contexts realisable with frequent types.


@dataclass(frozen=True)
class SynthesisResult:
    depth: int
    contexts: frozenset
    complete: bool


def _frequent_colours(fts: FrequentTypeSet) -> frozenset:
    g = fts.graph
    return frozenset(colour_context(g.colour_names(v)) for v in range(g.n) if fts.is_frequent_vertex(v))


def depth_one_from_ball(og_members: Sequence[int], og: OrderedGraph, centre: int, gap_sets: Sequence[frozenset]) -> Context:
    g = og.graph
    sub = tuple(colour_context(g.colour_names(u)) for u in og_members)
    return make_context(1, False, (), list(og_members).index(centre), _ball_edges(og, og_members), sub, gap_sets)


def synthesize_contexts(
    fts: FrequentTypeSet,
    j: int,
    budget: int = 100_000,
    realised_seed: Iterable[Context] | None = None,
    samples: int = 8,
    seed: int = 0,
) -> SynthesisResult:
    """Depth-``j`` contexts whose element sets use only frequent types.

    Depths 0 and 1 are enumerated exhaustively from the graph's frequent
    balls. Deeper contexts come from ``realised_seed`` plus contexts seen in
    ``samples`` seeded random orders, and are flagged incomplete.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    if j > fts.k:
        raise ValueError("depth exceeds the radius of the frequent types")
    seeds = set(realised_seed or ())
    g = fts.graph
    if j == 0:
        out = _frequent_colours(fts) | seeds
        return SynthesisResult(0, frozenset(out), True)
    if j == 1:
        colours = sorted(_frequent_colours(fts), key=Context.digest)
        gap_choices = [frozenset(c) for q in range(len(colours) + 1) for c in itertools.combinations(colours, q)]
        found: set[Context] = set(seeds)
        seen_balls = set()
        complete = True
        ident = OrderedGraph.identity(g)
        for v in range(g.n):
            members = ball(g, v, 1)
            if not all(fts.is_frequent_vertex(u) for u in members):
                continue
            shape = pointed_type(g, v, 1)
            if shape in seen_balls:
                continue
            seen_balls.add(shape)
            for perm in itertools.permutations(sorted(members)):
                for gaps in itertools.product(gap_choices, repeat=len(perm) - 1):
                    if len(found) >= budget:
                        complete = False
                        break
                    found.add(depth_one_from_ball(perm, ident, v, gaps))
        return SynthesisResult(1, frozenset(found), complete)
    found = set(seeds)
    rng = SplitMix64(seed)
    for _ in range(samples):
        if len(found) >= budget:
            break
        og = OrderedGraph(g, tuple(rng.permutation(g.n)))
        row = realised_contexts(og, j).per_vertex
        for v in range(g.n):
            if len(found) >= budget:
                break
            if all(fts.is_frequent_vertex(u) for u in context_elements(og, v, j)):
                found.add(row[v])
    return SynthesisResult(j, frozenset(found), False)


# Count and size bounds.


_MAX_BITS = 1 << 22


def _pointed_ball_bound(j: int, d: int, colour_count: int) -> int:
    """Crude upper bound on the number of pointed radius-j balls of degree <= d."""
    size = 1 + sum(d * (d - 1) ** i for i in range(j))
    return sum(2 ** (q * (q - 1) // 2) * (2**colour_count) ** q for q in range(1, size + 1))


@dataclass(frozen=True)
class ContextBounds:
    """Count and realisation-size bounds per depth; ``None`` stands for a
    value too large to hold as an integer (more than 2**22 bits)."""

    k: int
    d: int
    colour_count: int
    nc: tuple
    bc: tuple

    def nc_bound(self, j: int) -> int | None:
        return self.nc[j]

    def bc_bound(self, j: int) -> int | None:
        return self.bc[j]


def context_bounds(k: int, d: int, colour_count: int, type_counts: Sequence[int] | None = None) -> ContextBounds:
    """Evaluate the recurrences

    nc(j) = types(j) * (d**j - 1)! * (2**nc(j-1)) ** (d**j - 2)
    bc(j) = d**j - 1 + (d**j - 2) * nc(j-1) * bc(j-1)

    from nc(0) = 2**colour_count and bc(0) = 1. Negative factors are taken as 0.
    ``types(j)`` defaults to a crude bound on pointed radius-j balls.
    """
    if d < 1:
        raise ValueError("degree bound must be at least 1")
    nc: list[int | None] = [2**colour_count]
    bc: list[int | None] = [1]
    for j in range(1, k + 1):
        s = d**j
        types = type_counts[j] if type_counts is not None else _pointed_ball_bound(j, d, colour_count)
        prev_nc, prev_bc = nc[-1], bc[-1]
        gaps = max(s - 2, 0)
        if prev_nc is None:
            nc.append(None)
            bc.append(None if gaps else max(s - 1, 0))
            continue
        bits = prev_nc * gaps
        if bits > _MAX_BITS:
            nc.append(None)
        else:
            nc.append(types * math.factorial(max(s - 1, 0)) * (1 << bits))
        bc.append(None if prev_bc is None else max(s - 1, 0) + gaps * prev_nc * prev_bc)
    return ContextBounds(k, d, colour_count, tuple(nc), tuple(bc))
