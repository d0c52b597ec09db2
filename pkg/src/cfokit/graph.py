"""Coloured graphs, linear orders on them, balls, pointed types and censuses."""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence


class GraphError(ValueError):
    """Raised for malformed graph data or graph files."""


@dataclass(frozen=True)
class ColouredGraph:
    """Loopless undirected graph on vertices ``0..n-1`` with colour sets.

    ``colour_of[v]`` holds indices into ``colours``. ``adj[v]`` is the
    neighbourhood of ``v``.
    """

    n: int
    colours: tuple[str, ...] = ()
    colour_of: tuple[frozenset[int], ...] = ()
    adj: tuple[frozenset[int], ...] = ()

    def __post_init__(self):
        if not self.colour_of:
            object.__setattr__(self, "colour_of", tuple(frozenset() for _ in range(self.n)))
        if not self.adj:
            object.__setattr__(self, "adj", tuple(frozenset() for _ in range(self.n)))
        if len(self.colour_of) != self.n or len(self.adj) != self.n:
            raise GraphError("colour or adjacency table has wrong length")
        for v in range(self.n):
            for c in self.colour_of[v]:
                if not 0 <= c < len(self.colours):
                    raise GraphError(f"vertex {v}: colour index {c} out of range")
            for u in self.adj[v]:
                if u == v:
                    raise GraphError(f"self-loop at vertex {v}")
                if not 0 <= u < self.n:
                    raise GraphError(f"vertex {v}: neighbour {u} out of range")
                if v not in self.adj[u]:
                    raise GraphError(f"edge {v}-{u} is not symmetric")

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[tuple[int, int]],
        colours: Sequence[str] = (),
        colour_of: dict[int, Iterable[str | int]] | None = None,
    ) -> "ColouredGraph":
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge endpoint out of range: {u} {v}")
            nbrs[u].add(v)
            nbrs[v].add(u)
        names = tuple(colours)
        cols: list[frozenset[int]] = [frozenset() for _ in range(n)]
        for v, cs in (colour_of or {}).items():
            idx = set()
            for c in cs:
                idx.add(names.index(c) if isinstance(c, str) else c)
            cols[v] = frozenset(idx)
        return cls(n, names, tuple(cols), tuple(frozenset(s) for s in nbrs))

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in sorted(self.adj[u]) if u < v]

    @property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adj), default=0)

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adj[u]

    def colour_names(self, v: int) -> frozenset[str]:
        return frozenset(self.colours[c] for c in self.colour_of[v])

    def has_colour(self, v: int, name: str) -> bool:
        try:
            idx = self.colours.index(name)
        except ValueError:
            return False
        return idx in self.colour_of[v]

    def check_vertex(self, v: int) -> None:
        if not 0 <= v < self.n:
            raise GraphError(f"vertex {v} out of range for n={self.n}")

    def relabel(self, perm: Sequence[int]) -> "ColouredGraph":
        """Copy with vertex ``v`` renamed to ``perm[v]``."""
        cols: list[frozenset[int]] = [frozenset()] * self.n
        nbrs: list[frozenset[int]] = [frozenset()] * self.n
        for v in range(self.n):
            cols[perm[v]] = self.colour_of[v]
            nbrs[perm[v]] = frozenset(perm[u] for u in self.adj[v])
        return ColouredGraph(self.n, self.colours, tuple(cols), tuple(nbrs))


@dataclass(frozen=True)
class OrderedGraph:
    """A coloured graph together with a linear order on its vertices.

    ``seq`` lists the vertices smallest first; ``rank[v]`` is the position
    of ``v`` in ``seq``.
    """

    graph: ColouredGraph
    seq: tuple[int, ...]
    rank: tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self):
        n = self.graph.n
        if sorted(self.seq) != list(range(n)):
            raise GraphError("order is not a permutation of the vertices")
        rank = [0] * n
        for i, v in enumerate(self.seq):
            rank[v] = i
        object.__setattr__(self, "rank", tuple(rank))

    @classmethod
    def identity(cls, g: ColouredGraph) -> "OrderedGraph":
        return cls(g, tuple(range(g.n)))

    @property
    def n(self) -> int:
        return self.graph.n

    def less(self, u: int, v: int) -> bool:
        return self.rank[u] < self.rank[v]


def load_graph(text: str) -> tuple[ColouredGraph, tuple[int, ...] | None]:
    """Parse the line-oriented graph format.

    Returns the graph and the declared order (smallest first), if any.
    """
    n: int | None = None
    names: list[str] = []
    declared: set[int] = set()
    colour_of: dict[int, list[str]] = {}
    edges: list[tuple[int, int]] = []
    order: tuple[int, ...] | None = None

    def vertex(tok: str, lineno: int) -> int:
        try:
            v = int(tok)
        except ValueError:
            raise GraphError(f"line {lineno}: bad vertex id {tok!r}") from None
        assert n is not None
        if not 0 <= v < n:
            raise GraphError(f"line {lineno}: vertex {v} out of range for n={n}")
        return v

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        if n is None:
            if head != "graph" or len(rest) != 1:
                raise GraphError(f"line {lineno}: expected 'graph <n>' header")
            try:
                n = int(rest[0])
            except ValueError:
                raise GraphError(f"line {lineno}: bad vertex count {rest[0]!r}") from None
            if n < 0:
                raise GraphError(f"line {lineno}: negative vertex count")
            continue
        if head == "colors":
            if not rest:
                raise GraphError(f"line {lineno}: 'colors' needs at least one name")
            for name in rest:
                if name in names:
                    raise GraphError(f"line {lineno}: duplicate colour {name!r}")
                names.append(name)
        elif head == "node":
            if not rest:
                raise GraphError(f"line {lineno}: 'node' needs an id")
            v = vertex(rest[0], lineno)
            if v in declared:
                raise GraphError(f"line {lineno}: duplicate vertex id {v}")
            declared.add(v)
            for name in rest[1:]:
                if name not in names:
                    raise GraphError(f"line {lineno}: unknown colour {name!r}")
            colour_of[v] = rest[1:]
        elif head == "edge":
            if len(rest) != 2:
                raise GraphError(f"line {lineno}: 'edge' needs two endpoints")
            u, v = vertex(rest[0], lineno), vertex(rest[1], lineno)
            if u == v:
                raise GraphError(f"line {lineno}: self-loop at vertex {u}")
            edges.append((u, v))
        elif head == "order":
            vs = tuple(vertex(t, lineno) for t in rest)
            if sorted(vs) != list(range(n)):
                raise GraphError(f"line {lineno}: order is not a permutation of 0..{n - 1}")
            order = vs
        else:
            raise GraphError(f"line {lineno}: unknown directive {head!r}")
    if n is None:
        raise GraphError("line 1: missing 'graph <n>' header")
    return ColouredGraph.from_edges(n, edges, names, colour_of), order


def dump_graph(g: ColouredGraph, order: Sequence[int] | None = None) -> str:
    lines = [f"graph {g.n}"]
    if g.colours:
        lines.append("colors " + " ".join(g.colours))
    for v in range(g.n):
        if g.colour_of[v]:
            lines.append(f"node {v} " + " ".join(g.colours[c] for c in sorted(g.colour_of[v])))
    lines.extend(f"edge {u} {v}" for u, v in g.edges)
    if order is not None:
        lines.append("order " + " ".join(map(str, order)))
    return "\n".join(lines) + "\n"


def distances(g: ColouredGraph, v: int, r: int | None = None) -> dict[int, int]:
    """BFS distances from ``v``, truncated at radius ``r`` when given."""
    g.check_vertex(v)
    dist = {v: 0}
    queue = deque([v])
    while queue:
        u = queue.popleft()
        if r is not None and dist[u] >= r:
            continue
        for w in g.adj[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def ball(g: ColouredGraph, v: int, r: int) -> set[int]:
    if r < 0:
        raise GraphError("radius must be non-negative")
    return set(distances(g, v, r))


def ball_of_set(g: ColouredGraph, vs: Iterable[int], r: int) -> set[int]:
    """Vertices within distance ``r`` of some vertex in ``vs``."""
    seen = {v: 0 for v in vs}
    queue = deque(seen)
    while queue:
        u = queue.popleft()
        if seen[u] >= r:
            continue
        for w in g.adj[u]:
            if w not in seen:
                seen[w] = seen[u] + 1
                queue.append(w)
    return set(seen)


def diameter(g: ColouredGraph) -> float:
    """Largest distance between two vertices; infinite if disconnected."""
    best = 0
    for v in range(g.n):
        d = distances(g, v)
        if len(d) < g.n:
            return float("inf")
        best = max(best, max(d.values()))
    return best


@dataclass(frozen=True)
class NeighbourhoodType:
    canonical_code: bytes

    def __repr__(self):
        return f"NeighbourhoodType({self.canonical_code[:24]!r}...)"


def _refine(verts: list[int], nbrs: dict[int, set[int]], colour: dict[int, int]) -> dict[int, int]:
    # Colour refinement; new colour ids are ranks of canonical signatures.
    while True:
        sig = {v: (colour[v], tuple(sorted(colour[u] for u in nbrs[v]))) for v in verts}
        keys = sorted(set(sig.values()))
        index = {k: i for i, k in enumerate(keys)}
        new = {v: index[sig[v]] for v in verts}
        if len(keys) == len(set(colour.values())):
            return new
        colour = new


def _certificate(verts, nbrs, labels, colour) -> tuple:
    order = sorted(verts, key=lambda v: colour[v])
    pos = {v: i for i, v in enumerate(order)}
    edges = sorted((pos[u], pos[w]) for u in verts for w in nbrs[u] if pos[u] < pos[w])
    return (len(verts), tuple(labels[v] for v in order), tuple(edges))


def canonical_form(
    verts: Iterable[int],
    nbrs: dict[int, set[int]],
    labels: dict[int, tuple],
) -> tuple:
    """Canonical certificate of a small vertex-labelled graph.

    Colour refinement followed by individualisation of the first non-trivial
    cell; the least certificate over all branches is returned. Two inputs
    receive the same certificate iff they are label-preserving isomorphic.
    """
    verts = list(verts)
    keys = sorted(set(labels[v] for v in verts))
    index = {k: i for i, k in enumerate(keys)}
    start = _refine(verts, nbrs, {v: index[labels[v]] for v in verts})

    best: list[tuple | None] = [None]

    def search(colour: dict[int, int]) -> None:
        cells: dict[int, list[int]] = {}
        for v in verts:
            cells.setdefault(colour[v], []).append(v)
        target = next((c for c in sorted(cells) if len(cells[c]) > 1), None)
        if target is None:
            cert = _certificate(verts, nbrs, labels, colour)
            if best[0] is None or cert < best[0]:
                best[0] = cert
            return
        for v in cells[target]:
            split = {u: 2 * colour[u] + (0 if u == v else 1) for u in verts}
            # Individualised vertex sorts just before its former cell-mates.
            search(_refine(verts, nbrs, split))

    search(start)
    assert best[0] is not None
    return best[0]


def pointed_type(g: ColouredGraph, v: int, r: int) -> NeighbourhoodType:
    """Isomorphism class of the radius-``r`` ball around ``v`` with ``v`` marked."""
    dist = distances(g, v, r)
    verts = list(dist)
    vs = set(verts)
    nbrs = {u: g.adj[u] & vs for u in verts}
    labels = {u: (dist[u], tuple(sorted(g.colour_names(u)))) for u in verts}
    return NeighbourhoodType(repr(canonical_form(verts, nbrs, labels)).encode())


@dataclass(frozen=True)
class TypeCensus:
    radius: int
    counts: dict[NeighbourhoodType, int]
    type_of: tuple[NeighbourhoodType, ...] = ()

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def type_census(g: ColouredGraph, k: int) -> TypeCensus:
    type_of = tuple(pointed_type(g, v, k) for v in range(g.n))
    return TypeCensus(k, dict(Counter(type_of)), type_of)


def threshold_equivalent(g1: ColouredGraph, g2: ColouredGraph, k: int, t: int) -> bool:
    c1, c2 = type_census(g1, k).counts, type_census(g2, k).counts
    for tau in set(c1) | set(c2):
        a, b = c1.get(tau, 0), c2.get(tau, 0)
        if a != b and not (a > t and b > t):
            return False
    return True


RELATIONS = frozenset({"edge", "order", "colours", "equality"})


def is_partial_isomorphism(
    g1: ColouredGraph | OrderedGraph,
    g2: ColouredGraph | OrderedGraph,
    pairs: Sequence[tuple[int, int]],
    relations: Iterable[str] = RELATIONS,
) -> bool:
    """Whether ``pairs`` preserves the selected atomic facts in both directions.

    Without ``equality`` repeated left or right components are allowed,
    which is how stacked pebbles are compared.
    """
    rels = set(relations)
    if not rels <= RELATIONS:
        raise ValueError(f"unknown relations {sorted(rels - RELATIONS)}")
    h1 = g1.graph if isinstance(g1, OrderedGraph) else g1
    h2 = g2.graph if isinstance(g2, OrderedGraph) else g2
    for a, b in pairs:
        h1.check_vertex(a)
        h2.check_vertex(b)
    if "order" in rels and not (isinstance(g1, OrderedGraph) and isinstance(g2, OrderedGraph)):
        raise ValueError("order relation needs ordered graphs")
    for a, b in pairs:
        if "colours" in rels and h1.colour_names(a) != h2.colour_names(b):
            return False
    for i, (a, b) in enumerate(pairs):
        for a2, b2 in pairs[i:]:
            if "equality" in rels and (a == a2) != (b == b2):
                return False
            if "edge" in rels and h1.has_edge(a, a2) != h2.has_edge(b, b2):
                return False
            if "order" in rels:
                assert isinstance(g1, OrderedGraph) and isinstance(g2, OrderedGraph)
                if g1.less(a, a2) != g2.less(b, b2) or g1.less(a2, a) != g2.less(b2, b):
                    return False
    return True
