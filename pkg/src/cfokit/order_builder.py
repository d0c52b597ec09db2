"""(k,F)-orders: segment layout, construction, checking and transfer."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .contexts import (
    Context,
    FrequencyError,
    FrequentTypeSet,
    colour_context,
    context_bounds,
    context_elements,
    depth_one_from_ball,
    frequent_types,
    realised_contexts,
    synthesize_contexts,
)
from .graph import ColouredGraph, GraphError, OrderedGraph, ball, pointed_type
from .rng import SplitMix64


def segment_names(k: int) -> list[str]:
    """The ``6k^2+2`` segment names in order."""
    if k < 1:
        raise ValueError("k must be at least 1")
    q = k * k
    names = ["X"]
    for i in range(1, q + 1):
        names += [f"LU{i}", f"LN{i}"]
    names += [f"LN{i}" for i in range(q + 1, 2 * q + 1)]
    names.append("J")
    names += [f"RN{i}" for i in range(2 * q, q, -1)]
    for i in range(q, 0, -1):
        names += [f"RN{i}", f"RU{i}"]
    return names


def tier_of(k: int, i: int) -> int:
    """Context depth placed in universal segment ``i``."""
    return (i - 1) // k


@dataclass(frozen=True)
class KfOrder:
    k: int
    segments: tuple[tuple[str, tuple[int, ...]], ...]
    seq: tuple[int, ...]
    F: FrequentTypeSet | None = None
    placed: tuple[tuple[str, str, int], ...] = ()

    def __post_init__(self):
        names = [s for s, _ in self.segments]
        if names != segment_names(self.k):
            raise ValueError("segments do not follow the fixed layout")
        members = [v for _, vs in self.segments for v in vs]
        if sorted(members) != sorted(self.seq) or len(set(members)) != len(members):
            raise ValueError("segments do not partition the vertices")
        pos = {}
        for idx, (_, vs) in enumerate(self.segments):
            for v in vs:
                pos[v] = idx
        object.__setattr__(self, "_pos", pos)

    @classmethod
    def from_segments(cls, k: int, segments: Mapping[str, Sequence[int]], F=None, placed=()) -> "KfOrder":
        segs = tuple((name, tuple(segments.get(name, ()))) for name in segment_names(k))
        seq = tuple(v for _, vs in segs for v in vs)
        return cls(k, segs, seq, F, tuple(placed))

    def segment(self, name: str) -> tuple[int, ...]:
        for s, vs in self.segments:
            if s == name:
                return vs
        raise KeyError(name)

    def position(self, v: int) -> int:
        return self._pos[v]  # type: ignore[attr-defined]

    def segment_of(self, v: int) -> str:
        return self.segments[self.position(v)][0]

    def border(self) -> list[int]:
        return [v for s, vs in self.segments if s != "J" for v in vs]

    def ordered_graph(self, g: ColouredGraph) -> OrderedGraph:
        return OrderedGraph(g, self.seq)

    def with_seq(self, seq: Sequence[int]) -> "KfOrder":
        return KfOrder(self.k, self.segments, tuple(seq), self.F, self.placed)


def segment_distance(o: KfOrder, u: int, v: int) -> int:
    try:
        return abs(o.position(u) - o.position(v))
    except KeyError as e:
        raise GraphError(f"vertex {e.args[0]} is not in the order") from None


def safety_segments(k: int, r: int) -> set[str]:
    if not 0 <= r <= k:
        raise ValueError("r must lie in 0..k")
    out = {"X"}
    for i in range(1, (k - r) * k + 1):
        out |= {f"LU{i}", f"LN{i}", f"RU{i}", f"RN{i}"}
    return out


def safety_part(o: KfOrder, r: int) -> set[int]:
    """Extremity plus the first ``(k-r)k`` paired segments on each side."""
    names = safety_segments(o.k, r)
    return {v for s, vs in o.segments if s in names for v in vs}


# Checking.


@dataclass
class PropertyReport:
    universality: bool
    extremality: bool
    extremality_definitional: bool
    contraction: bool
    tameness: bool
    refinement: bool
    witnesses: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all((self.universality, self.extremality, self.contraction, self.tameness, self.refinement))

    def lines(self) -> list[str]:
        out = []
        for name in ("universality", "extremality", "extremality_definitional", "contraction", "tameness", "refinement"):
            out.append(f"{name} {'true' if getattr(self, name) else 'false'}")
            if name in self.witnesses:
                out.append(f"{name}_witness {self.witnesses[name]}")
        return out


def _frequent_vertices(g: ColouredGraph, F: FrequentTypeSet) -> list[bool]:
    if g is F.graph:
        return [F.is_frequent_vertex(v) for v in range(g.n)]
    return [pointed_type(g, v, F.k) in F.F for v in range(g.n)]


def check_kf_order(g: ColouredGraph, o: KfOrder, contexts_expected: Mapping[int, Iterable[Context]]) -> PropertyReport:
    """Verify the four defining properties plus refinement of the layout."""
    if o.F is None:
        raise ValueError("order carries no frequent type set")
    k = o.k
    og = o.ordered_graph(g)
    wit: dict[str, str] = {}
    # Refinement: positions along seq never decrease in segment index.
    refinement = True
    for a, b in zip(o.seq, o.seq[1:]):
        if o.position(a) > o.position(b):
            refinement = False
            wit["refinement"] = f"{a} before {b}"
            break
    universality = True
    for i in range(1, k * k + 1):
        j = tier_of(k, i)
        row = realised_contexts(og, j).per_vertex
        want = set(contexts_expected.get(j, ()))
        for name in (f"LU{i}", f"RU{i}"):
            have = {row[v] for v in o.segment(name)}
            missing = want - have
            if missing and universality:
                universality = False
                wit["universality"] = f"{name} lacks {sorted(c.digest() for c in missing)[0]}"
    freq = _frequent_vertices(g, o.F)
    rare = {v for v in range(g.n) if not freq[v]}
    xs = set(o.segment("X"))
    extremality = rare == xs
    extremality_def = rare <= xs
    if not extremality:
        odd = sorted(rare ^ xs)
        wit["extremality"] = f"vertex {odd[0]}"
    contraction = True
    for v in range(g.n):
        far = [u for u in ball(g, v, k) if segment_distance(o, u, v) > 2 * k]
        if far:
            contraction = False
            wit["contraction"] = f"vertex {v} reaches {far[0]}"
            break
    tameness = True
    for r in range(1, k + 1):
        safe = safety_part(o, r)
        for v in range(g.n):
            if v in safe:
                continue
            bad = [u for u in context_elements(og, v, k - r) if not freq[u]]
            if bad:
                tameness = False
                wit["tameness"] = f"vertex {v} depth {k - r} uses rare {bad[0]}"
                break
        if not tameness:
            break
    return PropertyReport(universality, extremality, extremality_def, contraction, tameness, refinement, wit)


# Construction.


class BuildError(RuntimeError):
    def __init__(self, message: str, kind: str, report: PropertyReport | None = None):
        super().__init__(message)
        self.kind = kind
        self.report = report


@dataclass
class BuildReport:
    k: int
    t: int
    m: int
    r: int
    frequent_types: int
    rare_vertices: int
    tier_sizes: dict
    complete: dict
    border_size: int
    contexts: dict = field(default_factory=dict)
    check: PropertyReport | None = None

    def lines(self) -> list[str]:
        out = [
            f"k {self.k}",
            f"threshold {self.t}",
            f"witnesses_per_type {self.m}",
            f"separation {self.r}",
            f"frequent_types {self.frequent_types}",
            f"rare_vertices {self.rare_vertices}",
        ]
        for j in sorted(self.tier_sizes):
            flag = "complete" if self.complete[j] else "budget-truncated"
            out.append(f"tier {j} contexts {self.tier_sizes[j]} {flag}")
        out.append(f"border_size {self.border_size}")
        return out


@dataclass
class _Realisation:
    """Vertices of one placed occurrence in their internal order, and its centre."""

    centre: int
    block: list[int]
    anchors: list[int]


class _Pool:
    """Scattered witnesses not yet used, by vertex id."""

    def __init__(self, fts: FrequentTypeSet):
        self.free = sorted(w for ws in fts.witnesses.values() for w in ws)
        self.used: set[int] = set()

    def take(self, pred) -> int | None:
        for w in self.free:
            if w not in self.used and pred(w):
                self.used.add(w)
                return w
        return None


def _realise_depth_one(g: ColouredGraph, c: Context, pool: _Pool) -> _Realisation | None:
    ident = OrderedGraph.identity(g)
    chosen = None

    def fits(w: int) -> bool:
        nonlocal chosen
        members = sorted(ball(g, w, 1))
        if len(members) != c.size:
            return False
        for perm in itertools.permutations(members):
            if depth_one_from_ball(perm, ident, w, c.f) is c:
                chosen = list(perm)
                return True
        return False

    centre = pool.take(fits)
    if centre is None or chosen is None:
        return None
    block, anchors = [], [centre]
    for idx, u in enumerate(chosen):
        block.append(u)
        if idx < len(c.f):
            for col in sorted(c.f[idx], key=Context.digest):
                filler = pool.take(lambda w, col=col: colour_context(g.colour_names(w)) is col)
                if filler is None:
                    return None
                block.append(filler)
                anchors.append(filler)
    return _Realisation(centre, block, anchors)


def _sampled_realisations(fts: FrequentTypeSet, j: int, samples: int, seed: int) -> dict:
    g = fts.graph
    rng = SplitMix64(seed)
    found: dict[Context, list[_Realisation]] = {}
    for _ in range(samples):
        og = OrderedGraph(g, tuple(rng.permutation(g.n)))
        row = realised_contexts(og, j).per_vertex
        for v in range(g.n):
            elems = context_elements(og, v, j)
            if all(fts.is_frequent_vertex(u) for u in elems):
                block = sorted(elems, key=og.rank.__getitem__)
                found.setdefault(row[v], []).append(_Realisation(v, block, [v]))
    return found


@dataclass
class KfPlan:
    """Frequency analysis and the context sets to place, per tier."""

    fts: FrequentTypeSet
    tiers: dict
    complete: dict
    realisations: dict
    separation: int


def plan_kf_order(
    g: ColouredGraph,
    k: int,
    context_source: str = "synthesized",
    budget: int = 100_000,
    samples: int = 8,
    seed: int = 0,
) -> KfPlan:
    """Pick the frequent types and the contexts each universal tier needs.

    The witness count ``m`` depends on how many contexts get placed, which
    depends on the frequent types, which depend on ``m``; iterate to a fixpoint.
    """
    if context_source not in ("synthesized", "realised-seeded"):
        raise ValueError("context_source must be synthesized or realised-seeded")
    if k < 1:
        raise ValueError("k must be at least 1")
    d = max(g.max_degree, 1)
    r_sep = 4 * k * k + 2 * (k - 1)
    bc = context_bounds(max(k - 1, 0), d, len(g.colours)).bc_bound(k - 1)
    m = 1
    for _ in range(8):
        try:
            fts = frequent_types(g, k, m, r_sep)
        except FrequencyError as e:
            raise BuildError(str(e), "richness") from e
        tiers, complete, realisations = {}, {}, {}
        for j in range(k):
            if j <= 1 and context_source == "synthesized":
                res = synthesize_contexts(fts, j, budget)
                tiers[j], complete[j] = set(res.contexts), res.complete
            else:
                found = _sampled_realisations(fts, j, samples, seed + j)
                realisations[j] = found
                tiers[j], complete[j] = set(found), False
        units = 0
        for j, cs in tiers.items():
            per = sum(1 + sum(len(s) for s in c.f) if j == 1 and context_source == "synthesized" else 1 for c in cs)
            units += 2 * k * per
        most = max((len(cs) for cs in tiers.values()), default=0)
        formula_m = 2 * k * k * (bc if bc is not None else units) * most
        need = max(formula_m, units, 1)
        if need <= m:
            return KfPlan(fts, tiers, complete, realisations, r_sep)
        m = need
    raise BuildError("witness count did not stabilise", "richness")


def build_kf_order(
    g: ColouredGraph,
    k: int,
    context_source: str = "synthesized",
    budget: int = 100_000,
    samples: int = 8,
    seed: int = 0,
    require_frequent: bool = True,
) -> tuple[KfOrder, BuildReport]:
    """Construct a (k,F)-order for the frequent types of ``g`` and check it.

    With ``require_frequent`` a graph without any frequent type is a
    richness failure instead of an order that is all extremity.
    """
    plan = plan_kf_order(g, k, context_source, budget, samples, seed)
    fts, tiers, complete, realisations, r_sep = plan.fts, plan.tiers, plan.complete, plan.realisations, plan.separation
    if require_frequent and g.n and not fts.F:
        raise BuildError(f"no type reaches the threshold {fts.t}", "richness")
    if any(not cs for cs in tiers.values()) and fts.F:
        raise BuildError("a tier has no realisable contexts", "richness")
    pool = _Pool(fts)
    segs: dict[str, list[int]] = {name: [] for name in segment_names(k)}
    segs["X"] = sorted(fts.rare_vertices)
    placed_sets: list[tuple[str, str, set[int]]] = []
    placed_meta = []
    taken_sampled: dict[int, int] = {}
    for i in range(1, k * k + 1):
        j = tier_of(k, i)
        for side in ("L", "R"):
            name = f"{side}U{i}"
            for c in sorted(tiers[j], key=Context.digest):
                if j == 0:
                    w = pool.take(lambda v, c=c: colour_context(g.colour_names(v)) is c)
                    real = None if w is None else _Realisation(w, [w], [w])
                elif j == 1 and context_source == "synthesized":
                    real = _realise_depth_one(g, c, pool)
                else:
                    real = None
                    options = realisations[j].get(c, [])
                    start = taken_sampled.get(id(c), 0)
                    for idx in range(start, len(options)):
                        cand = options[idx]
                        if all(u not in s for _, _, s in placed_sets for u in cand.block):
                            real = cand
                            taken_sampled[id(c)] = idx + 1
                            break
                if real is None:
                    raise BuildError(f"no scattered occurrence left for a depth-{j} context in {name}", "richness")
                elems = set(real.block)
                for other_name, other_digest, other in placed_sets:
                    if elems & other:
                        raise BuildError(
                            f"placement collision between {name}:{c.digest()} and {other_name}:{other_digest}",
                            "collision",
                        )
                if elems & set(segs["X"]):
                    raise BuildError(f"placement in {name} meets the extremity", "collision")
                placed_sets.append((name, c.digest(), elems))
                placed_meta.append((name, c.digest(), real.centre))
                segs[name].extend(real.block)
    placed = set(segs["X"]) | {v for _, _, s in placed_sets for v in s}
    q = k * k
    for side in ("L", "R"):
        prev: set[int] = set(segs["X"])
        for i in range(1, 2 * q + 1):
            source = prev | (set(segs[f"{side}U{i}"]) if i <= q else set())
            layer = sorted({u for v in source for u in g.adj[v]} - placed)
            segs[f"{side}N{i}"] = layer
            placed |= set(layer)
            prev = set(layer)
    segs["J"] = sorted(set(range(g.n)) - placed)
    order = KfOrder.from_segments(k, segs, fts, placed_meta)
    report = check_kf_order(g, order, tiers)
    border = g.n - len(segs["J"])
    build = BuildReport(
        k, fts.t, fts.m, r_sep, len(fts.F), len(fts.rare_vertices),
        {j: len(cs) for j, cs in tiers.items()}, complete, border, tiers, report,
    )
    if not report.ok:
        raise BuildError("built order fails the property check", "check", report)
    return order, build


# Transfer along border bijections.


class TransferError(ValueError):
    pass


def _validate_bijection(gA: ColouredGraph, oA: KfOrder, gB: ColouredGraph, phi: Mapping[int, int]) -> None:
    border = oA.border()
    if set(phi) != set(border):
        raise TransferError("map domain is not the border of the source order")
    image = [phi[v] for v in border]
    if len(set(image)) != len(image):
        raise TransferError("map is not injective")
    for v in image:
        gB.check_vertex(v)
    for a in border:
        if gA.colour_names(a) != gB.colour_names(phi[a]):
            raise TransferError(f"vertex {a} and its image {phi[a]} carry different colours")
    for a, b in itertools.combinations(border, 2):
        if gA.has_edge(a, b) != gB.has_edge(phi[a], phi[b]):
            raise TransferError(f"edge between {a} and {b} is not preserved")


def transfer_order(gA: ColouredGraph, oA: KfOrder, gB: ColouredGraph, phi: Mapping[int, int]) -> KfOrder:
    """Copy the layout of ``oA`` onto ``gB`` through ``phi``; the rest is jungle."""
    _validate_bijection(gA, oA, gB, phi)
    if oA.F is not None:
        freqA = _frequent_vertices(gA, oA.F)
        freqB = _frequent_vertices(gB, oA.F)
        for a in oA.border():
            if freqA[a] != freqB[phi[a]]:
                raise TransferError(f"vertex {a} and its image {phi[a]} differ in frequency class")
    segs: dict[str, list[int]] = {}
    by_rank = {v: i for i, v in enumerate(oA.seq)}
    for name, vs in oA.segments:
        if name != "J":
            segs[name] = [phi[v] for v in sorted(vs, key=by_rank.__getitem__)]
    image = {v for vs in segs.values() for v in vs}
    segs["J"] = [v for v in range(gB.n) if v not in image]
    placed = tuple((s, dg, phi.get(c, -1)) for s, dg, c in oA.placed)
    return KfOrder.from_segments(oA.k, segs, oA.F, placed)


@dataclass
class SearchOutcome:
    bijection: dict | None
    nodes: int
    exhausted: bool
    reason: str = ""


def find_border_bijection(gA: ColouredGraph, oA: KfOrder, gB: ColouredGraph, node_limit: int = 1_000_000) -> SearchOutcome:
    """Backtracking search for a border-preserving injection into ``gB``.

    Border vertices are visited breadth-first inside each component of the
    border, components by least vertex id, candidates in ascending id; the
    first solution is the least one in that visiting order.
    """
    border = oA.border()
    border_set = set(border)
    outermost = set(oA.segment(f"LN{2 * oA.k * oA.k}")) | set(oA.segment(f"RN{2 * oA.k * oA.k}"))
    freqA = _frequent_vertices(gA, oA.F) if oA.F is not None else [True] * gA.n
    freqB = _frequent_vertices(gB, oA.F) if oA.F is not None else [True] * gB.n
    rareB = [v for v in range(gB.n) if not freqB[v]]
    x_size = len(oA.segment("X"))
    if len(rareB) != x_size:
        return SearchOutcome(None, 0, True, f"target has {len(rareB)} rare vertices, source extremity has {x_size}")
    if len(border) > gB.n:
        return SearchOutcome(None, 0, True, "target is smaller than the border")
    visit: list[int] = []
    seen: set[int] = set()
    for root in sorted(border):
        if root in seen:
            continue
        seen.add(root)
        queue = [root]
        while queue:
            v = queue.pop(0)
            visit.append(v)
            for u in sorted(gA.adj[v]):
                if u in border_set and u not in seen:
                    seen.add(u)
                    queue.append(u)
    inner_degree = {v: len(gA.adj[v] & border_set) for v in border}
    phi: dict[int, int] = {}
    used: set[int] = set()
    nodes = 0

    def ok(a: int, b: int) -> bool:
        if b in used or gA.colour_names(a) != gB.colour_names(b) or freqA[a] != freqB[b]:
            return False
        deg = len(gB.adj[b])
        if a in outermost:
            if deg < inner_degree[a]:
                return False
        elif deg != inner_degree[a]:
            return False
        for a2, b2 in phi.items():
            if gA.has_edge(a, a2) != gB.has_edge(b, b2):
                return False
        return True

    def candidates(a: int) -> Iterable[int]:
        anchors = [phi[u] for u in gA.adj[a] if u in phi]
        if anchors:
            return sorted(gB.adj[anchors[0]])
        return range(gB.n)

    def search(idx: int) -> bool:
        nonlocal nodes
        if idx == len(visit):
            return True
        a = visit[idx]
        for b in candidates(a):
            nodes += 1
            if nodes > node_limit:
                raise _Limit()
            if ok(a, b):
                phi[a] = b
                used.add(b)
                if search(idx + 1):
                    return True
                del phi[a]
                used.discard(b)
        return False

    try:
        found = search(0)
    except _Limit:
        return SearchOutcome(None, nodes, False, f"node limit {node_limit} reached")
    if not found:
        return SearchOutcome(None, nodes, True, "no border-preserving injection exists")
    return SearchOutcome(dict(phi), nodes, True)


class _Limit(Exception):
    pass


# Order files: an ``order`` line plus one ``segment <name> <id>*`` line per segment.


def dump_kf_order(o: KfOrder) -> str:
    lines = ["order " + " ".join(map(str, o.seq))]
    for name, vs in o.segments:
        lines.append(" ".join(["segment", name, *map(str, vs)]))
    return "\n".join(lines) + "\n"


def load_kf_order(text: str, k: int, F: FrequentTypeSet | None = None) -> KfOrder:
    seq: list[int] | None = None
    segs: dict[str, list[int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        try:
            if parts[0] == "order":
                seq = [int(x) for x in parts[1:]]
            elif parts[0] == "segment" and len(parts) >= 2:
                segs[parts[1]] = [int(x) for x in parts[2:]]
            else:
                raise GraphError(f"line {lineno}: unknown directive {parts[0]!r}")
        except ValueError as e:
            raise GraphError(f"line {lineno}: {e}") from None
    unknown = set(segs) - set(segment_names(k))
    if unknown:
        raise GraphError(f"unknown segment names {sorted(unknown)} for k={k}")
    base = KfOrder.from_segments(k, segs, F)
    return base if seq is None else base.with_seq(seq)
