"""Cluster Ehrenfeucht-Fraisse games on pairs of ordered graphs."""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from .contexts import realised_contexts
from .graph import OrderedGraph, ball, is_partial_isomorphism
from .order_builder import KfOrder, safety_part

LETTERS = string.ascii_lowercase

Key = tuple[str, int]


@dataclass(frozen=True)
class Move:
    """``kind`` is root, child or cont; ``guard`` is the index of the
    cluster pebble a continuation must be adjacent to."""

    kind: str
    side: str
    word: str
    index: int
    vertex: int
    guard: int | None = None

    def __str__(self):
        where = f"x[{self.word or 'eps'},{self.index}]"
        extra = f" adj x[{self.word or 'eps'},{self.guard}]" if self.guard is not None else ""
        return f"{self.side} {self.kind} {where}={self.vertex}{extra}"


@dataclass(frozen=True)
class GameConfiguration:
    og_a: OrderedGraph
    og_b: OrderedGraph
    pebbles_a: tuple[tuple[Key, int], ...] = ()
    pebbles_b: tuple[tuple[Key, int], ...] = ()
    rounds_left: int = 0
    history: tuple[Move, ...] = field(default=(), compare=False)

    @property
    def index_set(self) -> frozenset:
        return frozenset(k for k, _ in self.pebbles_a)

    def side(self, name: str) -> tuple[OrderedGraph, dict]:
        if name == "A":
            return self.og_a, dict(self.pebbles_a)
        return self.og_b, dict(self.pebbles_b)

    def play(self, spoiler: Move, answer: Move) -> "GameConfiguration":
        a = dict(self.pebbles_a)
        b = dict(self.pebbles_b)
        for mv in (spoiler, answer):
            (a if mv.side == "A" else b)[(mv.word, mv.index)] = mv.vertex
        return GameConfiguration(
            self.og_a, self.og_b, tuple(sorted(a.items())), tuple(sorted(b.items())),
            self.rounds_left - 1, self.history + (spoiler, answer),
        )


def start(og_a: OrderedGraph, og_b: OrderedGraph, rounds: int) -> GameConfiguration:
    return GameConfiguration(og_a, og_b, (), (), rounds)


def _other(side: str) -> str:
    return "B" if side == "A" else "A"


def fresh_letter(s: frozenset, word: str) -> str | None:
    for a in LETTERS:
        if (word + a, 0) not in s:
            return a
    return None


def legal_moves(c: GameConfiguration, side: str) -> list[Move]:
    if c.rounds_left <= 0:
        return []
    og, peb = c.side(side)
    s = c.index_set
    n = og.n
    if not s:
        return [Move("root", side, "", 0, v) for v in range(n)]
    out: list[Move] = []
    words = sorted({w for w, _ in s})
    for w in words:
        a = fresh_letter(s, w)
        if a is not None:
            out += [Move("child", side, w + a, 0, v) for v in range(n)]
    for w in words:
        i = max(j for ww, j in s if ww == w) + 1
        for j in range(i):
            for v in sorted(og.graph.adj[peb[(w, j)]]):
                out.append(Move("cont", side, w, i, v, j))
    return out


def duplicator_answers(c: GameConfiguration, move: Move) -> list[Move]:
    side = _other(move.side)
    og, peb = c.side(side)
    if move.kind == "cont":
        assert move.guard is not None
        guard = peb[(move.word, move.guard)]
        return [Move("cont", side, move.word, move.index, v, move.guard) for v in sorted(og.graph.adj[guard])]
    return [Move(move.kind, side, move.word, move.index, v) for v in range(og.n)]


def _sign(x: int) -> int:
    return (x > 0) - (x < 0)


def is_winning_config(c: GameConfiguration) -> bool:
    a, b = dict(c.pebbles_a), dict(c.pebbles_b)
    if set(a) != set(b):
        return False
    words = {w for w, _ in a}
    for w in words:
        keys = sorted(k for k in a if k[0] == w)
        pairs = [(a[k], b[k]) for k in keys]
        if not is_partial_isomorphism(c.og_a, c.og_b, pairs):
            return False
        if w:
            parent = w[:-1]
            ra, rb = c.og_a.rank, c.og_b.rank
            for k in a:
                if k[0] == parent:
                    if _sign(ra[a[(w, 0)]] - ra[a[k]]) != _sign(rb[b[(w, 0)]] - rb[b[k]]):
                        return False
    return True


# Exhaustive solver.


class ResourceCapExceeded(RuntimeError):
    def __init__(self, message: str, trace: list[str]):
        super().__init__(message)
        self.trace = trace


def _canonical(c: GameConfiguration) -> tuple:
    """Configuration key with sibling clusters renamed in a canonical order."""
    a, b = dict(c.pebbles_a), dict(c.pebbles_b)
    words = {w for w, _ in a}

    def signature(w: str) -> tuple:
        own = tuple((i, a[(w, i)], b[(w, i)]) for ww, i in sorted(a) if ww == w)
        kids = sorted(signature(x) for x in words if len(x) == len(w) + 1 and x.startswith(w))
        return (own, tuple(kids))

    return (signature("") if words else (), c.rounds_left)


@dataclass
class SolveResult:
    winner: str
    trace: list[str]
    nodes: int


def solve_game(
    og_a: OrderedGraph,
    og_b: OrderedGraph,
    k: int,
    initial: GameConfiguration | None = None,
    node_cap: int = 2_000_000,
) -> SolveResult:
    """Exact minimax; Duplicator wins iff every Spoiler move has an answer
    from which Duplicator keeps a winning configuration to the end."""
    root = initial if initial is not None else start(og_a, og_b, k)
    memo: dict[tuple, bool] = {}
    nodes = 0

    def duplicator_wins(c: GameConfiguration) -> bool:
        nonlocal nodes
        nodes += 1
        if nodes > node_cap:
            raise ResourceCapExceeded(f"node cap {node_cap} exceeded", [str(m) for m in c.history])
        if not is_winning_config(c):
            return False
        if c.rounds_left == 0:
            return True
        key = _canonical(c)
        if key in memo:
            return memo[key]
        out = True
        for side in ("A", "B"):
            for mv in legal_moves(c, side):
                if not any(duplicator_wins(c.play(mv, ans)) for ans in duplicator_answers(c, mv)):
                    out = False
                    break
            if not out:
                break
        memo[key] = out
        return out

    winner = "Duplicator" if duplicator_wins(root) else "Spoiler"
    return SolveResult(winner, _principal_line(root, duplicator_wins), nodes)


def _principal_line(c: GameConfiguration, duplicator_wins) -> list[str]:
    lines = []
    ply = 0
    while c.rounds_left > 0 and is_winning_config(c):
        dup = duplicator_wins(c)
        moves = [mv for side in ("A", "B") for mv in legal_moves(c, side)]
        if dup:
            mv = moves[0] if moves else None
            if mv is None:
                break
            ans = next(x for x in duplicator_answers(c, mv) if duplicator_wins(c.play(mv, x)))
        else:
            mv = next(m for m in moves if not any(duplicator_wins(c.play(m, x)) for x in duplicator_answers(c, m)))
            answers = duplicator_answers(c, mv)
            if not answers:
                ply += 1
                lines.append(f"ply {ply} spoiler {mv}")
                lines.append(f"ply {ply} duplicator none")
                break
            ans = answers[0]
        ply += 1
        lines.append(f"ply {ply} spoiler {mv}")
        lines.append(f"ply {ply} duplicator {ans}")
        c = c.play(mv, ans)
    return lines


# Verification of the explicit strategy along (k,F)-orders.


@dataclass
class StrategyReport:
    all_spoiler_plays_checked: int
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def lines(self) -> list[str]:
        out = [f"plays {self.all_spoiler_plays_checked}", f"failures {len(self.failures)}"]
        for trace, what in self.failures[:20]:
            out.append(f"failure {what} trace {' ; '.join(trace)}")
        return out


class _Side:
    def __init__(self, g, o: KfOrder):
        self.o = o
        self.og = o.ordered_graph(g)
        self.g = g
        self.safety = {r: safety_part(o, r) for r in range(o.k + 1)}
        self.ctx = {j: realised_contexts(self.og, j).per_vertex for j in range(o.k + 1)}

    def sorted_ball(self, v: int, radius: int) -> list[int]:
        return sorted(ball(self.g, v, max(radius, 0)), key=self.og.rank.__getitem__)


class StrategyFailure(Exception):
    pass


class _Strategy:
    """Duplicator's replies, case by case along the two (k,F)-orders."""

    @staticmethod
    def _mapped(mapping: Mapping[int, int], p: int) -> int:
        if p not in mapping:
            raise StrategyFailure(f"border bijection undefined on vertex {p}")
        return mapping[p]

    def __init__(self, sides: Mapping[str, _Side], phi: Mapping[int, int], k: int):
        self.sides = sides
        self.k = k
        self.maps = {"A": dict(phi), "B": {b: a for a, b in phi.items()}}

    def universal_pick(self, side: str, seg: str, depth: int, want) -> int:
        s = self.sides[side]
        for v in s.o.segment(seg):
            if s.ctx[depth][v] is want:
                return v
        raise StrategyFailure(f"missing universal witness in {seg} on side {side}")

    def reply(self, state: "_PlayState", mv: Move) -> int:
        k = self.k
        src, dst = self.sides[mv.side], self.sides[_other(mv.side)]
        r = state.rounds  # pebbles placed before this move
        p = mv.vertex
        mapping = self.maps[mv.side]
        if mv.kind == "cont":
            radius, root_src, root_dst = state.cluster_ball(mv.side, mv.word)
            bs, bd = src.sorted_ball(root_src, radius), dst.sorted_ball(root_dst, radius)
            if p not in bs or len(bs) != len(bd):
                raise StrategyFailure("continuation outside the matched ball")
            return bd[bs.index(p)]
        depth = k - r - 1
        first_universal = k * (k - r - 1) + 1
        if mv.kind == "root":
            if p in src.safety[0]:
                return self._mapped(mapping, p)
            return self.universal_pick(_other(mv.side), f"LU{first_universal}", depth, src.ctx[depth][p])
        if p in src.safety[r + 1]:
            return self._mapped(mapping, p)
        parent = mv.word[:-1]
        radius, root_src, root_dst = state.cluster_ball(mv.side, parent)
        bs, bd = src.sorted_ball(root_src, radius), dst.sorted_ball(root_dst, radius)
        rank_s, rank_d = src.og.rank, dst.og.rank
        rp = rank_s[p]
        if p in bs:
            return bd[bs.index(p)]
        if rank_s[bs[0]] < rp < rank_s[bs[-1]]:
            t = sum(1 for x in bs if rank_s[x] < rp)
            lo, hi = rank_d[bd[t - 1]], rank_d[bd[t]]
            sub_depth = radius - 1
            want = src.ctx[sub_depth][p]
            for x in dst.og.seq[lo + 1 : hi]:
                if x not in bd and dst.ctx[sub_depth][x] is want:
                    return x
            raise StrategyFailure("no matching element in the mirrored interval")
        seg = f"LU{first_universal}" if rp < rank_s[bs[0]] else f"RU{first_universal}"
        return self.universal_pick(_other(mv.side), seg, depth, src.ctx[depth][p])


@dataclass
class _PlayState:
    config: GameConfiguration
    rounds: int
    round_of: dict  # key -> round number (1-based) at which the pebble was placed
    k: int

    def cluster_ball(self, side: str, word: str) -> tuple[int, int, int]:
        """Radius ``k - l`` of the cluster's ball and its two root pebbles."""
        l = self.round_of[(word, 0)]
        a, b = dict(self.config.pebbles_a), dict(self.config.pebbles_b)
        src, dst = (a, b) if side == "A" else (b, a)
        return self.k - l, src[(word, 0)], dst[(word, 0)]


def _check_invariants(state: _PlayState, sides: Mapping[str, _Side], phi: Mapping[int, int], k: int) -> str | None:
    a, b = dict(state.config.pebbles_a), dict(state.config.pebbles_b)
    A, B = sides["A"], sides["B"]
    for key, l in state.round_of.items():
        pa, qb = a[key], b[key]
        ins_a, ins_b = pa in A.safety[l], qb in B.safety[l]
        if ins_a != ins_b or (ins_a and phi.get(pa) != qb):
            return f"S_{state.rounds}"
        if A.ctx[k - l][pa] is not B.ctx[k - l][qb]:
            return f"C_{state.rounds}"
    for (w, i), l in state.round_of.items():
        if i != 0:
            continue
        radius = k - l
        ba, bb = A.sorted_ball(a[(w, 0)], radius), B.sorted_ball(b[(w, 0)], radius)
        if len(ba) != len(bb):
            return f"I_{state.rounds}"
        pairs = list(zip(ba, bb))
        if not is_partial_isomorphism(A.og, B.og, pairs):
            return f"I_{state.rounds}"
        for (w2, j) in a:
            if w2 != w:
                continue
            pa, qb = a[(w2, j)], b[(w2, j)]
            if pa not in ba or qb not in bb or ba.index(pa) != bb.index(qb):
                return f"I_{state.rounds}"
        for (w2, j) in a:
            if j == 0 and len(w2) == len(w) + 1 and w2.startswith(w):
                if _position(A, ba, a[(w2, 0)]) != _position(B, bb, b[(w2, 0)]):
                    return f"I_{state.rounds}"
    return None


def _position(side: _Side, members: list[int], v: int) -> tuple[str, int]:
    if v in members:
        return ("E", members.index(v))
    rank = side.og.rank
    return ("I", sum(1 for x in members if rank[x] < rank[v]))


def verify_duplicator_strategy(gA, oA: KfOrder, gB, oB: KfOrder, phi: Mapping[int, int], k: int) -> StrategyReport:
    """Play every Spoiler line for ``k`` rounds against the case-split
    strategy and check its invariants after each round."""
    sides = {"A": _Side(gA, oA), "B": _Side(gB, oB)}
    strategy = _Strategy(sides, phi, k)
    report = StrategyReport(0)

    def walk(state: _PlayState) -> None:
        c = state.config
        if c.rounds_left == 0:
            report.all_spoiler_plays_checked += 1
            if not is_winning_config(c):
                report.failures.append(([str(m) for m in c.history], "winning-condition"))
            return
        for side in ("A", "B"):
            for mv in legal_moves(c, side):
                trace = [str(m) for m in c.history] + [str(mv)]
                try:
                    v = strategy.reply(state, mv)
                except StrategyFailure as e:
                    report.all_spoiler_plays_checked += 1
                    report.failures.append((trace, f"missing-witness: {e}"))
                    continue
                answer = Move(mv.kind, _other(side), mv.word, mv.index, v, mv.guard)
                if mv.kind == "cont":
                    _, peb = c.side(_other(side))
                    if v not in sides[_other(side)].g.adj[peb[(mv.word, mv.guard)]]:
                        report.all_spoiler_plays_checked += 1
                        report.failures.append((trace, "illegal-answer"))
                        continue
                nxt = c.play(mv, answer)
                rounds = dict(state.round_of)
                rounds[(mv.word, mv.index)] = state.rounds + 1
                new_state = _PlayState(nxt, state.rounds + 1, rounds, k)
                bad = _check_invariants(new_state, sides, phi, k)
                if bad is not None:
                    report.all_spoiler_plays_checked += 1
                    report.failures.append((trace, bad))
                    continue
                walk(new_state)

    walk(_PlayState(start(sides["A"].og, sides["B"].og, k), 0, {}, k))
    return report


def iter_configurations(c: GameConfiguration) -> Iterator[GameConfiguration]:
    """Every configuration reachable by legal play with Duplicator answering anywhere."""
    yield c
    if c.rounds_left == 0:
        return
    for side in ("A", "B"):
        for mv in legal_moves(c, side):
            for ans in duplicator_answers(c, mv):
                yield from iter_configurations(c.play(mv, ans))
