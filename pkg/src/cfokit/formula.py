"""CFO formula trees, surface syntax, structural validation and translations.

Variables are ``x[w,i]``: ``w`` is a cluster word over lowercase letters
(``eps`` is the empty word) and ``i`` the position inside the cluster.
``forall`` never appears in the tree; it is stored as ``!exists ... !``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Union


@dataclass(frozen=True, order=True)
class Var:
    word: str
    index: int

    def __str__(self):
        return f"x[{self.word or 'eps'},{self.index}]"

    @property
    def key(self) -> tuple[str, int]:
        return (self.word, self.index)


@dataclass(frozen=True, order=True)
class FoVar:
    """Plain first-order variable, used by the translation inputs."""

    name: str

    def __str__(self):
        return self.name


AnyVar = Union[Var, FoVar]


class Formula:
    __slots__ = ()

    def __and__(self, other: "Formula") -> "Formula":
        return And(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return Or(self, other)

    def __invert__(self) -> "Formula":
        return Not(self)

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


@dataclass(frozen=True)
class Colour(Formula):
    name: str
    var: AnyVar


@dataclass(frozen=True)
class Edge(Formula):
    left: AnyVar
    right: AnyVar


@dataclass(frozen=True)
class Compare(Formula):
    left: AnyVar
    op: str
    right: AnyVar

    def __post_init__(self):
        if self.op not in ("<", "=", ">"):
            raise ValueError(f"bad comparison {self.op!r}")


@dataclass(frozen=True)
class Not(Formula):
    body: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Exists(Formula):
    """Existential quantifier.

    ``guard`` is set for a guarded continuation; the edge atom itself must
    still be a top-level conjunct of ``body``.
    """

    var: AnyVar
    body: Formula
    guard: AnyVar | None = None


ATOMS = (TrueF, FalseF, Colour, Edge, Compare)
BINARY = {And: "&", Or: "|", Implies: "->"}
PRECEDENCE = {Implies: 1, Or: 2, And: 3}


def forall(var: AnyVar, body: Formula, guard: AnyVar | None = None) -> Formula:
    if guard is None:
        return Not(Exists(var, Not(body)))
    return Not(Exists(var, And(Edge(var, guard), Not(body)), guard))


def exists_adj(var: AnyVar, guard: AnyVar, body: Formula) -> Formula:
    """Guarded continuation with the edge atom prepended."""
    return Exists(var, And(Edge(var, guard), body), guard)


def conj(parts: Iterable[Formula]) -> Formula:
    parts = list(parts)
    if not parts:
        return TrueF()
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def disj(parts: Iterable[Formula]) -> Formula:
    parts = list(parts)
    if not parts:
        return FalseF()
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


def iff(a: Formula, b: Formula) -> Formula:
    return And(Implies(a, b), Implies(b, a))


def as_forall(f: Formula) -> tuple[AnyVar, Formula, AnyVar | None] | None:
    """Recognise the stored shape of a universal quantifier."""
    if not (isinstance(f, Not) and isinstance(f.body, Exists)):
        return None
    q = f.body
    if q.guard is None:
        if isinstance(q.body, Not):
            return q.var, q.body.body, None
        return None
    b = q.body
    if isinstance(b, And) and b.left == Edge(q.var, q.guard) and isinstance(b.right, Not):
        return q.var, b.right.body, q.guard
    return None


# ---------------------------------------------------------------- printing


def _needs_parens_as_operand(f: Formula) -> bool:
    return isinstance(f, Exists) or as_forall(f) is not None


def to_text(f: Formula) -> str:
    """Canonical surface form; ``parse_formula(to_text(f)) == f``."""
    fa = as_forall(f)
    if fa is not None:
        var, body, guard = fa
        adj = f" adj {guard}" if guard is not None else ""
        return f"forall {var}{adj} . {to_text(body)}"
    if isinstance(f, Exists):
        adj = f" adj {f.guard}" if f.guard is not None else ""
        return f"exists {f.var}{adj} . {to_text(f.body)}"
    if isinstance(f, Not):
        return "!" + _unit(f.body)
    if type(f) in BINARY:
        prec = PRECEDENCE[type(f)]
        left = _operand(f.left, prec, right=False)
        right = _operand(f.right, prec, right=True)
        return f"{left} {BINARY[type(f)]} {right}"
    return _atom(f)


def _operand(f: Formula, prec: int, right: bool) -> str:
    if _needs_parens_as_operand(f):
        return f"({to_text(f)})"
    if type(f) in PRECEDENCE:
        p = PRECEDENCE[type(f)]
        if p < prec or (right and p == prec):
            return f"({to_text(f)})"
    return to_text(f)


def _unit(f: Formula) -> str:
    if isinstance(f, ATOMS):
        return _atom(f)
    if isinstance(f, Not) and as_forall(f) is None:
        return "!" + _unit(f.body)
    return f"({to_text(f)})"


def _atom(f: Formula) -> str:
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Colour):
        return f"{f.name}({f.var})"
    if isinstance(f, Edge):
        return f"E({f.left},{f.right})"
    if isinstance(f, Compare):
        return f"{f.left} {f.op} {f.right}"
    raise TypeError(f"not a formula node: {f!r}")


# ----------------------------------------------------------------- parsing


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at position {pos}")
        self.pos = pos


_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<var>x\[\s*(?P<word>[a-z]+)\s*,\s*(?P<idx>\d+)\s*\])"
    r"|(?P<op>->|[!&|().,<=>])"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r")"
)
KEYWORDS = {"exists", "forall", "adj", "true", "false"}


def _tokenize(text: str) -> list[tuple[str, object, int]]:
    toks = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos)
        start = m.start(m.lastgroup) if m.lastgroup else pos
        if m.group("var"):
            word = m.group("word")
            toks.append(("var", Var("" if word == "eps" else word, int(m.group("idx"))), start))
        elif m.group("op"):
            toks.append(("op", m.group("op"), start))
        else:
            toks.append(("ident", m.group("ident"), start))
        pos = m.end()
    toks.append(("end", None, len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, colours: Iterable[str] | None):
        self.toks = _tokenize(text)
        self.i = 0
        self.colours = set(colours) if colours is not None else None

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind: str, value=None):
        t = self.take()
        if t[0] != kind or (value is not None and t[1] != value):
            want = value if value is not None else kind
            raise FormulaSyntaxError(f"expected {want!r}, found {t[1]!r}", t[2])
        return t

    def at_quant(self) -> bool:
        t = self.peek()
        return t[0] == "ident" and t[1] in ("exists", "forall")

    def formula(self) -> Formula:
        if self.at_quant():
            return self.quant()
        return self.binary(1)

    def quant(self) -> Formula:
        kind = self.take()[1]
        var = self.expect("var")[1]
        guard = None
        t = self.peek()
        if t[0] == "ident" and t[1] == "adj":
            self.take()
            guard = self.expect("var")[1]
        self.expect("op", ".")
        body = self.formula()
        if kind == "exists":
            return Exists(var, body, guard)
        return forall(var, body, guard)

    _OPS = {1: ("->", Implies), 2: ("|", Or), 3: ("&", And)}

    def binary(self, prec: int) -> Formula:
        if prec > 3:
            return self.unit()
        sym, node = self._OPS[prec]
        left = self.binary(prec + 1)
        while self.peek() == ("op", sym, self.peek()[2]):
            self.take()
            if self.at_quant():
                # A trailing quantifier extends to the end of the group.
                left = node(left, self.quant())
                break
            left = node(left, self.binary(prec + 1))
        return left

    def unit(self) -> Formula:
        t = self.peek()
        if t[0] == "op" and t[1] == "!":
            self.take()
            if self.at_quant():
                return Not(self.quant())
            return Not(self.unit())
        if t[0] == "op" and t[1] == "(":
            self.take()
            f = self.formula()
            self.expect("op", ")")
            return f
        return self.atom()

    def atom(self) -> Formula:
        t = self.take()
        if t[0] == "var":
            op = self.take()
            if op[0] != "op" or op[1] not in ("<", "=", ">"):
                raise FormulaSyntaxError(f"expected comparison, found {op[1]!r}", op[2])
            right = self.expect("var")[1]
            return Compare(t[1], op[1], right)
        if t[0] == "ident":
            if t[1] == "true":
                return TrueF()
            if t[1] == "false":
                return FalseF()
            if t[1] in KEYWORDS:
                raise FormulaSyntaxError(f"unexpected keyword {t[1]!r}", t[2])
            self.expect("op", "(")
            a = self.expect("var")[1]
            if t[1] == "E":
                self.expect("op", ",")
                b = self.expect("var")[1]
                self.expect("op", ")")
                return Edge(a, b)
            self.expect("op", ")")
            if self.colours is not None and t[1] not in self.colours:
                raise FormulaSyntaxError(f"unknown colour {t[1]!r}", t[2])
            return Colour(t[1], a)
        raise FormulaSyntaxError(f"unexpected token {t[1]!r}", t[2])


def parse_formula(text: str, colours: Iterable[str] | None = None) -> Formula:
    p = _Parser(text, colours)
    f = p.formula()
    t = p.peek()
    if t[0] != "end":
        raise FormulaSyntaxError(f"trailing input {t[1]!r}", t[2])
    return f


# --------------------------------------------------------------- structure


def children(f: Formula) -> list[tuple[str, Formula]]:
    if isinstance(f, Not):
        return [("body", f.body)]
    if isinstance(f, (And, Or, Implies)):
        return [("left", f.left), ("right", f.right)]
    if isinstance(f, Exists):
        return [("body", f.body)]
    return []


def subformulas(f: Formula) -> Iterator[Formula]:
    yield f
    for _, c in children(f):
        yield from subformulas(c)


def atom_vars(f: Formula) -> tuple[AnyVar, ...]:
    if isinstance(f, Colour):
        return (f.var,)
    if isinstance(f, (Edge, Compare)):
        return (f.left, f.right)
    return ()


def quantifier_rank(f: Formula) -> int:
    if isinstance(f, Exists):
        return 1 + quantifier_rank(f.body)
    return max((quantifier_rank(c) for _, c in children(f)), default=0)


def free_vars(f: Formula) -> set:
    if isinstance(f, Exists):
        out = free_vars(f.body)
        out.discard(f.var)
        if f.guard is not None:
            out.add(f.guard)
        return out
    out = set(atom_vars(f))
    for _, c in children(f):
        out |= free_vars(c)
    return out


def is_sentence(f: Formula) -> bool:
    return not free_vars(f)


IndexSet = frozenset  # of (word, index) pairs


def is_valid_index_set(s: Iterable[tuple[str, int]]) -> bool:
    s = set(s)
    for w, i in s:
        if any((w, j) not in s for j in range(i)):
            return False
        if w and (w[:-1], 0) not in s:
            return False
    return True


def index_closure(keys: Iterable[tuple[str, int]]) -> frozenset:
    """Smallest valid index set containing ``keys``."""
    out: set[tuple[str, int]] = set()
    for w, i in keys:
        out.update((w, j) for j in range(i + 1))
        for p in range(len(w)):
            out.add((w[:p], 0))
    return frozenset(out)


def free_index_set(f: Formula) -> frozenset:
    fv = free_vars(f)
    if any(not isinstance(v, Var) for v in fv):
        raise ValueError("free_index_set needs CFO variables")
    return index_closure(v.key for v in fv)


def next_index(s: Iterable[tuple[str, int]], word: str) -> int:
    return sum(1 for w, _ in s if w == word)


def top_conjuncts(f: Formula) -> list[Formula]:
    if isinstance(f, And):
        return top_conjuncts(f.left) + top_conjuncts(f.right)
    return [f]


# -------------------------------------------------------------- validation

RULES = {
    "ambient": "ambient index set is not valid",
    "scope": "variable is not in the current index set",
    "root-intro": "root introduction needs an empty index set",
    "child-intro": "child introduction needs the parent root and a fresh child cluster",
    "guard": "continuation must be guarded by an edge to an earlier variable of its cluster",
    "index": "continuation index must be the smallest unused index of its cluster",
    "edge-cluster": "edge atom between different clusters",
    "compare-cluster": "comparison between clusters that are not parent and child root",
    "namespace": "variable index exceeds rank minus cluster depth minus one",
    "variable-kind": "plain first-order variable in a CFO formula",
}


@dataclass(frozen=True)
class Violation:
    rule: str
    path: str
    message: str

    def __str__(self):
        return f"RULE {self.rule} AT {self.path}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()
    warnings: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def rules(self) -> set[str]:
        return {v.rule for v in self.violations}

    def lines(self) -> list[str]:
        return [str(v) for v in self.violations] + ["WARN " + str(v) for v in self.warnings]


def _cluster_pair_ok(a: Var, b: Var) -> bool:
    if a.word == b.word:
        return True
    for child, parent in ((a, b), (b, a)):
        if child.index == 0 and len(child.word) == len(parent.word) + 1 and child.word[:-1] == parent.word:
            return True
    return False


def validate(f: Formula, ambient: Iterable[tuple[str, int]] = frozenset()) -> ValidationReport:
    """Check the quantifier forms, cluster rules and the namespace bound."""
    amb = frozenset(ambient)
    out: list[Violation] = []
    warn: list[Violation] = []
    if not is_valid_index_set(amb):
        out.append(Violation("ambient", "$", RULES["ambient"] + f": {sorted(amb)}"))

    def bad(rule: str, path: str, detail: str) -> None:
        out.append(Violation(rule, path, f"{RULES[rule]} ({detail})"))

    def check_var(v: AnyVar, s: frozenset, path: str) -> bool:
        if not isinstance(v, Var):
            bad("variable-kind", path, str(v))
            return False
        if v.key not in s:
            bad("scope", path, str(v))
            return False
        return True

    def walk(g: Formula, s: frozenset, path: str) -> None:
        if isinstance(g, Exists):
            v = g.var
            if not isinstance(v, Var):
                bad("variable-kind", path, str(v))
                return
            if g.guard is None:
                if v.word == "" and v.index == 0:
                    if s:
                        bad("root-intro", path, f"index set has {len(s)} entries")
                elif v.index == 0:
                    parent = (v.word[:-1], 0)
                    if parent not in s or v.key in s:
                        bad("child-intro", path, str(v))
                else:
                    bad("guard", path, f"{v} has no guard")
                    if v.index != next_index(s, v.word):
                        bad("index", path, f"{v}, expected index {next_index(s, v.word)}")
            else:
                gd = g.guard
                if not isinstance(gd, Var) or gd.word != v.word or gd.key not in s:
                    bad("guard", path, f"{v} guarded by {gd}")
                elif Edge(v, gd) not in top_conjuncts(g.body) and Edge(gd, v) not in top_conjuncts(g.body):
                    bad("guard", path, f"body lacks E({v},{gd})")
                if v.index == 0 or v.index != next_index(s, v.word):
                    bad("index", path, f"{v}, expected index {next_index(s, v.word)}")
            walk(g.body, s | {v.key}, path + ".body")
            return
        vs = atom_vars(g)
        if vs:
            okv = [check_var(v, s, path) for v in vs]
            if len(vs) == 2 and all(okv):
                a, b = vs
                if isinstance(g, Edge) and a.word != b.word:
                    bad("edge-cluster", path, f"E({a},{b})")
                if isinstance(g, Compare) and not _cluster_pair_ok(a, b):
                    bad("compare-cluster", path, f"{a} {g.op} {b}")
        for name, c in children(g):
            walk(c, s, f"{path}.{name}")

    walk(f, amb, "$")

    # Namespace bound: an error without an ambient index set, a warning otherwise.
    k = quantifier_rank(f)
    sentence = not amb
    seen: set = set()
    for g in subformulas(f):
        vs = list(atom_vars(g))
        if isinstance(g, Exists):
            vs.append(g.var)
        for v in vs:
            if isinstance(v, Var) and v not in seen:
                seen.add(v)
                if v.index > k - len(v.word) - 1:
                    viol = Violation(
                        "namespace", "$", f"{RULES['namespace']} ({v}: {v.index} > {k}-{len(v.word)}-1)"
                    )
                    (out if sentence else warn).append(viol)
    return ValidationReport(tuple(out), tuple(warn))


# ------------------------------------------------------------ translations


class TranslationError(ValueError):
    pass


def _subst(f: Formula, env: dict) -> Formula:
    def sv(v):
        return env.get(v, v)

    if isinstance(f, Colour):
        return Colour(f.name, sv(f.var))
    if isinstance(f, Edge):
        return Edge(sv(f.left), sv(f.right))
    if isinstance(f, Compare):
        return Compare(sv(f.left), f.op, sv(f.right))
    if isinstance(f, Not):
        return Not(_subst(f.body, env))
    if type(f) in BINARY:
        return type(f)(_subst(f.left, env), _subst(f.right, env))
    if isinstance(f, Exists):
        return Exists(sv(f.var), _subst(f.body, env), None if f.guard is None else sv(f.guard))
    return f


def fo_to_cfo_bounded_diameter(fo: Formula, delta: int) -> Formula:
    """Translate a plain FO sentence without order atoms for graphs of diameter at most ``delta``.

    Every quantified vertex is reached from the root by a guarded path of
    length at most ``delta`` inside the root cluster.
    """
    if delta < 0:
        raise TranslationError("diameter bound must be non-negative")
    root = Var("", 0)

    def tr(f: Formula, env: dict, used: int) -> Formula:
        if isinstance(f, Compare) and f.op != "=":
            raise TranslationError("order atoms are not allowed in the input")
        if isinstance(f, ATOMS):
            return _subst(f, env)
        if isinstance(f, Not):
            return Not(tr(f.body, env, used))
        if type(f) in BINARY:
            return type(f)(tr(f.left, env, used), tr(f.right, env, used))
        if isinstance(f, Exists):
            options = [tr(f.body, {**env, f.var: root}, used)]
            for j in range(1, delta + 1):
                path = [Var("", used + t) for t in range(j)]
                inner = tr(f.body, {**env, f.var: path[-1]}, used + j)
                for t in range(j - 1, -1, -1):
                    prev = root if t == 0 else path[t - 1]
                    inner = exists_adj(path[t], prev, inner)
                options.append(inner)
            return disj(options)
        raise TypeError(f"unexpected node {f!r}")

    if free_vars(fo):
        raise TranslationError("input must be a sentence")
    return Exists(root, tr(fo, {}, 1))


def relativize_to_root(fo: Formula, guard: type = Edge) -> Formula:
    """Restrict every quantifier of ``fo`` to elements related to ``x[eps,0]``.

    Each bound variable becomes the next free index of the root cluster,
    assigned outside-in. Returns an open formula in the root variable.
    """
    root = Var("", 0)

    def tr(f: Formula, env: dict, used: int) -> Formula:
        fa = as_forall(f)
        if fa is not None and fa[2] is None:
            var, body, _ = fa
            x = Var("", used)
            return forall(x, tr(body, {**env, var: x}, used + 1), guard=root)
        if isinstance(f, Exists):
            x = Var("", used)
            return exists_adj(x, root, tr(f.body, {**env, f.var: x}, used + 1))
        if isinstance(f, ATOMS):
            return _subst(f, env)
        if isinstance(f, Not):
            return Not(tr(f.body, env, used))
        if type(f) in BINARY:
            return type(f)(tr(f.left, env, used), tr(f.right, env, used))
        raise TypeError(f"unexpected node {f!r}")

    if guard is not Edge:
        raise TranslationError("only the edge relation can serve as guard")
    return tr(fo, {}, 1)
