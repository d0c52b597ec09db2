"""Command-line entry point. Output is ``KEY VALUE`` line records."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from typing import Sequence

from . import corpus
from .contexts import context_elements, realised_contexts, realised_outer_contexts
from .evaluator import (
    EvaluationError,
    agree_on_corpus,
    check_invariance_exhaustive,
    check_invariance_sampled,
    evaluate,
)
from .formula import FormulaSyntaxError, parse_formula, to_text
from .fpt import InvarianceViolation, fpt_report
from .game import ResourceCapExceeded, solve_game, verify_duplicator_strategy
from .graph import ColouredGraph, GraphError, OrderedGraph, dump_graph, load_graph
from .order_builder import (
    BuildError,
    TransferError,
    build_kf_order,
    check_kf_order,
    dump_kf_order,
    find_border_bijection,
    load_kf_order,
    plan_kf_order,
    transfer_order,
)
from .rng import SplitMix64, default_seed

EXIT_TRUE, EXIT_FALSE, EXIT_USAGE, EXIT_CAP = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _graph(path: str) -> tuple[ColouredGraph, tuple[int, ...] | None]:
    try:
        return load_graph(_read(path))
    except GraphError as e:
        raise UsageError(f"{path}: {e}") from None


def _order(g: ColouredGraph, stored: tuple[int, ...] | None, choice: str | None, seed: int) -> OrderedGraph:
    """``choice`` is id, file, random or a comma-separated vertex list; the
    default is the file's order line when present, else the id order."""
    if choice is None:
        choice = "file" if stored is not None else "id"
    if choice == "id":
        return OrderedGraph.identity(g)
    if choice == "file":
        if stored is None:
            raise UsageError("graph file has no order line")
        return OrderedGraph(g, stored)
    if choice == "random":
        return OrderedGraph(g, tuple(SplitMix64(seed).permutation(g.n)))
    try:
        return OrderedGraph(g, tuple(int(x) for x in choice.split(",")))
    except (ValueError, GraphError) as e:
        raise UsageError(f"bad order {choice!r}: {e}") from None


def _formula(path: str, g: ColouredGraph | None = None):
    text = "\n".join(line for line in _read(path).splitlines() if not line.lstrip().startswith("#"))
    try:
        return parse_formula(text, g.colours if g is not None else None)
    except FormulaSyntaxError as e:
        raise UsageError(f"{path}: {e}") from None


def _yes(b: bool) -> str:
    return "true" if b else "false"


def _emit(lines: Sequence[str]) -> None:
    for line in lines:
        print(line)


# Pipeline.


@dataclass
class PipelineReport:
    stages: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return bool(self.stages) and all(ok for _, ok, _ in self.stages)

    def add(self, name: str, ok: bool, detail: str = "") -> bool:
        self.stages.append((name, ok, detail))
        return ok

    def lines(self) -> list[str]:
        out = []
        for name, ok, detail in self.stages:
            out.append(f"stage {name} {'pass' if ok else 'fail'}" + (f" {detail}" if detail else ""))
        out.append(f"pipeline {'pass' if self.ok else 'fail'}")
        return out


def pipeline_main_theorem(
    gA: ColouredGraph,
    gB: ColouredGraph,
    k: int,
    corpus_size: int = 200,
    seed: int = 0,
    context_source: str = "synthesized",
) -> PipelineReport:
    """Build a (k,F)-order on A, carry it to B, replay the strategy and
    cross-check both ordered graphs on a sentence corpus."""
    rep = PipelineReport()
    try:
        plan = plan_kf_order(gA, k, context_source, seed=seed)
    except BuildError as e:
        rep.add("frequency", False, str(e))
        return rep
    rep.add("frequency", True, f"threshold {plan.fts.t} frequent_types {len(plan.fts.F)}")
    try:
        oA, build = build_kf_order(gA, k, context_source, seed=seed)
    except BuildError as e:
        rep.add("build", False, f"{e.kind}: {e}")
        return rep
    rep.add("build", True, f"border_size {build.border_size}")
    found = find_border_bijection(gA, oA, gB)
    if not rep.add("bijection", found.bijection is not None, found.reason or f"nodes {found.nodes}"):
        return rep
    phi = found.bijection
    try:
        oB = transfer_order(gA, oA, gB, phi)
    except TransferError as e:
        rep.add("transfer", False, str(e))
        return rep
    rep.add("transfer", True, f"mapped {len(phi)}")
    check = check_kf_order(gB, oB, build.contexts)
    failed = [line.split()[0] for line in check.lines() if line.endswith(" false")]
    if not rep.add("check", check.ok, "" if check.ok else "failed " + ",".join(failed)):
        return rep
    strategy = verify_duplicator_strategy(gA, oA, gB, oB, phi, k)
    detail = f"plays {strategy.all_spoiler_plays_checked} failures {len(strategy.failures)}"
    if not rep.add("strategy", strategy.ok, detail):
        return rep
    sentences = corpus.gen_cfo_sentences(k, sorted(set(gA.colours) | set(gB.colours)), corpus_size, seed, anchors=False)
    agree, witness = agree_on_corpus(oA.ordered_graph(gA), oB.ordered_graph(gB), sentences)
    rep.add("corpus", agree, f"sentences {len(sentences)}" + ("" if agree else f" witness {to_text(witness)}"))
    return rep


# Subcommands.


def cmd_eval(a) -> int:
    g, stored = _graph(a.graph)
    f = _formula(a.formula, g)
    og = _order(g, stored, a.order, a.seed)
    value = evaluate(og, {}, f, restrict_guards=True)
    _emit([f"value {_yes(value)}"])
    return EXIT_TRUE if value else EXIT_FALSE


def cmd_invariance(a) -> int:
    g, _ = _graph(a.graph)
    f = _formula(a.formula, g)
    if a.exhaustive:
        v = check_invariance_exhaustive(g, f, force=a.force)
    else:
        v = check_invariance_sampled(g, f, a.trials, a.seed)
    lines = [f"mode {v.mode}", f"orders_tested {v.orders_tested}", f"invariant {_yes(v.invariant)}"]
    if v.value is not None:
        lines.append(f"value {_yes(v.value)}")
    if v.witness is not None:
        lines += ["witness_a " + ",".join(map(str, v.witness[0])), "witness_b " + ",".join(map(str, v.witness[1]))]
    _emit(lines)
    return EXIT_TRUE if v.invariant else EXIT_FALSE


def cmd_contexts(a) -> int:
    g, stored = _graph(a.graph)
    og = _order(g, stored, a.order, a.seed)
    table = realised_outer_contexts(og, a.depth) if a.outer else realised_contexts(og, a.depth)
    lines = []
    for v in range(g.n):
        size = len(context_elements(og, v, a.depth))
        lines.append(f"vertex {v} ctx {table.per_vertex[v].digest()} size {size}")
    lines.append(f"realised {len(table.realised)}")
    _emit(lines)
    return EXIT_TRUE


def cmd_build_order(a) -> int:
    g, _ = _graph(a.graph)
    try:
        o, rep = build_kf_order(g, a.depth, a.source, budget=a.node_budget, seed=a.seed)
    except BuildError as e:
        lines = [f"error {e.kind}", f"message {e}"]
        if e.report is not None:
            lines += e.report.lines()
        _emit(lines)
        return EXIT_FALSE
    lines = rep.lines() + (rep.check.lines() if rep.check else [])
    if a.emit:
        with open(a.emit, "w", encoding="utf-8") as fh:
            fh.write(dump_kf_order(o))
        lines.append(f"written {a.emit}")
    else:
        lines += dump_kf_order(o).splitlines()
    _emit(lines)
    return EXIT_TRUE


def _load_order(g: ColouredGraph, path: str, k: int, source: str, seed: int, budget: int):
    plan = plan_kf_order(g, k, source, budget=budget, seed=seed)
    try:
        return load_kf_order(_read(path), k, plan.fts), plan
    except (GraphError, ValueError) as e:
        raise UsageError(f"{path}: {e}") from None


def cmd_check_order(a) -> int:
    g, _ = _graph(a.graph)
    try:
        o, plan = _load_order(g, a.order_file, a.depth, a.source, a.seed, a.node_budget)
    except BuildError as e:
        _emit([f"error {e.kind}", f"message {e}"])
        return EXIT_FALSE
    rep = check_kf_order(g, o, plan.tiers)
    _emit(rep.lines() + [f"accepted {_yes(rep.ok)}"])
    return EXIT_TRUE if rep.ok else EXIT_FALSE


def cmd_game_solve(a) -> int:
    ga, sa = _graph(a.graph_a)
    gb, sb = _graph(a.graph_b)
    oa, ob = _order(ga, sa, a.order_a, a.seed), _order(gb, sb, a.order_b, a.seed)
    try:
        res = solve_game(oa, ob, a.rounds, node_cap=a.node_budget)
    except ResourceCapExceeded as e:
        _emit(["error resource-cap", f"message {e}"] + [f"partial {t}" for t in e.trace])
        return EXIT_CAP
    _emit([f"winner {res.winner}", f"nodes {res.nodes}"] + res.trace)
    return EXIT_TRUE if res.winner == "Duplicator" else EXIT_FALSE


def _bijection(path: str) -> dict[int, int]:
    out = {}
    for lineno, raw in enumerate(_read(path).splitlines(), start=1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        if len(parts) != 2:
            raise UsageError(f"{path}: line {lineno}: expected 'a-id b-id'")
        try:
            out[int(parts[0])] = int(parts[1])
        except ValueError:
            raise UsageError(f"{path}: line {lineno}: ids must be integers") from None
    return out


def cmd_game_verify(a) -> int:
    ga, _ = _graph(a.graph_a)
    gb, _ = _graph(a.graph_b)
    try:
        if a.order_file_a:
            oA, _ = _load_order(ga, a.order_file_a, a.rounds, "synthesized", a.seed, a.node_budget)
        else:
            oA, _ = build_kf_order(ga, a.rounds, seed=a.seed)
        if a.bijection:
            phi = _bijection(a.bijection)
        else:
            found = find_border_bijection(ga, oA, gb, node_limit=a.node_budget)
            if found.bijection is None:
                _emit(["error no-bijection", f"message {found.reason}"])
                return EXIT_CAP if not found.exhausted else EXIT_FALSE
            phi = found.bijection
        oB = load_kf_order(_read(a.order_file_b), a.rounds, oA.F) if a.order_file_b else transfer_order(ga, oA, gb, phi)
    except (BuildError, TransferError) as e:
        _emit([f"error {type(e).__name__}", f"message {e}"])
        return EXIT_FALSE
    rep = verify_duplicator_strategy(ga, oA, gb, oB, phi, a.rounds)
    _emit(rep.lines() + [f"verified {_yes(rep.ok)}"])
    return EXIT_TRUE if rep.ok else EXIT_FALSE


def cmd_fpt(a) -> int:
    g, _ = _graph(a.graph)
    f = _formula(a.formula, g)
    try:
        rep = fpt_report(g, f, paranoid=a.paranoid, seed=a.seed)
    except InvarianceViolation as e:
        _emit(["error invariance-violation", f"message {e}"])
        return EXIT_FALSE
    lines = [f"value {_yes(rep.value)}", f"leaves {rep.leaves}"]
    if rep.paranoid_value is not None:
        lines.append(f"paranoid_value {_yes(rep.paranoid_value)}")
    if a.timing:
        for name in ("contexts", "mc"):
            lines.append(f"phase {name} ms {int(round(rep.timings_ms.get(name, 0.0)))}")
    _emit(lines)
    return EXIT_TRUE if rep.value else EXIT_FALSE


def cmd_gen(a) -> int:
    colours = [c for c in (a.colours or "").split(",") if c]
    if a.kind == "cycle":
        g = corpus.cycle(a.n)
    elif a.kind == "path":
        g = corpus.path(a.n)
    elif a.kind == "boolean-algebra":
        g = corpus.gen_boolean_algebra(a.set_size)
    else:
        g = corpus.gen_random_bounded_degree(a.n, a.d, colours, a.seed)
    sys.stdout.write(dump_graph(g))
    return EXIT_TRUE


def cmd_formulas(a) -> int:
    f = corpus.NAMED[a.name]()
    print(to_text(f))
    return EXIT_TRUE


def cmd_pipeline(a) -> int:
    ga, _ = _graph(a.graph_a)
    gb, _ = _graph(a.graph_b)
    rep = pipeline_main_theorem(ga, gb, a.depth, a.corpus, a.seed, a.source)
    _emit(rep.lines())
    return EXIT_TRUE if rep.ok else EXIT_FALSE


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=lambda s: int(s, 0), default=None, help="seed (default: CFOKIT_SEED)")
    common.add_argument("--node-budget", type=int, default=2_000_000, help="search/enumeration cap")
    common.add_argument("--jobs", type=int, default=1, help="worker cap (runs are single-threaded)")

    p = argparse.ArgumentParser(prog="cfokit", description="Cluster first-order logic toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, parent=sub):
        sp = parent.add_parser(name, parents=[common], help=help_text)
        sp.set_defaults(func=func)
        return sp

    sp = add("eval", cmd_eval, "evaluate a sentence under one order")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--formula", required=True)
    sp.add_argument("--order")

    sp = add("invariance", cmd_invariance, "test order invariance")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--formula", required=True)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--exhaustive", action="store_true")
    sp.add_argument("--force", action="store_true", help="allow exhaustive runs beyond the size guard")

    sp = add("contexts", cmd_contexts, "print per-vertex context digests")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--order")
    sp.add_argument("--depth", type=int, required=True)
    sp.add_argument("--outer", action="store_true")

    sp = add("build-order", cmd_build_order, "construct and check a (k,F)-order")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--depth", type=int, required=True)
    sp.add_argument("--source", choices=("synthesized", "realised-seeded"), default="synthesized")
    sp.add_argument("--emit")

    sp = add("check-order", cmd_check_order, "check a stored (k,F)-order")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--order-file", required=True)
    sp.add_argument("--depth", type=int, required=True)
    sp.add_argument("--source", choices=("synthesized", "realised-seeded"), default="synthesized")

    game = sub.add_parser("game", help="cluster EF games").add_subparsers(dest="game_command", required=True)
    sp = add("solve", cmd_game_solve, "exhaustive game solver", game)
    for side in ("a", "b"):
        sp.add_argument(f"--graph-{side}", required=True)
        sp.add_argument(f"--order-{side}")
    sp.add_argument("--rounds", type=int, required=True)
    sp = add("verify-strategy", cmd_game_verify, "replay the order-based Duplicator strategy", game)
    sp.add_argument("--graph-a", required=True)
    sp.add_argument("--graph-b", required=True)
    sp.add_argument("--bijection", help="'a b' lines; searched for when omitted")
    sp.add_argument("--order-file-a")
    sp.add_argument("--order-file-b")
    sp.add_argument("--rounds", type=int, required=True)

    sp = add("fpt-check", cmd_fpt, "model-check an order-invariant sentence")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--formula", required=True)
    sp.add_argument("--paranoid", action="store_true")
    sp.add_argument("--timing", action="store_true")

    sp = add("gen", cmd_gen, "generate a graph file")
    sp.add_argument("kind", choices=("cycle", "path", "boolean-algebra", "random"))
    sp.add_argument("--n", type=int, default=10)
    sp.add_argument("--d", type=int, default=3)
    sp.add_argument("--set-size", type=int, default=2)
    sp.add_argument("--colours", default="")

    formulas = sub.add_parser("formulas", help="named formulas").add_subparsers(dest="formulas_command", required=True)
    sp = add("emit", cmd_formulas, "print a named formula", formulas)
    sp.add_argument("name", choices=sorted(corpus.NAMED))

    sp = add("pipeline", cmd_pipeline, "order construction, transfer and strategy check")
    sp.add_argument("--graph-a", required=True)
    sp.add_argument("--graph-b", required=True)
    sp.add_argument("--depth", type=int, default=1)
    sp.add_argument("--corpus", type=int, default=200)
    sp.add_argument("--source", choices=("synthesized", "realised-seeded"), default="synthesized")
    return p


def _config_line(a: argparse.Namespace) -> str:
    skip = {"func"}
    parts = [f"{k}={v}" for k, v in sorted(vars(a).items()) if k not in skip and v is not None]
    return "config " + " ".join(parts)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_USAGE
    if a.seed is None:
        a.seed = default_seed()
    # Generated files stay loadable, so their config line is a comment.
    print(("# " if a.func in (cmd_gen, cmd_formulas) else "") + _config_line(a))
    try:
        code = a.func(a)
    except UsageError as e:
        print("error usage")
        print(f"message {e}")
        return EXIT_USAGE
    except (EvaluationError, GraphError, ValueError) as e:
        print("error input")
        print(f"message {e}")
        return EXIT_USAGE
    except (ResourceCapExceeded, MemoryError, RecursionError) as e:
        print("error resource-cap")
        print(f"message {e}")
        return EXIT_CAP
    return code


if __name__ == "__main__":
    sys.exit(main())
