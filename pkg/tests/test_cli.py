import re

import pytest

from cfokit.cli import main
from cfokit.corpus import cycle, gen_boolean_algebra, gurevich_phi, path
from cfokit.formula import to_text
from cfokit.graph import dump_graph

LINE = re.compile(r"^[a-z_][a-z0-9_-]*( \S.*)?$")


@pytest.fixture
def files(tmp_path):
    out = {}
    for name, g in {"c200": cycle(200), "c201": cycle(201), "p200": path(200), "c6": cycle(6),
                    "c30": cycle(30), "c31": cycle(31), "ba2": gen_boolean_algebra(2)}.items():
        p = tmp_path / f"{name}.g"
        p.write_text(dump_graph(g))
        out[name] = str(p)
    f = tmp_path / "gurevich.f"
    f.write_text(to_text(gurevich_phi()) + "\n")
    out["gurevich"] = str(f)
    return out


def run(capsys, *argv):
    code = main(list(argv))
    text = capsys.readouterr().out
    return code, text.splitlines()


def records(lines):
    return {line.split(" ", 1)[0]: line.split(" ", 1)[1] if " " in line else "" for line in lines}


def test_eval_true_exits_zero(capsys, files):
    code, lines = run(capsys, "eval", "--graph", files["ba2"], "--formula", files["gurevich"])
    assert code == 0 and lines[0].startswith("config ") and "value true" in lines


def test_unknown_flag_is_usage_error(capsys, files):
    assert main(["eval", "--graph", files["ba2"], "--bogus"]) == 2
    assert main(["eval", "--graph", "/nonexistent", "--formula", files["gurevich"]]) == 2


def test_solver_cap_exits_three(capsys, files):
    code, lines = run(capsys, "game", "solve", "--graph-a", files["c30"], "--graph-b", files["c31"],
                      "--rounds", "3", "--node-budget", "100")
    assert code == 3 and "error resource-cap" in lines


def test_pipeline_cycle_pair(capsys, files):
    code, lines = run(capsys, "pipeline", "--graph-a", files["c200"], "--graph-b", files["c201"])
    stages = [line.split()[1:3] for line in lines if line.startswith("stage ")]
    assert code == 0
    assert stages == [[s, "pass"] for s in ("frequency", "build", "bijection", "transfer", "check", "strategy", "corpus")]


def test_pipeline_cycle_to_path_fails_at_bijection(capsys, files):
    code, lines = run(capsys, "pipeline", "--graph-a", files["c200"], "--graph-b", files["p200"])
    assert code == 1
    assert any(line.startswith("stage bijection fail") for line in lines)


def test_pipeline_self_pair(capsys, files):
    code, _ = run(capsys, "pipeline", "--graph-a", files["c200"], "--graph-b", files["c200"])
    assert code == 0


def test_build_and_check_round_trip(capsys, files, tmp_path):
    order = str(tmp_path / "o.txt")
    code, lines = run(capsys, "build-order", "--graph", files["c200"], "--depth", "1", "--emit", order)
    assert code == 0 and records(lines)["border_size"] == "10"
    code, lines = run(capsys, "check-order", "--graph", files["c200"], "--order-file", order, "--depth", "1")
    assert code == 0 and "accepted true" in lines


def test_build_richness_failure(capsys, files):
    code, lines = run(capsys, "build-order", "--graph", files["c6"], "--depth", "2")
    assert code == 1 and "error richness" in lines


def test_verify_strategy_with_searched_bijection(capsys, files):
    code, lines = run(capsys, "game", "verify-strategy", "--graph-a", files["c200"], "--graph-b", files["c201"],
                      "--rounds", "1")
    assert code == 0 and "failures 0" in lines


def test_fpt_timing_lines(capsys, files):
    code, lines = run(capsys, "fpt-check", "--graph", files["ba2"], "--formula", files["gurevich"], "--timing",
                      "--paranoid")
    assert code == 0
    assert [line.split()[1] for line in lines if line.startswith("phase ")] == ["contexts", "mc"]


def test_contexts_lines(capsys, files):
    code, lines = run(capsys, "contexts", "--graph", files["c6"], "--depth", "1")
    body = [line for line in lines if line.startswith("vertex ")]
    assert code == 0 and len(body) == 6 and records(lines)["realised"] == "3"


def test_generated_files_load(capsys, tmp_path):
    code, lines = run(capsys, "gen", "random", "--n", "12", "--d", "3", "--colours", "Red,Blue")
    assert code == 0
    p = tmp_path / "r.g"
    p.write_text("\n".join(lines) + "\n")
    code, lines = run(capsys, "contexts", "--graph", str(p), "--depth", "1", "--order", "random")
    assert code == 0


def test_report_grammar_and_determinism(capsys, files):
    argv = ["invariance", "--graph", files["ba2"], "--formula", files["gurevich"], "--trials", "5", "--seed", "7"]
    assert run(capsys, *argv) == run(capsys, *argv)
    for argv in (argv, ["pipeline", "--graph-a", files["c200"], "--graph-b", files["c201"]]):
        _, lines = run(capsys, *argv)
        assert lines[0].startswith("config ")
        assert all(LINE.match(line) for line in lines), lines


def test_emitted_formula_has_comment_header(capsys):
    code, lines = run(capsys, "formulas", "emit", "phi1")
    assert code == 0 and lines[0].startswith("# config ") and lines[1].startswith("exists x[a,1]")
