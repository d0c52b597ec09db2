import pytest
from hypothesis import given, settings, strategies as st

from cfokit.corpus import cycle, path
from cfokit.order_builder import (
    BuildError,
    KfOrder,
    TransferError,
    build_kf_order,
    check_kf_order,
    dump_kf_order,
    find_border_bijection,
    load_kf_order,
    safety_part,
    safety_segments,
    segment_distance,
    segment_names,
    tier_of,
    transfer_order,
)


@pytest.fixture(scope="module")
def c200():
    g = cycle(200)
    o, rep = build_kf_order(g, 1)
    return g, o, rep


def test_layout_sizes():
    for k in (1, 2, 3):
        names = segment_names(k)
        assert len(names) == 6 * k * k + 2 and names[0] == "X" and "J" in names
    assert [tier_of(2, i) for i in range(1, 5)] == [0, 0, 1, 1]


def test_segment_distances(c200):
    g, o, _ = c200
    x_like = o.segment("LU1")[0]
    assert segment_distance(o, x_like, x_like) == 0
    ln1 = o.segment("LN1")[0]
    assert segment_distance(o, x_like, ln1) == 1
    layout = KfOrder.from_segments(1, {"X": [0], "LU1": [1], "J": [2]})
    assert segment_distance(layout, 0, 1) == 1
    assert segment_distance(layout, 0, 2) == 4


def test_safety_parts(c200):
    _, o, _ = c200
    assert safety_segments(1, 1) == {"X"}
    assert safety_segments(2, 0) == {"X"} | {f"{s}{i}" for s in ("LU", "LN", "RU", "RN") for i in range(1, 5)}
    assert safety_part(o, 1) == set(o.segment("X"))
    with pytest.raises(ValueError):
        safety_segments(1, 2)


def test_build_on_long_cycle(c200):
    g, o, rep = c200
    assert not o.segment("X")
    assert len(o.segment("LU1")) == 1 and len(o.segment("RU1")) == 1
    assert rep.check.ok and rep.border_size == 10
    assert check_kf_order(g, o, rep.contexts).ok


def test_richness_failures():
    with pytest.raises(BuildError) as e:
        build_kf_order(cycle(6), 2)
    assert e.value.kind == "richness"
    with pytest.raises(BuildError):
        build_kf_order(cycle(19), 1)


def test_border_independent_of_size():
    sizes = {build_kf_order(cycle(n), 1)[1].border_size for n in (20, 21, 57, 400)}
    assert sizes == {10}


def test_jungle_vertex_moved_into_universal_segment_fails(c200):
    g, o, rep = c200
    segs = {name: list(vs) for name, vs in o.segments}
    moved = segs["J"].pop(0)
    segs["LU1"].append(moved)
    bad = KfOrder.from_segments(1, segs, o.F, o.placed)
    report = check_kf_order(g, bad, rep.contexts)
    assert not (report.universality and report.contraction)
    assert report.witnesses


def test_refinement_violation_detected(c200):
    g, o, rep = c200
    seq = list(o.seq)
    seq[0], seq[-1] = seq[-1], seq[0]
    report = check_kf_order(g, o.with_seq(seq), rep.contexts)
    assert not report.refinement


def test_identity_transfer(c200):
    g, o, _ = c200
    phi = {v: v for v in o.border()}
    moved = transfer_order(g, o, g, phi)
    assert moved.border() == o.border()
    assert [(name, vs) for name, vs in moved.segments if name != "J"] == [(n, vs) for n, vs in o.segments if n != "J"]
    assert sorted(moved.segment("J")) == sorted(o.segment("J"))


def test_transfer_to_larger_cycle(c200):
    g, o, rep = c200
    h = cycle(201)
    found = find_border_bijection(g, o, h)
    assert found.bijection is not None
    oh = transfer_order(g, o, h, found.bijection)
    assert check_kf_order(h, oh, rep.contexts).ok


def test_transfer_rejects_colour_change():
    g = cycle(60, ["Red", "Blue"], {v: ["Red"] for v in range(60)})
    o, _ = build_kf_order(g, 1)
    h = cycle(60, ["Red", "Blue"], {v: ["Blue"] for v in range(60)})
    with pytest.raises(TransferError):
        transfer_order(g, o, h, {v: v for v in o.border()})


def test_bijection_search_outcomes(c200):
    g, o, _ = c200
    same = find_border_bijection(g, o, g)
    assert same.bijection == {v: v for v in o.border()}
    assert find_border_bijection(g, o, path(6)).bijection is None
    assert find_border_bijection(g, o, path(200)).bijection is None


def test_order_file_round_trip(c200):
    g, o, _ = c200
    back = load_kf_order(dump_kf_order(o), 1, o.F)
    assert back.segments == o.segments and back.seq == o.seq


@settings(max_examples=15, deadline=None)
@given(st.integers(20, 120))
def test_every_long_cycle_builds_and_checks(n):
    g = cycle(n)
    o, rep = build_kf_order(g, 1)
    assert rep.check.ok and rep.border_size == 10
    assert sorted(o.seq) == list(range(n))
