from dataclasses import replace

import pytest
from hypothesis import assume, given, settings

from bept import corpus
from bept.paths import (
    LOOP,
    MAIN,
    NotLinkable,
    ReplayViolation,
    _replay,
    enumerate_paths,
    extract_segments,
    link,
    order_paths,
    prune,
)
from bept.petri import StateSpaceExceeded, diagnose, explore, tar_set
from bept.pnml_io import export_dot
from bept.unfold import EventBoundExceeded, unfold

from test_unfold import small_nets


def analyse(name):
    system = corpus.load(name).system
    cfp = unfold(system)
    segs = extract_segments(cfp, system)
    return system, cfp, segs


def test_nstar_segments(nstar):
    _, cfp, segs = analyse("nstar")
    assert len(segs) == 4
    s1 = segs[0]
    assert s1.places | set(s1.transitions) == {"P_a1", "T_a1", "P_b1"}
    assert [s.transitions for s in segs] == [("T_a1",), ("T_b1", "T_c1"), ("T_b1", "T_d1"), ("T_e1",)]


def test_link_records_joint():
    _, cfp, segs = analyse("nstar")
    s1, s3 = segs[0], segs[2]
    chain = link(cfp, s3, s1)
    assert chain.key == (3, 1)
    assert chain.joints[1] == {"P_a1": (0, "P_a2")}


def test_link_rejects_unrelated_segments():
    _, cfp, segs = analyse("nstar")
    with pytest.raises(NotLinkable):
        link(cfp, segs[0], segs[3])  # exits P_b, entries P_d


def test_nstar_paths():
    system, cfp, segs = analyse("nstar")
    paths = enumerate_paths(cfp, system, segs)
    assert [(p.kind, p.key) for p in paths] == [(MAIN, (1, 2)), (LOOP, (1, 3)), (LOOP, (2, 4)), (LOOP, (3, 1))]
    p4 = paths[3]
    assert cfp.h(p4.entries) == cfp.h(p4.exits) == {"P_b"}
    assert paths[0].transitions == ("T_a", "T_b", "T_c")


def test_n1_two_main_paths():
    system, cfp, segs = analyse("n1")
    paths = enumerate_paths(cfp, system, segs)
    assert [p.kind for p in paths] == [MAIN, MAIN]
    assert {p.transitions for p in paths} == {("T_a", "T_b", "T_d"), ("T_a", "T_c", "T_d")}


def test_sequence_is_one_segment_and_one_path():
    system, cfp, segs = analyse("polygon")
    assert len(segs) == 1 and set(segs[0].transitions) == cfp.transitions
    paths = enumerate_paths(cfp, system, segs)
    assert len(paths) == 1 and paths[0].kind == MAIN and paths[0].segments == (segs[0],)


def test_transition_bounded_model_is_one_segment():
    system, cfp, segs = analyse("transition_rigid")
    assert len(segs) == 1
    assert set(segs[0].transitions) == cfp.transitions


def test_segments_replay():
    system, cfp, segs = analyse("nstar")
    # a segment whose exit marking is misreported must be rejected
    with pytest.raises(ReplayViolation):
        _replay(cfp, system, replace(segs[0], exits=("P_a1",)))


def test_prune_single_path():
    system, cfp, segs = analyse("polygon")
    (p,) = enumerate_paths(cfp, system, segs)
    assert prune([p]) == [(p, p.tars)]


def test_prune_drops_duplicate_path():
    system, cfp, segs = analyse("polygon")
    (p,) = enumerate_paths(cfp, system, segs)
    assert prune([p, p]) == [(p, p.tars)]


def test_order_paths_main_first():
    system, cfp, segs = analyse("nstar")
    paths = order_paths(enumerate_paths(cfp, system, segs)[::-1])
    assert paths[0].kind == MAIN
    assert [p.index for p in paths] == [1, 2, 3, 4]


def test_path_process_loop_wrap():
    system, cfp, segs = analyse("nstar")
    loop = enumerate_paths(cfp, system, segs)[1]
    proc = loop.process
    assert proc.wrap_start == 3
    assert {str(t) for t in loop.tars} == {"T_a<T_b", "T_b<T_d", "T_d<T_a"}


def test_export_dot_for_path():
    system, cfp, segs = analyse("nstar")
    dot = export_dot(enumerate_paths(cfp, system, segs)[3], "P4")
    assert '"P_a1@1"' not in dot and "P_b1" in dot


# --- the three path properties on the whole corpus -------------------------


@pytest.mark.parametrize("name", corpus.names())
def test_path_properties(name):
    system, cfp, segs = analyse(name)
    oracle = set(tar_set(system))
    paths = enumerate_paths(cfp, system, segs)
    union = set().union(*(p.tars for p in paths)) if paths else set()
    assert all(p.tars <= oracle for p in paths)
    assert oracle <= union
    kept = [t for _, ts in prune(paths) for t in ts]
    assert len(kept) == len(set(kept)) == len(union)


# random nets: soundness always, completeness for nets without deadlocks or dead transitions


@settings(max_examples=80, deadline=None)
@given(small_nets())
def test_random_paths_are_sound_and_complete(system):
    try:
        space = explore(system, 300)
        cfp = unfold(system, event_bound=150)
    except (StateSpaceExceeded, EventBoundExceeded):
        assume(False)
    assume(all(c <= 1 for m in space.markings for c in m.values()))
    paths = enumerate_paths(cfp, system)
    oracle = set(tar_set(system))
    assert all(p.tars <= oracle for p in paths)
    if diagnose(system).clean:
        union = set().union(*(p.tars for p in paths)) if paths else set()
        assert oracle <= union
