import pytest
from hypothesis import given
from hypothesis import strategies as st

from bept.petri import (
    InvalidNet,
    Marking,
    NetSystem,
    NotEnabled,
    PetriNet,
    StateSpaceExceeded,
    Tar,
    UnknownTransition,
    boundary_nodes,
    diagnose,
    fire,
    is_loop_free,
    replay,
    tar_set,
    tar_witnesses,
    trace_set,
    verify_witness,
)

from conftest import make_system


def tars(*pairs):
    return {Tar(a, b) for a, b in pairs}


def test_boundary_nodes_n1(n1):
    assert boundary_nodes(n1.net) == ({"P_a"}, {"P_d"})


def test_boundary_nodes_isolated_place():
    net = PetriNet({"p"}, set(), set())
    assert boundary_nodes(net) == ({"p"}, {"p"})


def test_boundary_nodes_cycle_is_empty():
    net = PetriNet({"p"}, {"t"}, {("p", "t"), ("t", "p")})
    assert boundary_nodes(net) == (frozenset(), frozenset())


def test_fire_moves_token(n1):
    m = fire(n1.system, "T_a")
    assert m.vector(["P_a", "P_b", "P_c", "P_d"]) == [0, 1, 0, 0]


def test_fire_disabled_raises():
    s = make_system([("p", "t"), ("t", "q")], initial={})
    with pytest.raises(NotEnabled):
        fire(s, "t")


def test_fire_unknown_transition(n1):
    with pytest.raises(UnknownTransition):
        fire(n1.system, "nope")


def test_fire_synchronizes_two_inputs():
    s = make_system([("p1", "t"), ("p2", "t"), ("t", "p3")], initial={"p1": 1, "p2": 1})
    assert fire(s, "t") == Marking({"p3": 1})


def test_bipartite_violation():
    with pytest.raises(InvalidNet):
        PetriNet({"p", "q"}, set(), {("p", "q")})


def test_marking_rejects_negative():
    with pytest.raises(ValueError):
        Marking({"p": -1})


def test_tar_set_n1(n1):
    assert set(tar_set(n1.system)) == tars(("T_a", "T_b"), ("T_a", "T_c"), ("T_b", "T_d"), ("T_c", "T_d"))


def test_tar_set_single_transition_is_empty():
    assert tar_set(make_system([("p", "t"), ("t", "q")])) == []


def test_tar_set_nstar_contains_loop_pairs(nstar):
    found = set(tar_set(nstar.system))
    assert tars(("T_a", "T_b"), ("T_b", "T_c"), ("T_b", "T_d"), ("T_d", "T_a")) <= found


def test_witnesses_replay(nstar):
    for tar, seq in tar_witnesses(nstar.system).items():
        assert verify_witness(nstar.system, tar, seq)


def test_trace_set_n1(n1):
    ts = trace_set(n1.system)
    assert ts.as_set() == {("T_a", "T_b", "T_d"), ("T_a", "T_c", "T_d")}
    assert not ts.truncated


def test_trace_set_empty_net():
    s = NetSystem(PetriNet(set(), set(), set()), Marking())
    assert len(trace_set(s)) == 0


def test_trace_set_truncates_loops(nstar):
    ts = trace_set(nstar.system, max_len=4)
    assert ts.truncated
    assert ts.as_set() == {("T_a", "T_b", "T_c")}


def test_diagnose_n1_clean(n1):
    assert diagnose(n1.system).clean


def test_diagnose_dead_transition():
    s = make_system([("p", "t1"), ("q", "t2")], initial={"p": 1})
    assert diagnose(s).dead_transitions == ("t2",)


def test_diagnose_deadlock_on_unfed_join():
    s = make_system([("p0", "a"), ("a", "p1"), ("p1", "j"), ("p2", "j"), ("j", "p3")], initial={"p0": 1})
    d = diagnose(s)
    assert d.deadlocks == (Marking({"p1": 1}),)
    assert d.dead_transitions == ("j",)


def test_state_bound_exceeded():
    s = make_system([("p", "t"), ("t", "p"), ("t", "q")], initial={"p": 1})
    with pytest.raises(StateSpaceExceeded):
        tar_set(s, state_bound=10)


def test_loop_freedom(n1, nstar):
    assert is_loop_free(n1.system)
    assert not is_loop_free(nstar.system)


def test_replay_sequence(n1):
    assert replay(n1.system, ["T_a", "T_c", "T_d"]) == Marking({"P_d": 1})


# --- property: TARs agree with a naive depth-first enumeration ------------


def _naive_tars(system):
    net = system.net
    found = set()
    seen = set()

    def enabled(m):
        return [t for t in sorted(net.transitions) if all(m.get(p, 0) >= 1 for p in net.preset[t])]

    def step(m, t):
        m = dict(m)
        for p in net.preset[t]:
            m[p] -= 1
        for p in net.postset[t]:
            m[p] = m.get(p, 0) + 1
        return m

    def walk(m, last):
        key = (tuple(sorted((p, c) for p, c in m.items() if c)), last)
        if key in seen:
            return
        seen.add(key)
        for t in enabled(m):
            if last is not None:
                found.add(Tar(last, t))
            walk(step(m, t), t)

    walk(dict(system.initial), None)
    return found


@st.composite
def acyclic_nets(draw):
    """Random safe-ish nets whose transitions only move tokens forward."""
    n_places = draw(st.integers(2, 6))
    places = [f"p{i}" for i in range(n_places)]
    arcs = set()
    for k in range(draw(st.integers(1, 5))):
        t = f"t{k}"
        lo = draw(st.integers(0, n_places - 2))
        ins = draw(st.sets(st.sampled_from(places[lo : min(lo + 2, n_places - 1)]), min_size=1, max_size=2))
        top = max(places.index(p) for p in ins)
        outs = draw(st.sets(st.sampled_from(places[top + 1 :]), min_size=1, max_size=2))
        arcs |= {(p, t) for p in ins} | {(t, p) for p in outs}
    used = {n for a in arcs for n in a}
    net = PetriNet(set(places), used - set(places), arcs)
    return NetSystem(net, Marking({"p0": 1}))


@given(acyclic_nets())
def test_tar_set_matches_naive_enumeration(system):
    assert set(tar_set(system)) == _naive_tars(system)


@given(acyclic_nets())
def test_every_trace_replays_to_a_final_marking(system):
    for trace in trace_set(system):
        assert system.is_final(replay(system, trace.sequence))
