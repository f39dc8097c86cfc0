import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from bept import corpus
from bept.petri import Marking, NetSystem, PetriNet, replay
from bept.unfold import EventBoundExceeded, UnknownNode, mutual, shadow_places, unfold

from conftest import make_system


def cutoffs_in_order(cfp):
    return [e for e in cfp.order if e in cfp.cutoffs]


def test_n1_cutoff(n1):
    cfp = unfold(n1.system)
    assert cutoffs_in_order(cfp) == ["T_c1"]
    assert cfp.correspondents["T_c1"] == "T_b1"
    assert cfp.configuration("T_c1").cut == cfp.configuration("T_b1").cut == Marking({"P_c": 1})


def test_n1_successors_of_cutoff_not_expanded(n1):
    cfp = unfold(n1.system)
    assert cfp.postset["P_c2"] == ()
    assert [cfp.origin(e) for e in cfp.transitions].count("T_d") == 1


def test_nstar_cutoffs(nstar):
    assert set(unfold(nstar.system).cutoffs) == {"T_d1", "T_e1"}


def test_sequence_net_is_its_own_prefix():
    s = corpus.load("polygon").system
    cfp = unfold(s)
    assert not cfp.cutoffs
    assert {cfp.origin(n) for n in cfp.nodes} == s.net.nodes
    assert {(cfp.origin(a), cfp.origin(b)) for a, b in cfp.arcs} == s.net.arcs
    assert shadow_places(cfp, s) == {"p0_1", "p3_1"}


def test_mutual(n1, nstar):
    c1 = unfold(n1.system)
    assert mutual(c1, "P_c1", "P_c2")
    assert not mutual(c1, "P_c1", "P_c1")
    assert not mutual(unfold(nstar.system), "P_a1", "P_b1")


def test_mutual_unknown_node(n1):
    with pytest.raises(UnknownNode):
        mutual(unfold(n1.system), "P_c1", "nope")


def test_shadow_places_nstar(nstar):
    assert shadow_places(unfold(nstar.system), nstar.system) == {"P_a1", "P_b1", "P_a2", "P_d1", "P_b2"}


def test_shadow_places_n1_by_hand(n1):
    cfp = unfold(n1.system)
    # the two copies of P_c are mutual; P_a1 and P_d1 are boundary conditions
    assert shadow_places(cfp, n1.system) == {"P_a1", "P_c1", "P_c2", "P_d1"}


def test_event_bound():
    s = corpus.load("sequence40").system
    with pytest.raises(EventBoundExceeded):
        unfold(s, event_bound=5)


def test_concurrent_split_conditions_coexist():
    cfp = unfold(corpus.load("and_bond").system)
    assert len(cfp.transitions) == 4 and not cfp.cutoffs


def test_origin_respects_kind(nstar):
    cfp = unfold(nstar.system)
    for node in cfp.nodes.values():
        if node.kind == "place":
            assert node.origin in nstar.net.places
        else:
            assert node.origin in nstar.net.transitions


# --- property: every configuration replays in the original net --------------


@st.composite
def small_nets(draw):
    """Random nets with one marked place, possibly cyclic."""
    n_places = draw(st.integers(2, 5))
    places = [f"p{i}" for i in range(n_places)]
    arcs = set()
    for k in range(draw(st.integers(1, 5))):
        t = f"t{k}"
        ins = draw(st.sets(st.sampled_from(places), min_size=1, max_size=2))
        outs = draw(st.sets(st.sampled_from(places), min_size=0, max_size=2))
        arcs |= {(p, t) for p in ins} | {(t, p) for p in outs}
    used = {n for a in arcs for n in a}
    net = PetriNet(set(places), used - set(places), arcs)
    return NetSystem(net, Marking({"p0": 1}))


@given(small_nets(), st.randoms(use_true_random=False))
def test_configurations_replay(system, rnd):
    try:
        cfp = unfold(system, event_bound=200)
    except EventBoundExceeded:
        assume(False)
    for e in cfp.order:
        events = list(cfp.past[e])
        # a random linearisation of the local configuration
        done, seq = set(), []
        while len(done) < len(events):
            ready = [x for x in events if x not in done and all(
                all(p in done for p in cfp.preset[c]) for c in cfp.preset[x])]
            pick = rnd.choice(sorted(ready))
            done.add(pick)
            seq.append(cfp.origin(pick))
        assert replay(system, seq) == cfp.configuration(e).cut


def test_make_system_helper_sources():
    s = make_system([("p0", "a"), ("a", "p1")])
    assert s.initial == {"p0": 1}
