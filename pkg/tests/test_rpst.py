import itertools

import networkx as nx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bept import corpus
from bept.petri import PetriNet, Tar, tar_set
from bept.rpst import (
    BOND,
    POLYGON,
    RIGID,
    TRIVIAL,
    DisconnectedNet,
    NotWorkflowNet,
    component_system,
    decompose,
    expand_tars,
    expected_kind,
    is_structured,
    simplify,
)


def kinds(c):
    return [ch.kind for ch in c.children]


def test_n1_layers(n1):
    tree = decompose(n1.system)
    root = tree.root
    assert root.kind == POLYGON
    assert kinds(root) == [POLYGON, BOND, POLYGON]
    p1, b1, p2 = root.children
    assert (p1.entry, p1.exit) == ("P_a", "P_b")
    assert (b1.entry, b1.exit) == ("P_b", "P_c")
    assert kinds(p1) == kinds(p2) == [TRIVIAL, TRIVIAL]
    assert kinds(b1) == [POLYGON, POLYGON]
    assert [sorted(c.interior) for c in b1.children] == [["T_b"], ["T_c"]]
    assert tree.depth_of == {"T_a": 1, "T_b": 2, "T_c": 2, "T_d": 1}
    assert is_structured(tree)


def test_single_arc_is_trivial():
    tree = decompose(PetriNet({"p"}, {"t"}, {("p", "t")}))
    assert tree.root.kind == TRIVIAL and is_structured(tree)


def test_nstar_is_rigid(nstar):
    tree = decompose(nstar.system)
    assert any(c.kind == RIGID for c in tree.components())
    assert not is_structured(tree)
    assert tree.metadata["entries"] == "P_a"


def test_disconnected():
    with pytest.raises(DisconnectedNet):
        decompose(PetriNet({"p", "q"}, {"t", "u"}, {("p", "t"), ("q", "u")}))


def test_no_arcs():
    with pytest.raises(DisconnectedNet):
        decompose(PetriNet({"p"}, set(), set()))


def test_not_workflow():
    net = PetriNet({"p", "q"}, {"t", "u"}, {("p", "t"), ("t", "q"), ("q", "u"), ("u", "p")})
    with pytest.raises(NotWorkflowNet):
        decompose(net)


def test_multi_source_is_wrapped():
    tree = decompose(corpus.load("multi_source").system)
    assert tree.metadata["entry"] == "__entry__"
    assert tree.metadata["entries"] == "in1,in2"


@pytest.mark.parametrize("name", corpus.names())
def test_tree_invariants(name):
    system = corpus.load(name).system
    tree = decompose(system)
    leaves = tree.root.leaves()
    assert sorted(a for leaf in leaves for a in leaf.arcs) == sorted(system.net.arcs)
    for c in tree.components():
        assert expected_kind(c) == c.kind
        if c.children:
            parts = [a for ch in c.children for a in ch.arcs]
            assert len(parts) == len(set(parts)) and set(parts) == c.arcs
            assert all(ch.depth == c.depth + 1 for ch in c.children)
        if c.kind in (BOND, RIGID):
            keys = [(ch.entry, ch.exit, sorted(ch.arcs)) for ch in c.children]
            assert keys == sorted(keys)
    assert set(system.net.labels) <= set(tree.depth_of)


# --- brute-force canonical fragments ------------------------------------


def _fragments(arcs, source, sink):
    """Connected arc sets with exactly two boundary nodes."""
    arcs = sorted(arcs)
    found = []
    for r in range(2, len(arcs) + 1):
        for sub in itertools.combinations(arcs, r):
            inside = set(sub)
            nin = {n for a in inside for n in a}
            nout = {n for a in set(arcs) - inside for n in a}
            boundary = (nin & nout) | ({source, sink} & nin)
            if len(boundary) != 2:
                continue
            g = nx.Graph(list(inside))
            if nx.is_connected(g):
                found.append(frozenset(inside))
    return found


def _canonical(frags):
    return [f for f in frags if not any(f & g and not (f <= g or g <= f) for g in frags)]


SMALL = [
    n
    for n in corpus.names()
    if len(corpus.load(n).net.arcs) <= 12 and not decompose(corpus.load(n).system).metadata
]


@pytest.mark.parametrize("name", SMALL)
def test_every_canonical_fragment_is_a_component(name):
    system = corpus.load(name).system
    tree = decompose(system)
    (source,), (sink,) = system.entry_places, system.exit_places
    components = {c.arcs for c in tree.components() if c.kind != TRIVIAL}
    for frag in _canonical(_fragments(system.net.arcs, source, sink)):
        assert frag in components


@pytest.mark.parametrize("name", corpus.names())
def test_components_are_single_entry_single_exit(name):
    system = corpus.load(name).system
    tree = decompose(system)
    synthetic = bool(tree.metadata)
    for c in tree.components():
        if c is tree.root or c.kind == TRIVIAL:
            continue
        outside = {n for a in system.net.arcs - c.arcs for n in a}
        boundary = {n for a in c.arcs for n in a} & outside
        if not synthetic:
            assert boundary <= {c.entry, c.exit}


# --- structured random nets -------------------------------------------------


shapes = st.recursive(
    st.just("act"),
    lambda inner: st.tuples(st.sampled_from(["seq", "xor", "loop"]), inner, inner),
    max_leaves=6,
)


def build_block(shape, ids):
    """Arcs of a block-structured fragment between two places, as (arcs, first, last)."""
    n = next(ids)
    if shape == "act":
        return [(f"pin{n}", f"t{n}"), (f"t{n}", f"pout{n}")], f"pin{n}", f"pout{n}"
    kind, left, right = shape
    a, a_in, a_out = build_block(left, ids)
    if kind == "loop":
        back = f"tback{n}"
        return a + [(a_out, back), (back, a_in)], a_in, a_out
    b, b_in, b_out = build_block(right, ids)
    if kind == "seq":
        glue = f"tglue{n}"
        return a + b + [(a_out, glue), (glue, b_in)], a_in, b_out
    rename = {b_in: a_in, b_out: a_out}
    return a + [(rename.get(x, x), rename.get(y, y)) for x, y in b], a_in, a_out


@given(shapes)
def test_structured_nets_have_no_rigid(shape):
    arcs, first, last = build_block(shape, itertools.count())
    pre, post = "tpre", "tpost"
    arcs = arcs + [("start", pre), (pre, first), (last, post), (post, "end")]
    nodes = {n for a in arcs for n in a}
    places = {n for n in nodes if not n.startswith("t")}
    net = PetriNet(places, nodes - places, arcs)
    tree = decompose(net)
    assert is_structured(tree)
    for c in tree.components():
        assert expected_kind(c) == c.kind
    if len(arcs) <= 12:
        components = {c.arcs for c in tree.components() if c.kind != TRIVIAL}
        for frag in _canonical(_fragments(net.arcs, "start", "end")):
            assert frag in components


# --- simplification ---------------------------------------------------------


def test_simplify_identity_on_structured(n1):
    net, subs = simplify(n1.net, decompose(n1.system))
    assert net == n1.net and subs == {}


def test_simplify_expanded_nstar():
    doc = corpus.load("nstar_expanded")
    net, subs = simplify(doc.net, decompose(doc.system))
    assert list(subs) == ["SUB1"]
    assert (subs["SUB1"].entry, subs["SUB1"].exit) == ("P_d", "P_b")
    nstar = corpus.load("nstar").net
    assert len(net.transitions) == len(nstar.transitions)
    assert len(net.places) == len(nstar.places)
    assert net.preset["SUB1"] == ("P_d",) and net.postset["SUB1"] == ("P_b",)


@pytest.mark.parametrize("name,count", [("nstar_expanded", 1), ("rigid_nested_bonds", 2)])
def test_simplify_preserves_tars(name, count):
    doc = corpus.load(name)
    tree = decompose(doc.system)
    net, subs = simplify(doc.net, tree)
    assert len(subs) == count
    system = type(doc.system)(net, doc.system.initial, doc.system.final)
    inner = {sid: tar_set(component_system(doc.net, c)) for sid, c in subs.items()}
    assert expand_tars(tar_set(system), subs, inner) == set(tar_set(doc.system))


def test_expand_tars_maps_boundaries():
    doc = corpus.load("nstar_expanded")
    net, subs = simplify(doc.net, decompose(doc.system))
    out = expand_tars([Tar("T_c", "SUB1"), Tar("SUB1", "T_b")], subs, {})
    assert out == {Tar("T_c", "T_e1"), Tar("T_e2", "T_b")}
