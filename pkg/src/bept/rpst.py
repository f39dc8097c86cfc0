"""Refined process structure tree of a net and rigid simplification.

The tree is computed from the triconnected components of the undirected
structure graph (net arcs plus a return edge from exit to entry).  Nets with
several sources or sinks are first wrapped with a synthetic entry and exit.
Triconnected components are found by repeatedly cutting at separation pairs
and merging adjacent bonds and polygons.  Consecutive arcs around each activity inside a sequence are then
grouped into their own polygon, which is how the tree is presented for
activity-level depth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import networkx as nx

from .petri import Marking, NetSystem, PetriNet, Tar, boundary_nodes

TRIVIAL = "Trivial"
POLYGON = "Polygon"
BOND = "Bond"
RIGID = "Rigid"

SYNTHETIC_ENTRY = "__entry__"
SYNTHETIC_EXIT = "__exit__"


class RpstError(Exception):
    pass


class DisconnectedNet(RpstError):
    pass


class NotWorkflowNet(RpstError):
    pass


Arc = tuple[str, str]


@dataclass(frozen=True, eq=False)
class Component:
    kind: str
    entry: str
    exit: str
    arcs: frozenset[Arc]
    children: tuple["Component", ...] = ()
    depth: int = 0

    @cached_property
    def nodes(self) -> frozenset[str]:
        return frozenset(n for arc in self.arcs for n in arc)

    @property
    def interior(self) -> frozenset[str]:
        return self.nodes - {self.entry, self.exit}

    def walk(self) -> Iterable["Component"]:
        yield self
        for c in self.children:
            yield from c.walk()

    def leaves(self) -> list["Component"]:
        return [c for c in self.walk() if c.kind == TRIVIAL]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "entry": self.entry,
            "exit": self.exit,
            "depth": self.depth,
            "arcs": [list(a) for a in sorted(self.arcs)],
            "children": [c.to_dict() for c in self.children],
        }


@dataclass(frozen=True, eq=False)
class RpstTree:
    root: Component
    depth_of: dict[str, int]
    metadata: dict[str, str] = field(default_factory=dict)

    def components(self) -> list[Component]:
        return list(self.root.walk())

    def to_dict(self) -> dict:
        return {
            "metadata": dict(self.metadata),
            "depth_of": dict(sorted(self.depth_of.items())),
            "root": self.root.to_dict(),
        }


# ---------------------------------------------------------------------------
# triconnected components by splitting at separation pairs and merging


def _classes(ends: dict[int, tuple[str, str]], comp: list[int], a: str, b: str) -> list[list[int]]:
    parent = {e: e for e in comp}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    by_node: dict[str, int] = {}
    for e in comp:
        for x in ends[e]:
            if x in (a, b):
                continue
            if x in by_node:
                parent[find(e)] = find(by_node[x])
            else:
                by_node[x] = e
    groups: dict[int, list[int]] = {}
    for e in comp:
        groups.setdefault(find(e), []).append(e)
    return sorted(groups.values(), key=min)


def _find_split(ends: dict[int, tuple[str, str]], comp: list[int]) -> tuple[str, str, list[int]] | None:
    nodes = sorted({x for e in comp for x in ends[e]})
    parallel: dict[frozenset[str], list[int]] = {}
    for e in comp:
        parallel.setdefault(frozenset(ends[e]), []).append(e)
    for pair, es in sorted(parallel.items(), key=lambda kv: min(kv[1])):
        if len(es) >= 2 and len(es) < len(comp) - 1:
            a, b = sorted(pair)
            return a, b, sorted(es)
    for a in nodes:
        g = nx.Graph()
        g.add_nodes_from(x for x in nodes if x != a)
        g.add_edges_from(ends[e] for e in comp if a not in ends[e])
        for b in sorted(nx.articulation_points(g)):
            classes = _classes(ends, comp, a, b)
            if len(classes) < 2:
                continue
            for part in classes:
                if len(part) >= 2 and len(comp) - len(part) >= 2:
                    return a, b, part
    return None


def _triconnected(ends: dict[int, tuple[str, str]], edges: list[int]) -> list[tuple[str, list[int]]]:
    next_id = max(ends) + 1
    work = [sorted(edges)]
    done: list[tuple[str, list[int]]] = []
    while work:
        comp = work.pop()
        nodes = {x for e in comp for x in ends[e]}
        degree: dict[str, int] = {}
        for e in comp:
            for x in ends[e]:
                degree[x] = degree.get(x, 0) + 1
        if len(nodes) == 2:
            done.append(("P" if len(comp) >= 3 else "S", comp))
            continue
        if all(d == 2 for d in degree.values()):
            done.append(("S", comp))
            continue
        split = _find_split(ends, comp)
        if split is None:
            done.append(("R", comp))
            continue
        a, b, part = split
        vid = next_id
        next_id += 1
        ends[vid] = (a, b)
        rest = [e for e in comp if e not in set(part)]
        work.append(sorted(part) + [vid])
        work.append(sorted(rest) + [vid])
    # merge adjacent bonds with bonds and polygons with polygons
    merged = True
    while merged:
        merged = False
        owner: dict[int, list[int]] = {}
        for i, (_, comp) in enumerate(done):
            for e in comp:
                owner.setdefault(e, []).append(i)
        for e, idx in sorted(owner.items()):
            if len(idx) == 2:
                i, j = idx
                if done[i][0] == done[j][0] and done[i][0] in ("S", "P"):
                    kind = done[i][0]
                    comp = [x for x in done[i][1] + done[j][1] if x != e]
                    done = [d for k, d in enumerate(done) if k not in (i, j)] + [(kind, sorted(comp))]
                    merged = True
                    break
    return done


# ---------------------------------------------------------------------------
# decomposition


@dataclass
class _Graph:
    edges: list[tuple[str, str, str]]  # (src, dst, kind) kind in arc|wrap|return
    entry: str
    exit: str


def _structure_graph(net: PetriNet, entries: set[str], exits: set[str]) -> tuple[_Graph, dict[str, str]]:
    meta: dict[str, str] = {}
    edges: list[tuple[str, str, str]] = [(a, b, "arc") for a, b in sorted(net.arcs)]
    indeg = {n: len(net.preset[n]) for n in net.nodes}
    outdeg = {n: len(net.postset[n]) for n in net.nodes}
    if len(entries) == 1 and indeg[next(iter(entries))] == 0 and entries != exits:
        entry = next(iter(entries))
    else:
        entry = SYNTHETIC_ENTRY
        for s in sorted(entries):
            edges.append((entry, s, "wrap"))
        meta["entry"] = entry
        meta["entries"] = ",".join(sorted(entries))
    if len(exits) == 1 and outdeg[next(iter(exits))] == 0 and entries != exits:
        exit_ = next(iter(exits))
    else:
        exit_ = SYNTHETIC_EXIT
        for s in sorted(exits):
            edges.append((s, exit_, "wrap"))
        meta["exit"] = exit_
        meta["exits"] = ",".join(sorted(exits))
    return _Graph(edges, entry, exit_), meta


def _boundary(graph: _Graph, frag: set[int], a: str, b: str) -> tuple[str, str]:
    """Orient the two boundary nodes of fragment ``frag`` into (entry, exit)."""
    def ins_outs(x: str) -> tuple[list[int], list[int]]:
        ins = [i for i, (s, d, _) in enumerate(graph.edges) if d == x]
        outs = [i for i, (s, d, _) in enumerate(graph.edges) if s == x]
        return ins, outs

    def is_entry(x: str) -> bool:
        ins, outs = ins_outs(x)
        return all(i not in frag for i in ins) or all(o in frag for o in outs)

    def is_exit(x: str) -> bool:
        ins, outs = ins_outs(x)
        return all(o not in frag for o in outs) or all(i in frag for i in ins)

    if is_entry(a) and is_exit(b) and not (is_entry(b) and is_exit(a) and not is_entry(a)):
        return a, b
    if is_entry(b) and is_exit(a):
        return b, a
    return a, b


def decompose(model: PetriNet | NetSystem) -> RpstTree:
    if isinstance(model, NetSystem):
        net = model.net
        sources, sinks = boundary_nodes(net)
        entries = set(sources) | set(model.initial.support())
        exits = set(sinks) | set(model.final)
    else:
        net = model
        sources, sinks = boundary_nodes(net)
        entries, exits = set(sources), set(sinks)
    if not net.arcs:
        raise DisconnectedNet("net has no arcs")
    g = nx.Graph()
    g.add_nodes_from(net.nodes)
    g.add_edges_from(net.arcs)
    if not nx.is_connected(g):
        raise DisconnectedNet(f"net has {nx.number_connected_components(g)} connected parts")
    if not entries or not exits:
        raise NotWorkflowNet("net has no entry or no exit")

    if len(net.arcs) == 1:
        (arc,) = net.arcs
        leaf = Component(TRIVIAL, arc[0], arc[1], frozenset(net.arcs))
        return RpstTree(leaf, {t: 0 for t in net.transitions})

    graph, meta = _structure_graph(net, entries, exits)
    edges = graph.edges + [(graph.exit, graph.entry, "return")]
    return_id = len(edges) - 1
    ug = nx.MultiGraph()
    ug.add_edges_from((s, d) for s, d, _ in edges)
    if not nx.is_biconnected(nx.Graph(ug)) and len(ug) > 2:
        raise NotWorkflowNet("some nodes do not lie on a path from entry to exit")

    ends = {i: (s, d) for i, (s, d, _) in enumerate(edges)}
    comps = _triconnected(ends, list(range(len(edges))))
    owner: dict[int, list[int]] = {}
    for ci, (_, comp) in enumerate(comps):
        for e in comp:
            owner.setdefault(e, []).append(ci)
    kinds = {"S": POLYGON, "P": BOND, "R": RIGID}
    real = set(range(len(graph.edges)))

    def subtree_edges(ci: int, parent: int) -> set[int]:
        acc: set[int] = set()
        for e in comps[ci][1]:
            if e == parent:
                continue
            if e in real:
                acc.add(e)
            elif e >= len(edges):
                other = next(c for c in owner[e] if c != ci)
                acc |= subtree_edges(other, e)
        return acc

    def arcs_of(frag: set[int]) -> frozenset[Arc]:
        return frozenset(
            (graph.edges[i][0], graph.edges[i][1])
            for i in frag
            if graph.edges[i][2] == "arc"
        )

    def build(ci: int, parent: int) -> Component | None:
        kind, comp = comps[ci]
        if parent == return_id:
            p_ends = (graph.entry, graph.exit)
        else:
            p_ends = ends[parent]
        frag = subtree_edges(ci, parent)
        entry, exit_ = _boundary(graph, frag, *p_ends)
        items = [e for e in comp if e != parent]
        if kind == "S":
            items = _cycle_order(ends, comp, parent, entry)
        children: list[Component] = []
        for e in items:
            if e >= len(edges):
                other = next(c for c in owner[e] if c != ci)
                child = build(other, e)
            elif graph.edges[e][2] == "arc":
                s, d, _ = graph.edges[e]
                child = Component(TRIVIAL, s, d, arcs_of({e}))
            else:
                child = None
            if child is not None:
                children.append(child)
        if not children:
            return None
        if len(children) == 1:
            return children[0]
        if kind != "S":
            children.sort(key=lambda c: (c.entry, c.exit, sorted(c.arcs)))
        return Component(
            kinds[kind],
            entry,
            exit_,
            frozenset().union(*(c.arcs for c in children)),
            tuple(children),
        )

    root_ci = owner[return_id][0]
    root = build(root_ci, return_id)
    assert root is not None
    root = _with_depth(_regroup(root, net), 0)
    depth_of = _depths(root, net)
    return RpstTree(root, depth_of, meta)


def _cycle_order(ends: dict[int, tuple[str, str]], comp: list[int], parent: int, start: str) -> list[int]:
    """Edges of a cycle component in order, walking from ``start`` away from ``parent``."""
    remaining = [e for e in comp if e != parent]
    order: list[int] = []
    node = start
    if not any(node in ends[e] for e in remaining):
        node = ends[parent][1] if ends[parent][0] == start else ends[parent][0]
    while remaining:
        e = next(e for e in remaining if node in ends[e])
        remaining.remove(e)
        order.append(e)
        a, b = ends[e]
        node = b if a == node else a
    return order


def _regroup(c: Component, net: PetriNet) -> Component:
    children = tuple(_regroup(ch, net) for ch in c.children)
    c = Component(c.kind, c.entry, c.exit, c.arcs, children)
    if c.kind != POLYGON or len(children) < 3:
        return c
    runs: list[list[Component]] = [[]]
    for i, ch in enumerate(children):
        runs[-1].append(ch)
        if i < len(children) - 1 and ch.exit in net.places:
            runs.append([])
    if len(runs) < 2:
        return c
    grouped: list[Component] = []
    for run in runs:
        if len(run) == 1:
            grouped.append(run[0])
        else:
            grouped.append(
                Component(POLYGON, run[0].entry, run[-1].exit, frozenset().union(*(r.arcs for r in run)), tuple(run))
            )
    return Component(c.kind, c.entry, c.exit, c.arcs, tuple(grouped))


def _with_depth(c: Component, depth: int) -> Component:
    return Component(c.kind, c.entry, c.exit, c.arcs, tuple(_with_depth(ch, depth + 1) for ch in c.children), depth)


def _depths(root: Component, net: PetriNet) -> dict[str, int]:
    depth = {t: 0 for t in net.transitions}
    for c in root.walk():
        if c.kind == TRIVIAL:
            continue
        for n in c.interior:
            if n in depth:
                depth[n] = max(depth[n], c.depth)
    return dict(sorted(depth.items()))


def expected_kind(c: Component) -> str:
    """Kind implied by the children alone."""
    if not c.children:
        return TRIVIAL if len(c.arcs) == 1 else RIGID
    kids = c.children
    # a synthetic boundary stands for every wrapped entry or exit
    def same(node: str, boundary: str) -> bool:
        return node == boundary or boundary in (SYNTHETIC_ENTRY, SYNTHETIC_EXIT)

    chained = all(kids[i].exit == kids[i + 1].entry for i in range(len(kids) - 1))
    if chained and same(kids[0].entry, c.entry) and same(kids[-1].exit, c.exit):
        return POLYGON
    if all(
        (same(k.entry, c.entry) and same(k.exit, c.exit)) or (same(k.entry, c.exit) and same(k.exit, c.entry))
        for k in kids
    ):
        return BOND
    return RIGID


def is_structured(tree: RpstTree) -> bool:
    return all(c.kind != RIGID for c in tree.root.walk())


# ---------------------------------------------------------------------------
# rigid simplification


def _transitions_in(c: Component, net: PetriNet) -> set[str]:
    return {n for n in c.nodes if n in net.transitions}


def _replaceable(c: Component, net: PetriNet) -> bool:
    return (
        c.kind != TRIVIAL
        and c.entry in net.places
        and c.exit in net.places
        and c.entry != c.exit
        and len(_transitions_in(c, net)) >= 2
    )


def simplify(net: PetriNet, tree: RpstTree, prefix: str = "SUB") -> tuple[PetriNet, dict[str, Component]]:
    targets: list[Component] = []

    def visit(c: Component) -> None:
        for ch in c.children:
            if c.kind == RIGID and _replaceable(ch, net):
                targets.append(ch)
            else:
                visit(ch)

    visit(tree.root)
    if not targets:
        return net, {}
    targets.sort(key=lambda c: (c.entry, c.exit, sorted(c.arcs)))
    arcs = set(net.arcs)
    places = set(net.places)
    transitions = set(net.transitions)
    labels = dict(net.labels)
    subs: dict[str, Component] = {}
    n = 0
    for c in targets:
        n += 1
        sid = f"{prefix}{n}"
        while sid in net.nodes:
            n += 1
            sid = f"{prefix}{n}"
        arcs -= c.arcs
        for node in c.interior:
            places.discard(node)
            transitions.discard(node)
            labels.pop(node, None)
        transitions.add(sid)
        arcs |= {(c.entry, sid), (sid, c.exit)}
        subs[sid] = c
    return PetriNet(frozenset(places), frozenset(transitions), frozenset(arcs), labels), subs


def component_system(net: PetriNet, c: Component) -> NetSystem:
    """The sub-model of ``c`` started with one token on its entry place."""
    nodes = c.nodes
    sub = PetriNet(
        frozenset(n for n in nodes if n in net.places),
        frozenset(n for n in nodes if n in net.transitions),
        c.arcs,
        {t: l for t, l in net.labels.items() if t in nodes},
    )
    return NetSystem(sub, Marking.of(c.entry), frozenset({c.exit}))


def expand_tars(tars: Iterable, subs: dict[str, Component], inner: dict[str, Iterable]) -> set:
    """Replace synthetic transitions in TARs by the boundary transitions of their component."""
    def starts(sid: str) -> list[str]:
        c = subs[sid]
        return [b for a, b in c.arcs if a == c.entry]

    def ends(sid: str) -> list[str]:
        c = subs[sid]
        return [a for a, b in c.arcs if b == c.exit]

    out: set[Tar] = set()
    for tar in tars:
        firsts = ends(tar.first) if tar.first in subs else [tar.first]
        seconds = starts(tar.second) if tar.second in subs else [tar.second]
        out |= {Tar(a, b) for a in firsts for b in seconds}
    for extra in inner.values():
        out |= set(extra)
    return out
