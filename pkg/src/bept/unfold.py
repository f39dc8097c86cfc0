"""Complete finite prefix of the unfolding of a net system.

Events are added in the size-then-lexicographic order of their local
configurations; an event whose cut repeats the cut of a smaller event (or the
initial marking) is a cut-off and is not extended further.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

from .petri import Marking, NetSystem

DEFAULT_EVENT_BOUND = 20_000


class UnfoldError(Exception):
    pass


class EventBoundExceeded(UnfoldError):
    pass


class UnknownNode(UnfoldError):
    pass


@dataclass(frozen=True, order=True)
class CfpNode:
    id: str
    kind: str  # "place" or "transition"
    origin: str


@dataclass(frozen=True)
class Configuration:
    transitions: frozenset[str]
    cut: Marking


@dataclass(frozen=True, eq=False)
class Cfp:
    nodes: dict[str, CfpNode]
    arcs: frozenset[tuple[str, str]]
    cutoffs: frozenset[str]
    shadows: frozenset[str]
    correspondents: dict[str, str | None]
    initial_places: tuple[str, ...]
    order: tuple[str, ...] = field(default=())  # events in insertion order

    @cached_property
    def places(self) -> frozenset[str]:
        return frozenset(n for n, v in self.nodes.items() if v.kind == "place")

    @cached_property
    def transitions(self) -> frozenset[str]:
        return frozenset(n for n, v in self.nodes.items() if v.kind == "transition")

    @cached_property
    def preset(self) -> dict[str, tuple[str, ...]]:
        pre: dict[str, list[str]] = {n: [] for n in self.nodes}
        for a, b in self.arcs:
            pre[b].append(a)
        return {n: tuple(sorted(v, key=self.sort_key)) for n, v in pre.items()}

    @cached_property
    def postset(self) -> dict[str, tuple[str, ...]]:
        post: dict[str, list[str]] = {n: [] for n in self.nodes}
        for a, b in self.arcs:
            post[a].append(b)
        return {n: tuple(sorted(v, key=self.sort_key)) for n, v in post.items()}

    @cached_property
    def _rank(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.nodes)}

    def sort_key(self, node: str) -> tuple[str, int]:
        """Order by origin id, then by occurrence (creation) order."""
        return (self.nodes[node].origin, self._rank[node])

    def origin(self, node: str) -> str:
        try:
            return self.nodes[node].origin
        except KeyError:
            raise UnknownNode(node) from None

    def h(self, nodes: Iterable[str]) -> frozenset[str]:
        return frozenset(self.origin(n) for n in nodes)

    @cached_property
    def boundary_places(self) -> frozenset[str]:
        return frozenset(p for p in self.places if not self.preset[p] or not self.postset[p])

    @cached_property
    def past(self) -> dict[str, frozenset[str]]:
        """Local configuration [e] of every event."""
        result: dict[str, frozenset[str]] = {}
        for e in self.order:
            acc = {e}
            for b in self.preset[e]:
                for producer in self.preset[b]:
                    acc |= result[producer]
            result[e] = frozenset(acc)
        return result

    def configuration(self, event: str) -> Configuration:
        if event not in self.transitions:
            raise UnknownNode(event)
        events = self.past[event]
        return Configuration(events, Marking.of(*sorted(self.origin(c) for c in self.cut_conditions(events))))

    def cut_conditions(self, events: frozenset[str]) -> frozenset[str]:
        produced = set(self.initial_places)
        consumed: set[str] = set()
        for e in events:
            produced.update(self.postset[e])
            consumed.update(self.preset[e])
        return frozenset(produced - consumed)

    @cached_property
    def conflicts(self) -> dict[str, frozenset[str]]:
        """Events in (inherited) conflict with each event."""
        direct: dict[str, set[str]] = {e: set() for e in self.transitions}
        for b in self.places:
            consumers = self.postset[b]
            for x in consumers:
                for y in consumers:
                    if x != y:
                        direct[x].add(y)
        result: dict[str, frozenset[str]] = {}
        future: dict[str, set[str]] = {e: set() for e in self.transitions}
        for e, past in self.past.items():
            for d in past:
                future[d].add(e)
        for e in self.transitions:
            acc: set[str] = set()
            for d in self.past[e]:
                for x in direct[d]:
                    acc |= future[x]
            result[e] = frozenset(acc)
        return result

    @cached_property
    def joint_places(self) -> frozenset[str]:
        """Shadow places plus the cut conditions of every cut-off and its correspondent.

        The extra conditions mark where a repeated cut meets concurrent
        branches; segments must be allowed to stop there as well.
        """
        extra: set[str] = set()
        for e, partner in self.correspondents.items():
            extra |= self.cut_conditions(self.past[e])
            extra |= self.cut_conditions(self.past[partner] if partner else frozenset())
        return self.shadows | extra


def mutual(cfp: Cfp, p: str, q: str) -> bool:
    for node in (p, q):
        if node not in cfp.nodes or cfp.nodes[node].kind != "place":
            raise UnknownNode(node)
    return p != q and cfp.origin(p) == cfp.origin(q)


def shadow_places(cfp: Cfp, system: NetSystem) -> frozenset[str]:
    boundary_origins = cfp.h(cfp.boundary_places)
    original = system.boundary_places
    return frozenset(
        p for p in cfp.places if cfp.origin(p) in boundary_origins or cfp.origin(p) in original
    )


def _occurrence_id(origin: str, index: int) -> str:
    return f"{origin}_{index}" if origin[-1:].isdigit() else f"{origin}{index}"


def unfold(system: NetSystem, event_bound: int = DEFAULT_EVENT_BOUND) -> Cfp:
    if event_bound < 1:
        raise ValueError("event_bound must be >= 1")
    net = system.net
    counters: dict[str, int] = {}

    def fresh(origin: str) -> str:
        counters[origin] = counters.get(origin, 0) + 1
        return _occurrence_id(origin, counters[origin])

    nodes: dict[str, CfpNode] = {}
    arcs: set[tuple[str, str]] = set()
    cond_origin: dict[str, str] = {}
    producer: dict[str, str | None] = {}
    co: dict[str, set[str]] = {}
    alive_by_place: dict[str, list[str]] = {p: [] for p in net.places}
    past: dict[str, frozenset[str]] = {}
    event_origin: dict[str, str] = {}

    initial: list[str] = []
    for p in sorted(system.initial):
        for _ in range(system.initial[p]):
            c = fresh(p)
            nodes[c] = CfpNode(c, "place", p)
            cond_origin[c] = p
            producer[c] = None
            initial.append(c)
            alive_by_place[p].append(c)
    for c in initial:
        co[c] = set(initial) - {c}

    heap: list[tuple] = []
    seen: set[tuple[str, tuple[str, ...]]] = set()
    cond_rank: dict[str, int] = {c: i for i, c in enumerate(initial)}

    def push_extensions(new_conditions: set[str]) -> None:
        for t in sorted(net.transitions):
            pre_places = net.preset[t]
            if not pre_places:
                if not past and (t, ()) not in seen:
                    add_candidate(t, ())
                continue
            if not any(cond_origin[c] in pre_places for c in new_conditions):
                continue

            def choose(i: int, chosen: list[str]) -> None:
                if i == len(pre_places):
                    if new_conditions & set(chosen):
                        key = (t, tuple(chosen))
                        if key not in seen:
                            add_candidate(t, tuple(chosen))
                    return
                for c in alive_by_place[pre_places[i]]:
                    if all(c in co[d] for d in chosen):
                        chosen.append(c)
                        choose(i + 1, chosen)
                        chosen.pop()

            choose(0, [])

    def add_candidate(t: str, preset: tuple[str, ...]) -> None:
        seen.add((t, preset))
        config: set[str] = set()
        for c in preset:
            if producer[c] is not None:
                config |= past[producer[c]]  # type: ignore[index]
        origins = tuple(sorted([event_origin[e] for e in config] + [t]))
        key = (len(config) + 1, origins, t, tuple(cond_rank[c] for c in preset))
        heapq.heappush(heap, (key, t, preset, frozenset(config)))

    push_extensions(set(initial))
    cuts: list[tuple[tuple, Marking, str | None]] = [((0, ()), system.initial, None)]
    cutoffs: set[str] = set()
    correspondents: dict[str, str | None] = {}
    order: list[str] = []

    while heap:
        key, t, preset, config = heapq.heappop(heap)
        if len(order) >= event_bound:
            raise EventBoundExceeded(f"prefix exceeds {event_bound} events")
        e = fresh(t)
        nodes[e] = CfpNode(e, "transition", t)
        event_origin[e] = t
        past[e] = config | {e}
        order.append(e)
        for c in preset:
            arcs.add((c, e))
        posts: list[str] = []
        for p in net.postset[t]:
            c = fresh(p)
            nodes[c] = CfpNode(c, "place", p)
            cond_origin[c] = p
            producer[c] = e
            cond_rank[c] = len(cond_rank)
            arcs.add((e, c))
            posts.append(c)
        shared = set.intersection(*(co[b] for b in preset)) if preset else set(co)
        for c in posts:
            co[c] = (shared | set(posts)) - {c}
        for c in posts:
            for d in shared:
                co[d].add(c)

        marking: dict[str, int] = dict(system.initial)
        for ev in past[e]:
            for p in net.preset[event_origin[ev]]:
                marking[p] = marking.get(p, 0) - 1
            for p in net.postset[event_origin[ev]]:
                marking[p] = marking.get(p, 0) + 1
        cut = Marking(marking)
        order_key = key[:2]
        partner = next((ev for k, m, ev in cuts if m == cut and k < order_key), "")
        if partner != "":
            cutoffs.add(e)
            correspondents[e] = partner
            continue
        cuts.append((order_key, cut, e))
        for c in posts:
            alive_by_place[cond_origin[c]].append(c)
        push_extensions(set(posts))

    cfp = Cfp(
        nodes=nodes,
        arcs=frozenset(arcs),
        cutoffs=frozenset(cutoffs),
        shadows=frozenset(),
        correspondents=dict(sorted(correspondents.items())),
        initial_places=tuple(initial),
        order=tuple(order),
    )
    object.__setattr__(cfp, "shadows", shadow_places(cfp, system))
    return cfp
