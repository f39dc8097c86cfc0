"""Behavior segments, their linking, behavior paths and TAR pruning."""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from .petri import Marking, NetSystem, PetriError, Tar, fire
from .unfold import Cfp

MAIN = "Main"
LOOP = "Loop"
PARTIAL = "Partial"
KIND_ORDER = {MAIN: 0, LOOP: 1, PARTIAL: 2}
DEFAULT_MAX_PATHS = 5_000


class PathError(Exception):
    pass


class ReplayViolation(PathError):
    def __init__(self, message: str, marking: Marking | None = None):
        super().__init__(message)
        self.marking = marking


class NotLinkable(PathError):
    pass


class AmbiguousJoint(PathError):
    pass


@dataclass(frozen=True, eq=False)
class Segment:
    index: int
    transitions: tuple[str, ...]
    places: frozenset[str]
    arcs: frozenset[tuple[str, str]]
    entries: tuple[str, ...]
    exits: tuple[str, ...]

    def graph(self) -> tuple[frozenset[str], frozenset[str], frozenset[tuple[str, str]]]:
        return self.places, frozenset(self.transitions), self.arcs

    @property
    def name(self) -> str:
        return f"S{self.index}"

    def __repr__(self) -> str:
        return f"Segment({self.name}: {' '.join(self.transitions)})"


# An occurrence is a node of a linked chain: (position of its segment, CFP node).
Occ = tuple[int, str]


@dataclass(frozen=True, eq=False)
class BehaviorPath:
    """A chain of linked segments.

    ``joints[k]`` maps every entry place of segment ``k`` (k >= 1) to the
    occurrence of the exit place it was glued onto.
    """

    cfp: Cfp
    segments: tuple[Segment, ...]
    joints: tuple[dict[str, Occ], ...]
    kind: str | None = None
    ambiguous: tuple[str, ...] = ()
    index: int = 0

    @property
    def key(self) -> tuple[int, ...]:
        return tuple(s.index for s in self.segments)

    @property
    def name(self) -> str:
        return f"P{self.index}" if self.index else "<" + ",".join(s.name for s in self.segments) + ">"

    def __repr__(self) -> str:
        return f"BehaviorPath({self.name} {self.kind} {self.key})"

    def _place_occ(self, k: int, place: str) -> Occ:
        if k > 0 and place in self.joints[k]:
            return self.joints[k][place]
        return (k, place)

    @cached_property
    def entries(self) -> tuple[str, ...]:
        return self.segments[0].entries

    @cached_property
    def exit_occurrences(self) -> tuple[Occ, ...]:
        consumed: set[Occ] = set()
        produced: list[Occ] = [(0, p) for p in self.segments[0].entries]
        for k, seg in enumerate(self.segments):
            for t in seg.transitions:
                for p in self.cfp.preset[t]:
                    consumed.add(self._place_occ(k, p))
                for p in self.cfp.postset[t]:
                    produced.append((k, p))
        return tuple(o for o in produced if o not in consumed)

    @property
    def exits(self) -> tuple[str, ...]:
        return tuple(p for _, p in self.exit_occurrences)

    def occ_name(self, occ: Occ) -> str:
        k, node = occ
        first = next(i for i, s in enumerate(self.segments) if node in s.places or node in s.transitions)
        return node if k == first else f"{node}@{k}"

    def graph(self) -> tuple[frozenset[str], frozenset[str], frozenset[tuple[str, str]]]:
        places: set[str] = set()
        transitions: set[str] = set()
        arcs: set[tuple[str, str]] = set()
        for k, seg in enumerate(self.segments):
            for t in seg.transitions:
                tn = self.occ_name((k, t))
                transitions.add(tn)
                for p in self.cfp.preset[t]:
                    pn = self.occ_name(self._place_occ(k, p))
                    places.add(pn)
                    arcs.add((pn, tn))
                for p in self.cfp.postset[t]:
                    pn = self.occ_name((k, p))
                    places.add(pn)
                    arcs.add((tn, pn))
        return frozenset(places), frozenset(transitions), frozenset(arcs)

    def origin_arcs(self) -> frozenset[tuple[str, str]]:
        """Arcs of the path mapped back onto the original net."""
        h = self.cfp.origin
        out: set[tuple[str, str]] = set()
        for seg in self.segments:
            out |= {(h(a), h(b)) for a, b in seg.arcs}
        return frozenset(out)

    @cached_property
    def process(self) -> "PathProcess":
        return PathProcess.build(self)

    @property
    def tars(self) -> frozenset[Tar]:
        return self.process.tars

    @property
    def transitions(self) -> tuple[str, ...]:
        return tuple(self.cfp.origin(e) for _, e in self.process.events)


@dataclass(frozen=True, eq=False)
class PathProcess:
    """The partial order of event occurrences of a path.

    Loop paths carry one extra copy of their first segment at the end, so the
    step that closes the loop is part of the order.
    """

    events: tuple[Occ, ...]
    origins: tuple[str, ...]
    preds: tuple[frozenset[int], ...]  # immediate causal predecessors
    below: tuple[frozenset[int], ...]  # all strict causal predecessors
    wrap_start: int  # first index of the repeated segment (== len(events) if none)
    pairs: dict[Tar, tuple[int, int]] = field(default_factory=dict)

    @property
    def tars(self) -> frozenset[Tar]:
        return frozenset(self.pairs)

    @classmethod
    def build(cls, path: BehaviorPath) -> PathProcess:
        cfp = path.cfp
        segments = list(path.segments)
        joints = list(path.joints)
        wrap_start = None
        if path.kind == LOOP:
            first = segments[0]
            joint = _assign_joints(cfp, path.exit_occurrences, first)[0]
            segments.append(first)
            joints.append(joint)

        def place_occ(k: int, p: str) -> Occ:
            if k > 0 and p in joints[k]:
                return joints[k][p]
            return (k, p)

        events: list[Occ] = []
        producer: dict[Occ, int] = {}
        preds: list[frozenset[int]] = []
        for k, seg in enumerate(segments):
            if k == len(path.segments):
                wrap_start = len(events)
            for t in seg.transitions:
                idx = len(events)
                events.append((k, t))
                preds.append(frozenset(producer[o] for o in (place_occ(k, p) for p in cfp.preset[t]) if o in producer))
                for p in cfp.postset[t]:
                    producer[(k, p)] = idx
        below: list[frozenset[int]] = []
        for i, ps in enumerate(preds):
            acc: set[int] = set(ps)
            for j in ps:
                acc |= below[j]
            below.append(frozenset(acc))
        origins = tuple(cfp.origin(e) for _, e in events)
        pairs: dict[Tar, tuple[int, int]] = {}
        n = len(events)
        for a in range(n):
            for b in range(n):
                if a == b or b in below[a]:
                    continue
                # no c with a < c < b
                if any(a in below[c] for c in below[b]):
                    continue
                tar = Tar(origins[a], origins[b])
                if tar not in pairs:
                    pairs[tar] = (a, b)
        return cls(
            tuple(events),
            origins,
            tuple(preds),
            tuple(below),
            wrap_start if wrap_start is not None else len(events),
            dict(sorted(pairs.items(), key=lambda kv: (kv[1][1], kv[1][0], kv[0]))),
        )


def segment_tars(cfp: Cfp, seg: Segment) -> frozenset[Tar]:
    return BehaviorPath(cfp, (seg,), ({},)).tars


# ---------------------------------------------------------------------------
# segments


def _topological(cfp: Cfp, events: Iterable[str]) -> tuple[str, ...]:
    pos = {e: i for i, e in enumerate(cfp.order)}
    return tuple(sorted(events, key=lambda e: pos[e]))


def _closures(cfp: Cfp, seed: str, joints: frozenset[str]) -> list[frozenset[str]]:
    """All conflict-free event sets reachable from ``seed`` by the closure rules."""
    results: list[frozenset[str]] = []
    producer = {p: (cfp.preset[p][0] if cfp.preset[p] else None) for p in cfp.places}

    def valid(events: frozenset[str]) -> bool:
        for e in events:
            if cfp.conflicts[e] & events:
                return False
        for e in events:
            for p in cfp.postset[e]:
                if p in joints and any(c in events for c in cfp.postset[p]):
                    return False
        return True

    def grow(events: frozenset[str]) -> None:
        events = set(events)
        changed = True
        while changed:
            changed = False
            for e in list(events):
                for p in cfp.preset[e]:
                    if p in joints:
                        continue
                    src = producer[p]
                    if src is None:
                        return  # non-joint input without producer cannot be an entry
                    if src not in events:
                        events.add(src)
                        changed = True
        frozen = frozenset(events)
        if not valid(frozen):
            return
        for e in sorted(frozen, key=cfp.sort_key):
            for p in cfp.postset[e]:
                if p in joints:
                    continue
                consumers = cfp.postset[p]
                taken = [c for c in consumers if c in frozen]
                if taken:
                    continue
                for c in consumers:
                    grow(frozen | {c})
                return
        results.append(frozen)

    grow(frozenset({seed}))
    return results


def _replay(cfp: Cfp, system: NetSystem, seg: Segment) -> None:
    marking = Marking(Counter(cfp.origin(p) for p in seg.entries))
    for t in seg.transitions:
        try:
            marking = fire(system, cfp.origin(t), marking)
        except PetriError as exc:
            raise ReplayViolation(f"{seg.name}: {exc}", marking) from None
    expected = Marking(Counter(cfp.origin(p) for p in seg.exits))
    if marking != expected:
        raise ReplayViolation(f"{seg.name}: replay ends in {marking!r}, expected {expected!r}", marking)


def extract_segments(cfp: Cfp, system: NetSystem | None = None) -> list[Segment]:
    joints = cfp.joint_places
    seeds = [
        e
        for e in cfp.order
        if not cfp.preset[e] or any(p in joints for p in cfp.preset[e])
    ]
    found: dict[frozenset[str], None] = {}
    for seed in seeds:
        for events in _closures(cfp, seed, joints):
            found.setdefault(events, None)
    pos = {e: i for i, e in enumerate(cfp.order)}
    ordered = sorted(found, key=lambda s: sorted(pos[e] for e in s))
    segments: list[Segment] = []
    for i, events in enumerate(ordered, start=1):
        transitions = _topological(cfp, events)
        arcs = frozenset(
            {(p, t) for t in transitions for p in cfp.preset[t]}
            | {(t, p) for t in transitions for p in cfp.postset[t]}
        )
        places = frozenset(n for arc in arcs for n in arc) - events
        produced = {p for t in transitions for p in cfp.postset[t]}
        consumed = {p for t in transitions for p in cfp.preset[t]}
        seg = Segment(
            i,
            transitions,
            places,
            arcs,
            tuple(sorted(consumed - produced, key=cfp.sort_key)),
            tuple(sorted(produced - consumed, key=cfp.sort_key)),
        )
        if system is not None:
            _replay(cfp, system, seg)
        segments.append(seg)
    return segments


# ---------------------------------------------------------------------------
# linking


def _assign_joints(
    cfp: Cfp, exits: Sequence[Occ], seg: Segment, strict: bool = False
) -> tuple[dict[str, Occ], list[str]]:
    """Glue each entry of ``seg`` onto an exit occurrence with the same origin."""
    free = list(exits)
    joint: dict[str, Occ] = {}
    notes: list[str] = []
    for p in seg.entries:
        same = [o for o in free if o[1] == p]
        candidates = same or [o for o in free if cfp.origin(o[1]) == cfp.origin(p)]
        if not candidates:
            raise NotLinkable(f"no exit for entry {p} of {seg.name}")
        if len(candidates) > 1 and not same:
            msg = f"entry {p} of {seg.name} has {len(candidates)} joint candidates"
            if strict:
                raise AmbiguousJoint(msg)
            notes.append(msg)
        candidates.sort(key=lambda o: (cfp.sort_key(o[1]), o[0]))
        chosen = candidates[0]
        free.remove(chosen)
        joint[p] = chosen
    return joint, notes


def _as_path(cfp: Cfp, a: Segment | BehaviorPath) -> BehaviorPath:
    if isinstance(a, BehaviorPath):
        return a
    return BehaviorPath(cfp, (a,), ({},))


def linkable(cfp: Cfp, a: Segment | BehaviorPath, b: Segment) -> bool:
    exits = _as_path(cfp, a).exits if isinstance(a, BehaviorPath) else a.exits
    return cfp.h(exits) >= cfp.h(b.entries)


def link(cfp: Cfp, a: Segment | BehaviorPath, b: Segment, strict: bool = False) -> BehaviorPath:
    chain = _as_path(cfp, a)
    if not cfp.h(chain.exits) >= cfp.h(b.entries):
        raise NotLinkable(f"{chain.name} cannot be followed by {b.name}")
    joint, notes = _assign_joints(cfp, chain.exit_occurrences, b, strict)
    return BehaviorPath(
        cfp,
        chain.segments + (b,),
        chain.joints + (joint,),
        None,
        chain.ambiguous + tuple(notes),
    )


# ---------------------------------------------------------------------------
# paths


def classify(cfp: Cfp, system: NetSystem, chain: BehaviorPath) -> str | None:
    entries = frozenset(chain.entries)
    exits_h = cfp.h(chain.exits)
    # an empty exit marking is a finished run too: nothing is left to fire
    if entries == frozenset(cfp.initial_places) and exits_h <= system.exit_places:
        return MAIN
    if cfp.h(entries) == exits_h:
        return LOOP
    return None


def _with(path: BehaviorPath, **changes) -> BehaviorPath:
    return BehaviorPath(
        path.cfp,
        path.segments,
        path.joints,
        changes.get("kind", path.kind),
        path.ambiguous,
        changes.get("index", path.index),
    )


def _start_segments(cfp: Cfp, segments: Sequence[Segment]) -> list[Segment]:
    initial = frozenset(cfp.initial_places)
    by_origin = Counter(cfp.origin(p) for p in cfp.places)
    starts = []
    for seg in segments:
        if frozenset(seg.entries) == initial and initial:
            starts.append(seg)
        elif seg.entries and all(by_origin[cfp.origin(p)] > 1 for p in seg.entries):
            starts.append(seg)
    return starts


def enumerate_paths(
    cfp: Cfp,
    system: NetSystem,
    segments: Sequence[Segment] | None = None,
    max_paths: int = DEFAULT_MAX_PATHS,
) -> list[BehaviorPath]:
    if segments is None:
        segments = extract_segments(cfp, system)
    initial = frozenset(cfp.initial_places)
    emitted: list[BehaviorPath] = []
    truncated = False

    def dfs(chain: BehaviorPath, used: frozenset[int]) -> None:
        nonlocal truncated
        if len(emitted) >= max_paths:
            truncated = True
            return
        kind = classify(cfp, system, chain)
        if kind:
            emitted.append(_with(chain, kind=kind))
            # a loop back onto the initial marking may still be left towards the end
            if kind != LOOP or frozenset(chain.entries) != initial:
                return
        exits_h = cfp.h(chain.exits)
        extended = False
        for seg in segments:
            if seg.index in used or not (exits_h >= cfp.h(seg.entries)) or not seg.entries:
                continue
            extended = True
            dfs(link(cfp, chain, seg), used | {seg.index})
        if not extended and not kind and frozenset(chain.entries) == initial and not exits_h <= system.exit_places:
            emitted.append(_with(chain, kind=PARTIAL))

    for seg in _start_segments(cfp, segments):
        dfs(_as_path(cfp, seg), frozenset({seg.index}))
    if truncated:
        warnings.warn(f"path enumeration stopped after {max_paths} paths", RuntimeWarning)
    return order_paths(emitted)


def order_paths(paths: Sequence[BehaviorPath]) -> list[BehaviorPath]:
    """Main before Loop before Partial; greedy by uncovered TARs inside a kind."""
    covered: set[Tar] = set()
    ordered: list[BehaviorPath] = []
    for kind in (MAIN, LOOP, PARTIAL):
        pool = sorted((p for p in paths if p.kind == kind), key=lambda p: p.key)
        while pool:
            gain = max(len(p.tars - covered) for p in pool)
            best = next(p for p in pool if len(p.tars - covered) == gain)
            pool.remove(best)
            covered |= best.tars
            ordered.append(best)
    return [_with(p, index=i) for i, p in enumerate(ordered, start=1)]


def prune(paths: Sequence[BehaviorPath]) -> list[tuple[BehaviorPath, frozenset[Tar]]]:
    seen: set[Tar] = set()
    kept: list[tuple[BehaviorPath, frozenset[Tar]]] = []
    for path in paths:
        fresh = frozenset(t for t in path.tars if t not in seen)
        seen |= fresh
        if fresh:
            kept.append((path, fresh))
    return kept
