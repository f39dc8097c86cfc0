"""Place/transition nets, the token game and brute-force behavioral oracles.

Everything the rest of the package claims about behavior is checked against
the exhaustive explorations in this module (``tar_set``, ``trace_set``,
``diagnose``).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping

DEFAULT_STATE_BOUND = 100_000


class PetriError(Exception):
    """Base class for errors raised by the net model."""


class InvalidNet(PetriError):
    pass


class NotEnabled(PetriError):
    pass


class UnknownTransition(PetriError):
    pass


class StateSpaceExceeded(PetriError):
    pass


@dataclass(frozen=True, eq=False)
class PetriNet:
    places: frozenset[str]
    transitions: frozenset[str]
    arcs: frozenset[tuple[str, str]]
    labels: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "places", frozenset(self.places))
        object.__setattr__(self, "transitions", frozenset(self.transitions))
        object.__setattr__(self, "arcs", frozenset((str(a), str(b)) for a, b in self.arcs))
        object.__setattr__(self, "labels", dict(sorted(self.labels.items())))
        clash = self.places & self.transitions
        if clash:
            raise InvalidNet(f"ids used as both place and transition: {sorted(clash)}")
        for src, dst in self.arcs:
            if src in self.places and dst in self.transitions:
                continue
            if src in self.transitions and dst in self.places:
                continue
            raise InvalidNet(f"arc {src}->{dst} is not place->transition or transition->place")
        for node in self.labels:
            if node not in self.transitions:
                raise InvalidNet(f"label attached to non-transition {node!r}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PetriNet):
            return NotImplemented
        return (
            self.places == other.places
            and self.transitions == other.transitions
            and self.arcs == other.arcs
            and dict(self.labels) == dict(other.labels)
        )

    def __hash__(self) -> int:
        return hash((self.places, self.transitions, self.arcs))

    @property
    def nodes(self) -> frozenset[str]:
        return self.places | self.transitions

    @cached_property
    def preset(self) -> dict[str, tuple[str, ...]]:
        pre: dict[str, list[str]] = {n: [] for n in self.nodes}
        for src, dst in self.arcs:
            pre[dst].append(src)
        return {n: tuple(sorted(v)) for n, v in pre.items()}

    @cached_property
    def postset(self) -> dict[str, tuple[str, ...]]:
        post: dict[str, list[str]] = {n: [] for n in self.nodes}
        for src, dst in self.arcs:
            post[src].append(dst)
        return {n: tuple(sorted(v)) for n, v in post.items()}

    def label(self, transition: str) -> str | None:
        return self.labels.get(transition)

    def sorted_transitions(self) -> list[str]:
        return sorted(self.transitions)


class Marking(Mapping[str, int]):
    """Immutable multiset of tokens over place ids."""

    __slots__ = ("_items", "_hash")

    def __init__(self, tokens: Mapping[str, int] | Iterable[tuple[str, int]] | None = None):
        raw = dict(tokens or {})
        for place, count in raw.items():
            if count < 0:
                raise ValueError(f"negative token count on {place}")
        self._items = tuple(sorted((p, int(c)) for p, c in raw.items() if c))
        self._hash = hash(self._items)

    @classmethod
    def of(cls, *places: str) -> Marking:
        counts: dict[str, int] = {}
        for p in places:
            counts[p] = counts.get(p, 0) + 1
        return cls(counts)

    def __getitem__(self, place: str) -> int:
        for p, c in self._items:
            if p == place:
                return c
        return 0

    def __iter__(self) -> Iterator[str]:
        return (p for p, _ in self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, place: object) -> bool:
        return any(p == place for p, _ in self._items)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Marking):
            return self._items == other._items
        if isinstance(other, Mapping):
            return self._items == Marking(other)._items
        return NotImplemented

    def __repr__(self) -> str:
        inner = ", ".join(p if c == 1 else f"{p}*{c}" for p, c in self._items)
        return f"Marking({{{inner}}})"

    @property
    def total(self) -> int:
        return sum(c for _, c in self._items)

    def support(self) -> frozenset[str]:
        return frozenset(p for p, _ in self._items)

    def vector(self, order: Iterable[str]) -> list[int]:
        return [self[p] for p in order]


@dataclass(frozen=True, eq=False)
class NetSystem:
    """A net with an initial marking.

    ``final`` optionally names places at which a run may end even though they
    have outgoing arcs (needed for nets whose loops leave no structural sink).
    """

    net: PetriNet
    initial: Marking
    final: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not isinstance(self.initial, Marking):
            object.__setattr__(self, "initial", Marking(self.initial))
        object.__setattr__(self, "final", frozenset(self.final))
        missing = set(self.initial) - self.net.places
        if missing:
            raise InvalidNet(f"initial marking names unknown places {sorted(missing)}")
        missing = self.final - self.net.places
        if missing:
            raise InvalidNet(f"final set names unknown places {sorted(missing)}")

    @cached_property
    def entry_places(self) -> frozenset[str]:
        sources, _ = boundary_nodes(self.net)
        return frozenset(p for p in sources if p in self.net.places) | self.initial.support()

    @cached_property
    def exit_places(self) -> frozenset[str]:
        _, sinks = boundary_nodes(self.net)
        return frozenset(p for p in sinks if p in self.net.places) | self.final

    @property
    def boundary_places(self) -> frozenset[str]:
        return self.entry_places | self.exit_places

    def is_final(self, marking: Marking) -> bool:
        """True when every token sits on an exit place of the system."""
        return all(p in self.exit_places for p in marking)


@dataclass(frozen=True, order=True)
class Tar:
    first: str
    second: str

    def __str__(self) -> str:
        return f"{self.first}<{self.second}"


@dataclass(frozen=True, order=True)
class Trace:
    sequence: tuple[str, ...]

    def __str__(self) -> str:
        return " ".join(self.sequence)


@dataclass(frozen=True)
class TraceSet:
    traces: tuple[Trace, ...]
    truncated: bool

    def __iter__(self) -> Iterator[Trace]:
        return iter(self.traces)

    def __len__(self) -> int:
        return len(self.traces)

    def as_set(self) -> set[tuple[str, ...]]:
        return {t.sequence for t in self.traces}


@dataclass(frozen=True)
class Diagnosis:
    dead_transitions: tuple[str, ...]
    deadlocks: tuple[Marking, ...]

    @property
    def clean(self) -> bool:
        return not self.dead_transitions and not self.deadlocks


def boundary_nodes(net: PetriNet) -> tuple[frozenset[str], frozenset[str]]:
    sources = frozenset(n for n in net.nodes if not net.preset[n])
    sinks = frozenset(n for n in net.nodes if not net.postset[n])
    return sources, sinks


def is_enabled(net: PetriNet, marking: Marking, t: str) -> bool:
    return all(marking[p] >= 1 for p in net.preset[t])


def enabled_transitions(net: PetriNet, marking: Marking) -> list[str]:
    return [t for t in sorted(net.transitions) if is_enabled(net, marking, t)]


def _fire_unchecked(net: PetriNet, marking: Marking, t: str) -> Marking:
    counts = dict(marking)
    for p in net.preset[t]:
        counts[p] -= 1
    for p in net.postset[t]:
        counts[p] = counts.get(p, 0) + 1
    return Marking(counts)


def fire(system: NetSystem, t: str, marking: Marking | Mapping[str, int] | None = None) -> Marking:
    """Fire ``t`` from ``marking`` (the initial marking when omitted)."""
    net = system.net
    if t not in net.transitions:
        raise UnknownTransition(t)
    current = system.initial if marking is None else Marking(marking)
    if not is_enabled(net, current, t):
        raise NotEnabled(f"{t} is not enabled at {current!r}")
    return _fire_unchecked(net, current, t)


def replay(system: NetSystem, sequence: Iterable[str], marking: Marking | None = None) -> Marking:
    current = system.initial if marking is None else marking
    for t in sequence:
        current = fire(system, t, current)
    return current


@dataclass
class StateSpace:
    """Reachable markings in BFS order with a parent pointer for each."""

    markings: list[Marking]
    index: dict[Marking, int]
    parent: list[tuple[int, str] | None]
    edges: list[list[tuple[str, int]]]

    def path_to(self, i: int) -> list[str]:
        seq: list[str] = []
        while self.parent[i] is not None:
            j, t = self.parent[i]  # type: ignore[misc]
            seq.append(t)
            i = j
        return seq[::-1]


def explore(system: NetSystem, state_bound: int = DEFAULT_STATE_BOUND) -> StateSpace:
    if state_bound < 1:
        raise ValueError("state_bound must be >= 1")
    net = system.net
    order = sorted(net.transitions)
    space = StateSpace([system.initial], {system.initial: 0}, [None], [[]])
    queue = deque([0])
    while queue:
        i = queue.popleft()
        m = space.markings[i]
        for t in order:
            if not is_enabled(net, m, t):
                continue
            nxt = _fire_unchecked(net, m, t)
            j = space.index.get(nxt)
            if j is None:
                if len(space.markings) >= state_bound:
                    raise StateSpaceExceeded(
                        f"more than {state_bound} reachable markings; the net may be unbounded"
                    )
                j = len(space.markings)
                space.markings.append(nxt)
                space.index[nxt] = j
                space.parent.append((i, t))
                space.edges.append([])
                queue.append(j)
            space.edges[i].append((t, j))
    return space


def tar_witnesses(
    system: NetSystem, state_bound: int = DEFAULT_STATE_BOUND
) -> dict[Tar, tuple[str, ...]]:
    """Every TAR together with one firing sequence ending in ``a b``."""
    space = explore(system, state_bound)
    found: dict[Tar, tuple[str, ...]] = {}
    for i, out in enumerate(space.edges):
        for a, j in out:
            for b, _ in space.edges[j]:
                tar = Tar(a, b)
                if tar not in found:
                    found[tar] = tuple(space.path_to(i)) + (a, b)
    return dict(sorted(found.items()))


def verify_witness(system: NetSystem, tar: Tar, witness: Iterable[str]) -> bool:
    seq = list(witness)
    if len(seq) < 2 or seq[-2:] != [tar.first, tar.second]:
        return False
    try:
        replay(system, seq)
    except PetriError:
        return False
    return True


def tar_set(system: NetSystem, state_bound: int = DEFAULT_STATE_BOUND) -> list[Tar]:
    return list(tar_witnesses(system, state_bound))


def trace_set(system: NetSystem, max_len: int = 50, max_traces: int = 10_000) -> TraceSet:
    """Firing sequences that end with every token on an exit place.

    Depth-first over the token game; ``truncated`` is set when a branch was
    cut by ``max_len`` or the result was capped at ``max_traces``.
    """
    if max_len < 1 or max_traces < 1:
        raise ValueError("bounds must be >= 1")
    net = system.net
    order = sorted(net.transitions)
    found: set[tuple[str, ...]] = set()
    truncated = False
    stack: list[tuple[Marking, tuple[str, ...]]] = [(system.initial, ())]
    while stack:
        m, seq = stack.pop()
        if seq and system.is_final(m):
            found.add(seq)
            if len(found) >= max_traces:
                truncated = True
                break
        enabled = [t for t in order if is_enabled(net, m, t)]
        if not enabled:
            continue
        if len(seq) >= max_len:
            truncated = True
            continue
        for t in reversed(enabled):
            stack.append((_fire_unchecked(net, m, t), seq + (t,)))
    traces = tuple(Trace(s) for s in sorted(found))
    return TraceSet(traces, truncated)


def diagnose(system: NetSystem, state_bound: int = DEFAULT_STATE_BOUND) -> Diagnosis:
    space = explore(system, state_bound)
    fired: set[str] = set()
    deadlocks: list[Marking] = []
    for m, out in zip(space.markings, space.edges):
        fired.update(t for t, _ in out)
        if not out and not system.is_final(m):
            deadlocks.append(m)
    dead = tuple(sorted(system.net.transitions - fired))
    return Diagnosis(dead, tuple(sorted(deadlocks, key=lambda m: tuple(m.items()))))


def is_loop_free(system: NetSystem, state_bound: int = DEFAULT_STATE_BOUND) -> bool:
    """True when the reachability graph is acyclic."""
    space = explore(system, state_bound)
    indeg = [0] * len(space.markings)
    for out in space.edges:
        for _, j in out:
            indeg[j] += 1
    queue = deque(i for i, d in enumerate(indeg) if d == 0)
    seen = 0
    while queue:
        i = queue.popleft()
        seen += 1
        for _, j in space.edges[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                queue.append(j)
    return seen == len(space.markings)
