"""Reading and writing models: a PNML subset, the ``.pnet`` line DSL and DOT.

The DSL has one statement per line::

    # comments and blank lines are ignored
    net "bioinformatics"
    place P_a *                 # one initial token (``*3`` for three)
    place P_d final             # a run may end here
    trans T_a "extract genes" role="experimenter"
    trans T_x                   # silent transition
    arc P_a T_a
    meta author "lab"

Roles travel in the document metadata under ``role.<transition>``, branch
conditions written as ``cond="..."`` under ``cond.<transition>`` and optional
place captions under ``label.<place>``.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping
from xml.parsers import expat

from .petri import Marking, NetSystem, PetriNet

TOOL_NAME = "bept"


class ParseError(Exception):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class BipartiteViolation(ParseError):
    pass


class DuplicateId(ParseError):
    pass


@dataclass(frozen=True, eq=False)
class ModelDocument:
    system: NetSystem
    metadata: Mapping[str, str] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for key, value in self.metadata.items():
            if key.startswith("role.") and not value:
                raise ValueError(f"empty role for {key[5:]}")
        object.__setattr__(self, "metadata", dict(sorted(self.metadata.items())))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ModelDocument):
            return NotImplemented
        return (
            self.system.net == other.system.net
            and self.system.initial == other.system.initial
            and self.system.final == other.system.final
            and dict(self.metadata) == dict(other.metadata)
        )

    @property
    def net(self) -> PetriNet:
        return self.system.net

    @property
    def name(self) -> str | None:
        return self.metadata.get("name")

    @property
    def roles(self) -> dict[str, str]:
        return {k[5:]: v for k, v in self.metadata.items() if k.startswith("role.")}

    @property
    def place_labels(self) -> dict[str, str]:
        return {k[6:]: v for k, v in self.metadata.items() if k.startswith("label.")}


class _Builder:
    """Collects declarations and enforces id uniqueness and bipartiteness."""

    def __init__(self) -> None:
        self.places: list[str] = []
        self.transitions: list[str] = []
        self.arcs: list[tuple[str, str, int | None, int | None]] = []
        self.labels: dict[str, str] = {}
        self.tokens: dict[str, int] = {}
        self.final: set[str] = set()
        self.metadata: dict[str, str] = {}
        self.warnings: list[str] = []
        self._kind: dict[str, str] = {}

    def declare(self, node: str, kind: str, line: int | None, column: int | None = None) -> None:
        if node in self._kind:
            raise DuplicateId(f"duplicate id {node!r}", line, column)
        self._kind[node] = kind
        (self.places if kind == "place" else self.transitions).append(node)

    def arc(self, src: str, dst: str, line: int | None, column: int | None = None) -> None:
        self.arcs.append((src, dst, line, column))

    def build(self) -> ModelDocument:
        arcs: set[tuple[str, str]] = set()
        for src, dst, line, column in self.arcs:
            for end in (src, dst):
                if end not in self._kind:
                    raise ParseError(f"arc refers to unknown node {end!r}", line, column)
            if self._kind[src] == self._kind[dst]:
                raise BipartiteViolation(
                    f"arc {src}->{dst} joins two {self._kind[src]}s", line, column
                )
            if (src, dst) in arcs:
                self.warnings.append(f"duplicate arc {src}->{dst} ignored")
            arcs.add((src, dst))
        net = PetriNet(frozenset(self.places), frozenset(self.transitions), frozenset(arcs), self.labels)
        system = NetSystem(net, Marking(self.tokens), frozenset(self.final))
        return ModelDocument(system, self.metadata, tuple(self.warnings))


# ---------------------------------------------------------------------------
# DSL

_ID = r"[A-Za-z_][A-Za-z0-9_.\-]*"
_TOKEN = re.compile(
    r'(?P<kv>\w+)="(?P<kvv>(?:[^"\\]|\\.)*)"'
    r'|"(?P<str>(?:[^"\\]|\\.)*)"'
    r"|(?P<word>[^\s\"#]+)"
    r"|(?P<comment>#.*)"
    r"|(?P<bad>\S)"
)
_ID_RE = re.compile(_ID + r"\Z")
_STAR_RE = re.compile(r"\*(\d*)\Z")


def _unescape(s: str) -> str:
    return re.sub(r"\\(.)", r"\1", s)


def _escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def _tokens(line: str, lineno: int) -> list[tuple[str, str, str | None, int]]:
    out = []
    for m in _TOKEN.finditer(line):
        col = m.start() + 1
        if m.group("comment") is not None:
            break
        if m.group("bad") is not None:
            raise ParseError(f"unexpected character {m.group('bad')!r}", lineno, col)
        if m.group("kv") is not None:
            out.append(("kv", m.group("kv"), _unescape(m.group("kvv")), col))
        elif m.group("str") is not None:
            out.append(("str", _unescape(m.group("str")), None, col))
        else:
            out.append(("word", m.group("word"), None, col))
    return out


def _need_id(tok: tuple[str, str, str | None, int], lineno: int) -> str:
    kind, value, _, col = tok
    if kind != "word" or not _ID_RE.match(value):
        raise ParseError(f"expected an identifier, got {value!r}", lineno, col)
    return value


def parse_dsl(text: str, source: str | None = None) -> ModelDocument:
    b = _Builder()
    if source:
        b.metadata["source"] = source
    for lineno, line in enumerate(text.splitlines(), start=1):
        toks = _tokens(line, lineno)
        if not toks:
            continue
        head = toks[0]
        if head[0] != "word":
            raise ParseError("statement must start with a keyword", lineno, head[3])
        keyword, rest = head[1], toks[1:]
        if keyword == "place":
            if not rest:
                raise ParseError("place needs an id", lineno, head[3])
            pid = _need_id(rest[0], lineno)
            b.declare(pid, "place", lineno, rest[0][3])
            for tok in rest[1:]:
                kind, value, _, col = tok
                star = _STAR_RE.match(value) if kind == "word" else None
                if star:
                    count = int(star.group(1) or 1)
                    b.tokens[pid] = b.tokens.get(pid, 0) + count
                elif kind == "word" and value == "final":
                    b.final.add(pid)
                elif kind == "str":
                    b.metadata[f"label.{pid}"] = value
                else:
                    raise ParseError(f"unexpected {value!r} in place statement", lineno, col)
        elif keyword == "trans":
            if not rest:
                raise ParseError("trans needs an id", lineno, head[3])
            tid = _need_id(rest[0], lineno)
            b.declare(tid, "transition", lineno, rest[0][3])
            for kind, value, kv_value, col in rest[1:]:
                if kind == "str":
                    if tid in b.labels:
                        raise ParseError("transition has two labels", lineno, col)
                    if value.strip():
                        b.labels[tid] = value
                elif kind == "kv" and value == "role":
                    if not kv_value:
                        raise ParseError("role must not be empty", lineno, col)
                    b.metadata[f"role.{tid}"] = kv_value or ""
                elif kind == "kv" and value == "cond" and kv_value:
                    b.metadata[f"cond.{tid}"] = kv_value
                else:
                    raise ParseError(f"unexpected {value!r} in trans statement", lineno, col)
        elif keyword == "arc":
            if len(rest) != 2:
                raise ParseError("arc needs exactly two ids", lineno, head[3])
            b.arc(_need_id(rest[0], lineno), _need_id(rest[1], lineno), lineno, rest[0][3])
        elif keyword == "net":
            if len(rest) != 1 or rest[0][0] != "str":
                raise ParseError('expected net "name"', lineno, head[3])
            b.metadata["name"] = rest[0][1]
        elif keyword == "meta":
            if len(rest) != 2 or rest[0][0] != "word" or rest[1][0] != "str":
                raise ParseError('expected meta key "value"', lineno, head[3])
            b.metadata[rest[0][1]] = rest[1][1]
        else:
            raise ParseError(f"unknown statement {keyword!r}", lineno, head[3])
    return b.build()


def write_dsl(doc: ModelDocument) -> str:
    net, system, meta = doc.net, doc.system, doc.metadata
    lines: list[str] = []
    if "name" in meta:
        lines.append(f'net "{_escape(meta["name"])}"')
    for key in sorted(meta):
        if key == "name" or key.startswith(("role.", "label.", "cond.")):
            continue
        lines.append(f'meta {key} "{_escape(meta[key])}"')
    for p in sorted(net.places):
        parts = ["place", p]
        n = system.initial[p]
        if n:
            parts.append("*" if n == 1 else f"*{n}")
        if p in system.final:
            parts.append("final")
        if f"label.{p}" in meta:
            parts.append(f'"{_escape(meta[f"label.{p}"])}"')
        lines.append(" ".join(parts))
    for t in sorted(net.transitions):
        parts = ["trans", t]
        if t in net.labels:
            parts.append(f'"{_escape(net.labels[t])}"')
        if f"role.{t}" in meta:
            parts.append(f'role="{_escape(meta[f"role.{t}"])}"')
        if f"cond.{t}" in meta:
            parts.append(f'cond="{_escape(meta[f"cond.{t}"])}"')
        lines.append(" ".join(parts))
    for src, dst in sorted(net.arcs):
        lines.append(f"arc {src} {dst}")
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# PNML


@dataclass
class _Element:
    tag: str
    attrs: dict[str, str]
    line: int
    column: int
    children: list["_Element"] = field(default_factory=list)
    text: str = ""

    def child(self, tag: str) -> "_Element | None":
        for c in self.children:
            if c.tag == tag:
                return c
        return None

    def text_of(self, *path: str) -> str | None:
        node: _Element | None = self
        for tag in path:
            node = node.child(tag) if node else None
        return node.text.strip() if node else None


def _read_xml(data: bytes) -> _Element:
    parser = expat.ParserCreate()
    stack: list[_Element] = []
    root: list[_Element] = []

    def local(name: str) -> str:
        return name.rsplit(":", 1)[-1]

    def start(name: str, attrs: dict[str, str]) -> None:
        el = _Element(local(name), dict(attrs), parser.CurrentLineNumber, parser.CurrentColumnNumber + 1)
        if stack:
            stack[-1].children.append(el)
        else:
            root.append(el)
        stack.append(el)

    def end(name: str) -> None:
        stack.pop()

    def chars(data: str) -> None:
        if stack:
            stack[-1].text += data

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chars
    try:
        parser.Parse(data, True)
    except expat.ExpatError as exc:
        raise ParseError(expat.errors.messages.get(exc.code, str(exc)), exc.lineno, exc.offset + 1) from None
    if not root:
        raise ParseError("empty document", 1, 1)
    return root[0]


def _flatten(el: _Element) -> Iterable[_Element]:
    for c in el.children:
        if c.tag == "page":
            yield from _flatten(c)
        else:
            yield c


def parse_pnml(data: bytes | str, source: str | None = None) -> ModelDocument:
    if isinstance(data, str):
        data = data.encode("utf-8")
    root = _read_xml(data)
    if root.tag == "pnml":
        nets = [c for c in root.children if c.tag == "net"]
        if not nets:
            raise ParseError("no <net> element", root.line, root.column)
        net_el = nets[0]
        extra = [f"ignored additional <net> at line {n.line}" for n in nets[1:]]
    elif root.tag == "net":
        net_el, extra = root, []
    else:
        raise ParseError(f"unexpected root element <{root.tag}>", root.line, root.column)

    b = _Builder()
    b.warnings.extend(extra)
    if source:
        b.metadata["source"] = source
    final_refs: list[tuple[str, _Element]] = []

    def require_id(el: _Element) -> str:
        node_id = el.attrs.get("id")
        if not node_id:
            raise ParseError(f"<{el.tag}> without id", el.line, el.column)
        return node_id

    def bept_tool(el: _Element) -> Iterable[_Element]:
        for c in el.children:
            if c.tag == "toolspecific" and c.attrs.get("tool") == TOOL_NAME:
                yield c

    for el in _flatten(net_el):
        if el.tag == "place":
            pid = require_id(el)
            b.declare(pid, "place", el.line, el.column)
            text = el.text_of("initialMarking", "text")
            if text:
                try:
                    n = int(text)
                except ValueError:
                    raise ParseError(f"bad initial marking {text!r}", el.line, el.column) from None
                if n < 0:
                    raise ParseError("negative initial marking", el.line, el.column)
                if n:
                    b.tokens[pid] = n
            caption = el.text_of("name", "text")
            for tool in bept_tool(el):
                if tool.child("final") is not None:
                    b.final.add(pid)
                if tool.child("condition") is not None:
                    caption = tool.text_of("condition")
            if caption and caption != pid:
                b.metadata[f"label.{pid}"] = caption
            for c in el.children:
                if c.tag not in {"name", "initialMarking", "toolspecific", "graphics"}:
                    b.warnings.append(f"ignored <{c.tag}> in place {pid} at line {c.line}")
        elif el.tag == "transition":
            tid = require_id(el)
            b.declare(tid, "transition", el.line, el.column)
            label = el.text_of("name", "text")
            silent = False
            for c in el.children:
                if c.tag == "toolspecific" and c.attrs.get("activity") == "$invisible$":
                    silent = True
            for tool in bept_tool(el):
                role = tool.text_of("role")
                if role:
                    b.metadata[f"role.{tid}"] = role
                cond = tool.text_of("condition")
                if cond:
                    b.metadata[f"cond.{tid}"] = cond
                if tool.child("silent") is not None:
                    silent = True
            if label and not silent:
                b.labels[tid] = label
            for c in el.children:
                if c.tag not in {"name", "toolspecific", "graphics"}:
                    b.warnings.append(f"ignored <{c.tag}> in transition {tid} at line {c.line}")
        elif el.tag == "arc":
            src, dst = el.attrs.get("source"), el.attrs.get("target")
            if not src or not dst:
                raise ParseError("<arc> needs source and target", el.line, el.column)
            weight = el.text_of("inscription", "text")
            if weight not in (None, "", "1"):
                b.warnings.append(f"arc weight {weight} at line {el.line} treated as 1")
            b.arc(src, dst, el.line, el.column)
        elif el.tag == "name":
            name = el.text_of("text")
            if name:
                b.metadata["name"] = name
        elif el.tag == "finalmarkings":
            for marking in el.children:
                for place in marking.children:
                    if place.tag == "place" and (place.text_of("text") or "1") != "0":
                        final_refs.append((place.attrs.get("idref", ""), place))
        elif el.tag == "toolspecific":
            if el.attrs.get("tool") == TOOL_NAME:
                for meta in el.children:
                    if meta.tag == "meta" and meta.attrs.get("key"):
                        b.metadata.setdefault(meta.attrs["key"], meta.text.strip())
        elif el.tag == "graphics":
            pass
        else:
            b.warnings.append(f"ignored <{el.tag}> at line {el.line}")
    for ref, el in final_refs:
        if ref not in b.places:
            raise ParseError(f"final marking refers to unknown place {ref!r}", el.line, el.column)
        b.final.add(ref)
    return b.build()


def write_pnml(doc: ModelDocument) -> bytes:
    net, system, meta = doc.net, doc.system, doc.metadata
    root = ET.Element("pnml")
    net_el = ET.SubElement(root, "net", id="net", type="http://www.pnml.org/version-2009/grammar/ptnet")
    if "name" in meta:
        ET.SubElement(ET.SubElement(net_el, "name"), "text").text = meta["name"]
    others = {k: v for k, v in meta.items() if k != "name" and not k.startswith(("role.", "label.", "cond."))}
    if others:
        tool = ET.SubElement(net_el, "toolspecific", tool=TOOL_NAME, version="1")
        for key, value in sorted(others.items()):
            ET.SubElement(tool, "meta", key=key).text = value
    page = ET.SubElement(net_el, "page", id="page")
    for p in sorted(net.places):
        el = ET.SubElement(page, "place", id=p)
        if system.initial[p]:
            ET.SubElement(ET.SubElement(el, "initialMarking"), "text").text = str(system.initial[p])
        caption = meta.get(f"label.{p}")
        if p in system.final or caption:
            tool = ET.SubElement(el, "toolspecific", tool=TOOL_NAME, version="1")
            if p in system.final:
                ET.SubElement(tool, "final")
            if caption:
                ET.SubElement(tool, "condition").text = caption
    for t in sorted(net.transitions):
        el = ET.SubElement(page, "transition", id=t)
        if t in net.labels:
            ET.SubElement(ET.SubElement(el, "name"), "text").text = net.labels[t]
        if f"role.{t}" in meta or f"cond.{t}" in meta:
            tool = ET.SubElement(el, "toolspecific", tool=TOOL_NAME, version="1")
            if f"role.{t}" in meta:
                ET.SubElement(tool, "role").text = meta[f"role.{t}"]
            if f"cond.{t}" in meta:
                ET.SubElement(tool, "condition").text = meta[f"cond.{t}"]
    for i, (src, dst) in enumerate(sorted(net.arcs), start=1):
        ET.SubElement(page, "arc", id=f"a{i}", source=src, target=dst)
    ET.indent(root)
    return b'<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="utf-8") + b"\n"


def load_model(path: str) -> ModelDocument:
    """Read a model file, choosing the parser by extension (``.pnml`` or DSL)."""
    from pathlib import Path

    p = Path(path)
    data = p.read_bytes()
    if p.suffix.lower() in {".pnml", ".xml"}:
        return parse_pnml(data, source=p.name)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8: {exc}") from None
    return parse_dsl(text, source=p.name)


# ---------------------------------------------------------------------------
# DOT


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _dot(
    name: str,
    places: Iterable[str],
    transitions: Iterable[str],
    arcs: Iterable[tuple[str, str]],
    place_attrs: Mapping[str, Mapping[str, str]] | None = None,
    trans_attrs: Mapping[str, Mapping[str, str]] | None = None,
) -> str:
    place_attrs = place_attrs or {}
    trans_attrs = trans_attrs or {}
    lines = [f"digraph {_q(name)} {{", "  rankdir=LR;"]

    def attrs(base: dict[str, str], extra: Mapping[str, str]) -> str:
        merged = {**base, **extra}
        return ", ".join(f"{k}={_q(v)}" for k, v in sorted(merged.items()))

    for p in sorted(places):
        lines.append(f"  {_q(p)} [{attrs({'shape': 'circle'}, place_attrs.get(p, {}))}];")
    for t in sorted(transitions):
        lines.append(f"  {_q(t)} [{attrs({'shape': 'box'}, trans_attrs.get(t, {}))}];")
    for src, dst in sorted(arcs):
        lines.append(f"  {_q(src)} -> {_q(dst)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_dot(graph: Any, name: str = "net") -> str:
    """GraphViz text for a net, a net system, a prefix or a behavior path."""
    from .paths import BehaviorPath, Segment
    from .unfold import Cfp

    if isinstance(graph, NetSystem):
        graph = graph.net
    if isinstance(graph, PetriNet):
        t_attrs = {t: {"label": f"{t}\\n{graph.labels[t]}"} for t in graph.labels}
        return _dot(name, graph.places, graph.transitions, graph.arcs, trans_attrs=t_attrs)
    if isinstance(graph, Cfp):
        p_attrs = {p: {"shadow": "true", "style": "filled", "fillcolor": "gray"} for p in graph.shadows}
        t_attrs = {t: {"cutoff": "true", "peripheries": "2"} for t in graph.cutoffs}
        return _dot(name, graph.places, graph.transitions, graph.arcs, p_attrs, t_attrs)
    if isinstance(graph, (BehaviorPath, Segment)):
        places, transitions, arcs = graph.graph()
        boundary = set(graph.entries) | set(graph.exits)
        p_attrs = {p: {"shadow": "true", "style": "filled", "fillcolor": "gray"} for p in boundary}
        return _dot(name, places, transitions, arcs, p_attrs)
    raise TypeError(f"cannot export {type(graph).__name__} as DOT")
