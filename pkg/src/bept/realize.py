"""Sentence planning and surface realization.

A document is planned from the pruned behavior paths: main branches first,
then loops, each path becoming one paragraph of activity sentences.  Every
kept adjacency is verbalized in exactly one sentence; activities that were
already described earlier are only referenced ("After sequencing DNA, ...").
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .lang import DNode, DSynT, Lexicon, Rdt
from .paths import LOOP, MAIN, PARTIAL, BehaviorPath
from .petri import Diagnosis, NetSystem, Tar

TEMPLATE_TYPES = (
    "place-split",
    "transition-split",
    "place-join",
    "transition-join",
    "loop-entry",
    "loop-back",
    "start",
    "end",
    "deadlock",
    "dead-transition",
    "unsymmetric-bond",
    "rigid-intro",
    "main-branch-intro",
    "loop-intro",
)
BUCKETS = ("1", "2", "many")
CONNECTIVES = ("Then", "Subsequently", "Afterwards")
DEFAULT_THRESHOLD = 75
_NUMBERS = "zero one two three four five six seven eight nine ten eleven twelve".split()


class RealizeError(Exception):
    pass


class NoTemplate(RealizeError):
    pass


class IncompleteDsynt(RealizeError):
    pass


# ---------------------------------------------------------------------------
# templates


def count_word(n: int) -> str:
    return _NUMBERS[n] if 0 <= n < len(_NUMBERS) else str(n)


def bucket(n: int | None) -> str:
    if n is None:
        return "any"
    return "1" if n <= 1 else "2" if n == 2 else "many"


@dataclass(frozen=True)
class Template:
    id: str
    has_label: bool
    type: str
    bucket: str
    text: str

    @property
    def dsynt(self) -> DSynT:
        return DSynT(DNode(self.text, "noun", {"canned": "true"}), source=self.id)

    def fill(self, label: str | None = None, count: int | None = None) -> str:
        return self.text.format(label=label or "", count=count_word(count or 0))


@dataclass(frozen=True)
class TemplateCatalog:
    templates: tuple[Template, ...]

    @classmethod
    def load(cls, path: str | Path | None = None) -> "TemplateCatalog":
        if path is None:
            text = resources.files("bept.data").joinpath("templates.tsv").read_text(encoding="utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        rows = list(csv.DictReader(text.splitlines(), delimiter="\t"))
        seen: set[tuple[bool, str, str]] = set()
        out = []
        for r in rows:
            t = Template(r["id"], r["has_label"].strip() in ("1", "true", "yes"), r["type"], r["bucket"], r["text"])
            if t.type not in TEMPLATE_TYPES:
                raise RealizeError(f"template {t.id}: unknown type {t.type!r}")
            if t.bucket not in BUCKETS + ("any",):
                raise RealizeError(f"template {t.id}: unknown bucket {t.bucket!r}")
            key = (t.has_label, t.type, t.bucket)
            if key in seen:
                raise RealizeError(f"template {t.id}: duplicate selector {key}")
            seen.add(key)
            out.append(t)
        return cls(tuple(out))

    def by_id(self, tid: str) -> Template:
        for t in self.templates:
            if t.id == tid:
                return t
        raise NoTemplate(tid)

    def select(self, type_: str, has_label: bool = False, count: int | None = None) -> Template:
        index = {(t.has_label, t.type, t.bucket): t for t in self.templates}
        b = bucket(count)
        for key in ((has_label, type_, b), (has_label, type_, "any"), (False, type_, b), (False, type_, "any")):
            if key in index:
                return index[key]
        raise NoTemplate(f"no template for {type_} (label={has_label}, bucket={b})")

    def render(self, type_: str, label: str | None = None, count: int | None = None) -> str:
        return self.select(type_, bool(label), count).fill(label, count)


def select_template(catalog: TemplateCatalog, context: Mapping) -> tuple[Template, str]:
    """Pick a template from {gateway_type, outgoing_count, label} and fill its slots."""
    t = catalog.select(context["gateway_type"], bool(context.get("label")), context.get("outgoing_count"))
    return t, t.fill(context.get("label"), context.get("outgoing_count"))


# ---------------------------------------------------------------------------
# sentence plans


@dataclass
class SentencePlan:
    kind: str  # activity | continuation | template | series
    source: str
    depth: int
    dsynt: DSynT | None = None
    text: str = ""  # template text or gerund phrase for continuations
    path: str | None = None
    position: int | None = None
    paragraph: int = 0
    tars: list[Tar] = field(default_factory=list)
    transitions: list[str] = field(default_factory=list)
    anchor: str | None = None
    modal: bool = False
    connective: str | None = None  # "seq", "parallel" or None
    subject: str = "full"
    role: str | None = None
    sub: str | None = None


@dataclass
class TextPlan:
    sentences: list[SentencePlan]
    word_threshold: int = DEFAULT_THRESHOLD
    neglected: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class KeptPath:
    path: BehaviorPath
    tars: frozenset[Tar]


def select_paths(paths: Sequence[BehaviorPath], kept: Sequence[tuple[BehaviorPath, frozenset[Tar]]]) -> list[KeptPath]:
    """Pruned paths plus any path needed to mention an activity without adjacencies."""
    out = [KeptPath(p, t) for p, t in kept]
    covered = {x for _, tars in kept for tar in tars for x in (tar.first, tar.second)}
    for p in paths:
        missing = [t for t in p.process.origins if t not in covered]
        if missing:
            out.append(KeptPath(p, frozenset()))
            covered |= set(missing)
    rank = {MAIN: 0, PARTIAL: 0, LOOP: 1}
    return sorted(out, key=lambda k: (rank.get(k.path.kind or MAIN, 2), [x.path for x in out].index(k.path)))


def _linearize(path: BehaviorPath, idx: Iterable[int]) -> list[int]:
    """Topological order of the chosen events that keeps causal chains together."""
    proc = path.process
    chosen = sorted(set(idx))
    remaining = set(chosen)
    order: list[int] = []
    while remaining:
        ready = [i for i in sorted(remaining) if not (proc.below[i] & remaining)]
        if order:
            last = order[-1]
            follow = [i for i in ready if last in proc.below[i]]
            if follow:
                ready = follow
        order.append(ready[0])
        remaining.discard(ready[0])
    return order


def plan_sentences(
    rdt: Rdt,
    kept: Sequence[KeptPath],
    system: NetSystem,
    catalog: TemplateCatalog,
    diagnosis: Diagnosis | None = None,
    substitutions: Iterable[str] = (),
    described: set[str] | None = None,
) -> list[SentencePlan]:
    net = system.net
    subs = set(substitutions)
    md = rdt.rpst.depth_of
    described = set() if described is None else described
    mains = [k for k in kept if k.path.kind != LOOP]
    loops = [k for k in kept if k.path.kind == LOOP]
    plans: list[SentencePlan] = []
    para = 0

    def template(type_: str, depth: int, label: str | None = None, count: int | None = None, **kw) -> SentencePlan:
        t = catalog.select(type_, bool(label), count)
        return SentencePlan("template", t.id, depth, t.dsynt, t.fill(label, count), paragraph=kw.get("paragraph", -1))

    if mains:
        if len(mains) == 1 and not loops:
            plans.append(template("start", 0))
        else:
            # the plural opener is kept even for one branch, as in the reference output
            plans.append(template("main-branch-intro", 0))
    for k in mains:
        para += 1
        plans += _path_plans(k, para, rdt, net, catalog, md, subs, described, template)
    if loops:
        plans.append(template("loop-intro", 0, count=len(loops)))
        for k in loops:
            para += 1
            plans += _path_plans(k, para, rdt, net, catalog, md, subs, described, template)
    if diagnosis is not None:
        for marking in diagnosis.deadlocks:
            places = ", ".join(sorted(marking.support()))
            plans.append(template("deadlock", 0, label=places))
        dead = [t for t in diagnosis.dead_transitions]
        if dead:
            names = ", ".join(f'"{net.label(t)}"' for t in dead)
            plans.append(template("dead-transition", 0, label=names, count=len(dead)))
    if plans:
        plans.append(template("end", 0))
    # markdown lists cannot open more than one level below the previous line
    prev = 0
    for p in plans:
        p.depth = min(p.depth, prev + 1)
        prev = p.depth
    return plans


def _path_plans(k, para, rdt, net, catalog, md, subs, described, template) -> list[SentencePlan]:
    path, kept = k.path, k.tars
    proc = path.process
    if kept:
        idx = {i for t in kept for i in proc.pairs[t]}
    else:
        idx = set()
        seen: set[str] = set()
        for i, t in enumerate(proc.origins):
            if t not in described and t not in seen:
                idx.add(i)
                seen.add(t)
    order = _linearize(path, idx)
    pos_of = {i: p for p, i in enumerate(order)}
    base = 1
    # dense rank of the modeling depths shown in this paragraph, so indentation never skips a level
    levels = sorted({md[proc.origins[i]] for i in order if proc.origins[i] in md})
    rank = {v: n for n, v in enumerate(levels)}

    def depth(t: str) -> int:
        return base + rank.get(md.get(t), 0)

    def gerund(i: int) -> str:
        t = proc.origins[i]
        d = rdt.dsynts.get(t)
        if d is not None and d.gerund:
            return d.gerund
        return f"performing {t}"

    out: list[SentencePlan] = []
    by_event: dict[int, SentencePlan] = {}
    anchor: int | None = None
    anchor_first = False
    absorbed: set[int] = set()
    last_depth = base
    for pos, i in enumerate(order):
        t = proc.origins[i]
        new = t not in described
        nxt = order[pos + 1] if pos + 1 < len(order) else None
        nxt_new = nxt is not None and proc.origins[nxt] not in described and proc.origins[nxt] != t
        if i in absorbed:
            by_event[i] = out[-1]
            continue
        prev = order[pos - 1] if pos > 0 else None
        # an already described activity that opens a new step is only referenced
        if (
            not new
            and nxt is not None
            and i in proc.below[nxt]
            and (pos == 0 or (nxt_new and prev not in proc.preds[i]))
        ):
            anchor, anchor_first = i, pos == 0
            continue
        connective = None
        anchor_text = gerund(anchor) if anchor is not None else None
        if anchor is None and prev is not None:
            if prev in proc.below[i]:
                if prev in proc.preds[i]:
                    connective = "seq"
                else:
                    near = [j for j in order[:pos] if j in proc.preds[i]]
                    if near:
                        anchor_text = gerund(near[-1])
                    else:
                        connective = "seq"
            else:
                connective = "parallel"
        if t in subs and new:
            label = None
            if nxt is not None and proc.origins[nxt] not in subs:
                label = gerund(nxt)
                if proc.origins[nxt] in described:
                    absorbed.add(nxt)
            tpl = catalog.select("rigid-intro", bool(label))
            plan = SentencePlan(
                "series", tpl.id, last_depth, tpl.dsynt, tpl.fill(label), path.name, pos, para,
                anchor=anchor_text, connective=connective, sub=t, transitions=[t],
            )
            described.add(t)
        elif new:
            joined = _concurrent(proc, [j for j in proc.preds[i] if j in pos_of])
            if pos > 0 and joined >= 2 and anchor is None:
                out.append(template("transition-join", depth(t), count=joined, paragraph=para))
                connective = None
            d = rdt.dsynts[t].copy()
            plan = SentencePlan(
                "activity", t, depth(t), d, path=path.name, position=pos, paragraph=para,
                transitions=[t], anchor=anchor_text, modal=anchor is not None and anchor_first,
                connective=connective, role=_role(d),
            )
            described.add(t)
        else:
            d = rdt.dsynts.get(t)
            plan = SentencePlan(
                "continuation", t, depth(t), d, gerund(i), path.name, pos, para,
                anchor=anchor_text, connective=connective if anchor_text is None else None,
                role=_role(d) if d else None,
            )
        out.append(plan)
        by_event[i] = plan
        last_depth = plan.depth
        if anchor is not None:
            by_event[anchor] = plan
        anchor = None
        split = _concurrent(proc, [j for j in order if i in proc.preds[j]])
        if plan.kind == "activity" and split >= 2:
            out.append(template("transition-split", plan.depth, count=split, paragraph=para))
    if anchor is not None and not out:
        # a lone reference to an already described activity
        d = rdt.dsynts.get(proc.origins[anchor])
        plan = SentencePlan("continuation", proc.origins[anchor], depth(proc.origins[anchor]), d, gerund(anchor),
                            path.name, 0, para, role=_role(d) if d else None)
        out.append(plan)
        by_event[anchor] = plan
    for tar in sorted(kept, key=lambda x: (proc.pairs[x][1], proc.pairs[x][0])):
        a, b = proc.pairs[tar]
        later = b if pos_of[b] >= pos_of[a] else a
        by_event[later].tars.append(tar)
    return out


def _concurrent(proc, events: Sequence[int]) -> int:
    """Size of the largest group of pairwise concurrent events, or 0 if none are."""
    best = 0
    for a in events:
        group = [b for b in events if b == a or (a not in proc.below[b] and b not in proc.below[a])]
        if len(group) >= 2 and all(x == y or (x not in proc.below[y] and y not in proc.below[x]) for x in group for y in group):
            best = max(best, len(group))
    return best


def _role(d: DSynT | None) -> str | None:
    if d is None:
        return None
    subj = d.root.child("I")
    return subj.lexeme if subj is not None else None


# ---------------------------------------------------------------------------
# grammar completion and aggregation


def check_grammar_meta(plan: list[SentencePlan], lexicon: Lexicon | None = None) -> list[SentencePlan]:
    for s in plan:
        if s.dsynt is None or s.kind == "template" or s.dsynt.root.meta.get("canned"):
            continue
        for path, node in s.dsynt.root.walk():
            if not node.lexeme.strip():
                raise IncompleteDsynt(f"{s.source}: empty lexeme at {path}")
            if node.cls == "verb":
                node.meta.setdefault("tense", "present")
                node.meta.setdefault("person", "3sg")
                if node.meta.get("coord"):
                    continue
                has_subject = node.child("I") is not None
                voice = node.meta.get("voice")
                if voice is None or (voice == "active" and not has_subject):
                    node.meta["voice"] = "active" if has_subject else "passive"
            elif node.cls == "noun" and not node.meta.get("raw"):
                if "number" not in node.meta:
                    plural = lexicon.is_plural(node.lexeme) if lexicon else False
                    node.meta["number"] = "pl" if plural else "sg"
                node.meta.setdefault("definiteness", "def")
    return plan


def _mergeable(a: SentencePlan, b: SentencePlan) -> bool:
    if a.kind != "activity" or b.kind != "activity" or a.paragraph != b.paragraph or a.depth != b.depth:
        return False
    if b.anchor or b.modal or b.connective != "seq" or a.role != b.role:
        return False
    for s in (a, b):
        if any(d == "ATTR" and n.meta.get("raw") for d, n in s.dsynt.root.children):  # type: ignore[union-attr]
            return False
    return True


def aggregate(plan: list[SentencePlan]) -> list[SentencePlan]:
    out: list[SentencePlan] = []
    merged_prev = False
    for s in plan:
        prev = out[-1] if out else None
        if prev is not None and not merged_prev and _mergeable(prev, s):
            pa, sa = prev.dsynt.root, s.dsynt.root  # type: ignore[union-attr]
            p_obj, s_obj = pa.child("II"), sa.child("II")
            if pa.lexeme == sa.lexeme and p_obj is not None and s_obj is not None:
                extra = s_obj.copy()
                extra.meta["coord"] = "and"
                extra.children = [(d, n) for d, n in extra.children if d != "ATTR"]
                p_obj.children.append(("ATTR", extra))
                for d, n in s_obj.children:
                    if d == "ATTR":
                        p_obj.children.append((d, n.copy()))
            elif (
                pa.lexeme != sa.lexeme
                and p_obj is not None
                and s_obj is not None
                and p_obj.lexeme == s_obj.lexeme
                and p_obj.meta.get("number") == s_obj.meta.get("number")
                and not p_obj.children
                and not s_obj.children
                and pa.meta.get("voice") == sa.meta.get("voice")
            ):
                pa.children.append(("ATTR", DNode(sa.lexeme, "verb", {"coord": "and"})))
            else:
                out.append(s)
                merged_prev = False
                continue
            prev.transitions += s.transitions
            prev.tars += s.tars
            merged_prev = True
            continue
        out.append(s)
        merged_prev = False
    _assign_subjects(out)
    return out


def _assign_subjects(plan: list[SentencePlan]) -> None:
    """Alternate full role and pronoun along runs of sentences by the same role."""
    run_role: str | None = None
    run = 0
    para = None
    depth = None
    for s in plan:
        if s.kind not in ("activity", "continuation") or s.role is None or (s.paragraph, s.depth) != (para, depth):
            run_role, run = None, 0
            para, depth = s.paragraph, s.depth
        if s.kind not in ("activity", "continuation") or s.role is None:
            continue
        if s.role == run_role:
            run += 1
        else:
            run_role, run = s.role, 0
        s.subject = "pronoun" if run % 2 == 1 else "full"


# ---------------------------------------------------------------------------
# surface realization


def _cap(text: str) -> str:
    return text[:1].upper() + text[1:] if text else text


def _lower_first(text: str) -> str:
    if len(text) > 1 and text[1].isupper():
        return text
    return text[:1].lower() + text[1:]


def _noun_phrase(node: DNode, lexicon: Lexicon) -> str:
    if node.meta.get("raw"):
        return node.lexeme
    words = node.lexeme.split(" ")
    if node.meta.get("number") == "pl":
        words[-1] = lexicon.plural(words[-1])
    phrase = " ".join(words)
    if node.meta.get("definiteness", "def") == "def":
        phrase = "the " + phrase
    coords = [n for d, n in node.children if d == "ATTR" and n.meta.get("coord")]
    if coords:
        parts = [phrase] + [_noun_phrase(replace(c, children=[], meta={k: v for k, v in c.meta.items() if k != "coord"}), lexicon) for c in coords]
        phrase = ", ".join(parts[:-1]) + " and " + parts[-1]
    return phrase


def _is_plural(node: DNode) -> bool:
    return node.meta.get("number") == "pl" or any(d == "ATTR" and n.meta.get("coord") for d, n in node.children)


def realize_clause(tree: DSynT, lexicon: Lexicon, subject: str | None = None, modal: bool = False) -> str:
    """The clause of an activity DSynT, without leading connective or final period."""
    root = tree.root
    obj = root.child("II")
    actor = root.child("I")
    verbs = [root.lexeme] + [n.lexeme for d, n in root.children if d == "ATTR" and n.cls == "verb"]
    extras = [n for d, n in root.children if d == "ATTR" and n.meta.get("raw") and not n.meta.get("condition")]
    conditions = [n for d, n in root.children if d == "ATTR" and n.meta.get("condition")]
    if root.meta.get("voice", "active") == "active" and actor is not None:
        subj = subject or _noun_phrase(actor, lexicon)
        if modal:
            verb = "can also " + " and ".join(verbs)
        else:
            verb = " and ".join(lexicon.third_person(v) for v in verbs)
        parts = [subj, verb]
        if obj is not None:
            parts.append(_noun_phrase(obj, lexicon))
    else:
        participle = " and ".join(lexicon.participle(v) for v in verbs)
        if obj is not None:
            head = _noun_phrase(obj, lexicon)
            aux = ("can also be" if modal else "are" if _is_plural(obj) else "is")
        else:
            head = f"the {lexicon.gerund(root.lexeme)} step"
            aux = "can also be" if modal else "is"
            participle = "performed"
        parts = [head, aux, participle]
    parts += [n.lexeme for n in extras]
    parts += [f"if {n.lexeme}" for n in conditions]
    return " ".join(parts)


@dataclass
class Rendered:
    text: str
    plan: SentencePlan


def _connective(kind: str | None, counter: list[int]) -> str | None:
    if kind == "seq":
        word = CONNECTIVES[counter[0] % len(CONNECTIVES)]
        counter[0] += 1
        return word
    if kind == "parallel":
        return "In parallel"
    return None


def realize_sentence(s: SentencePlan, lexicon: Lexicon, catalog: TemplateCatalog, pronoun: str, counter: list[int]) -> str:
    if s.kind == "template":
        return s.text
    prefix = None
    if s.anchor:
        prefix = catalog.by_id("anchor").fill(s.anchor)
    else:
        word = _connective(s.connective, counter)
        if word:
            prefix = word + ","
    subject = pronoun if s.subject == "pronoun" else None
    if s.kind == "series":
        body = s.text
    elif s.kind == "continuation":
        if s.role is not None and s.dsynt is not None:
            actor = s.dsynt.root.child("I")
            subj = subject or _noun_phrase(actor, lexicon)  # type: ignore[arg-type]
        else:
            subj = "the process"
        cont = catalog.by_id("continue").fill(s.text if s.role else f"with {s.text}")
        body = f"{subj} {cont}"
    else:
        assert s.dsynt is not None
        body = realize_clause(s.dsynt, lexicon, subject, s.modal)
    if prefix:
        text = f"{prefix} {_lower_first(body)}"
    else:
        text = _cap(body)
    if not text.endswith((".", ":")):
        text += "."
    return _cap(text)


@dataclass
class Line:
    depth: int
    text: str
    sentences: list[int]


@dataclass
class Document:
    lines: list[Line] = field(default_factory=list)
    sentences: list[dict] = field(default_factory=list)

    def markdown(self) -> str:
        return "".join("  " * ln.depth + "- " + ln.text + "\n" for ln in self.lines)


def _words(text: str) -> int:
    return len(text.split())


def realize_text(
    plan: TextPlan,
    lexicon: Lexicon,
    catalog: TemplateCatalog,
    pronoun: str = "he",
    subdocs: Mapping[str, Document] | None = None,
    doc_name: str = "",
) -> Document:
    """Render a plan into bullet lines; sub-documents are spliced under series sentences."""
    subdocs = subdocs or {}
    doc = Document()
    counters: dict[int, list[int]] = {}
    current: Line | None = None
    cur_para: int | None = None
    for s in plan.sentences:
        counter = counters.setdefault(s.paragraph, [0])
        text = realize_sentence(s, lexicon, catalog, pronoun, counter)
        words = _words(text)
        same_chunk = (
            current is not None
            and s.kind != "template"
            and cur_para == s.paragraph
            and current.depth == s.depth
            and s.paragraph > 0
        )
        if same_chunk and _words(current.text) + words > plan.word_threshold:  # type: ignore[union-attr]
            same_chunk = False
            if s.subject == "pronoun":
                s = replace(s, subject="full")
                text = realize_sentence(s, lexicon, catalog, pronoun, [counter[0] - (1 if s.connective == "seq" else 0)])
        record = {
            "text": text,
            "depth": s.depth,
            "kind": s.kind,
            "source": s.source,
            "path": s.path,
            "position": s.position,
            "doc": doc_name,
            "transitions": list(s.transitions),
            "tars": [str(t) for t in s.tars],
        }
        doc.sentences.append(record)
        if same_chunk:
            current.text += " " + text  # type: ignore[union-attr]
            current.sentences.append(len(doc.sentences) - 1)  # type: ignore[union-attr]
        else:
            current = Line(s.depth, text, [len(doc.sentences) - 1])
            doc.lines.append(current)
            cur_para = s.paragraph if s.kind != "template" else None
        if s.kind == "series" and s.sub in subdocs:
            sub = subdocs[s.sub]
            offset = s.depth + 1 - min((ln.depth for ln in sub.lines), default=0)
            start = len(doc.sentences)
            for rec in sub.sentences:
                doc.sentences.append(dict(rec, depth=rec["depth"] + offset))
            for ln in sub.lines:
                doc.lines.append(Line(ln.depth + offset, ln.text, [i + start for i in ln.sentences]))
            current = None
            cur_para = None
    return doc
