"""Activity label analysis, deep-syntax trees and the annotated structure tree.

Labels fall into four styles (gerund verb phrase, verb phrase, noun phrase,
noun phrase with an ``of`` complement).  Word classes come from a bundled
lexicon instead of a statistical tagger, so results are reproducible.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .rpst import RpstTree

GERUND = "GerundVerbPhrase"
VERB = "VerbPhrase"
NOUN = "NounPhrase"
NOUN_OF = "NounOfPhrase"
STYLES = (GERUND, VERB, NOUN, NOUN_OF)

PREPOSITIONS = frozenset(
    "of to for from in on at by with within without into onto about after before "
    "during via per under over through between against".split()
)
CONJUNCTIONS = frozenset({"and", "or"})
DETERMINERS = frozenset({"the", "a", "an", "all", "each", "every", "some", "any", "its", "their", "new"})
SUPPORT_VERB = "perform"

_WORD = re.compile(r"[A-Za-z0-9][A-Za-z0-9'\-]*")
_VOWELS = set("aeiou")


class LangError(Exception):
    pass


class EmptyLabel(LangError):
    pass


class LexiconError(LangError):
    pass


# ---------------------------------------------------------------------------
# lexicon


@dataclass(frozen=True)
class Lexicon:
    verbs: frozenset[str]
    nouns: frozenset[str]
    irregular_forms: Mapping[str, str]
    verb_forms: Mapping[str, tuple[str, str, str, str]] = field(default_factory=dict)
    plurals: Mapping[str, str] = field(default_factory=dict)
    uncountable: frozenset[str] = frozenset()
    nominalizations: Mapping[str, str] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path | None = None, nominalizations: str | Path | None = None) -> "Lexicon":
        if path is None:
            text = resources.files("bept.data").joinpath("lexicon.tsv").read_text(encoding="utf-8")
        else:
            try:
                text = Path(path).read_text(encoding="utf-8")
            except OSError as exc:
                raise LexiconError(f"cannot read lexicon {path}: {exc}") from exc
        if nominalizations is None:
            nom_text = resources.files("bept.data").joinpath("nominalizations.tsv").read_text(encoding="utf-8")
        else:
            nom_text = Path(nominalizations).read_text(encoding="utf-8")
        return cls.from_rows(_rows(text, 3), _rows(nom_text, 2))

    @classmethod
    def from_rows(cls, rows: Iterable[list[str]], nominal_rows: Iterable[list[str]] = ()) -> "Lexicon":
        verbs: set[str] = set()
        nouns: set[str] = set()
        irregular: dict[str, str] = {}
        verb_forms: dict[str, tuple[str, str, str, str]] = {}
        plurals: dict[str, str] = {}
        uncountable: set[str] = set()
        for row in rows:
            lemma, pos = row[0].strip().lower(), row[1].strip().lower()
            infl = row[2].strip() if len(row) > 2 else ""
            if pos == "verb":
                verbs.add(lemma)
                if infl:
                    forms = [f.strip() for f in infl.split(",")]
                    if len(forms) != 4:
                        raise LexiconError(f"verb {lemma!r} needs 4 inflections, got {len(forms)}")
                    verb_forms[lemma] = tuple(forms)  # type: ignore[assignment]
                    for f in forms:
                        irregular.setdefault(f, lemma)
            elif pos == "noun":
                nouns.add(lemma)
                if infl == "-":
                    uncountable.add(lemma)
                elif infl:
                    plurals[lemma] = infl
                    irregular.setdefault(infl, lemma)
            else:
                raise LexiconError(f"unknown part of speech {pos!r} for {lemma!r}")
        nominal = {}
        for row in nominal_rows:
            noun, verb = row[0].strip().lower(), row[1].strip().lower()
            nominal[noun] = verb
            verbs.add(verb)
        return cls(
            frozenset(verbs),
            frozenset(nouns),
            irregular,
            verb_forms,
            plurals,
            frozenset(uncountable),
            nominal,
        )

    # --- verbs -----------------------------------------------------------

    def is_verb(self, word: str) -> bool:
        return word.lower() in self.verbs

    def verb_from_gerund(self, word: str) -> str | None:
        w = word.lower()
        if w in self.irregular_forms and self.irregular_forms[w] in self.verbs and w.endswith("ing"):
            return self.irregular_forms[w]
        if not w.endswith("ing") or len(w) < 5:
            return None
        stem = w[:-3]
        candidates = [stem, stem + "e"]
        if len(stem) >= 2 and stem[-1] == stem[-2]:
            candidates.append(stem[:-1])
        if stem.endswith("y"):
            candidates.append(stem[:-1] + "ie")
        for c in candidates:
            if c in self.verbs:
                return c
        return None

    def third_person(self, verb: str) -> str:
        if verb in self.verb_forms:
            return self.verb_forms[verb][0]
        if verb.endswith(("s", "sh", "ch", "x", "z", "o")):
            return verb + "es"
        if len(verb) > 1 and verb.endswith("y") and verb[-2] not in _VOWELS:
            return verb[:-1] + "ies"
        return verb + "s"

    def participle(self, verb: str) -> str:
        if verb in self.verb_forms:
            return self.verb_forms[verb][2]
        if verb.endswith("e"):
            return verb + "d"
        if len(verb) > 1 and verb.endswith("y") and verb[-2] not in _VOWELS:
            return verb[:-1] + "ied"
        if _doubles(verb):
            return verb + verb[-1] + "ed"
        return verb + "ed"

    def gerund(self, verb: str) -> str:
        if verb in self.verb_forms:
            return self.verb_forms[verb][3]
        if verb.endswith("ie"):
            return verb[:-2] + "ying"
        if verb.endswith("e") and not verb.endswith(("ee", "ye", "oe")) and len(verb) > 2:
            return verb[:-1] + "ing"
        if _doubles(verb):
            return verb + verb[-1] + "ing"
        return verb + "ing"

    # --- nouns -----------------------------------------------------------

    def singular(self, word: str) -> str:
        w = word.lower()
        if w in self.nouns or w in self.uncountable:
            return w
        if w in self.irregular_forms and self.irregular_forms[w] in self.nouns:
            return self.irregular_forms[w]
        if w.endswith("ies") and len(w) > 4:
            return w[:-3] + "y"
        if w.endswith("es") and w[:-2].endswith(("s", "sh", "ch", "x", "z")):
            return w[:-2]
        if w.endswith("s") and not w.endswith(("ss", "us", "is")) and len(w) > 2:
            return w[:-1]
        return w

    def is_plural(self, word: str) -> bool:
        if _is_acronym(word):
            return False
        w = word.lower()
        if w in self.uncountable or w in self.nouns:
            return False
        return self.singular(w) != w

    def plural(self, noun: str) -> str:
        if noun in self.uncountable or _is_acronym(noun):
            return noun
        if noun in self.plurals:
            return self.plurals[noun]
        if noun.endswith(("s", "sh", "ch", "x", "z")):
            return noun + "es"
        if len(noun) > 1 and noun.endswith("y") and noun[-2] not in _VOWELS:
            return noun[:-1] + "ies"
        return noun + "s"

    def verbalize(self, noun: str) -> str | None:
        """Verb behind an action noun, or None when no verb is known."""
        n = noun.lower()
        if n in self.nominalizations:
            return self.nominalizations[n]
        rules = (("ation", ("ate", "", "e")), ("ition", ("", "e")), ("ion", ("", "e")), ("ment", ("",)),
                 ("al", ("e", "")), ("ance", ("", "e")), ("ence", ("", "e")), ("ing", ("", "e")), ("ure", ("e", "")))
        for suffix, endings in rules:
            if n.endswith(suffix) and len(n) > len(suffix) + 2:
                stem = n[: -len(suffix)]
                for ending in endings:
                    if stem + ending in self.verbs:
                        return stem + ending
        return None


def _rows(text: str, width: int) -> list[list[str]]:
    reader = csv.reader(text.splitlines(), delimiter="\t")
    rows = [r for r in reader if r and not r[0].startswith("#")]
    if rows and rows[0][0] in ("lemma", "noun"):
        rows = rows[1:]
    for r in rows:
        if len(r) < 2:
            raise LexiconError(f"malformed lexicon row {r!r}")
        while len(r) < width:
            r.append("")
    return rows


def _doubles(verb: str) -> bool:
    """Consonant doubling for short verbs ending consonant-vowel-consonant."""
    if len(verb) < 3 or verb[-1] in "wxy" or verb[-1] in _VOWELS:
        return False
    groups = re.findall(r"[aeiou]+", verb)
    return len(groups) == 1 and verb[-2] in _VOWELS and verb[-3] not in _VOWELS


def _is_acronym(word: str) -> bool:
    letters = [c for c in word if c.isalpha()]
    return len(letters) >= 2 and all(c.isupper() for c in letters)


# ---------------------------------------------------------------------------
# label classification


@dataclass(frozen=True)
class NounItem:
    lexeme: str  # lemma, acronyms keep their case
    plural: bool = False
    text: str = ""  # surface form in the label


@dataclass(frozen=True)
class LabelInfo:
    style: str
    action: str
    objects: tuple[NounItem, ...] = ()
    role: str | None = None
    has_preposition: bool = False
    has_conjunction: bool = False
    modifier: str = ""
    support_verb: bool = False
    label: str = ""

    @property
    def object_lemmas(self) -> list[str]:
        return [o.lexeme for o in self.objects]


def _tokens(label: str) -> list[str]:
    return _WORD.findall(label)


def _noun_item(words: list[str], lexicon: Lexicon) -> NounItem:
    head = words[-1]
    lemma = head if _is_acronym(head) else lexicon.singular(head)
    plural = lexicon.is_plural(head)
    mods = [w if _is_acronym(w) else w.lower() for w in words[:-1]]
    return NounItem(" ".join(mods + [lemma]), plural, " ".join(words))


def _objects(words: list[str], lexicon: Lexicon) -> tuple[tuple[NounItem, ...], str]:
    """Split trailing words into coordinated objects and a prepositional modifier."""
    modifier = ""
    for i, w in enumerate(words):
        if w.lower() in PREPOSITIONS:
            modifier = " ".join(words[i:])
            words = words[:i]
            break
    groups: list[list[str]] = [[]]
    for w in words:
        if w.lower() in CONJUNCTIONS:
            groups.append([])
        elif w.lower() not in DETERMINERS:
            groups[-1].append(w)
    items = tuple(_noun_item(g, lexicon) for g in groups if g)
    return items, modifier


def classify_label(label: str, lexicon: Lexicon, role: str | None = None) -> LabelInfo:
    words = _tokens(label)
    if not words:
        raise EmptyLabel(f"label {label!r} has no words")
    lowered = [w.lower() for w in words]
    has_prep = any(w in PREPOSITIONS for w in lowered)
    has_conj = any(w in CONJUNCTIONS for w in lowered)
    first = lowered[0]
    common = dict(role=role, has_preposition=has_prep, has_conjunction=has_conj, label=label)

    stem = lexicon.verb_from_gerund(first) if first.endswith("ing") else None
    if stem:
        objs, mod = _objects(words[1:], lexicon)
        return LabelInfo(GERUND, stem, objs, modifier=mod, **common)
    if lexicon.is_verb(first):
        objs, mod = _objects(words[1:], lexicon)
        return LabelInfo(VERB, first, objs, modifier=mod, **common)
    first_prep = next((w for w in lowered if w in PREPOSITIONS), None)
    if first_prep == "of":
        k = lowered.index("of")
        head = lowered[k - 1] if k > 0 else first
        verb = lexicon.verbalize(head)
        objs, mod = _objects(words[k + 1 :], lexicon)
        if verb is None:
            phrase = _noun_item(words[:k] or [head], lexicon)
            return LabelInfo(NOUN_OF, SUPPORT_VERB, (phrase,), support_verb=True, modifier=" ".join(words[k:]), **common)
        return LabelInfo(NOUN_OF, verb, objs, modifier=mod, **common)
    # noun phrase: the action noun is the last word before any preposition
    core = words
    tail = ""
    if first_prep is not None:
        k = lowered.index(first_prep)
        core, tail = words[:k], " ".join(words[k:])
    verb = lexicon.verbalize(core[-1]) if core else None
    if verb is None or not core:
        phrase = _noun_item([w for w in core if w.lower() not in DETERMINERS] or core or words, lexicon)
        return LabelInfo(NOUN, SUPPORT_VERB, (phrase,), support_verb=True, modifier=tail, **common)
    objs, _ = _objects(core[:-1], lexicon)
    return LabelInfo(NOUN, verb, objs, modifier=tail, **common)


def gerund_phrase(info: LabelInfo, lexicon: Lexicon) -> str:
    """The label read as a gerund phrase, e.g. "sequence DNA" -> "sequencing DNA"."""
    if info.style == GERUND:
        return " ".join(_tokens(info.label))
    if info.style == VERB:
        words = _tokens(info.label)
        return " ".join([lexicon.gerund(info.action)] + words[1:])
    parts = [lexicon.gerund(info.action)]
    parts += [o.text or o.lexeme for o in info.objects]
    if info.modifier:
        parts.append(info.modifier)
    return " ".join(parts)


# ---------------------------------------------------------------------------
# deep-syntactic trees


@dataclass
class DNode:
    lexeme: str
    cls: str  # "verb" or "noun"
    meta: dict[str, str] = field(default_factory=dict)
    children: list[tuple[str, "DNode"]] = field(default_factory=list)

    def child(self, dep: str) -> "DNode | None":
        return next((n for d, n in self.children if d == dep), None)

    def walk(self, path: str = "root"):
        yield path, self
        for i, (dep, n) in enumerate(self.children):
            yield from n.walk(f"{path}/{dep}[{i}]")

    def copy(self) -> "DNode":
        return DNode(self.lexeme, self.cls, dict(self.meta), [(d, n.copy()) for d, n in self.children])

    def to_dict(self) -> dict:
        out: dict = {"lexeme": self.lexeme, "class": self.cls, "meta": dict(sorted(self.meta.items()))}
        if self.children:
            out["children"] = [{"dep": d, "node": n.to_dict()} for d, n in self.children]
        return out


@dataclass
class DSynT:
    root: DNode
    source: str = ""  # transition id
    gerund: str = ""  # back-reference phrase
    placeholder: bool = False

    def copy(self) -> "DSynT":
        return DSynT(self.root.copy(), self.source, self.gerund, self.placeholder)

    def to_dict(self) -> dict:
        return {"source": self.source, "placeholder": self.placeholder, "root": self.root.to_dict()}


def check_invariants(tree: DSynT) -> None:
    seen: set[int] = set()
    for path, node in tree.root.walk():
        if id(node) in seen:
            raise LangError(f"node shared at {path}")
        seen.add(id(node))
        if node.cls == "verb":
            deps = [d for d, _ in node.children]
            if deps.count("I") > 1 or deps.count("II") > 1:
                raise LangError(f"verb at {path} has repeated I/II")


def _noun(item: NounItem) -> DNode:
    return DNode(item.lexeme, "noun", {"number": "pl" if item.plural else "sg", "definiteness": "def"})


def build_dsynt(info: LabelInfo, role: str | None = None, condition: str | None = None) -> DSynT:
    role = role if role is not None else info.role
    verb = DNode(info.action, "verb", {"voice": "active" if role else "passive"})
    if role:
        verb.children.append(("I", DNode(role, "noun", {"number": "sg", "definiteness": "def"})))
    if info.objects:
        obj = _noun(info.objects[0])
        for extra in info.objects[1:]:
            n = _noun(extra)
            n.meta["coord"] = "and"
            obj.children.append(("ATTR", n))
        verb.children.append(("II", obj))
    if info.modifier:
        verb.children.append(("ATTR", DNode(info.modifier, "noun", {"raw": "true"})))
    if condition:
        verb.children.append(("ATTR", DNode(condition, "noun", {"raw": "true", "condition": "true"})))
    if info.support_verb:
        verb.meta["support"] = "true"
    return DSynT(verb)


def placeholder_dsynt(transition: str) -> DSynT:
    """Stand-in for silent or synthetic transitions."""
    verb = DNode("perform", "verb", {"voice": "passive"})
    verb.children.append(("II", DNode(f"unnamed activity {transition}", "noun", {"number": "sg", "definiteness": "def"})))
    return DSynT(verb, transition, f"performing the unnamed activity {transition}", placeholder=True)


@dataclass(frozen=True, eq=False)
class Rdt:
    rpst: RpstTree
    dsynts: dict[str, DSynT]
    infos: dict[str, LabelInfo]

    def to_dict(self) -> dict:
        return {
            "rpst": self.rpst.to_dict(),
            "dsynts": {t: d.to_dict() for t, d in sorted(self.dsynts.items())},
        }


def build_rdt(
    tree: RpstTree,
    labels: Mapping[str, str],
    lexicon: Lexicon,
    roles: Mapping[str, str] | None = None,
    conditions: Mapping[str, str] | None = None,
    transitions: Iterable[str] | None = None,
    default_role: str | None = None,
) -> Rdt:
    roles = roles or {}
    conditions = conditions or {}
    ids = sorted(set(transitions) if transitions is not None else set(tree.depth_of))
    dsynts: dict[str, DSynT] = {}
    infos: dict[str, LabelInfo] = {}
    for t in ids:
        label = labels.get(t)
        if not label:
            dsynts[t] = placeholder_dsynt(t)
            continue
        role = roles.get(t, default_role)
        try:
            info = classify_label(label, lexicon, role)
        except EmptyLabel as exc:
            raise EmptyLabel(f"{t}: {exc}") from exc
        tree_ = build_dsynt(info, role, conditions.get(t))
        tree_.source = t
        tree_.gerund = gerund_phrase(info, lexicon)
        dsynts[t] = tree_
        infos[t] = info
    return Rdt(tree, dsynts, infos)
