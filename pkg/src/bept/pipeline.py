"""End-to-end orchestration: model file in, description (markdown + JSON) out."""

from __future__ import annotations

import json
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

from . import metrics
from .lang import Lexicon, Rdt, build_rdt
from .paths import BehaviorPath, enumerate_paths, extract_segments, order_paths, prune
from .petri import DEFAULT_STATE_BOUND, Diagnosis, NetSystem, diagnose
from .pnml_io import ModelDocument, export_dot, load_model
from .realize import (
    DEFAULT_THRESHOLD,
    Document,
    KeptPath,
    TemplateCatalog,
    TextPlan,
    aggregate,
    check_grammar_meta,
    plan_sentences,
    realize_text,
    select_paths,
)
from .rpst import Component, NotWorkflowNet, RpstTree, component_system, decompose, simplify
from .unfold import DEFAULT_EVENT_BOUND, Cfp, unfold

STAGES = ("rpst", "cfp", "segments", "paths", "rdt")
FORMATS = ("md", "json", "both")


class PipelineError(Exception):
    def __init__(self, phase: str, cause: BaseException | str):
        self.phase = phase
        self.cause = cause
        super().__init__(f"{phase}: {cause}")


class ConfigError(ValueError):
    pass


class InvariantViolation(PipelineError):
    pass


class UnknownStage(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    max_paragraph_words: int = DEFAULT_THRESHOLD
    state_bound: int = DEFAULT_STATE_BOUND
    event_bound: int = DEFAULT_EVENT_BOUND
    lexicon_path: str | None = None
    template_path: str | None = None
    output_format: str = "both"
    include_diagnosis: bool = True
    default_role: str | None = None
    pronoun: str = "he"
    max_recursion: int = 32
    max_paths: int = 5000

    def __post_init__(self) -> None:
        if self.state_bound < 1 or self.event_bound < 1 or self.max_paths < 1 or self.max_recursion < 1:
            raise ConfigError("bounds must be >= 1")
        if self.max_paragraph_words < 10:
            raise ConfigError("max_paragraph_words must be >= 10")
        if self.output_format not in FORMATS:
            raise ConfigError(f"output_format must be one of {FORMATS}")

    def lexicon(self) -> Lexicon:
        path = self.lexicon_path or os.environ.get("BEPT_LEXICON") or None
        return Lexicon.load(path)

    def catalog(self) -> TemplateCatalog:
        return TemplateCatalog.load(self.template_path)


@dataclass
class Timer:
    phases: dict[str, float] = field(default_factory=dict)

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        except PipelineError:
            raise
        except Exception as exc:  # wrap with the phase name
            raise PipelineError(name, exc) from exc
        finally:
            self.phases[name] = self.phases.get(name, 0.0) + time.perf_counter() - start


@dataclass
class Analysis:
    system: NetSystem
    tree: RpstTree | None
    simplified: NetSystem
    substitutions: dict[str, Component]
    cfp: Cfp
    segments: list
    paths: list[BehaviorPath]
    selected: list[KeptPath]
    diagnosis: Diagnosis | None
    rdt: Rdt
    warnings: list[str]


def _md_tree(tree: RpstTree | None, md: Mapping[str, int], transitions) -> RpstTree:
    from .rpst import TRIVIAL, Component as C

    depth = {t: md[t] for t in transitions if t in md}
    if tree is None:
        return RpstTree(C(TRIVIAL, "", "", frozenset()), depth)
    return RpstTree(tree.root, depth, tree.metadata)


def analyze_system(
    system: NetSystem,
    doc: ModelDocument,
    config: Config,
    lexicon: Lexicon,
    timer: Timer,
    md: Mapping[str, int] | None = None,
) -> Analysis:
    warnings: list[str] = []
    with timer.phase("decompose"):
        try:
            tree: RpstTree | None = decompose(system)
        except NotWorkflowNet as exc:
            tree = None
            warnings.append(f"structure tree unavailable: {exc}")
    md = dict(md) if md is not None else dict(tree.depth_of if tree else {})
    with timer.phase("simplify"):
        if tree is not None:
            net, subs = simplify(system.net, tree)
        else:
            net, subs = system.net, {}
        simplified = NetSystem(net, system.initial, system.final)
    with timer.phase("unfold"):
        cfp = unfold(simplified, config.event_bound)
    with timer.phase("segments"):
        segments = extract_segments(cfp, simplified)
    with timer.phase("paths"):
        paths = order_paths(enumerate_paths(cfp, simplified, segments, config.max_paths))
        kept = prune(paths)
        selected = select_paths(paths, kept)
        for p in paths:
            if p.ambiguous:
                warnings.append(f"{p.name}: ambiguous joints {', '.join(p.ambiguous)}")
    diagnosis = None
    if config.include_diagnosis:
        with timer.phase("diagnose"):
            diagnosis = diagnose(simplified, config.state_bound)
    with timer.phase("rdt"):
        rdt = build_rdt(
            _md_tree(tree, md, net.transitions),
            net.labels,
            lexicon,
            doc.roles,
            {k[5:]: v for k, v in doc.metadata.items() if k.startswith("cond.")},
            transitions=net.transitions,
            default_role=config.default_role,
        )
        for t, info in sorted(rdt.infos.items()):
            if info.support_verb:
                warnings.append(f"{t}: no verb found for label {info.label!r}; using a support verb")
    return Analysis(system, tree, simplified, subs, cfp, segments, paths, selected, diagnosis, rdt, warnings)


@dataclass
class Translation:
    document: Document
    data: dict
    warnings: list[str]
    lead: str = ""  # back-reference to the first described activity


def translate_system(
    system: NetSystem,
    doc: ModelDocument,
    config: Config,
    lexicon: Lexicon,
    catalog: TemplateCatalog,
    timer: Timer,
    md: Mapping[str, int] | None = None,
    level: int = 0,
    name: str = "",
) -> Translation:
    if level > config.max_recursion:
        raise InvariantViolation("recursion", f"substitution depth exceeds {config.max_recursion}")
    a = analyze_system(system, doc, config, lexicon, timer, md)
    md = dict(md) if md is not None else dict(a.tree.depth_of if a.tree else {t: 0 for t in system.net.transitions})
    warnings = list(a.warnings)
    subdocs: dict[str, Document] = {}
    sub_data: dict[str, dict] = {}
    for sid, comp in sorted(a.substitutions.items()):
        sub_system = component_system(system.net, comp)
        sub = translate_system(sub_system, doc, config, lexicon, catalog, timer, md, level + 1, sid)
        subdocs[sid] = _splice_view(sub.document)
        sub_data[sid] = {"entry": comp.entry, "exit": comp.exit, "document": sub.data}
        warnings += [f"{sid}: {w}" for w in sub.warnings]
        if sid in a.rdt.dsynts and sub.lead:
            a.rdt.dsynts[sid].gerund = f"finishing the activities that start with {sub.lead}"
    with timer.phase("plan"):
        diagnosis = a.diagnosis if level == 0 else None
        plans = plan_sentences(a.rdt, a.selected, a.simplified, catalog, diagnosis, a.substitutions)
        plans = aggregate(check_grammar_meta(plans, lexicon))
        if level > 0:
            plans = [p for p in plans if not (p.kind == "template" and p.source in ("start", "end"))]
    with timer.phase("realize"):
        document = realize_text(
            TextPlan(plans, config.max_paragraph_words), lexicon, catalog, config.pronoun, subdocs, name
        )
    data = _provenance(a, document, md, sub_data, level)
    first = next((r["source"] for r in document.sentences if r["kind"] == "activity"), None)
    lead = a.rdt.dsynts[first].gerund if first in a.rdt.dsynts else ""
    return Translation(document, data, warnings, lead)


def _splice_view(doc: Document) -> Document:
    """Sub-document lines to splice; a lone main branch loses its intro line."""
    intro = [ln for ln in doc.lines if ln.depth == 0]
    if len(intro) == 0 or (len(intro) == 1 and doc.sentences[intro[0].sentences[0]]["source"] in ("start",)):
        lines = [ln for ln in doc.lines if ln.depth > 0]
    else:
        lines = list(doc.lines)
    return Document(lines, doc.sentences)


def _provenance(a: Analysis, document: Document, md: Mapping[str, int], subs: dict, level: int) -> dict:
    net = a.simplified.net
    dd: dict[str, int] = {}
    for rec in document.sentences:
        if rec["kind"] != "activity":
            continue
        for t in rec["transitions"]:
            dd.setdefault(t, rec["depth"])
    paragraphs = []
    for ln in document.lines:
        ts: list[str] = []
        for i in ln.sentences:
            rec = document.sentences[i]
            if rec["kind"] == "activity":
                ts += [t for t in rec["transitions"] if t not in ts]
        paragraphs.append({"depth": ln.depth, "text": ln.text, "transitions": ts, "sentences": list(ln.sentences)})
    data: dict = {
        "initial": dict(sorted(a.system.initial.items())),
        "final": sorted(a.system.final),
        "transitions": {t: net.labels.get(t, "") for t in sorted(net.transitions)},
        "paths": [
            {
                "name": k.path.name,
                "kind": k.path.kind,
                "segments": [s.name for s in k.path.segments],
                "transitions": list(k.path.transitions),
                "tars": sorted(str(t) for t in k.tars),
                "origin_arcs": sorted([list(arc) for arc in k.path.origin_arcs()]),
            }
            for k in a.selected
        ],
        "substitutions": subs,
    }
    if level == 0:
        original = a.system.net.transitions
        data["md"] = {t: md.get(t, 0) for t in sorted(original)}
        data["dd"] = {t: d for t, d in sorted(dd.items()) if t in original}
        data["neglected"] = sorted(t for t in original if t not in data["dd"])
        data["paragraphs"] = paragraphs
        data["sentences"] = document.sentences
    return data


@dataclass
class Result:
    markdown: str
    json: str
    report: dict


def translate(model: str | Path | ModelDocument, config: Config | None = None) -> Result:
    config = config or Config()
    timer = Timer()
    with timer.phase("parse"):
        doc = model if isinstance(model, ModelDocument) else load_model(str(model))
    with timer.phase("resources"):
        lexicon = config.lexicon()
        catalog = config.catalog()
    tr = translate_system(doc.system, doc, config, lexicon, catalog, timer)
    md_text = tr.document.markdown()
    data = dict(tr.data, name=doc.name or "")
    report = {
        "model": doc.name or "",
        "warnings": list(doc.warnings) + tr.warnings,
        "neglected": data.get("neglected", []),
        "timings": {k: round(v, 6) for k, v in timer.phases.items()},
    }
    return Result(md_text, json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n", report)


def write_outputs(result: Result, stem: str, out_dir: str | Path, fmt: str = "both") -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("md", "both"):
        p = out / f"{stem}.md"
        p.write_text(result.markdown, encoding="utf-8")
        written.append(p)
    if fmt in ("json", "both"):
        p = out / f"{stem}.json"
        p.write_text(result.json, encoding="utf-8")
        written.append(p)
    p = out / f"{stem}.report.json"
    p.write_text(json.dumps(result.report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(p)
    return written


def analyze(model: str | Path | ModelDocument, stage: str, config: Config | None = None, fmt: str = "json") -> str:
    if stage not in STAGES:
        raise UnknownStage(f"unknown stage {stage!r}; expected one of {', '.join(STAGES)}")
    config = config or Config()
    timer = Timer()
    doc = model if isinstance(model, ModelDocument) else load_model(str(model))
    a = analyze_system(doc.system, doc, config, config.lexicon(), timer)
    if fmt == "dot":
        if stage == "cfp":
            return export_dot(a.cfp, "cfp")
        if stage == "segments":
            return "".join(export_dot(s, s.name) for s in a.segments)
        if stage == "paths":
            return "".join(export_dot(p, p.name) for p in a.paths)
        return export_dot(a.system, doc.name or "net")
    if stage == "rpst":
        payload: dict = a.tree.to_dict() if a.tree else {"error": "no structure tree"}
        payload["structured"] = a.tree is not None and not any(c.kind == "Rigid" for c in a.tree.components())
    elif stage == "cfp":
        cfp = a.cfp
        payload = {
            "nodes": [{"id": n.id, "kind": n.kind, "origin": n.origin} for n in cfp.nodes.values()],
            "arcs": sorted([list(x) for x in cfp.arcs]),
            "cutoffs": [e for e in cfp.order if e in cfp.cutoffs],
            "correspondents": cfp.correspondents,
            "shadows": sorted(cfp.shadows),
        }
    elif stage == "segments":
        payload = {
            "segments": [
                {"name": s.name, "transitions": list(s.transitions), "entries": list(s.entries), "exits": list(s.exits)}
                for s in a.segments
            ]
        }
    elif stage == "paths":
        kept = {k.path.name: sorted(str(t) for t in k.tars) for k in a.selected}
        payload = {
            "paths": [
                {
                    "name": p.name,
                    "kind": p.kind,
                    "segments": [s.name for s in p.segments],
                    "entries": list(p.entries),
                    "exits": list(p.exits),
                    "tars": sorted(str(t) for t in p.tars),
                    "kept": kept.get(p.name),
                }
                for p in a.paths
            ]
        }
    else:
        payload = a.rdt.to_dict()
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def evaluate(model: str | Path | ModelDocument, generated: str | Path | Mapping, reproduced: str | Path | None = None) -> dict:
    doc = model if isinstance(model, ModelDocument) else load_model(str(model))
    if isinstance(generated, Mapping):
        data = generated
    else:
        data = json.loads(Path(generated).read_text(encoding="utf-8"))
    rep = load_model(str(reproduced)).system if reproduced else None
    return metrics.evaluate(doc.system, data, rep)
