"""Evaluation measures: depth consistency, information gain, perplexity and F1.

Also rebuilds a net from the provenance JSON written by ``translate`` so the
generated description can be compared behaviorally with its source model.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .petri import Marking, NetSystem, PetriNet, is_loop_free, tar_set, trace_set


class MetricsError(Exception):
    pass


class ZeroVariance(MetricsError):
    pass


class UndefinedF1(MetricsError):
    pass


class MissingProvenance(MetricsError):
    pass


@dataclass(frozen=True)
class DepthPair:
    activity: str
    md: int
    dd: int


@dataclass(frozen=True)
class IglPoint:
    index: int
    gain: float


def consistency(pairs: Sequence[DepthPair] | None = None, xs: Sequence[float] | None = None, ys: Sequence[float] | None = None) -> float:
    """Pearson correlation between modeling depths and description depths."""
    if pairs is not None:
        xs = [p.md for p in pairs]
        ys = [p.dd for p in pairs]
    if xs is None or ys is None or len(xs) != len(ys):
        raise MetricsError("need two depth vectors of equal length")
    if len(xs) < 2:
        raise MetricsError("need at least two activities")
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        if sxx == 0 and syy == 0 and list(xs) == list(ys):
            return 1.0
        raise ZeroVariance("a depth distribution is constant")
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))


def info_gain(described: int | Iterable[str], neglected: int | Iterable[str]) -> float:
    t = described if isinstance(described, int) else len(set(described))
    u = neglected if isinstance(neglected, int) else len(set(neglected))
    if t <= 1:
        return float(t * u)
    return math.exp(t * math.log2(t)) * t * u


def igl(gains: Sequence[float]) -> list[IglPoint]:
    points = [IglPoint(0, 0.0)]
    total = 0.0
    for i, g in enumerate(gains, start=1):
        if g < 0:
            raise MetricsError("information gain is never negative")
        total += g
        points.append(IglPoint(i, total))
    return points


def perplexity(gains: Sequence[float]) -> float:
    """Trapezoid area under the cumulative gain line."""
    pts = igl(gains)
    return sum((a.gain + b.gain) / 2 for a, b in zip(pts, pts[1:]))


def f1(precision: float, recall: float, beta: float = 1.0) -> float:
    for v in (precision, recall):
        if not 0.0 <= v <= 1.0:
            raise MetricsError(f"{v} is not in [0, 1]")
    if precision == 0 and recall == 0:
        raise UndefinedF1("precision and recall are both zero")
    b2 = beta * beta
    return (1 + b2) * precision * recall / (b2 * precision + recall)


@dataclass(frozen=True)
class Score:
    precision: float
    recall: float
    f1: float
    undefined: bool = False

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1, "undefined": self.undefined}


def score(original: set, reproduced: set) -> Score:
    """Precision and recall of ``reproduced`` against ``original``; two empty sets agree fully."""
    if not original and not reproduced:
        return Score(1.0, 1.0, 1.0)
    hit = len(original & reproduced)
    p = hit / len(reproduced) if reproduced else 0.0
    r = hit / len(original) if original else 0.0
    try:
        return Score(p, r, f1(p, r))
    except UndefinedF1:
        return Score(p, r, 0.0, True)


# ---------------------------------------------------------------------------
# model comparison


def _name(net: PetriNet, node: str) -> str:
    return net.labels.get(node, node) if node in net.transitions else node


def gateways(net: PetriNet) -> set[str]:
    return {n for n in net.nodes if len(net.preset[n]) > 1 or len(net.postset[n]) > 1}


def compare(original: NetSystem, reproduced: NetSystem, max_trace_len: int = 50) -> dict[str, Score]:
    a, b = original.net, reproduced.net
    out = {
        "places": score(set(a.places), set(b.places)),
        "transitions": score({_name(a, t) for t in a.transitions}, {_name(b, t) for t in b.transitions}),
        "gateways": score({_name(a, g) for g in gateways(a)}, {_name(b, g) for g in gateways(b)}),
        "elements": score({_name(a, n) for n in a.nodes}, {_name(b, n) for n in b.nodes}),
    }
    ta = {(_name(a, t.first), _name(a, t.second)) for t in tar_set(original)}
    tb = {(_name(b, t.first), _name(b, t.second)) for t in tar_set(reproduced)}
    out["tars"] = score(ta, tb)
    if is_loop_free(original) and is_loop_free(reproduced):
        xa = {tuple(_name(a, t) for t in tr) for tr in trace_set(original, max_trace_len).as_set()}
        xb = {tuple(_name(b, t) for t in tr) for tr in trace_set(reproduced, max_trace_len).as_set()}
        out["traces"] = score(xa, xb)
    return out


def reconstruct(generated: Mapping) -> NetSystem:
    """Rebuild a net system from the per-path provenance of a generated description."""
    if "paths" not in generated or "initial" not in generated:
        raise MissingProvenance("generated JSON lacks paths or initial marking")
    arcs: set[tuple[str, str]] = set()
    labels: dict[str, str] = {}
    _collect(generated, arcs, labels)
    places = {n for arc in arcs for n in arc} - set(_transitions(generated))
    transitions = {n for arc in arcs for n in arc} - places
    initial = {p: n for p, n in generated["initial"].items()}
    places |= set(initial) | set(generated.get("final", []))
    net = PetriNet(frozenset(places), frozenset(transitions), frozenset(arcs), {t: l for t, l in labels.items() if t in transitions})
    return NetSystem(net, Marking(initial), frozenset(generated.get("final", [])))


def _transitions(generated: Mapping) -> set[str]:
    out = set(generated.get("transitions", {}))
    for sub in generated.get("substitutions", {}).values():
        out |= _transitions(sub["document"])
    return out


def _collect(generated: Mapping, arcs: set, labels: dict) -> None:
    subs = generated.get("substitutions", {})
    for path in generated["paths"]:
        for a, b in path["origin_arcs"]:
            if a in subs or b in subs:
                continue
            arcs.add((a, b))
    labels.update({t: l for t, l in generated.get("transitions", {}).items() if l})
    for sub in subs.values():
        _collect(sub["document"], arcs, labels)


def depth_pairs(generated: Mapping) -> list[DepthPair]:
    if "md" not in generated or "dd" not in generated:
        raise MissingProvenance("generated JSON lacks md/dd depths")
    dd = generated["dd"]
    return [DepthPair(t, generated["md"][t], dd[t]) for t in sorted(generated["md"]) if t in dd]


def paragraph_gains(generated: Mapping) -> list[float]:
    neglected = generated.get("neglected", [])
    gains = []
    for para in generated.get("paragraphs", []):
        described = para.get("transitions", [])
        if not described:
            continue  # template-only paragraphs carry no activity
        gains.append(info_gain(described, neglected))
    return gains


def evaluate(original: NetSystem, generated: Mapping, reproduced: NetSystem | None = None) -> dict:
    report: dict = {}
    pairs = depth_pairs(generated)
    try:
        report["consistency"] = consistency(pairs)
    except ZeroVariance as exc:
        report["consistency"] = None
        report["consistency_error"] = str(exc)
    except MetricsError as exc:
        report["consistency"] = None
        report["consistency_error"] = str(exc)
    gains = paragraph_gains(generated)
    report["gains"] = gains
    report["perplexity"] = perplexity(gains)
    report["neglected"] = list(generated.get("neglected", []))
    if reproduced is not None:
        report["f1"] = {k: v.to_dict() for k, v in compare(original, reproduced).items()}
    return report


def report_json(report: Mapping) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def report_csv(rows: Sequence[tuple[str, Mapping]]) -> str:
    """One CSV line per model: consistency, perplexity and every F1 dimension."""
    dims = sorted({d for _, r in rows for d in r.get("f1", {})})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "consistency", "perplexity"] + [f"f1_{d}" for d in dims])
    for name, r in rows:
        f = r.get("f1", {})
        w.writerow([name, r.get("consistency"), r.get("perplexity")] + [f.get(d, {}).get("f1") for d in dims])
    return buf.getvalue()
