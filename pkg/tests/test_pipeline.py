import json

import pytest

from bept import corpus, golden
from bept.metrics import reconstruct
from bept.petri import diagnose
from bept.pipeline import (
    STAGES,
    Config,
    ConfigError,
    PipelineError,
    UnknownStage,
    analyze,
    evaluate,
    translate,
    write_outputs,
)


@pytest.mark.parametrize("name", ["nstar", "nstar_expanded", "n1"])
def test_matches_golden(name):
    assert translate(corpus.path(name)).markdown == golden.read(f"{name}.md")


def test_n1_has_two_main_paragraphs():
    data = json.loads(translate(corpus.path("n1")).json)
    assert [p["kind"] for p in data["paths"]] == ["Main", "Main"]
    starts = [p for p in data["paragraphs"] if p["depth"] == 1 and p["transitions"]]
    assert starts[0]["transitions"] == ["T_a"]


def test_pnml_and_dsl_give_same_text():
    assert translate(corpus.path("n1.pnml")).markdown == translate(corpus.path("n1")).markdown


def test_only_dead_activities_are_left_out():
    for name in corpus.names():
        system = corpus.load(name).system
        data = json.loads(translate(corpus.path(name)).json)
        assert set(data["neglected"]) == set(diagnose(system).dead_transitions), name


@pytest.mark.parametrize(
    "kwargs", [{"max_paragraph_words": 5}, {"state_bound": 0}, {"event_bound": 0}, {"output_format": "pdf"}]
)
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        Config(**kwargs)


def test_bad_lexicon_path_is_reported():
    with pytest.raises(PipelineError) as err:
        translate(corpus.path("n1"), Config(lexicon_path="/nonexistent/lexicon.tsv"))
    assert err.value.phase == "resources"


def test_parse_errors_are_wrapped(tmp_path):
    p = tmp_path / "bad.pnet"
    p.write_text("wibble\n")
    with pytest.raises(PipelineError) as err:
        translate(p)
    assert err.value.phase == "parse"


@pytest.mark.parametrize("stage", STAGES)
def test_analyze_stages(stage):
    payload = json.loads(analyze(corpus.path("nstar"), stage))
    assert payload


def test_analyze_cfp_lists_cutoffs():
    payload = json.loads(analyze(corpus.path("nstar"), "cfp"))
    assert sorted(payload["cutoffs"]) == ["T_d1", "T_e1"]
    assert payload["shadows"] == sorted(["P_a1", "P_b1", "P_a2", "P_d1", "P_b2"])


def test_analyze_rpst_reports_structure():
    assert json.loads(analyze(corpus.path("n1"), "rpst"))["structured"] is True
    assert json.loads(analyze(corpus.path("nstar"), "rpst"))["structured"] is False


def test_analyze_dot():
    assert analyze(corpus.path("n1"), "cfp", fmt="dot").startswith("digraph")


def test_unknown_stage():
    with pytest.raises(UnknownStage):
        analyze(corpus.path("n1"), "parse-tree")


def test_consistency_on_n1():
    data = json.loads(translate(corpus.path("n1")).json)
    report = evaluate(corpus.path("n1"), data)
    assert report["consistency"] == pytest.approx(1.0)
    assert report["perplexity"] == 0.0


def test_model_against_itself():
    report = evaluate(corpus.path("n1"), json.loads(translate(corpus.path("n1")).json), corpus.path("n1"))
    assert all(s["f1"] == 1.0 for s in report["f1"].values())


def test_omitted_activity_raises_perplexity():
    data = json.loads(translate(corpus.path("n1")).json)
    data["neglected"] = ["T_c"]
    for para in data["paragraphs"]:
        para["transitions"] = [t for t in para["transitions"] if t != "T_c"]
    report = evaluate(corpus.path("n1"), data)
    assert report["perplexity"] > 0


def test_reconstruction_of_substituted_model():
    doc = corpus.load("nstar_expanded")
    data = json.loads(translate(doc).json)
    rebuilt = reconstruct(data)
    assert rebuilt.net.arcs == doc.net.arcs


def test_write_outputs(tmp_path):
    result = translate(corpus.path("n1"))
    paths = write_outputs(result, "n1", tmp_path, "md")
    assert [p.name for p in paths] == ["n1.md", "n1.report.json"]
    assert (tmp_path / "n1.md").read_text() == result.markdown


def test_translation_is_deterministic():
    a, b = translate(corpus.path("rigid_nested_bonds")), translate(corpus.path("rigid_nested_bonds"))
    assert (a.markdown, a.json) == (b.markdown, b.json)
