import json

import pytest

from bept import corpus
from bept.cli import EXIT_INPUT, EXIT_OK, main


def test_translate_writes_outputs(tmp_path, capsys):
    assert main(["translate", str(corpus.path("nstar")), "--out", str(tmp_path)]) == EXIT_OK
    printed = capsys.readouterr().out.split()
    assert sorted(printed) == sorted(str(tmp_path / f) for f in ("nstar.md", "nstar.json", "nstar.report.json"))
    assert (tmp_path / "nstar.md").read_text().startswith("- The following main branches are executed:")


def test_translate_json_only(tmp_path):
    assert main(["translate", str(corpus.path("n1")), "--out", str(tmp_path), "--format", "json"]) == EXIT_OK
    assert not (tmp_path / "n1.md").exists() and (tmp_path / "n1.json").exists()


def test_analyze(capsys):
    assert main(["analyze", str(corpus.path("nstar")), "--stage", "segments"]) == EXIT_OK
    assert len(json.loads(capsys.readouterr().out)["segments"]) == 4


def test_eval_reconstruct(tmp_path, capsys):
    main(["translate", str(corpus.path("n1")), "--out", str(tmp_path)])
    capsys.readouterr()
    assert main(["eval", str(corpus.path("n1")), str(tmp_path / "n1.json"), "--reconstruct"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["consistency"] == 1.0
    assert report["f1"]["tars"]["f1"] == report["f1"]["traces"]["f1"] == 1.0


def test_eval_csv(tmp_path, capsys):
    main(["translate", str(corpus.path("n1")), "--out", str(tmp_path)])
    capsys.readouterr()
    assert main(["eval", str(corpus.path("n1")), str(tmp_path / "n1.json"), "--csv"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("model,consistency,perplexity\nn1,1.0,0.0")


@pytest.mark.parametrize(
    "argv",
    [
        ["translate", "/nonexistent/model.pnet"],
        ["analyze", "MODEL", "--stage", "bogus"],
        ["translate", "BAD"],
        ["translate", "MODEL", "--max-paragraph-words", "3"],
        ["eval", "MODEL", "/nonexistent/out.json"],
    ],
)
def test_input_errors_exit_one(tmp_path, capsys, argv):
    bad = tmp_path / "bad.pnet"
    bad.write_text("place p\nplace p\n")
    argv = [str(corpus.path("n1")) if a == "MODEL" else str(bad) if a == "BAD" else a for a in argv]
    assert main(argv) == EXIT_INPUT
    assert capsys.readouterr().err.startswith("bept: error:")


def test_usage_error_exits_two():
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 2
