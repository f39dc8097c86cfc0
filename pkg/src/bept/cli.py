"""Command line entry point: ``bept translate | analyze | eval``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import metrics
from .metrics import MissingProvenance
from .pipeline import (
    FORMATS,
    STAGES,
    Config,
    ConfigError,
    InvariantViolation,
    PipelineError,
    UnknownStage,
    analyze,
    evaluate,
    translate,
    write_outputs,
)
from .pnml_io import ParseError, load_model

log = logging.getLogger("bept")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INTERNAL = 2

_INPUT_ERRORS = (ParseError, OSError, ConfigError, UnknownStage, MissingProvenance, json.JSONDecodeError, KeyError)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bept", description="Describe Petri net process models in structured English.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log warnings and timings to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("translate", help="write a markdown description and its provenance JSON")
    t.add_argument("model", help=".pnet or .pnml file")
    t.add_argument("--out", default=".", help="output directory (default: current)")
    t.add_argument("--max-paragraph-words", type=int, default=Config.max_paragraph_words)
    t.add_argument("--lexicon", help="lexicon TSV replacing the bundled one")
    t.add_argument("--templates", help="template TSV replacing the bundled one")
    t.add_argument("--format", choices=FORMATS, default="both")
    t.add_argument("--pronoun", default=Config.pronoun, help="pronoun used for repeated subjects")
    t.add_argument("--no-diagnosis", action="store_true", help="omit deadlock and dead activity warnings")

    a = sub.add_parser("analyze", help="dump one intermediate stage")
    a.add_argument("model")
    a.add_argument("--stage", required=True, help=f"one of {', '.join(STAGES)}")
    a.add_argument("--format", choices=("json", "dot"), default="json")
    a.add_argument("--lexicon")

    e = sub.add_parser("eval", help="score a generated description against its model")
    e.add_argument("model")
    e.add_argument("generated", help="provenance JSON written by translate")
    g = e.add_mutually_exclusive_group()
    g.add_argument("--reproduced", help="a model rebuilt from the text by someone else")
    g.add_argument("--reconstruct", action="store_true", help="rebuild the model from the JSON itself")
    e.add_argument("--csv", action="store_true", help="print one CSV row instead of JSON")
    return ap


def _translate(args: argparse.Namespace) -> int:
    config = Config(
        max_paragraph_words=args.max_paragraph_words,
        lexicon_path=args.lexicon,
        template_path=args.templates,
        output_format=args.format,
        pronoun=args.pronoun,
        include_diagnosis=not args.no_diagnosis,
    )
    result = translate(args.model, config)
    for w in result.report["warnings"]:
        log.warning("%s", w)
    for path in write_outputs(result, Path(args.model).stem, args.out, args.format):
        print(path)
    return EXIT_OK


def _analyze(args: argparse.Namespace) -> int:
    sys.stdout.write(analyze(args.model, args.stage, Config(lexicon_path=args.lexicon), args.format))
    return EXIT_OK


def _eval(args: argparse.Namespace) -> int:
    data = json.loads(Path(args.generated).read_text(encoding="utf-8"))
    if args.reconstruct:
        original = load_model(args.model).system
        report = metrics.evaluate(original, data, metrics.reconstruct(data))
    else:
        report = evaluate(args.model, data, args.reproduced)
    if args.csv:
        sys.stdout.write(metrics.report_csv([(Path(args.model).stem, report)]))
    else:
        sys.stdout.write(metrics.report_json(report))
    return EXIT_OK


def _is_input_error(exc: BaseException) -> bool:
    if isinstance(exc, InvariantViolation):
        return False
    if isinstance(exc, PipelineError):
        return exc.phase == "parse" or isinstance(exc.cause, _INPUT_ERRORS)
    return isinstance(exc, _INPUT_ERRORS)


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s: %(message)s")
    handler = {"translate": _translate, "analyze": _analyze, "eval": _eval}[args.command]
    try:
        return handler(args)
    except Exception as exc:  # map to documented exit codes
        code = EXIT_INPUT if _is_input_error(exc) else EXIT_INTERNAL
        print(f"bept: error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
