"""Command-line entry point wiring the pipeline stages.

Subcommands: quantify, ingest, summarize, assemble, evaluate, pipeline,
mock-llm. Every subcommand exits 0 on success; failures print a
machine-readable JSON object on stderr and exit nonzero.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from meibokit import __version__
from meibokit.assemble import AblationConfig, Grouping, assemble, emit_jsonl, split
from meibokit.clinical import join_morphology, parse_clinical_table
from meibokit.errors import EvaluationError, MeibokitError
from meibokit.evaluate import (
    ScoringPolicy,
    load_predictions_jsonl,
    render_comparison_table,
    score,
)
from meibokit.knowledge import (
    cases_to_qa,
    criteria_to_qa,
    ingest_trial_criteria,
    load_clinician_cases,
)
from meibokit.llm_client import EndpointConfig, llm_render_batch
from meibokit.mock_llm import serve_forever
from meibokit.morphometry import EyelidMorphology
from meibokit.pipeline import PipelineConfig, quantify_directory, run_pipeline


def _load_morphology_dir(path) -> list:
    morph_dir = Path(path)
    out = []
    for p in sorted(morph_dir.glob("*.json")):
        if p.name in ("failures.json",):
            continue
        out.append(EyelidMorphology.read_json(p))
    return out


def _endpoint_from_args(args) -> EndpointConfig | None:
    if not getattr(args, "endpoint_url", None):
        return None
    return EndpointConfig(
        base_url=args.endpoint_url,
        model=args.model,
        temperature=args.temperature,
        seed=args.seed,
        max_retries=args.max_retries,
    )


def cmd_quantify(args) -> int:
    morphologies, failures, written = quantify_directory(
        args.masks, args.out, images_dir=args.images, jobs=args.jobs
    )
    print(f"quantified {len(written)} mask(s), {len(failures)} failure(s) -> {args.out}")
    return 0


def cmd_ingest(args) -> int:
    result = parse_clinical_table(args.table)
    report = {
        "records": len(result.records),
        "rejected": [[i.row, i.reason] for i in result.rejected],
        "warnings": result.warnings,
    }
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(
            json.dumps([rec.to_row() for rec in result.records], indent=2) + "\n"
        )
    print(json.dumps(report, indent=2))
    return 0


def cmd_summarize(args) -> int:
    table = parse_clinical_table(args.table)
    records = table.records
    if args.morphology:
        records, _ = join_morphology(records, _load_morphology_dir(args.morphology))
    endpoint = _endpoint_from_args(args)
    if args.offline or endpoint is None:
        render_batch = None
    else:
        render_batch = llm_render_batch(endpoint)
    result = assemble(records, cfg=AblationConfig(), render_batch=render_batch)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as fh:
        for pair in result.pairs:
            fh.write(
                json.dumps(
                    {
                        "id": pair.id,
                        "question": pair.question,
                        "answer": pair.answer,
                        "source": pair.source.value,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    print(f"wrote {len(result.pairs)} report(s) -> {out}; rejected {len(result.rejected)}")
    return 0


def cmd_assemble(args) -> int:
    table = parse_clinical_table(args.table)
    records = table.records
    if args.morphology:
        records, _ = join_morphology(records, _load_morphology_dir(args.morphology))
    knowledge = []
    if args.criteria:
        ingest = ingest_trial_criteria(args.criteria)
        if ingest.criteria:
            knowledge.extend(criteria_to_qa(ingest.criteria))
    if args.cases:
        knowledge.extend(cases_to_qa(load_clinician_cases(args.cases)))
    cfg = AblationConfig(
        include_metadata=not args.no_metadata,
        include_morphology=not args.no_morphology,
        include_mg_expression=not args.no_mg_expression,
        include_real_diagnoses=not args.no_real_diagnoses,
    )
    endpoint = _endpoint_from_args(args)
    render_batch = None if (args.offline or endpoint is None) else llm_render_batch(endpoint)
    result = assemble(records, knowledge, cfg=cfg, render_batch=render_batch)
    dataset = split(result.pairs, args.ratio, args.seed, Grouping(args.grouping))
    paths = emit_jsonl(dataset, args.out)
    print(
        f"train {len(dataset.train)} / test {len(dataset.test)} "
        f"-> {paths['train'].parent}"
    )
    return 0


def cmd_evaluate(args) -> int:
    preds = load_predictions_jsonl(args.predictions)
    truth = parse_clinical_table(args.truth).records
    report = score(
        preds,
        truth,
        policy=ScoringPolicy(args.policy),
        model_name=args.model_name,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "eval_report.json").write_text(
        json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n"
    )
    text_table = render_comparison_table([report], fmt="text")
    (out_dir / "comparison.txt").write_text(text_table)
    (out_dir / "comparison.csv").write_text(render_comparison_table([report], fmt="csv"))
    print(text_table, end="")
    if report.has_unscorable_disease():
        raise EvaluationError(
            "a scored disease has zero positives and zero negatives"
        )
    return 0


def cmd_pipeline(args) -> int:
    cfg = PipelineConfig.from_file(args.config)
    if args.offline:
        cfg.offline = True
    promoted = run_pipeline(cfg)
    for name in sorted(promoted):
        print(f"{name}: {promoted[name]}")
    return 0


def cmd_mock_llm(args) -> int:
    serve_forever(args.port, fail_times=args.fail_times)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meibokit",
        description="Gland-mask morphometry, clinical Q&A datasets, and diagnostic evaluation",
    )
    parser.add_argument("--version", action="version", version=f"meibokit {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quantify", help="quantify a directory of labeled masks")
    p.add_argument("--masks", required=True, help="directory of 16-bit label PNGs + JSON sidecars")
    p.add_argument("--images", default=None, help="directory of matching grayscale PNGs")
    p.add_argument("--out", required=True, help="output directory for morphology JSON")
    p.add_argument("--jobs", type=int, default=4)
    p.set_defaults(func=cmd_quantify)

    p = sub.add_parser("ingest", help="validate a clinical table")
    p.add_argument("--table", required=True, help="clinical CSV or JSON table")
    p.add_argument("--out", default=None, help="optional path for validated records JSON")
    p.set_defaults(func=cmd_ingest)

    def add_endpoint_args(p):
        p.add_argument("--offline", action="store_true", help="force the deterministic renderer")
        p.add_argument("--endpoint-url", default=None, help="chat-completion base URL (.../v1)")
        p.add_argument("--model", default="gpt-4")
        p.add_argument("--temperature", type=float, default=0.0)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--max-retries", type=int, default=2)

    p = sub.add_parser("summarize", help="render clinical Q&A reports for a table")
    p.add_argument("--table", required=True)
    p.add_argument("--morphology", default=None, help="directory of morphology JSON to join")
    p.add_argument("--out", required=True, help="output JSONL path")
    add_endpoint_args(p)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("assemble", help="assemble, split, and emit train/test JSONL")
    p.add_argument("--table", required=True)
    p.add_argument("--morphology", default=None)
    p.add_argument("--criteria", default=None, help="trial criteria CSV")
    p.add_argument("--cases", default=None, help="clinician cases JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--ratio", type=float, default=0.9)
    p.add_argument("--grouping", choices=[g.value for g in Grouping], default="by_subject")
    p.add_argument("--no-metadata", action="store_true")
    p.add_argument("--no-morphology", action="store_true")
    p.add_argument("--no-mg-expression", action="store_true")
    p.add_argument("--no-real-diagnoses", action="store_true")
    add_endpoint_args(p)
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("evaluate", help="score predictions against a truth table")
    p.add_argument("--predictions", required=True, help="JSONL of {id, raw_answer}")
    p.add_argument("--truth", required=True, help="clinical table with definite labels")
    p.add_argument("--policy", choices=[s.value for s in ScoringPolicy], default="count_as_wrong")
    p.add_argument("--model-name", default="model")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--offline", action="store_true", help="force the deterministic renderer")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("mock-llm", help="serve the offline mock chat-completion endpoint")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--fail-times", type=int, default=0, help="inject N leading 500 responses")
    p.set_defaults(func=cmd_mock_llm)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except MeibokitError as exc:
        json.dump(
            {"error": type(exc).__name__, "message": str(exc)},
            sys.stderr,
        )
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
