"""Command line: ``stats``, ``plan``, ``eval`` and ``compare``.

Exit codes: 0 success, 1 validation/configuration error, 2 backend failure
(including any failed trace in a ``plan`` run).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from cogplan.core import ImageRef, MultimodalQuery, read_traces, write_traces
from cogplan.errors import BackendError, ValidationError
from cogplan.harness.config import load_config_file, make_run_config
from cogplan.harness.dataset import dataset_stats, load_dataset
from cogplan.harness.pipelines import PipelineMode, run_pipeline

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_BACKEND = 2

MODE_CHOICES = [m.value for m in PipelineMode] + ["cogplanner"]


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    else:
        print(text)


def cmd_stats(args: argparse.Namespace) -> int:
    stats = dataset_stats(load_dataset(args.dataset))
    if args.json:
        _emit(json.dumps(stats.to_dict(), indent=2), args.out)
    else:
        _emit(stats.render(), args.out)
    return EXIT_OK


def _resolve_mode(mode: str | None, paradigm: str | None) -> PipelineMode:
    if mode in (None, "cogplanner"):
        return PipelineMode(f"cogplanner-{paradigm or 'sequential'}")
    resolved = PipelineMode(mode)
    if paradigm and resolved.value.startswith("cogplanner-") and resolved.value != f"cogplanner-{paradigm}":
        raise ValidationError("paradigm", f"--paradigm {paradigm} contradicts --mode {mode}")
    return resolved


def cmd_plan(args: argparse.Namespace) -> int:
    mode = _resolve_mode(args.mode, args.paradigm)
    overrides = {
        "paradigm": mode.value.split("-", 1)[1] if mode.value.startswith("cogplanner-") else None,
        "t_max": args.t_max,
        "text_top_k": args.top_k,
        "expert": args.expert_script,
        "generator": args.generator_script,
        "corpus": args.corpus,
        "cache_dir": args.cache_dir,
        "workers": args.workers,
    }
    run = make_run_config(load_config_file(args.config), overrides)
    if args.dataset:
        samples = load_dataset(args.dataset)
    elif args.query:
        image = ImageRef.from_locator(args.image) if args.image else None
        samples = [MultimodalQuery(args.query, image, args.id)]
    else:
        raise ValidationError("input", "give --dataset or --query")
    backends = run.build_backends()
    traces = run_pipeline(samples, mode, run.planner, backends, workers=run.workers)
    if args.out:
        write_traces(traces, args.out)
    else:
        for trace in traces:
            print(trace.to_json())
    failed = [t.sample_id for t in traces if t.failed]
    if failed:
        print(f"failed samples: {', '.join(failed)}", file=sys.stderr)
        return EXIT_BACKEND
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    from cogplan.evalkit.report import build_report

    traces = read_traces(args.traces)
    samples = load_dataset(args.dataset)
    label = args.label or (traces[0].mode if traces else Path(args.traces).stem)
    report = build_report(traces, samples, label=label)
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    print(report.render())
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    from cogplan.evalkit.report import compare_reports

    reports = []
    for path in args.reports:
        try:
            reports.append(json.loads(Path(path).read_text(encoding="utf-8")))
        except (OSError, ValueError) as exc:
            raise ValidationError("reports", f"cannot read {path}: {exc}") from exc
    labels = args.labels.split(",") if args.labels else None
    if labels and len(labels) != len(reports):
        raise ValidationError("labels", "need one label per report")
    try:
        table = compare_reports(reports, labels)
    except KeyError as exc:
        raise ValidationError("reports", f"report lacks field {exc}") from exc
    _emit(table, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cogplan", description="Multimodal RAG planning and evaluation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("dataset")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("plan", help="run a pipeline and write traces")
    p.add_argument("--dataset")
    p.add_argument("--query")
    p.add_argument("--image")
    p.add_argument("--id", default="query")
    p.add_argument("--mode", choices=MODE_CHOICES)
    p.add_argument("--paradigm", choices=["parallel", "sequential"])
    p.add_argument("--t-max", type=int)
    p.add_argument("--top-k", type=int)
    p.add_argument("--expert-script", help="scripted expert JSON, 'echo' or 'remote'")
    p.add_argument("--generator-script", help="separate generator backend (defaults to the expert)")
    p.add_argument("--corpus", help="local corpus directory; omit for remote search")
    p.add_argument("--cache-dir")
    p.add_argument("--config")
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("eval", help="score traces against a dataset")
    p.add_argument("--traces", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--label")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="side-by-side table of reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--labels", help="comma-separated row labels")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
