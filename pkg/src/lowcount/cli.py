"""Command-line entry point: ``lowcount {generate,detect,evaluate,bench,plot}``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import plots
from .bench import (
    ConfigError,
    ExperimentConfig,
    improvement_table,
    read_aggregate,
    read_results,
    run_experiment,
)
from .datagen import GeneratorConfig, generate
from .detectors import DETECTOR_IDS, MissingGeneratorError, UnknownDetectorError, run_detector
from .metrics import (
    UndefinedCurveError,
    auprc,
    best_f1,
    clipped_segments,
    f1_ttd_tradeoff,
    pr_curve,
    time_to_detection,
)
from .series import ScoreSeries, SeriesFormatError, read_series_csv, write_series_csv
from .smoothing import SMOOTHER_IDS, SmootherSpec, smooth

log = logging.getLogger("lowcount")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
PLOT_KINDS = ("series-with-anomalies", "metric-vs-count", "f1-vs-ttd", "improvement-heatmap")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit with 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def sidecar_path(series_path: Path) -> Path:
    return series_path.with_suffix(".json")


def write_scores_csv(scores: ScoreSeries, path: Path) -> None:
    lines = ["t,score"]
    for t, s in enumerate(scores.scores):
        lines.append(f"{t}," if t < scores.valid_from else f"{t},{float(s)!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_scores_csv(path: Path) -> ScoreSeries:
    """Inverse of :func:`write_scores_csv`; blank scores mark the warm-up."""
    rows = path.read_text(encoding="utf-8").splitlines()
    if not rows or rows[0].strip() != "t,score":
        raise SeriesFormatError(f"{path}: line 1: expected header 't,score'")
    scores: list[float] = []
    valid_from = 0
    for lineno, line in enumerate(rows[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise SeriesFormatError(f"{path}: line {lineno}: expected 2 fields")
        if parts[1] == "":
            if len(scores) != valid_from:
                raise SeriesFormatError(f"{path}: line {lineno}: blank score after warm-up")
            scores.append(0.0)
            valid_from += 1
            continue
        try:
            scores.append(float(parts[1]))
        except ValueError:
            raise SeriesFormatError(f"{path}: line {lineno}: bad score {parts[1]!r}") from None
    return ScoreSeries(np.asarray(scores), valid_from=valid_from)


def _load_spec(text: str | None) -> dict:
    if not text:
        return {}
    if text.startswith("@"):
        text = Path(text[1:]).read_text(encoding="utf-8")
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--spec is not valid JSON: {exc}") from exc
    if not isinstance(spec, dict):
        raise UsageError("--spec must be a JSON object")
    return spec


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig.load(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = []
    for gen in cfg.cells():
        series, hidden = generate(gen)
        cid = series.meta["id"]
        csv_path = out / f"{cid}.csv"
        write_series_csv(series, csv_path)
        segments = series.segments()
        sidecar = {
            "id": cid,
            "generator": gen.to_dict(),
            "segments": [[s.start, s.end] for s in segments],
            "anomalous_fraction": float(hidden.states.mean()),
        }
        sidecar_path(csv_path).write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")
        manifest.append({"id": cid, "csv": csv_path.name, "sidecar": sidecar_path(csv_path).name})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    for entry in manifest:
        print(entry["csv"])
    log.info("wrote %d series to %s", len(manifest), out)
    return EXIT_OK


def cmd_detect(args: argparse.Namespace) -> int:
    if args.detector not in DETECTOR_IDS:
        raise UnknownDetectorError(args.detector)
    series_path = Path(args.series)
    side = sidecar_path(series_path)
    generator = None
    period = args.period
    dt = 1.0
    if side.exists():
        generator = GeneratorConfig.from_dict(json.loads(side.read_text(encoding="utf-8"))["generator"])
        period = period or generator.period
        dt = generator.dt
    series = read_series_csv(series_path, dt=dt)
    raw = run_detector(
        args.detector,
        series,
        _load_spec(args.spec),
        period=period or 10,
        generator=generator,
        train_fraction=args.train_fraction,
        quantile_level=args.quantile_level,
    )
    scores = smooth(raw, SmootherSpec(args.smoother))
    out_dir = Path(args.out_dir) if args.out_dir else series_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / f"{series_path.stem}.{args.detector}.{args.smoother}.scores.csv"
    write_scores_csv(scores, out)
    print(out)
    return EXIT_OK


def evaluate_scores(series, raw: ScoreSeries, smoothers: Sequence[str], eval_from: int = 0) -> dict:
    if series.labels is None:
        raise UsageError("evaluation needs a labelled series")
    report = {}
    for sm in smoothers:
        scores = smooth(raw, SmootherSpec(sm))
        start = max(scores.valid_from, eval_from)
        curve = pr_curve(scores, series.labels, eval_from=start)
        f1, thr = best_f1(scores, series.labels, eval_from=start)
        ttd = time_to_detection(scores, clipped_segments(series.labels, start), thr)
        report[sm] = {
            "auprc": auprc(curve),
            "best_f1": f1,
            "threshold": thr,
            "mean_ttd_at_best_f1": ttd.mean_ttd,
            "detected_fraction": ttd.detected_fraction,
            "prevalence": curve.prevalence,
            "tradeoff": f1_ttd_tradeoff(scores, series.labels, eval_from=start),
        }
    return report


def cmd_evaluate(args: argparse.Namespace) -> int:
    series = read_series_csv(args.series)
    raw = read_scores_csv(Path(args.scores))
    if len(raw) != len(series):
        raise UsageError("scores and series differ in length")
    smoothers = SMOOTHER_IDS if args.smoothers == "all" else tuple(args.smoothers.split(","))
    for sm in smoothers:
        if sm not in SMOOTHER_IDS:
            raise UsageError(f"unknown smoother {sm!r}; valid ids: {', '.join(SMOOTHER_IDS)}")
    report = evaluate_scores(series, raw, smoothers, eval_from=args.eval_from)
    Path(args.out).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    print(args.out)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig.load(args.config)
    overrides = {}
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    if args.parallelism:
        overrides["parallelism"] = args.parallelism
    if overrides:
        cfg = replace(cfg, **overrides)
    rows = run_experiment(cfg)
    failed = sum(r.error is not None for r in rows)
    if failed:
        log.warning("%d of %d rows failed; see the error field in results.jsonl", failed, len(rows))
    if failed == len(rows):
        return EXIT_RUNTIME
    print(Path(cfg.output_dir) / "results.jsonl")
    print(Path(cfg.output_dir) / "aggregate.csv")
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    src = Path(args.input)
    if not src.exists() or src.stat().st_size == 0:
        raise plots.EmptyPlotError(f"{src} is missing or empty")
    if args.kind == "series-with-anomalies":
        plots.series_with_anomalies(read_series_csv(src), args.output, title=args.title)
    elif args.kind == "metric-vs-count":
        plots.metric_vs_count(
            read_aggregate(src),
            args.output,
            metric=args.metric,
            r=args.r,
            smoother=None if args.smoother == "all" else args.smoother,
            log_y=args.log_y,
            title=args.title,
        )
    elif args.kind == "f1-vs-ttd":
        report = json.loads(src.read_text(encoding="utf-8"))
        plots.f1_vs_ttd({sm: v["tradeoff"] for sm, v in report.items()}, args.output, title=args.title)
    else:
        table = improvement_table(read_results(src), smoothed=args.smoothed, r=args.r)
        plots.improvement_heatmap(table, args.output, title=args.title)
    print(args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lowcount", description="Low-count time-series anomaly detection benchmark.")
    p.add_argument("--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write the configured grid of synthetic series")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("detect", help="score one series with one detector")
    d.add_argument("--series", required=True)
    d.add_argument("--detector", required=True, help=f"one of: {', '.join(DETECTOR_IDS)}")
    d.add_argument("--spec", help="detector options as JSON, or @file")
    d.add_argument("--smoother", default="none", choices=SMOOTHER_IDS)
    d.add_argument("--period", type=int, default=None)
    d.add_argument("--train-fraction", type=float, default=0.3)
    d.add_argument("--quantile-level", type=float, default=0.05)
    d.add_argument("--out-dir")
    d.set_defaults(func=cmd_detect)

    e = sub.add_parser("evaluate", help="AUPRC, F1 and TTD for a scores file")
    e.add_argument("--series", required=True)
    e.add_argument("--scores", required=True)
    e.add_argument("--smoothers", default="none", help="comma-separated smoother ids, or 'all'")
    e.add_argument("--eval-from", type=int, default=0)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("bench", help="run a benchmark sweep")
    b.add_argument("--config", required=True)
    b.add_argument("--output-dir")
    b.add_argument("--parallelism", type=int)
    b.set_defaults(func=cmd_bench)

    pl = sub.add_parser("plot", help="render an SVG figure")
    pl.add_argument("--kind", required=True, choices=PLOT_KINDS)
    pl.add_argument("--input", required=True)
    pl.add_argument("--output", required=True)
    pl.add_argument("--metric", default="auprc")
    pl.add_argument("--r", type=float)
    pl.add_argument("--smoother", default="none", help="smoother id or 'all' (metric-vs-count)")
    pl.add_argument("--smoothed", default="ema", help="smoother compared with raw (heatmap)")
    pl.add_argument("--log-y", action="store_true")
    pl.add_argument("--title", default="")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (UsageError, ConfigError, UnknownDetectorError, SeriesFormatError) as exc:
        print(f"lowcount {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MissingGeneratorError, plots.EmptyPlotError, UndefinedCurveError, OSError, ValueError) as exc:
        print(f"lowcount {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
