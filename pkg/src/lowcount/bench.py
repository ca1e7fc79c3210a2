"""Benchmark orchestration: grid execution, persistence and aggregation over seeds."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

from .datagen import GeneratorConfig, FULL_AMPLITUDES, FULL_REDUCTION_RATES, generate, stream_entropy
from .detectors import DETECTOR_IDS, SEEDED, run_detector
from .forecast import train_end
from .metrics import UndefinedCurveError, auprc, best_f1, clipped_segments, pr_curve, time_to_detection
from .realdata import bin_by_count_level, binomial_zero_out, ingest_csv, inject_anomalies
from .series import CountSeries
from .smoothing import SmootherSpec, smooth

log = logging.getLogger(__name__)

RESULTS_FILE = "results.jsonl"
AGGREGATE_FILE = "aggregate.csv"
METRICS = ("auprc", "best_f1", "mean_ttd_at_best_f1", "prevalence")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DetectorEntry:
    id: str
    spec: dict = field(default_factory=dict)


@dataclass(frozen=True)
class IngestConfig:
    """Real-data mode: CSV series are binned by count level and anomalies injected."""

    paths: tuple[str, ...]
    reduction_rates: tuple[float, ...] = (0.5,)
    seeds: tuple[int, ...] = (0,)
    dt: float = 1.0
    period: int = 7
    bins: int = 4
    zero_out_p: float = 0.0
    zero_out_fraction: float = 0.0


@dataclass(frozen=True)
class ExperimentConfig:
    amplitudes: tuple[float, ...]
    reduction_rates: tuple[float, ...]
    seeds: tuple[int, ...]
    base: GeneratorConfig = GeneratorConfig()
    detectors: tuple[DetectorEntry, ...] = tuple(DetectorEntry(d) for d in DETECTOR_IDS)
    smoothers: tuple[SmootherSpec, ...] = (SmootherSpec("none"), SmootherSpec("ema"))
    train_fraction: float = 0.3
    quantile_level: float = 0.05
    output_dir: str = "bench-out"
    parallelism: int = 1
    ingest: IngestConfig | None = None

    def __post_init__(self) -> None:
        if self.ingest is None and not (self.amplitudes and self.reduction_rates and self.seeds):
            raise ConfigError("grid needs amplitudes, reduction_rates and seeds")
        if not self.detectors:
            raise ConfigError("no detectors configured")
        if not self.smoothers:
            raise ConfigError("no smoothers configured")
        for d in self.detectors:
            if d.id not in DETECTOR_IDS:
                raise ConfigError(f"unknown detector {d.id!r}; valid ids: {', '.join(DETECTOR_IDS)}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be positive")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        try:
            grid = d.get("grid", {})
            ev = d.get("eval", {})
            ingest = d.get("ingest")
            return cls(
                amplitudes=tuple(float(a) for a in grid.get("amplitudes", ())),
                reduction_rates=tuple(float(r) for r in grid.get("reduction_rates", ())),
                seeds=tuple(int(s) for s in grid.get("seeds", ())),
                base=GeneratorConfig.from_dict(grid.get("base", {})),
                detectors=tuple(
                    DetectorEntry(e) if isinstance(e, str) else DetectorEntry(e["id"], dict(e.get("spec", {})))
                    for e in d.get("detectors", DETECTOR_IDS)
                ),
                smoothers=tuple(
                    SmootherSpec(s) if isinstance(s, str) else SmootherSpec(**s)
                    for s in d.get("smoothers", ("none", "ema"))
                ),
                train_fraction=float(ev.get("train_fraction", 0.3)),
                quantile_level=float(ev.get("quantile_level", 0.05)),
                output_dir=str(d.get("output_dir", "bench-out")),
                parallelism=int(d.get("parallelism", 1)),
                ingest=None
                if ingest is None
                else IngestConfig(
                    **{
                        **ingest,
                        "paths": tuple(ingest["paths"]),
                        "reduction_rates": tuple(ingest.get("reduction_rates", (0.5,))),
                        "seeds": tuple(ingest.get("seeds", (0,))),
                    }
                ),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: not valid JSON: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "grid": {
                "amplitudes": list(self.amplitudes),
                "reduction_rates": list(self.reduction_rates),
                "seeds": list(self.seeds),
                "base": self.base.to_dict(),
            },
            "detectors": [{"id": d.id, "spec": d.spec} for d in self.detectors],
            "smoothers": [s.to_dict() for s in self.smoothers],
            "eval": {"train_fraction": self.train_fraction, "quantile_level": self.quantile_level},
            "output_dir": self.output_dir,
            "parallelism": self.parallelism,
            **({"ingest": {**asdict(self.ingest)}} if self.ingest else {}),
        }

    def cells(self) -> list[GeneratorConfig]:
        return [
            GeneratorConfig.from_dict({**self.base.to_dict(), "amplitude": A, "reduction_rate": r, "seed": s})
            for A in self.amplitudes
            for r in self.reduction_rates
            for s in self.seeds
        ]


def full_config(**overrides: Any) -> ExperimentConfig:
    """The full grid: 15 amplitudes x 4 reduction rates x 5 seeds."""
    opts = dict(
        amplitudes=FULL_AMPLITUDES,
        reduction_rates=FULL_REDUCTION_RATES,
        seeds=(0, 1, 2, 3, 4),
    )
    opts.update(overrides)
    return ExperimentConfig(**opts)


def reduced_config(**overrides: Any) -> ExperimentConfig:
    opts = dict(
        amplitudes=(1.0, 8.0, 64.0, 512.0),
        reduction_rates=(0.5, 1.0),
        seeds=(0, 1, 2, 3, 4),
    )
    opts.update(overrides)
    return ExperimentConfig(**opts)


@dataclass(frozen=True)
class BenchResult:
    cell: dict
    detector: str
    smoother: str
    auprc: float | None
    best_f1: float | None
    mean_ttd_at_best_f1: float | None
    prevalence: float | None
    runtime_ms: int
    error: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, line: str) -> BenchResult:
        return cls(**json.loads(line))


@dataclass(frozen=True)
class AggregateRow:
    A: Any
    r: float
    detector: str
    smoother: str
    stats: dict[str, tuple[float, float]]
    n: int


def detector_seed(cell_key: Sequence[Any], detector_id: str, base_seed: int) -> int:
    words = stream_entropy("detector", *cell_key, detector_id, int(base_seed))
    return (words[0] << 32 | words[1]) & 0x7FFF_FFFF_FFFF_FFFF


def evaluate_series(
    series: CountSeries,
    cell: dict,
    detectors: Sequence[DetectorEntry],
    smoothers: Sequence[SmootherSpec],
    *,
    period: int,
    generator: GeneratorConfig | None = None,
    train_fraction: float = 0.3,
    quantile_level: float = 0.05,
) -> list[BenchResult]:
    """All detector x smoother rows for one labelled series.

    Every detector is evaluated from the end of the training prefix onward
    (or later if its own warm-up is longer) so rows share one region.
    """
    key = tuple(cell[k] for k in sorted(cell))
    eval_from = train_end(len(series), train_fraction)
    rows: list[BenchResult] = []
    for entry in detectors:
        spec = dict(entry.spec)
        if entry.id in SEEDED:
            spec["seed"] = detector_seed(key, entry.id, spec.get("seed", 0))
        t0 = time.perf_counter()
        try:
            raw = run_detector(
                entry.id,
                series,
                spec,
                period=period,
                generator=generator,
                train_fraction=train_fraction,
                quantile_level=quantile_level,
            )
        except Exception as exc:  # noqa: BLE001 - one failed detector must not stop the sweep
            log.warning("detector %s failed on %s: %s", entry.id, cell, exc)
            rows.extend(
                BenchResult(cell, entry.id, sm.id, None, None, None, None, 0, f"{type(exc).__name__}: {exc}")
                for sm in smoothers
            )
            continue
        detect_ms = (time.perf_counter() - t0) * 1000.0
        for sm in smoothers:
            t1 = time.perf_counter()
            scores = smooth(raw, sm)
            try:
                start = max(scores.valid_from, eval_from)
                curve = pr_curve(scores, series.labels, eval_from=start)
                f1, thr = best_f1(scores, series.labels, eval_from=start)
                ttd = time_to_detection(scores, clipped_segments(series.labels, start), thr)
                metrics = (auprc(curve), f1, ttd.mean_ttd, curve.prevalence)
                error = None
            except UndefinedCurveError as exc:
                metrics = (None, None, None, None)
                error = f"UndefinedCurveError: {exc}"
            elapsed = int(round(detect_ms + (time.perf_counter() - t1) * 1000.0))
            rows.append(BenchResult(cell, entry.id, sm.id, *metrics, elapsed, error))
    return rows


def run_cell(cfg: ExperimentConfig, gen: GeneratorConfig) -> list[BenchResult]:
    series, _ = generate(gen)
    cell = {"A": gen.amplitude, "r": gen.reduction_rate, "seed": gen.seed}
    return evaluate_series(
        series,
        cell,
        cfg.detectors,
        cfg.smoothers,
        period=gen.period,
        generator=gen,
        train_fraction=cfg.train_fraction,
        quantile_level=cfg.quantile_level,
    )


def _ingested_tasks(cfg: ExperimentConfig) -> list[tuple[dict, CountSeries]]:
    ing = cfg.ingest
    assert ing is not None
    loaded = [ingest_csv(p, dt=ing.dt) for p in ing.paths]
    if ing.zero_out_p > 0 and ing.zero_out_fraction > 0:
        pick = np.random.default_rng(np.random.SeedSequence(stream_entropy("zero-out-pick")))
        chosen = pick.random(len(loaded)) < ing.zero_out_fraction
        loaded = [
            binomial_zero_out(s, ing.zero_out_p, seed=i) if c else s
            for i, (s, c) in enumerate(zip(loaded, chosen))
        ]
    tasks = []
    for b, members in bin_by_count_level(loaded, ing.bins).items():
        for s in members:
            for r in ing.reduction_rates:
                for seed in ing.seeds:
                    cell = {"A": f"bin{b}", "r": float(r), "seed": int(seed), "series": s.meta["id"]}
                    tasks.append((cell, inject_anomalies(s, r, seed=seed)))
    return tasks


def run_ingested_cell(cfg: ExperimentConfig, cell: dict, series: CountSeries) -> list[BenchResult]:
    assert cfg.ingest is not None
    return evaluate_series(
        series,
        cell,
        cfg.detectors,
        cfg.smoothers,
        period=cfg.ingest.period,
        generator=None,
        train_fraction=cfg.train_fraction,
        quantile_level=cfg.quantile_level,
    )


def _sort_key(cfg: ExperimentConfig):
    det_order = {d.id: i for i, d in enumerate(cfg.detectors)}
    sm_order = {s.id: i for i, s in enumerate(cfg.smoothers)}

    def key(row: BenchResult):
        c = row.cell
        return (str(c.get("series", "")), str(c["A"]) if isinstance(c["A"], str) else "",
                c["A"] if not isinstance(c["A"], str) else 0.0, c["r"], c["seed"],
                det_order[row.detector], sm_order[row.smoother])

    return key


def _cell_token(cell: dict) -> str:
    return json.dumps(cell, sort_keys=True)


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> list[BenchResult]:
    """Run every cell, streaming rows to ``<output_dir>/results.jsonl.part``.

    On completion rows are sorted into ``results.jsonl`` and aggregated into
    ``aggregate.csv``. A leftover ``.part`` file from an interrupted run is
    reused: cells already present there are not recomputed.
    """
    out_dir = Path(cfg.output_dir)
    part_path = out_dir / (RESULTS_FILE + ".part")
    done: dict[str, list[BenchResult]] = {}
    if write:
        out_dir.mkdir(parents=True, exist_ok=True)
        if part_path.exists():
            for line in part_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    row = BenchResult.from_json(line)
                    done.setdefault(_cell_token(row.cell), []).append(row)
            expected = len(cfg.detectors) * len(cfg.smoothers)
            done = {k: v for k, v in done.items() if len(v) == expected}

    if cfg.ingest is None:
        tasks = [((run_cell, (cfg, g)), {"A": g.amplitude, "r": g.reduction_rate, "seed": g.seed}) for g in cfg.cells()]
    else:
        tasks = [((run_ingested_cell, (cfg, cell, s)), cell) for cell, s in _ingested_tasks(cfg)]

    rows: list[BenchResult] = [r for v in done.values() for r in v]
    pending = [(call, cell) for call, cell in tasks if _cell_token(cell) not in done]
    sink = open(part_path, "a", encoding="utf-8") if write else None
    try:
        for cell_rows in _execute(pending, cfg.parallelism):
            rows.extend(cell_rows)
            if sink is not None:
                sink.write("".join(r.to_json() + "\n" for r in cell_rows))
                sink.flush()
    finally:
        if sink is not None:
            sink.close()

    rows.sort(key=_sort_key(cfg))
    if write:
        write_results(rows, out_dir / RESULTS_FILE)
        write_aggregate(aggregate(rows), out_dir / AGGREGATE_FILE)
        part_path.unlink()
    return rows


def _execute(pending: list, parallelism: int) -> Iterator[list[BenchResult]]:
    if parallelism == 1 or len(pending) <= 1:
        for (fn, args), _ in pending:
            yield fn(*args)
        return
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        futures = [pool.submit(fn, *args) for (fn, args), _ in pending]
        for fut in as_completed(futures):
            yield fut.result()


def write_results(rows: Iterable[BenchResult], path: str | Path) -> None:
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(row.to_json() + "\n")
    os.replace(tmp, path)


def read_results(path: str | Path) -> list[BenchResult]:
    with open(path, encoding="utf-8") as fh:
        return [BenchResult.from_json(line) for line in fh if line.strip()]


def aggregate(results: Iterable[BenchResult]) -> list[AggregateRow]:
    """Mean and sample standard deviation of each metric over seeds; error rows are skipped."""
    groups: dict[tuple, list[BenchResult]] = {}
    for row in results:
        if row.error is not None:
            continue
        key = (row.cell["A"], row.cell["r"], row.detector, row.smoother)
        groups.setdefault(key, []).append(row)

    out = []
    for (A, r, det, sm), members in groups.items():
        stats = {}
        for metric in METRICS:
            vals = np.array(sorted(getattr(m, metric) for m in members), dtype=float)
            sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            stats[metric] = (float(vals.mean()), sd)
        out.append(AggregateRow(A, r, det, sm, stats, len(members)))
    out.sort(key=lambda a: (isinstance(a.A, str), str(a.A) if isinstance(a.A, str) else a.A, a.r, a.detector, a.smoother))
    return out


def format_aggregate(rows: Iterable[AggregateRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["A", "r", "detector", "smoother", "metric", "mean", "std", "n"])
    for row in rows:
        for metric in METRICS:
            mean, sd = row.stats[metric]
            w.writerow([row.A, row.r, row.detector, row.smoother, metric, repr(mean), repr(sd), row.n])
    return buf.getvalue()


def write_aggregate(rows: Iterable[AggregateRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_aggregate(rows))


def read_aggregate(path: str | Path) -> list[dict]:
    """Aggregate CSV rows as dicts with numeric fields converted."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        try:
            row["A"] = float(row["A"])
        except ValueError:
            pass
        row["r"] = float(row["r"])
        row["mean"] = float(row["mean"])
        row["std"] = float(row["std"])
        row["n"] = int(row["n"])
    return rows


def seed_mean(results: Iterable[BenchResult], metric: str = "auprc") -> dict[tuple, float]:
    """``{(A, r, detector, smoother): mean metric over seeds}``."""
    return {
        (a.A, a.r, a.detector, a.smoother): a.stats[metric][0] for a in aggregate(results)
    }


def is_finite_row(row: BenchResult) -> bool:
    return row.error is None and all(
        v is not None and math.isfinite(v)
        for v in (row.auprc, row.best_f1, row.mean_ttd_at_best_f1, row.prevalence)
    )


def improvement_table(
    results: Iterable[BenchResult], smoothed: str = "ema", r: float | None = None
) -> dict[tuple[str, float], float]:
    """Percent AUPRC change of ``smoothed`` over raw scores per (detector, A).

    AUPRC is averaged over seeds (and over reduction rates when ``r`` is None)
    before the ratio is taken.
    """
    from .metrics import improvement_rate

    raw: dict[tuple[str, float], list[float]] = {}
    sm: dict[tuple[str, float], list[float]] = {}
    for (A, rr, det, smoother), v in seed_mean(results).items():
        if isinstance(A, str) or (r is not None and not math.isclose(rr, r)):
            continue
        if smoother == "none":
            raw.setdefault((det, A), []).append(v)
        elif smoother == smoothed:
            sm.setdefault((det, A), []).append(v)
    return {
        key: improvement_rate(float(np.mean(sm[key])), float(np.mean(raw[key])))
        for key in sorted(raw)
        if key in sm
    }
