"""Command-line entry point: synth, train, dedup, evaluate, indicators, validate, bench.

Data go to files (``evaluate`` and ``bench`` print their short reports);
logs go to standard error. Failures end with one ``error: <kind>: <message>``
line and exit code 1; usage errors exit with code 2.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .ingest import load_stream, read_external
from .model import unit_from_record, unit_to_record

log = logging.getLogger("listingdedup")


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"no such file or directory: {path}")
    return p


# --- subcommands --------------------------------------------------------------


def cmd_synth(args, cfg) -> int:
    from .synth import generate, write_dataset

    gen = cfg.generator
    if args.weeks is not None:
        gen = replace(gen, weeks=args.weeks)
    if args.entries_per_week is not None:
        gen = replace(gen, entries_per_week=args.entries_per_week)
    data = generate(gen, args.seed)
    out = write_dataset(data, args.out)
    (out / "generator.json").write_text(json.dumps({"seed": args.seed, **gen.to_dict()}, indent=2, sort_keys=True))
    log.info("wrote %d snapshots and %d ads to %s", len(data.snapshots), len(data.truth.ad_unit), out)
    return 0


def cmd_train(args, cfg) -> int:
    from .pairs import read_samples, train_model_pair, write_samples
    from .synth import read_truth
    from .training import stream_pairs

    if args.samples:
        X, y = read_samples(_existing(args.samples))
    else:
        data = _existing(args.data) if args.data else None
        snaps = _existing(args.snapshots) if args.snapshots else data / "snapshots"
        truth = _existing(args.truth) if args.truth else data / "truth.csv"
        X, y, _ = stream_pairs(load_stream(_existing(snaps)), read_truth(_existing(truth)), cfg.blocking)
        if args.samples_out:
            write_samples(args.samples_out, X, y)
    log.info("training on %d pairs (%d duplicates)", len(y), int(np.sum(y)))
    model = train_model_pair(X, y, cfg.tree, cfg.threshold)
    model.save(args.out)
    return 0


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _write_units(path, units) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u in units:
            fh.write(json.dumps(unit_to_record(u), sort_keys=True) + "\n")


def read_units(path) -> list:
    with open(_existing(path), encoding="utf-8") as fh:
        return [unit_from_record(json.loads(line)) for line in fh if line.strip()]


def cmd_dedup(args, cfg) -> int:
    from .indicators.panel import ad_weeks_from_snapshots, write_ad_weeks
    from .pairs import TrainedModelPair
    from .time_machine import run_stream

    model = TrainedModelPair.load(_existing(args.model))
    if args.threshold is not None:
        model = replace(model, threshold=args.threshold)
    snaps = load_stream(_existing(args.snapshots))
    if not snaps:
        raise FileNotFoundError(f"no snapshot files in {args.snapshots}")
    params = replace(cfg.dedup, apply_filters=not args.no_filters)
    result = run_stream(snaps, model, params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_units(out / "units.jsonl", result.units)
    _write_units(out / "units_all.jsonl", result.all_units)
    _write_csv(out / "assignments.csv", ["ad_id", "unit_id"],
               sorted((a, u.id) for u in result.all_units for a in u.member_ad_ids))
    _write_csv(out / "audit.csv", ["week", "kind", "unit_id", "ad_ids", "units_in_cluster", "detail"],
               [(e.week.isoformat(), e.kind, e.unit_id, " ".join(map(str, e.ad_ids)), e.units_in_cluster, e.detail)
                for e in result.audit])
    write_ad_weeks(ad_weeks_from_snapshots(snaps), out / "clicks.csv")
    log.info("%d ads -> %d units (%d after filters)", len(result.ads), len(result.all_units), len(result.units))
    return 0


def _read_assignments(path) -> dict:
    with open(_existing(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if rows and not {"ad_id", "unit_id"} <= set(rows[0]):
        raise ValueError(f"{path} needs columns ad_id, unit_id")
    return {r["ad_id"]: r["unit_id"] for r in rows}


def cmd_evaluate(args, cfg) -> int:
    from .synth import score

    truth = _read_assignments(args.truth)
    pred = _read_assignments(args.pred)
    groups = {}
    for ad, unit in pred.items():
        groups.setdefault(unit, set()).add(ad)
    s = score(groups.values(), truth)
    print(f"precision={s.precision:.6g} recall={s.recall:.6g} F={s.f_measure:.6g} "
          f"units_per_ad={s.unit_ratio:.6g} true_units_per_ad={s.true_unit_ratio:.6g}")
    return 0


def _panel(args):
    from .indicators.panel import build_panel, read_ad_weeks

    return build_panel(read_units(args.units), read_ad_weeks(_existing(args.clicks)))


def cmd_indicators(args, cfg) -> int:
    from .indicators import models
    from .indicators.panel import zone_aggregates
    from .indicators.prices import hedonic_index, unit_period_prices

    panel = _panel(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    specs = {
        "eq1": models.model_eq1, "eq2": models.model_eq2, "eq3": models.model_eq3,
        "tom": models.model_tom, "priceref": models.model_priceref,
    }
    for name, fit in specs.items():
        try:
            res = fit(panel)
        except (ValueError, RuntimeError) as exc:
            log.warning("%s not estimated: %s", name, exc)
            continue
        t = res.table()
        t["n_obs"] = res.n_obs
        t.to_csv(out / f"{name}.csv", index=False)
    agg = zone_aggregates(panel, freq=args.freq)
    agg.to_csv(out / "zone_aggregates.csv", index=False)
    rows = unit_period_prices(panel, args.freq)
    index_rows = []
    for city in sorted(rows["city"].unique()):
        try:
            idx = hedonic_index(rows, city=city, min_obs=args.min_units)
        except ValueError as exc:
            log.warning("hedonic index for %s not built: %s", city, exc)
            continue
        index_rows += [(city, p, v) for p, v in zip(idx.periods, idx.values)]
    _write_csv(out / "hedonic_index.csv", ["city", "period", "index"], index_rows)
    units = panel.units.copy()
    units.to_csv(out / "units_panel.csv", index=False)
    return 0


def cmd_validate(args, cfg) -> int:
    from .indicators.validation import validation_stats

    rep = validation_stats(_panel(args), read_external(_existing(args.external)))
    items = sorted(rep.to_dict().items())
    if args.out:
        _write_csv(args.out, ["statistic", "value"], items)
    else:
        for k, v in items:
            print(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}")
    return 0


def cmd_bench(args, cfg) -> int:
    from .bench import Benchmark, BenchmarkCase, format_report, run_acceptance

    bench = Benchmark(BenchmarkCase(config=cfg.generator, tree=cfg.tree, dedup=cfg.dedup))
    results = run_acceptance(args.suite, bench)
    text = format_report(results, sep="\t")
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0 if all(r.passed for r in results) else 1


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="listingdedup", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic listing stream with ground truth")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--weeks", type=int)
    s.add_argument("--entries-per-week", type=float)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="fit the same-agency and cross-agency classifiers")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="directory written by synth")
    src.add_argument("--snapshots", help="snapshot directory (with --truth)")
    src.add_argument("--samples", help="CSV of labelled feature rows")
    s.add_argument("--truth", help="ad_id,unit_id CSV")
    s.add_argument("--samples-out", help="also write the labelled pairs here")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("dedup", help="run the weekly pipeline over a snapshot stream")
    s.add_argument("--snapshots", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--threshold", type=float)
    s.add_argument("--no-filters", action="store_true", help="skip the duration and price-ratio filters")
    s.set_defaults(func=cmd_dedup)

    s = sub.add_parser("evaluate", help="pairwise precision/recall of a partition against truth")
    s.add_argument("--truth", required=True)
    s.add_argument("--pred", required=True)
    s.set_defaults(func=cmd_evaluate)

    for name, func, help_ in (("indicators", cmd_indicators, "panel regressions and zone indicators"),
                              ("validate", cmd_validate, "compare listing measures with external series")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--units", required=True)
        s.add_argument("--clicks", required=True)
        if name == "indicators":
            s.add_argument("--out", required=True)
            s.add_argument("--freq", default="Q", choices=["Q", "M"])
            s.add_argument("--min-units", type=int, default=30)
        else:
            s.add_argument("--external", required=True)
            s.add_argument("--out")
        s.set_defaults(func=func)

    s = sub.add_parser("bench", help="acceptance checks")
    bsub = s.add_subparsers(dest="action", required=True)
    r = bsub.add_parser("run")
    r.add_argument("--suite", default="acceptance")
    r.add_argument("--out")
    r.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse has printed the usage message
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except (ValueError, KeyError, RuntimeError, OSError) as exc:
        if isinstance(exc, ConfigError):
            kind = "config"
        elif isinstance(exc, FileNotFoundError):
            kind = "missing-input"
        else:
            kind = type(exc).__name__
        msg = str(exc).replace("\n", " ")
    print(f"error: {kind}: {msg}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
