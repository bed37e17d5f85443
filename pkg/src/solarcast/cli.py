"""Batch command line: ``solarcast <ingest|analyze|train|evaluate|cv|ablate> [options]``.

Exit codes: 0 success, 2 usage or data error, 3 training or schema failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import evaluate as ev
from . import models
from .dataio import (ALL_FRAMES, TimeFrame, align, build_frame, cumulative_to_interval,
                     interpolate_missing, parse_pv, parse_weather, read_frame_csv)
from .errors import DataError, ModelError, SolarcastError
from .features import MAX_PRIORS, PRESETS, build_features, pearson
from .features import permutation_importance
from .preprocess import detect_outliers, outlier_bounds, skewness_report

logger = logging.getLogger("solarcast")

DEFAULT_SEED = 42
EXIT_OK, EXIT_DATA, EXIT_MODEL = 0, 2, 3
COMMANDS = ("ingest", "analyze", "train", "evaluate", "cv", "ablate")


class UsageError(Exception):
    pass


def default_seed() -> int:
    env = os.environ.get("SOLARCAST_SEED")
    if env is None or env.strip() == "":
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"SOLARCAST_SEED must be an integer, got {env!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="solarcast",
                                description="PV energy forecasting from weather observations.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--pv", type=Path, help="PV meter export (ID,DateTime,Value,Unit)")
    p.add_argument("--weather", type=Path, help="hourly weather export")
    p.add_argument("--data", type=Path,
                   help="directory holding frame_<horizon>.csv files (default: --out)")
    p.add_argument("--horizon", choices=[f.value for f in ALL_FRAMES],
                   help="time frame; ingest and ablate default to all three, others to 1h")
    p.add_argument("--model", choices=models.MODEL_KINDS,
                   help="model kind; ablate defaults to all five, others to rf")
    p.add_argument("--features", choices=PRESETS, help="feature preset (default full)")
    p.add_argument("--n-priors", type=int, choices=range(MAX_PRIORS + 1), metavar="0..6",
                   help="lagged-output features (default 1)")
    p.add_argument("--max-priors", type=int, default=MAX_PRIORS, choices=range(MAX_PRIORS + 1),
                   metavar="0..6", help="ablate: largest prior count (default 6)")
    p.add_argument("--split", choices=ev.SPLIT_MODES, default="shuffled")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--folds", type=int, default=10, help="cv: number of folds (default 10)")
    p.add_argument("--seed", type=int, help=f"random seed (default $SOLARCAST_SEED or {DEFAULT_SEED})")
    p.add_argument("--jobs", type=int, default=1, help="worker threads (results do not depend on it)")
    p.add_argument("--model-file", type=Path, help="evaluate: model to load (default OUT/model.json)")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


# ----------------------------------------------------------------- helpers

def _horizons(args, default_all: bool) -> list[TimeFrame]:
    if args.horizon:
        return [TimeFrame.parse(args.horizon)]
    return list(ALL_FRAMES) if default_all else [TimeFrame.ONE_HOUR]


def _load_frame(args, frame: TimeFrame):
    if args.pv or args.weather:
        if not (args.pv and args.weather):
            raise UsageError("--pv and --weather must be given together")
        pv, weather = _parse_inputs(args)
        return build_frame(pv.records, weather.records, frame)
    path = (args.data or args.out) / f"frame_{frame.value}.csv"
    if not path.exists():
        raise FileNotFoundError(f"frame file not found: {path} (run `solarcast ingest` first)")
    return read_frame_csv(path, frame)


_parsed_cache: dict = {}


def _parse_inputs(args):
    key = (str(args.pv), str(args.weather))
    if key not in _parsed_cache:
        for path in (args.pv, args.weather):
            if not Path(path).exists():
                raise FileNotFoundError(f"input file not found: {path}")
        _parsed_cache.clear()
        _parsed_cache[key] = (parse_pv(args.pv), parse_weather(args.weather))
    return _parsed_cache[key]


def _split_spec(args, seed) -> ev.SplitSpec:
    try:
        return ev.SplitSpec(args.test_fraction, args.split, seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _run_info(args, seed, frame, kind, preset, n_priors) -> dict:
    return {"model": kind, "horizon": frame.value, "features": preset, "n_priors": n_priors,
            "split": args.split, "test_fraction": args.test_fraction, "seed": seed}


def _write_holdout(out: Path, info: dict, res: ev.HoldoutResult) -> None:
    report = res.report.to_dict()
    ev.write_json(out / "metrics.json", {**info, "n_train": res.n_train,
                                         "columns": res.pipeline.columns, "metrics": report})
    row = {"model": info["model"], "horizon": info["horizon"], "n_priors": info["n_priors"],
           **report}
    ev.write_csv(out / "metrics_table.csv", ev.metrics_table([row]))
    ev.write_csv(out / "scatter.csv", res.scatter_frame())


class _RawPredictor:
    """Adapter so permutation importance can call a pipeline on a bare matrix."""

    def __init__(self, pipe):
        self.pipe = pipe
        self.columns = pipe.columns

    def predict(self, X):
        return self.pipe.predict_values(X)


# ---------------------------------------------------------------- commands

def cmd_ingest(args, seed) -> int:
    if not (args.pv and args.weather):
        raise UsageError("ingest needs --pv and --weather")
    pv, weather = _parse_inputs(args)
    log = {
        "pv": {"path": str(args.pv), "rows_read": len(pv), "rejects": len(pv.rejects),
               "out_of_range": len(pv.out_of_range), "order_violations": len(pv.order_violations),
               "reject_rows": [{"row": r.row, "reason": r.reason} for r in pv.rejects[:50]]},
        "weather": {"path": str(args.weather), "rows_read": len(weather),
                    "rejects": len(weather.rejects), "out_of_range": len(weather.out_of_range),
                    "order_violations": len(weather.order_violations),
                    "reject_rows": [{"row": r.row, "reason": r.reason}
                                    for r in weather.rejects[:50]]},
        "frames": {},
    }
    for frame in _horizons(args, default_all=True):
        series = cumulative_to_interval(pv.records, frame)
        af = interpolate_missing(align(weather.records, series, frame))
        af.to_csv(args.out / f"frame_{frame.value}.csv")
        log["frames"][frame.value] = {"rows": len(af), "filled": af.filled,
                                      "meter_resets": series.n_resets,
                                      "glitch_readings": series.n_glitch_readings}
        print(f"{frame.value}: {len(af)} rows -> frame_{frame.value}.csv")
    ev.write_json(args.out / "ingest_log.json", log)
    print(f"read {len(pv)} PV and {len(weather)} weather rows "
          f"({len(pv.rejects)} + {len(weather.rejects)} rejected)")
    return EXIT_OK


def cmd_analyze(args, seed) -> int:
    frame = _horizons(args, default_all=False)[0]
    af = _load_frame(args, frame)
    preset = args.features or "full"
    n_priors = 1 if args.n_priors is None else args.n_priors
    fm = build_features(af, n_priors=n_priors, preset=preset)

    corr = pearson(np.column_stack([fm.values, fm.target]), fm.columns + ["target_kwh"])
    ev.write_csv(args.out / "correlation.csv", corr.long_form())

    kind = args.model or "rf"
    spec = _split_spec(args, seed)
    res = ev.holdout(fm, models.default_config(kind, frame), spec, seed=seed, n_jobs=args.jobs,
                     horizon=frame.value, preset=preset)
    test = ev.split(fm, spec)[1]
    imp = permutation_importance(_RawPredictor(res.pipeline), test.values, test.target,
                                 seed=seed, n_jobs=args.jobs)
    ev.write_csv(args.out / "importance.csv", imp.to_frame())

    skew = skewness_report(af.target)
    ev.write_json(args.out / "skewness.json", skew)
    nz = af.target[af.target != 0]
    bounds = outlier_bounds(nz)
    ev.write_json(args.out / "outliers.json", {
        "lower": bounds.lower, "upper": bounds.upper,
        "n_flagged": int(detect_outliers(nz, bounds).sum()), "n_nonzero": int(len(nz))})
    print(f"skewness raw {skew['raw']:.3f}, zero-excluded {skew['zero_excluded']:.3f}, "
          f"transformed {skew['transformed']:.3f}")
    return EXIT_OK


def cmd_train(args, seed) -> int:
    frame = _horizons(args, default_all=False)[0]
    kind = args.model or "rf"
    preset = args.features or "full"
    n_priors = 1 if args.n_priors is None else args.n_priors
    fm = build_features(_load_frame(args, frame), n_priors=n_priors, preset=preset)
    res = ev.holdout(fm, models.default_config(kind, frame), _split_spec(args, seed), seed=seed,
                     n_jobs=args.jobs, horizon=frame.value, preset=preset)
    res.pipeline.save(args.out / "model.json")
    _write_holdout(args.out, _run_info(args, seed, frame, kind, preset, n_priors), res)
    r = res.report
    print(f"{kind} {frame.value}: R2 {_fmt(r.r2)}  MAE {r.mae:.4g}  RMSE {r.rmse:.4g}  "
          f"MAPE {_fmt(r.mape)}%")
    return EXIT_OK


def cmd_evaluate(args, seed) -> int:
    path = args.model_file or args.out / "model.json"
    if not path.exists():
        raise FileNotFoundError(f"model file not found: {path}")
    pipe = ev.Pipeline.load(path)
    frame = TimeFrame.parse(args.horizon or pipe.horizon)
    preset = args.features or pipe.preset
    n_priors = pipe.n_priors if args.n_priors is None else args.n_priors
    fm = build_features(_load_frame(args, frame), n_priors=n_priors, preset=preset)
    spec = pipe.split or _split_spec(args, seed)
    train, test = ev.split(fm, spec)
    pred = pipe.predict(test)
    res = ev.HoldoutResult(pipe, ev.metrics(test.target, pred), test.timestamps, test.target,
                           pred, len(train))
    info = {"model": pipe.model.kind, "horizon": frame.value, "features": preset,
            "n_priors": n_priors, "split": spec.mode, "test_fraction": spec.test_fraction,
            "seed": spec.seed}
    _write_holdout(args.out, info, res)
    print(f"{pipe.model.kind} {frame.value}: R2 {_fmt(res.report.r2)}  MAE {res.report.mae:.4g}")
    return EXIT_OK


def cmd_cv(args, seed) -> int:
    frame = _horizons(args, default_all=False)[0]
    kind = args.model or "rf"
    preset = args.features or "full"
    n_priors = 1 if args.n_priors is None else args.n_priors
    fm = build_features(_load_frame(args, frame), n_priors=n_priors, preset=preset)
    if args.folds < 2:
        raise UsageError("--folds must be >= 2")
    res = ev.kfold_cv(models.default_config(kind, frame), fm, k=args.folds, seed=seed,
                      n_jobs=args.jobs, model_seed=seed)
    ev.write_json(args.out / "cv.json", {"model": kind, "horizon": frame.value,
                                         "features": preset, "n_priors": n_priors, "seed": seed,
                                         **res.to_dict()})
    print(f"{kind} {frame.value}: {args.folds}-fold mean R2 {res.mean:.4f}")
    return EXIT_OK


def cmd_ablate(args, seed) -> int:
    frames = {f: _load_frame(args, f) for f in _horizons(args, default_all=True)}
    kinds = [args.model] if args.model else list(models.MODEL_KINDS)
    res = ev.ablate_priors(frames, kinds, max_priors=args.max_priors, seed=seed,
                           preset=args.features or "full", spec=_split_spec(args, seed),
                           n_jobs=args.jobs)
    ev.write_csv(args.out / "ablation.csv", res.to_frame())
    print(f"ablation: {len(res.cells)} cells -> ablation.csv")
    return EXIT_OK


HANDLERS = {"ingest": cmd_ingest, "analyze": cmd_analyze, "train": cmd_train,
            "evaluate": cmd_evaluate, "cv": cmd_cv, "ablate": cmd_ablate}


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.4g}"


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        seed = args.seed if args.seed is not None else default_seed()
        args.out.mkdir(parents=True, exist_ok=True)
        return HANDLERS[args.command](args, seed)
    except (UsageError, DataError, FileNotFoundError, ValueError) as exc:
        print(f"solarcast {args.command}: error: {_describe(exc)}", file=sys.stderr)
        return EXIT_DATA
    except ModelError as exc:
        print(f"solarcast {args.command}: model error: {_describe(exc)}", file=sys.stderr)
        return EXIT_MODEL
    except SolarcastError as exc:
        print(f"solarcast {args.command}: error: {_describe(exc)}", file=sys.stderr)
        return EXIT_DATA
    finally:
        _parsed_cache.clear()


def _describe(exc) -> str:
    return f"{type(exc).__name__}: {exc}"


if __name__ == "__main__":
    sys.exit(main())
