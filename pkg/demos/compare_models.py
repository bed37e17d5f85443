"""Compare the five regressors through the library API.

Usage:
    python demos/compare_models.py

Builds hourly features from a generated dataset, fits each model with its
per-horizon defaults on the same shuffled split, and prints a metrics table
in both split modes. Chronological scores are usually lower because lagged
output features no longer see neighbouring test rows.
"""

import tempfile
import time

import pandas as pd

from solarcast import evaluate as ev
from solarcast import models
from solarcast.dataio import TimeFrame, build_frame, parse_pv, parse_weather
from solarcast.features import build_features
from solarcast.synthetic import write_dataset


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        pv, weather = write_dataset(tmp, days=180, seed=11)
        frame = build_frame(parse_pv(pv).records, parse_weather(weather).records,
                            TimeFrame.ONE_HOUR)
    fm = build_features(frame, n_priors=1, preset="reduced")
    print(f"{len(fm)} hourly rows, columns: {', '.join(fm.columns)}\n")

    rows = []
    for mode in ev.SPLIT_MODES:
        for kind in models.MODEL_KINDS:
            start = time.perf_counter()
            res = ev.holdout(fm, models.default_config(kind, TimeFrame.ONE_HOUR),
                             ev.SplitSpec(mode=mode), preset="reduced")
            r = res.report
            rows.append({"split": mode, "model": kind, "r2": r.r2, "mae": r.mae,
                         "rmse": r.rmse, "mape": r.mape,
                         "seconds": time.perf_counter() - start})
    table = pd.DataFrame(rows)
    with pd.option_context("display.float_format", "{:.4f}".format):
        print(table.to_string(index=False))


if __name__ == "__main__":
    main()
