"""Synthetic PV meter and weather exports for demos and tests.

The generator mimics a small rooftop array at a high northern latitude: a
clear-sky irradiance curve, persistent cloud cover that dims it, a temperature
penalty on panel efficiency, and a cumulative energy counter read every 20
minutes. Optional artefacts (a meter reset, a negative glitch reading and a
weather outage) exercise the cleaning paths.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

LATITUDE = 58.37
PV_FORMAT = "%m/%d/%Y %I:%M:%S %p"
WEATHER_HEADER = {
    "cloud_coverage": "Cloud coverage",
    "air_pressure": "Air pressure",
    "temperature": "Temperature",
    "relative_humidity": "Relative humidity",
    "wind_direction": "Wind direction",
    "wind_speed_max": "Wind speed max",
    "wind_speed_avg": "Wind speed average",
    "precipitation": "Precipitation",
    "ghi": "Global horizontal irradiance",
    "sunshine": "Sunshine",
}


def solar_elevation(stamps: pd.DatetimeIndex, latitude: float = LATITUDE) -> np.ndarray:
    """Approximate solar elevation (radians) at local solar time."""
    doy = stamps.dayofyear.to_numpy()
    hour = stamps.hour.to_numpy() + stamps.minute.to_numpy() / 60.0
    decl = np.radians(23.44) * np.sin(2 * np.pi * (284 + doy) / 365.0)
    ha = np.radians(15.0 * (hour - 12.0))
    lat = np.radians(latitude)
    return np.arcsin(np.sin(lat) * np.sin(decl) + np.cos(lat) * np.cos(decl) * np.cos(ha))


def weather_frame(start="2021-04-01", days: int = 60, seed: int = 0) -> pd.DataFrame:
    """Hourly weather with the ten exported variables."""
    rng = np.random.default_rng(seed)
    stamps = pd.date_range(start, periods=24 * days, freq="h")
    n = len(stamps)

    # cloud cover in oktas: a sticky random walk
    cloud = np.empty(n)
    c = 4.0
    for i in range(n):
        c = np.clip(c + rng.normal(0, 0.9), 0, 8)
        cloud[i] = c
    okta = np.round(cloud)

    elev = solar_elevation(stamps)
    clear = np.where(elev > 0, 880.0 * np.sin(np.clip(elev, 0, None)) ** 1.15, 0.0)
    ghi = clear * (1 - 0.72 * (okta / 8.0) ** 3.2) * rng.uniform(0.9, 1.05, n)
    ghi = np.where(elev > 0, ghi, rng.uniform(-1.0, 0.0, n))

    doy = stamps.dayofyear.to_numpy()
    hour = stamps.hour.to_numpy()
    seasonal = 6.0 - 14.0 * np.cos(2 * np.pi * (doy - 15) / 365.0)
    diurnal = 4.0 * np.sin(2 * np.pi * (hour - 9) / 24.0)
    temp = seasonal + diurnal + 0.004 * np.maximum(ghi, 0) + rng.normal(0, 1.0, n)
    humid = np.clip(88 - 2.2 * diurnal - 0.03 * np.maximum(ghi, 0) + 2.5 * okta
                    + rng.normal(0, 4, n), 17, 100)
    wind = np.clip(np.abs(rng.normal(3.0, 1.5, n)), 0.2, 8.6)
    rain = np.where((okta >= 7) & (rng.random(n) < 0.3), rng.exponential(0.8, n), 0.0)
    sunshine = np.clip(60 * (1 - okta / 8.0) * (elev > 0) + rng.normal(0, 3, n), 0, 60)
    sunshine = np.where(elev > 0, sunshine, 0.0)

    return pd.DataFrame({
        "timestamp": stamps,
        "cloud_coverage": okta,
        "air_pressure": np.clip(1012 + np.cumsum(rng.normal(0, 0.6, n)) * 0.3, 964, 1043),
        "temperature": np.clip(temp, -24.9, 32.5),
        "relative_humidity": humid,
        "wind_direction": rng.uniform(1, 360, n).round(),
        "wind_speed_max": np.clip(wind * rng.uniform(1.3, 2.2, n), 0.5, 19.3),
        "wind_speed_avg": wind,
        "precipitation": np.clip(rain, 0, 19.6),
        "ghi": np.clip(ghi, -1, 886),
        "sunshine": sunshine,
    })


def pv_readings(weather: pd.DataFrame, capacity_kw: float = 2.0, cadence_min: int = 20,
                seed: int = 0, reset: bool = True, glitch: bool = True,
                panel_id: str = "PV-1") -> pd.DataFrame:
    """Cumulative meter readings driven by the weather's irradiance and temperature."""
    rng = np.random.default_rng(seed + 1)
    hourly = weather.set_index("timestamp")
    start = hourly.index[0]
    end = hourly.index[-1] + pd.Timedelta(hours=1)
    stamps = pd.date_range(start, end, freq=f"{cadence_min}min")

    secs = hourly.index.asi8 / 1e9
    t = stamps.asi8 / 1e9
    ghi = np.interp(t, secs, np.maximum(hourly["ghi"].to_numpy(), 0))
    temp = np.interp(t, secs, hourly["temperature"].to_numpy())
    power = capacity_kw * ghi / 1000.0 * (1 - 0.004 * (temp - 25)) * rng.uniform(0.95, 1.05, len(t))
    energy = np.maximum(power, 0) * cadence_min / 60.0
    cumulative = 1200.0 + np.concatenate([[0.0], np.cumsum(energy[1:])])

    if reset:
        k = int(len(cumulative) * 0.6)
        cumulative[k:] -= cumulative[k] - 0.5
    values = cumulative.round(3).astype(object)
    if glitch:
        values[int(len(values) * 0.3)] = -3600.0
    return pd.DataFrame({
        "ID": panel_id,
        "DateTime": stamps.strftime(PV_FORMAT),
        "Value": values,
        "Unit": "kWh",
    })


def write_dataset(out_dir, start="2021-04-01", days: int = 60, seed: int = 0,
                  reset: bool = True, glitch: bool = True, weather_gap: int = 3):
    """Write ``pv.csv`` and ``weather.csv`` into ``out_dir``.

    ``weather_gap`` removes that many consecutive weather hours mid-way through,
    so ingestion has something to interpolate.

    Returns:
        (pv_path, weather_path)
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    weather = weather_frame(start, days, seed)
    pv = pv_readings(weather, seed=seed, reset=reset, glitch=glitch)

    exported = weather.copy()
    if weather_gap:
        mid = len(exported) // 2
        exported = exported.drop(exported.index[mid:mid + weather_gap])
    exported["timestamp"] = exported["timestamp"].dt.strftime(PV_FORMAT)
    exported = exported.rename(columns={"timestamp": "DateTime", **WEATHER_HEADER})

    pv_path, weather_path = out / "pv.csv", out / "weather.csv"
    pv.to_csv(pv_path, index=False, lineterminator="\n")
    exported.to_csv(weather_path, index=False, float_format="%.4g", lineterminator="\n")
    return pv_path, weather_path
