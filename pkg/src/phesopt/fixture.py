"""Synthetic one-day data set bundled with the package.

The measured wind and market data of the original study are not public, so the
package ships stand-ins with the same schemas: 5-minute wind speeds with an
afternoon sea-breeze maximum, hourly day-ahead prices with a midday peak, and a
3 MW class turbine curve. :func:`write_fixture` regenerates the files exactly.
"""

from __future__ import annotations

from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .runner import render_config

__all__ = ["FIXTURE_FILES", "POWER_CURVE", "DAYAHEAD_PRICES", "wind_speed_samples", "fixture_texts", "write_fixture"]

FIXTURE_FILES = ("wind.csv", "dayahead_prices.csv", "power_curve.csv", "default_config.txt")

# single-turbine breakpoints, m/s -> MW; 25 m/s is cut-out
POWER_CURVE = (
    (4.0, 0.077),
    (5.0, 0.190),
    (6.0, 0.353),
    (7.0, 0.581),
    (8.0, 0.886),
    (9.0, 1.273),
    (10.0, 1.710),
    (11.0, 2.145),
    (12.0, 2.544),
    (13.0, 2.837),
    (14.0, 2.965),
    (15.0, 3.0),
    (25.0, 3.0),
)

# TL/MWh for clock hours 0..23
DAYAHEAD_PRICES = (
    118, 112, 108, 105, 104, 107, 115, 128, 150, 175, 195, 210,
    225, 245, 258, 262, 250, 228, 205, 198, 190, 172, 150, 132,
)  # fmt: skip

_START = datetime(2026, 1, 15)
_SAMPLES = 288
_GAP_INDEX = 101  # one blank sample exercises the forward fill
_NOISE_SEED = 20240115


def wind_speed_samples() -> np.ndarray:
    """5-minute speeds: 5 m/s base, an afternoon bump to 10 m/s, AR(1) turbulence."""
    hours = np.arange(_SAMPLES) / 12.0
    trend = 5.0 + 5.0 * np.exp(-(((hours - 15.0) / 3.5) ** 2))
    rng = np.random.default_rng(_NOISE_SEED)
    shocks = rng.normal(0.0, 0.35, _SAMPLES)
    noise = np.empty(_SAMPLES)
    level = 0.0
    for i, e in enumerate(shocks):
        level = 0.85 * level + e
        noise[i] = level
    return np.round(np.maximum(trend + noise, 0.0), 2)


def fixture_texts() -> dict[str, str]:
    speeds = wind_speed_samples()
    wind = ["timestamp,speed_mps"]
    for i, v in enumerate(speeds):
        stamp = (_START + timedelta(minutes=5 * i)).isoformat(timespec="minutes")
        wind.append(f"{stamp}," if i == _GAP_INDEX else f"{stamp},{v:.2f}")
    prices = ["hour,price_tl_per_mwh"] + [f"{h},{p:.2f}" for h, p in enumerate(DAYAHEAD_PRICES)]
    curve = ["speed_mps,power_mw"] + [f"{s:g},{p:.3f}" for s, p in POWER_CURVE]
    return {
        "wind.csv": "\n".join(wind) + "\n",
        "dayahead_prices.csv": "\n".join(prices) + "\n",
        "power_curve.csv": "\n".join(curve) + "\n",
        "default_config.txt": render_config(),
    }


def write_fixture(out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in fixture_texts().items():
        path = out / name
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written
