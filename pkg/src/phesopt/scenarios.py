"""Wind and price scenario generation.

Measured wind speeds are cleaned, averaged to balancing resolution and pushed
through a turbine power curve. Extra scenarios come from roulette-wheel draws of
multiplicative deviations. Balancing prices are built the same way from the
hourly day-ahead prices.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timedelta
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from .model import PlannedSchedule, TimeGrid, WindScenarioSet

__all__ = [
    "ParseError",
    "DataQualityError",
    "SpeedSeries",
    "PowerCurve",
    "DeviationHistogram",
    "GeneratorSpec",
    "MAX_FILL",
    "WIND_STREAM",
    "PRICE_STREAM",
    "load_wind_speeds",
    "resample_to_balancing",
    "load_power_curve",
    "apply_power_curve",
    "scenario_rng",
    "generate_scenarios",
    "wind_scenarios_from_speeds",
    "day_ahead_schedule",
    "load_dayahead_prices",
    "generate_balancing_prices",
]

MAX_FILL = 3  # longest run of missing samples that is forward-filled
WIND_STREAM = 0
PRICE_STREAM = 1


class ParseError(ValueError):
    """Malformed input file; ``line`` is 1-based and counts the header."""

    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class DataQualityError(ValueError):
    pass


def _read_csv(path: str | Path, columns: tuple[str, ...]) -> list[tuple[int, list[str]]]:
    """Rows of a headed CSV as ``(line_number, fields)`` after checking the header."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(path, 1, "empty file") from None
        if tuple(header) != columns:
            raise ParseError(path, 1, f"expected header {','.join(columns)}, got {','.join(header)}")
        rows = []
        for fields in reader:
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) != len(columns):
                raise ParseError(path, reader.line_num, f"expected {len(columns)} fields, got {len(fields)}")
            rows.append((reader.line_num, [f.strip() for f in fields]))
    return rows


def _float(path, line: int, text: str, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(path, line, f"{what} {text!r} is not a number") from None
    if not np.isfinite(value):
        raise ParseError(path, line, f"{what} {text!r} is not finite")
    return value


# ---------------------------------------------------------------------------
# wind speeds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpeedSeries:
    start: datetime
    step_minutes: float
    speeds: np.ndarray  # m/s

    def __post_init__(self):
        arr = np.array(self.speeds, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "speeds", arr)

    def __len__(self) -> int:
        return self.speeds.size

    @property
    def timestamps(self) -> list[datetime]:
        step = timedelta(minutes=self.step_minutes)
        return [self.start + i * step for i in range(len(self))]


def load_wind_speeds(path: str | Path, expected_step: float = 5.0) -> SpeedSeries:
    """Read ``timestamp,speed_mps`` rows into a gap-filled uniform series.

    A blank speed, or a timestamp skipped in the sequence, counts as a missing
    sample. Runs of up to ``MAX_FILL`` missing samples take the previous value;
    longer runs, or a missing first sample, raise :class:`DataQualityError`.
    """
    rows = _read_csv(path, ("timestamp", "speed_mps"))
    if not rows:
        raise DataQualityError(f"{path}: no samples")
    step = timedelta(minutes=expected_step)
    stamps: list[datetime] = []
    values: list[float | None] = []
    for line, (stamp_text, speed_text) in rows:
        try:
            stamp = datetime.fromisoformat(stamp_text)
        except ValueError:
            raise ParseError(path, line, f"bad timestamp {stamp_text!r}") from None
        speed = None if speed_text == "" else _float(path, line, speed_text, "speed")
        if speed is not None and speed < 0:
            raise ParseError(path, line, f"negative speed {speed}")
        if stamps:
            delta = stamp - stamps[-1]
            n_steps = delta / step
            if delta <= timedelta(0):
                raise ParseError(path, line, f"timestamp {stamp_text} is not after the previous one")
            if abs(n_steps - round(n_steps)) > 1e-9:
                raise ParseError(path, line, f"timestamp {stamp_text} is off the {expected_step:g}-minute grid")
            for k in range(1, int(round(n_steps))):
                stamps.append(stamps[-1] + step)
                values.append(None)
        stamps.append(stamp)
        values.append(speed)

    filled = np.empty(len(values))
    run = 0
    for i, v in enumerate(values):
        if v is None:
            run += 1
            if i == run - 1:
                raise DataQualityError(f"{path}: first sample(s) missing, nothing to forward-fill from")
            if run > MAX_FILL:
                raise DataQualityError(
                    f"{path}: more than {MAX_FILL} consecutive missing samples ending at {stamps[i].isoformat()}"
                )
            filled[i] = filled[i - 1]
        else:
            run = 0
            filled[i] = v
    return SpeedSeries(stamps[0], expected_step, filled)


def resample_to_balancing(s: SpeedSeries, grid: TimeGrid) -> SpeedSeries:
    """Average consecutive samples into balancing steps (length ``total_steps``)."""
    target = 60.0 * grid.dt_dayahead / grid.steps_per_hour
    ratio = target / s.step_minutes
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-9:
        raise ValueError(f"sample spacing {s.step_minutes:g} min does not divide the {target:g}-minute step")
    need = grid.total_steps * k
    if len(s) != need:
        raise ValueError(f"{len(s)} samples at {s.step_minutes:g} min do not fill {grid.total_steps} steps (need {need})")
    return SpeedSeries(s.start, target, s.speeds.reshape(grid.total_steps, k).mean(axis=1))


# ---------------------------------------------------------------------------
# power curve
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerCurve:
    """Single-turbine curve. The first breakpoint is cut-in, the last is cut-out."""

    speeds: np.ndarray
    powers: np.ndarray

    def __post_init__(self):
        sp = np.array(self.speeds, dtype=float)
        pw = np.array(self.powers, dtype=float)
        if sp.ndim != 1 or sp.shape != pw.shape or sp.size < 2:
            raise ValueError("power curve needs matching 1-d speed and power arrays with >= 2 points")
        if np.any(np.diff(sp) <= 0):
            raise ValueError("power curve speeds must be strictly increasing")
        if np.any(pw < 0):
            raise ValueError("power curve powers must be >= 0")
        rated = pw.max()
        k = int(np.argmax(pw >= rated))
        if np.any(np.diff(pw[: k + 1]) < 0):
            raise ValueError("power must be non-decreasing up to rated speed")
        if np.any(pw[k:] != rated):
            raise ValueError("power must stay at rated power from rated speed to cut-out")
        sp.setflags(write=False)
        pw.setflags(write=False)
        object.__setattr__(self, "speeds", sp)
        object.__setattr__(self, "powers", pw)

    @property
    def cut_in(self) -> float:
        return float(self.speeds[0])

    @property
    def cut_out(self) -> float:
        return float(self.speeds[-1])

    @property
    def rated_power(self) -> float:
        return float(self.powers.max())

    @property
    def rated_speed(self) -> float:
        return float(self.speeds[int(np.argmax(self.powers >= self.rated_power))])

    def __call__(self, speed) -> np.ndarray:
        v = np.asarray(speed, dtype=float)
        inside = (v >= self.cut_in) & (v < self.cut_out)
        return np.where(inside, np.interp(v, self.speeds, self.powers), 0.0)


def load_power_curve(path: str | Path | None = None) -> PowerCurve:
    """Read ``speed_mps,power_mw`` breakpoints; defaults to the bundled curve."""
    if path is None:
        ref = resources.files("phesopt").joinpath("data/power_curve.csv")
        with resources.as_file(ref) as real:
            return load_power_curve(real)
    rows = _read_csv(path, ("speed_mps", "power_mw"))
    speeds = [_float(path, line, a, "speed") for line, (a, _) in rows]
    powers = [_float(path, line, b, "power") for line, (_, b) in rows]
    try:
        return PowerCurve(np.array(speeds), np.array(powers))
    except ValueError as exc:
        raise ParseError(path, 1, str(exc)) from None


def apply_power_curve(speeds, curve: PowerCurve, n_turbines: int) -> np.ndarray:
    """Farm output in MW: the single-turbine curve times ``n_turbines``."""
    values = speeds.speeds if isinstance(speeds, SpeedSeries) else speeds
    return curve(values) * n_turbines


# ---------------------------------------------------------------------------
# roulette wheel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeviationHistogram:
    """Symmetric triangular histogram of relative deviations on ``[-bound, bound]``.

    ``n_bins`` equal-width bins; a draw returns the centre of the selected bin.
    """

    bound: float = 0.2
    n_bins: int = 21

    def __post_init__(self):
        if not 0.0 <= self.bound <= 1.0:
            raise ValueError(f"deviation bound {self.bound} outside [0, 1]")
        if self.n_bins < 1:
            raise ValueError("n_bins must be >= 1")

    @property
    def centers(self) -> np.ndarray:
        width = 2.0 * self.bound / self.n_bins
        return -self.bound + width * (np.arange(self.n_bins) + 0.5)

    @property
    def weights(self) -> np.ndarray:
        if self.bound == 0.0:
            return np.full(self.n_bins, 1.0 / self.n_bins)
        w = 1.0 - np.abs(self.centers) / self.bound
        return w / w.sum()

    def mean_abs(self) -> float:
        return float(np.sum(self.weights * np.abs(self.centers)))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Roulette-wheel selection: spin ``u`` and take the first bin whose CDF exceeds it."""
        cdf = np.cumsum(self.weights)
        cdf[-1] = 1.0
        spins = rng.random(size)
        return self.centers[np.searchsorted(cdf, spins, side="right")]


@dataclass(frozen=True)
class GeneratorSpec:
    n_scenarios: int = 10
    seed: int = 0
    n_bins: int = 21
    deviation_bound: float = 0.2
    price_deviation_bound: float = 0.2
    price_spread: float = 0.0

    def __post_init__(self):
        if self.n_scenarios < 1:
            raise ValueError(f"n_scenarios must be >= 1, got {self.n_scenarios}")
        if self.price_spread < 0:
            raise ValueError("price_spread must be >= 0")
        DeviationHistogram(self.deviation_bound, self.n_bins)
        DeviationHistogram(self.price_deviation_bound, self.n_bins)

    @property
    def wind_histogram(self) -> DeviationHistogram:
        return DeviationHistogram(self.deviation_bound, self.n_bins)

    @property
    def price_histogram(self) -> DeviationHistogram:
        return DeviationHistogram(self.price_deviation_bound, self.n_bins)


def scenario_rng(seed: int, stream: int, s: int) -> np.random.Generator:
    """Independent generator for (stream, scenario), so any subset can be rebuilt alone."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, s)))


def generate_scenarios(
    base,
    spec: GeneratorSpec,
    wind_capacity: float,
    convert: Callable[[np.ndarray], np.ndarray] | None = None,
) -> WindScenarioSet:
    """Scenario 1 is ``base``; scenarios 2..S scale each step by a roulette-wheel deviation.

    With ``convert`` the deviations act on ``base`` before conversion (speeds pushed
    through a power curve); without it ``base`` is already power. Powers are clipped
    to ``[0, wind_capacity]``.
    """
    if spec.n_scenarios < 1:
        raise ValueError("need at least one scenario")
    base = np.asarray(base, dtype=float)
    to_power = convert or (lambda v: v)
    hist = spec.wind_histogram
    rows = [to_power(base)]
    for s in range(1, spec.n_scenarios):
        dev = hist.sample(scenario_rng(spec.seed, WIND_STREAM, s), base.size)
        rows.append(to_power(np.maximum(base * (1.0 + dev), 0.0)))
    power = np.clip(np.vstack(rows), 0.0, wind_capacity)
    return WindScenarioSet(power, power[0].copy())


def wind_scenarios_from_speeds(
    speeds: SpeedSeries, curve: PowerCurve, n_turbines: int, spec: GeneratorSpec
) -> WindScenarioSet:
    return generate_scenarios(
        speeds.speeds,
        spec,
        wind_capacity=curve.rated_power * n_turbines,
        convert=lambda v: apply_power_curve(v, curve, n_turbines),
    )


def day_ahead_schedule(ws: WindScenarioSet, grid: TimeGrid) -> PlannedSchedule:
    """Hourly plan: wind power averaged over scenarios and over the steps of each hour."""
    per_step = ws.power.mean(axis=0)
    return PlannedSchedule(per_step.reshape(grid.horizon_hours, grid.steps_per_hour).mean(axis=1))


# ---------------------------------------------------------------------------
# prices
# ---------------------------------------------------------------------------


def load_dayahead_prices(path: str | Path, grid: TimeGrid | None = None) -> np.ndarray:
    """Read ``hour,price_tl_per_mwh``; hours must be consecutive from 0 or 1."""
    rows = _read_csv(path, ("hour", "price_tl_per_mwh"))
    hours, prices = [], []
    for line, (h, p) in rows:
        try:
            hours.append(int(h))
        except ValueError:
            raise ParseError(path, line, f"hour {h!r} is not an integer") from None
        price = _float(path, line, p, "price")
        if price < 0:
            raise ParseError(path, line, f"negative price {price}")
        prices.append(price)
    if not hours or hours[0] not in (0, 1) or hours != list(range(hours[0], hours[0] + len(hours))):
        raise DataQualityError(f"{path}: hours must run consecutively from 0 or 1")
    if grid is not None and len(prices) != grid.horizon_hours:
        raise DataQualityError(f"{path}: {len(prices)} hourly prices, horizon is {grid.horizon_hours}")
    return np.array(prices)


def generate_balancing_prices(dayahead, spec: GeneratorSpec, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """Per-scenario sell/buy matrices (S x T) around the held day-ahead price."""
    dayahead = np.asarray(dayahead, dtype=float)
    if dayahead.shape != (grid.horizon_hours,):
        raise ValueError(f"day-ahead prices have shape {dayahead.shape}, expected ({grid.horizon_hours},)")
    held = np.repeat(dayahead, grid.steps_per_hour)
    hist = spec.price_histogram
    sell = np.vstack(
        [held * (1.0 + hist.sample(scenario_rng(spec.seed, PRICE_STREAM, s), held.size)) for s in range(spec.n_scenarios)]
    )
    sell = np.maximum(sell, 0.0)
    buy = sell * (1.0 + spec.price_spread)
    return sell, buy
