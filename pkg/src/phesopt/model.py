"""Domain types shared by the solver, market model, scenario engine and runner.

Units are fixed everywhere: MW, MWh, Hm3, Hm3/h, TL, TL/MWh and hours.
Series live at balancing resolution (``total_steps`` entries) except the
day-ahead price and the planned schedule, which are hourly.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "TimeGrid",
    "PhesParams",
    "WindScenarioSet",
    "PriceSet",
    "PlannedSchedule",
    "CaseConfig",
    "ProblemInstance",
    "Violation",
    "InstanceValidationError",
    "hour_of_step",
    "validate_instance",
    "ensure_valid",
    "load_phes_params",
    "sell_cap_series",
    "window_mask",
]


def _frozen_array(values, ndim: int | None = None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        if ndim == 2 and arr.ndim == 1:
            arr = arr.reshape(1, -1)
        else:
            raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Two-resolution time axis: hourly day-ahead, ``steps_per_hour`` balancing steps."""

    horizon_hours: int = 24
    steps_per_hour: int = 4
    dt_dayahead: float = 1.0
    dt_balancing: float = 0.25

    @property
    def total_steps(self) -> int:
        return self.horizon_hours * self.steps_per_hour

    @classmethod
    def uniform(cls, horizon_hours: int = 24, steps_per_hour: int = 4) -> "TimeGrid":
        return cls(horizon_hours, steps_per_hour, 1.0, 1.0 / steps_per_hour)

    def hours(self) -> np.ndarray:
        """1-based hour index of every balancing step (length ``total_steps``)."""
        return np.repeat(np.arange(1, self.horizon_hours + 1), self.steps_per_hour)


def hour_of_step(t: int, grid: TimeGrid) -> int:
    """Map a 1-based balancing step to its 1-based day-ahead hour."""
    if not 1 <= t <= grid.total_steps:
        raise IndexError(f"step {t} outside 1..{grid.total_steps}")
    return -(-t // grid.steps_per_hour)


def window_mask(grid: TimeGrid, start_hour: float, end_hour: float) -> np.ndarray:
    """Boolean mask over steps whose clock hour lies in ``[start_hour, end_hour)``.

    Step ``t`` belongs to clock hour ``hour_of_step(t) - 1`` (hour 1 is 00:00-01:00).
    """
    clock = (grid.hours() - 1) * grid.dt_dayahead
    return (clock >= start_hour) & (clock < end_hour)


@dataclass(frozen=True)
class PhesParams:
    """Pumped-hydro unit: two reservoirs, linear pump/turbine conversion."""

    v_upper_init: float
    v_upper_min: float
    v_upper_max: float
    v_lower_init: float
    v_lower_min: float
    v_lower_max: float
    sigma_pump: float
    sigma_release: float
    q_max: float
    rain: np.ndarray = field(default_factory=lambda: np.zeros(0))
    evap: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "rain", _frozen_array(self.rain))
        object.__setattr__(self, "evap", _frozen_array(self.evap))

    @property
    def pump_power_max(self) -> float:
        return self.sigma_pump * self.q_max

    @property
    def release_power_max(self) -> float:
        return self.sigma_release * self.q_max

    def with_weather(self, rain, evap, total_steps: int) -> "PhesParams":
        """Return a copy with rain/evaporation given as scalars (per step) or series."""
        return replace(
            self,
            rain=np.broadcast_to(np.asarray(rain, dtype=float), (total_steps,)).copy(),
            evap=np.broadcast_to(np.asarray(evap, dtype=float), (total_steps,)).copy(),
        )


@dataclass(frozen=True)
class WindScenarioSet:
    power: np.ndarray  # S x T, MW
    base_power: np.ndarray  # T, MW; the measured series (scenario 1)

    def __post_init__(self):
        object.__setattr__(self, "power", _frozen_array(self.power, ndim=2))
        object.__setattr__(self, "base_power", _frozen_array(self.base_power))

    @property
    def n_scenarios(self) -> int:
        return self.power.shape[0]


@dataclass(frozen=True)
class PriceSet:
    dayahead: np.ndarray  # H, TL/MWh
    balancing_sell: np.ndarray  # S x T
    balancing_buy: np.ndarray  # S x T

    def __post_init__(self):
        object.__setattr__(self, "dayahead", _frozen_array(self.dayahead))
        object.__setattr__(self, "balancing_sell", _frozen_array(self.balancing_sell, ndim=2))
        object.__setattr__(self, "balancing_buy", _frozen_array(self.balancing_buy, ndim=2))


@dataclass(frozen=True)
class PlannedSchedule:
    power: np.ndarray  # H, MW, held constant within each hour

    def __post_init__(self):
        object.__setattr__(self, "power", _frozen_array(self.power))


# comparison cases: (storage_enabled, price_aware, load_scale)
_CASE_TABLE = {
    1: (False, True, 1.0),
    2: (False, True, 0.8),
    3: (True, False, 1.0),
    4: (True, True, 1.0),
}


@dataclass(frozen=True)
class CaseConfig:
    case_id: int
    load_scale: float = 1.0
    storage_enabled: bool = False
    price_aware: bool = True
    extended_constraints: bool = False
    sell_cap_peak: float = 2.0
    sell_cap_offpeak: float = 0.5
    peak_cap_window: tuple[float, float] = (9.0, 21.0)
    restore_lower_reservoir: bool = False
    case3_mode: str = "greedy"  # "greedy" or "flat_milp"

    @classmethod
    def for_case(cls, case_id: int, extended: bool = False, **overrides) -> "CaseConfig":
        """Build the configuration of one comparison case.

        ``overrides`` may change any field except the case flags, which are
        derived from ``case_id``. ``load_scale`` may be overridden for Case 2.
        """
        if case_id not in _CASE_TABLE:
            raise ValueError(f"unknown case {case_id}; expected one of 1, 2, 3, 4")
        storage, aware, scale = _CASE_TABLE[case_id]
        if case_id == 2 and "load_scale" in overrides:
            scale = overrides.pop("load_scale")
        else:
            overrides.pop("load_scale", None)
        overrides.setdefault("restore_lower_reservoir", extended and storage)
        return cls(
            case_id=case_id,
            load_scale=scale,
            storage_enabled=storage,
            price_aware=aware,
            extended_constraints=extended,
            **overrides,
        )


def sell_cap_series(config: CaseConfig, grid: TimeGrid) -> np.ndarray:
    """Per-step cap on power sold to the balancing market (inf when not extended)."""
    if not config.extended_constraints:
        return np.full(grid.total_steps, np.inf)
    start, end = config.peak_cap_window
    return np.where(window_mask(grid, start, end), config.sell_cap_peak, config.sell_cap_offpeak)


@dataclass(frozen=True)
class ProblemInstance:
    grid: TimeGrid
    phes: PhesParams
    wind: WindScenarioSet
    prices: PriceSet
    schedule: PlannedSchedule
    config: CaseConfig
    wind_capacity: float

    @property
    def n_scenarios(self) -> int:
        return self.wind.n_scenarios

    def with_config(self, config: CaseConfig) -> "ProblemInstance":
        return replace(self, config=config)

    def planned_per_step(self) -> np.ndarray:
        """Planned power at balancing resolution, already multiplied by the load scale."""
        return np.repeat(self.schedule.power, self.grid.steps_per_hour) * self.config.load_scale


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    path: str
    value: object
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message} (value={self.value!r})"


class InstanceValidationError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


def _idx(flat_index: int, shape: tuple[int, ...]) -> str:
    return "(" + ",".join(str(i + 1) for i in np.unravel_index(flat_index, shape)) + ")"


def _check_grid(grid: TimeGrid, out: list[Violation]) -> None:
    for name in ("horizon_hours", "steps_per_hour"):
        value = getattr(grid, name)
        if not isinstance(value, (int, np.integer)) or value < 1:
            out.append(Violation(f"grid.{name}", value, "must be an integer >= 1"))
    for name in ("dt_dayahead", "dt_balancing"):
        value = getattr(grid, name)
        if not value > 0:
            out.append(Violation(f"grid.{name}", value, "must be positive"))
    if not math.isclose(grid.steps_per_hour * grid.dt_balancing, grid.dt_dayahead, rel_tol=1e-12):
        out.append(
            Violation(
                "grid.dt_balancing",
                grid.dt_balancing,
                "steps_per_hour x dt_balancing must equal dt_dayahead",
            )
        )


def _check_phes(p: PhesParams, T: int, out: list[Violation]) -> None:
    for res in ("upper", "lower"):
        lo, init, hi = (getattr(p, f"v_{res}_{k}") for k in ("min", "init", "max"))
        if not 0 <= lo <= init <= hi:
            out.append(
                Violation(f"phes.v_{res}", (lo, init, hi), "requires 0 <= v_min <= v_init <= v_max")
            )
    for name in ("sigma_pump", "sigma_release", "q_max"):
        if not getattr(p, name) > 0:
            out.append(Violation(f"phes.{name}", getattr(p, name), "must be positive"))
    for name in ("rain", "evap"):
        series = getattr(p, name)
        if series.shape != (T,):
            out.append(Violation(f"phes.{name}", series.shape, f"length must equal total_steps={T}"))
        elif np.any(series < 0) or not np.all(np.isfinite(series)):
            k = int(np.argmax(~(series >= 0)))
            out.append(Violation(f"phes.{name}[{k + 1}]", float(series[k]), "must be >= 0"))


def validate_instance(inst: ProblemInstance) -> list[Violation]:
    """Collect every invariant violation of ``inst`` (empty list when valid)."""
    out: list[Violation] = []
    grid = inst.grid
    _check_grid(grid, out)
    T = grid.total_steps if not out else None
    H = grid.horizon_hours
    if T is None:
        return out
    _check_phes(inst.phes, T, out)

    S = inst.wind.power.shape[0]
    if S < 1:
        out.append(Violation("wind.power", inst.wind.power.shape, "needs at least one scenario"))
    if inst.wind.power.shape[1:] != (T,):
        out.append(Violation("wind.power", inst.wind.power.shape, f"expected S x {T}"))
    if inst.wind.base_power.shape != (T,):
        out.append(Violation("wind.base_power", inst.wind.base_power.shape, f"length must be {T}"))
    if not inst.wind_capacity > 0:
        out.append(Violation("wind_capacity", inst.wind_capacity, "must be positive"))
    for name in ("power", "base_power"):
        arr = getattr(inst.wind, name)
        bad = np.flatnonzero(~((arr >= 0) & (arr <= inst.wind_capacity + 1e-9)))
        if bad.size:
            k = int(bad[0])
            out.append(
                Violation(
                    f"wind.{name}{_idx(k, arr.shape)}",
                    float(arr.flat[k]),
                    f"must lie in [0, wind_capacity={inst.wind_capacity}]",
                )
            )

    pr = inst.prices
    if pr.dayahead.shape != (H,):
        out.append(Violation("prices.dayahead", pr.dayahead.shape, f"length must be {H}"))
    for name in ("balancing_sell", "balancing_buy"):
        arr = getattr(pr, name)
        if arr.shape != (S, T):
            out.append(Violation(f"prices.{name}", arr.shape, f"expected {S} x {T}"))
    for name in ("dayahead", "balancing_sell", "balancing_buy"):
        arr = getattr(pr, name)
        bad = np.flatnonzero(~(arr >= 0))
        if bad.size:
            k = int(bad[0])
            out.append(Violation(f"prices.{name}{_idx(k, arr.shape)}", float(arr.flat[k]), "must be >= 0"))
    if pr.balancing_sell.shape == pr.balancing_buy.shape:
        bad = np.flatnonzero(pr.balancing_sell > pr.balancing_buy)
        for k in bad:
            pos = _idx(int(k), pr.balancing_sell.shape)
            out.append(
                Violation(
                    f"prices.balancing_sell{pos}",
                    float(pr.balancing_sell.flat[k]),
                    f"balancing_sell exceeds balancing_buy at {pos}",
                )
            )

    sched = inst.schedule.power
    if sched.shape != (H,):
        out.append(Violation("schedule.power", sched.shape, f"length must be {H}"))
    elif np.any(~(sched >= 0)):
        k = int(np.argmax(~(sched >= 0)))
        out.append(Violation(f"schedule.power[{k + 1}]", float(sched[k]), "must be >= 0"))

    cfg = inst.config
    if cfg.case_id in _CASE_TABLE:
        storage, aware, _ = _CASE_TABLE[cfg.case_id]
        if cfg.storage_enabled != storage or cfg.price_aware != aware:
            out.append(
                Violation(
                    "config",
                    (cfg.case_id, cfg.storage_enabled, cfg.price_aware),
                    "storage/price flags disagree with the case table",
                )
            )
    else:
        out.append(Violation("config.case_id", cfg.case_id, "must be 1, 2, 3 or 4"))
    if not cfg.load_scale > 0:
        out.append(Violation("config.load_scale", cfg.load_scale, "must be positive"))
    if cfg.extended_constraints and not (cfg.sell_cap_peak > 0 and cfg.sell_cap_offpeak > 0):
        out.append(
            Violation(
                "config.sell_cap",
                (cfg.sell_cap_peak, cfg.sell_cap_offpeak),
                "sell caps must be positive with extended constraints",
            )
        )
    if cfg.case3_mode not in ("greedy", "flat_milp"):
        out.append(Violation("config.case3_mode", cfg.case3_mode, "must be 'greedy' or 'flat_milp'"))
    return out


def ensure_valid(inst: ProblemInstance) -> ProblemInstance:
    """Return ``inst`` unchanged, or raise with the full list of violations."""
    violations = validate_instance(inst)
    if violations:
        raise InstanceValidationError(violations)
    return inst


# ---------------------------------------------------------------------------
# parameter file
# ---------------------------------------------------------------------------

_PHES_KEYS = (
    "v_upper_init",
    "v_upper_min",
    "v_upper_max",
    "v_lower_init",
    "v_lower_min",
    "v_lower_max",
    "sigma_pump",
    "sigma_release",
    "q_max",
)


def read_key_values(text: str) -> dict[str, str]:
    """Parse flat ``key = value`` text (``#`` comments) into a dict."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    parser.read_string("[main]\n" + text)
    return dict(parser["main"])


def load_phes_params(
    path: str | Path | None = None,
    total_steps: int = 96,
    rain: float | np.ndarray = 0.0,
    evap: float | np.ndarray = 0.0,
) -> PhesParams:
    """Load reservoir parameters; defaults to the bundled ``phes_table1.txt``."""
    if path is None:
        text = resources.files("phesopt").joinpath("data/phes_table1.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    values = read_key_values(text)
    missing = [k for k in _PHES_KEYS if k not in values]
    if missing:
        raise ValueError(f"parameter file lacks keys: {', '.join(missing)}")
    params = PhesParams(**{k: float(values[k]) for k in _PHES_KEYS})
    return params.with_weather(rain, evap, total_steps)
