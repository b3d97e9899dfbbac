"""Case orchestration and reporting.

A run configuration names the input files and every model constant. The runner
builds one problem instance per seed, dispatches the requested cases against it
and writes summary tables, dispatch series and plot-data files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import platform
import time
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .market import DispatchSolution, SolveOptions, dispatch_csv_text, evaluate_profit, solve_dispatch, uses_greedy
from .model import (
    CaseConfig,
    PhesParams,
    PriceSet,
    ProblemInstance,
    TimeGrid,
    ensure_valid,
    read_key_values,
    window_mask,
)
from .scenarios import (
    GeneratorSpec,
    day_ahead_schedule,
    generate_balancing_prices,
    load_dayahead_prices,
    load_power_curve,
    load_wind_speeds,
    resample_to_balancing,
    wind_scenarios_from_speeds,
)

__all__ = [
    "ConfigError",
    "RunConfig",
    "CaseReport",
    "CaseResult",
    "DEFAULT_CONFIG",
    "TIME_LIMIT_ENV",
    "render_config",
    "load_run_config",
    "build_instance",
    "run_case",
    "run_cases",
    "compare_cases",
    "peak_window_energy",
    "emit_report",
]

TIME_LIMIT_ENV = "PHESOPT_TIME_LIMIT"


class ConfigError(ValueError):
    pass


# Every model constant as (key, default, comment). Rendered verbatim as the bundled config.
_SECTIONS: tuple[tuple[str, tuple[tuple[str, str, str], ...]], ...] = (
    (
        "input data, paths relative to this file; leave empty for the bundled copies",
        (
            ("wind_csv", "wind.csv", "timestamp,speed_mps"),
            ("dayahead_csv", "dayahead_prices.csv", "hour,price_tl_per_mwh"),
            ("power_curve_csv", "power_curve.csv", "speed_mps,power_mw of one turbine"),
            ("wind_step_minutes", "5", "spacing of the wind samples"),
            ("n_turbines", "10", "farm size; capacity = n_turbines x rated power"),
        ),
    ),
    (
        "time grid",
        (
            ("horizon_hours", "24", ""),
            ("steps_per_hour", "4", "balancing steps per day-ahead hour"),
        ),
    ),
    (
        "scenario generation",
        (
            ("n_scenarios", "10", "scenario 1 is the measured series"),
            ("seed", "2024", ""),
            ("deviation_bins", "21", "roulette-wheel histogram bins"),
            ("wind_deviation_bound", "0.2", "relative speed deviation range +/-"),
            ("price_deviation_bound", "0.2", "relative balancing price deviation range +/-"),
            ("price_spread", "0", "buy = sell x (1 + spread)"),
        ),
    ),
    (
        "storage unit (Hm3, Hm3/h, MW per Hm3/h)",
        (
            ("v_upper_init", "50", ""),
            ("v_upper_min", "10", ""),
            ("v_upper_max", "100", ""),
            ("v_lower_init", "50", ""),
            ("v_lower_min", "10", ""),
            ("v_lower_max", "100", ""),
            ("sigma_pump", "1.2", ""),
            ("sigma_release", "0.8", ""),
            ("q_max", "20", ""),
            ("rain", "0", "Hm3 added to each reservoir per step"),
            ("evap", "0", "Hm3 removed from each reservoir per step"),
        ),
    ),
    (
        "cases",
        (
            ("case2_load_scale", "0.8", "share of the planned schedule committed in Case 2"),
            ("sell_cap_peak_mw", "2", "extended runs: sell cap inside the cap window"),
            ("sell_cap_offpeak_mw", "0.5", "extended runs: sell cap outside it"),
            ("sell_cap_reference_mw", "3", "farm capacity the caps refer to; caps scale with capacity"),
            ("sell_cap_window_start", "9", "clock hour"),
            ("sell_cap_window_end", "21", "clock hour, exclusive"),
            ("peak_window_start", "13", "clock hour of the peak-support metric"),
            ("peak_window_end", "17", "clock hour, exclusive"),
            ("restore_lower_reservoir", "true", "extended runs: storage cases may not use water net"),
            ("case3_mode", "greedy", "greedy or flat_milp"),
        ),
    ),
    (
        "solver",
        (
            ("time_limit", "60", "seconds per scenario MILP; overridden by " + TIME_LIMIT_ENV),
            ("node_limit", "200000", ""),
            ("workers", "1", "processes for scenario solves"),
        ),
    ),
)

DEFAULT_CONFIG: dict[str, str] = {k: v for _, keys in _SECTIONS for k, v, _ in keys}
_EXECUTION_KEYS = frozenset({"workers"})


def render_config(values: dict[str, str] | None = None) -> str:
    """The documented key-value config file, with ``values`` replacing defaults."""
    values = {**DEFAULT_CONFIG, **(values or {})}
    lines = ["# phesopt run configuration"]
    for title, keys in _SECTIONS:
        lines += ["", f"# {title}"]
        for key, _, comment in keys:
            text = f"{key} = {values[key]}"
            lines.append(f"{text:<35} # {comment}" if comment else text)
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RunConfig:
    wind_csv: Path | None
    dayahead_csv: Path | None
    power_curve_csv: Path | None
    wind_step_minutes: float
    n_turbines: int
    grid: TimeGrid
    phes: PhesParams
    generator: GeneratorSpec
    case2_load_scale: float = 0.8
    sell_cap_peak_mw: float = 2.0
    sell_cap_offpeak_mw: float = 0.5
    sell_cap_reference_mw: float = 3.0
    sell_cap_window: tuple[float, float] = (9.0, 21.0)
    peak_window: tuple[float, float] = (13.0, 17.0)
    restore_lower_reservoir: bool = True
    case3_mode: str = "greedy"
    time_limit: float | None = 60.0
    node_limit: int = 200_000
    workers: int = 1
    values: dict[str, str] = field(default_factory=dict, compare=False)

    @property
    def seed(self) -> int:
        return self.generator.seed

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, generator=replace(self.generator, seed=seed), values={**self.values, "seed": str(seed)})

    def solve_options(self) -> SolveOptions:
        return SolveOptions(time_limit=self.time_limit, node_limit=self.node_limit, workers=self.workers)

    def model_values(self) -> dict[str, str]:
        """Config values that can change results (the worker count cannot)."""
        return {k: v for k, v in sorted(self.values.items()) if k not in _EXECUTION_KEYS}

    def config_hash(self) -> str:
        blob = json.dumps(self.model_values(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def case_config(self, case_id: int, extended: bool, wind_capacity: float) -> CaseConfig:
        ratio = wind_capacity / self.sell_cap_reference_mw
        return CaseConfig.for_case(
            case_id,
            extended,
            load_scale=self.case2_load_scale,
            sell_cap_peak=self.sell_cap_peak_mw * ratio,
            sell_cap_offpeak=self.sell_cap_offpeak_mw * ratio,
            peak_cap_window=self.sell_cap_window,
            restore_lower_reservoir=extended and self.restore_lower_reservoir and case_id in (3, 4),
            case3_mode=self.case3_mode,
        )


def _parse_bool(key: str, text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {text!r}")


def _config_from_values(values: dict[str, str], base_dir: Path | None) -> RunConfig:
    unknown = sorted(set(values) - set(DEFAULT_CONFIG))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    v = {**DEFAULT_CONFIG, **values}

    def num(key: str, kind=float):
        try:
            return kind(v[key])
        except ValueError:
            raise ConfigError(f"{key}: cannot read {v[key]!r} as {kind.__name__}") from None

    def path(key: str) -> Path | None:
        text = v[key].strip()
        if not text:
            return None
        p = Path(text)
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        if not p.is_file():
            raise ConfigError(f"{key}: file {p} does not exist")
        return p

    try:
        grid = TimeGrid.uniform(num("horizon_hours", int), num("steps_per_hour", int))
        phes = PhesParams(
            **{
                k: num(k)
                for k in (
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
            }
        ).with_weather(num("rain"), num("evap"), grid.total_steps)
        generator = GeneratorSpec(
            n_scenarios=num("n_scenarios", int),
            seed=num("seed", int),
            n_bins=num("deviation_bins", int),
            deviation_bound=num("wind_deviation_bound"),
            price_deviation_bound=num("price_deviation_bound"),
            price_spread=num("price_spread"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if v["case3_mode"] not in ("greedy", "flat_milp"):
        raise ConfigError(f"case3_mode: expected greedy or flat_milp, got {v['case3_mode']!r}")
    env_limit = os.environ.get(TIME_LIMIT_ENV)
    time_limit = num("time_limit")
    if env_limit:
        try:
            time_limit = float(env_limit)
        except ValueError:
            raise ConfigError(f"{TIME_LIMIT_ENV}: cannot read {env_limit!r} as seconds") from None
    cfg = RunConfig(
        wind_csv=path("wind_csv"),
        dayahead_csv=path("dayahead_csv"),
        power_curve_csv=path("power_curve_csv"),
        wind_step_minutes=num("wind_step_minutes"),
        n_turbines=num("n_turbines", int),
        grid=grid,
        phes=phes,
        generator=generator,
        case2_load_scale=num("case2_load_scale"),
        sell_cap_peak_mw=num("sell_cap_peak_mw"),
        sell_cap_offpeak_mw=num("sell_cap_offpeak_mw"),
        sell_cap_reference_mw=num("sell_cap_reference_mw"),
        sell_cap_window=(num("sell_cap_window_start"), num("sell_cap_window_end")),
        peak_window=(num("peak_window_start"), num("peak_window_end")),
        restore_lower_reservoir=_parse_bool("restore_lower_reservoir", v["restore_lower_reservoir"]),
        case3_mode=v["case3_mode"],
        time_limit=time_limit if time_limit > 0 else None,
        node_limit=num("node_limit", int),
        workers=max(1, num("workers", int)),
        values=v,
    )
    if cfg.n_turbines < 1:
        raise ConfigError("n_turbines must be >= 1")
    if cfg.sell_cap_reference_mw <= 0:
        raise ConfigError("sell_cap_reference_mw must be positive")
    return cfg


def load_run_config(path: str | Path | None = None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Read a config file; ``None`` loads the bundled default with the bundled data."""
    if path is None:
        root = resources.files("phesopt").joinpath("data")
        with resources.as_file(root) as real:
            return load_run_config(Path(real) / "default_config.txt", overrides)
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read config {path}: {exc.strerror}") from None
    try:
        values = read_key_values(text)
    except Exception as exc:  # configparser raises several unrelated types
        raise ConfigError(f"{path}: {exc}") from None
    values.update(overrides or {})
    return _config_from_values(values, path.parent)


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


def build_instance(cfg: RunConfig, case_id: int = 1, extended: bool = False) -> ProblemInstance:
    """Load the data files and generate scenarios; shared by every case of a run."""
    curve = load_power_curve(cfg.power_curve_csv)
    if cfg.wind_csv is None:
        ref = resources.files("phesopt").joinpath("data/wind.csv")
        with resources.as_file(ref) as real:
            raw = load_wind_speeds(real, cfg.wind_step_minutes)
    else:
        raw = load_wind_speeds(cfg.wind_csv, cfg.wind_step_minutes)
    if cfg.dayahead_csv is None:
        ref = resources.files("phesopt").joinpath("data/dayahead_prices.csv")
        with resources.as_file(ref) as real:
            dayahead = load_dayahead_prices(real, cfg.grid)
    else:
        dayahead = load_dayahead_prices(cfg.dayahead_csv, cfg.grid)
    speeds = resample_to_balancing(raw, cfg.grid)
    wind = wind_scenarios_from_speeds(speeds, curve, cfg.n_turbines, cfg.generator)
    sell, buy = generate_balancing_prices(dayahead, cfg.generator, cfg.grid)
    capacity = curve.rated_power * cfg.n_turbines
    inst = ProblemInstance(
        grid=cfg.grid,
        phes=cfg.phes,
        wind=wind,
        prices=PriceSet(dayahead, sell, buy),
        schedule=day_ahead_schedule(wind, cfg.grid),
        config=cfg.case_config(case_id, extended, capacity),
        wind_capacity=capacity,
    )
    return ensure_valid(inst)


@dataclass(frozen=True)
class CaseReport:
    case_id: int
    extended: bool
    avg_bought_power: float  # MW summed over steps, scenario mean
    avg_sold_power: float
    profit: float  # TL, scenario mean
    profit_increase_pct: float | None
    peak_window_energy: float  # MWh, scenario mean
    method: str
    status: str  # optimal, time_limit_best or rule
    max_gap: float
    nodes: int
    wall_time: float


@dataclass
class CaseResult:
    report: CaseReport
    dispatch: DispatchSolution
    instance: ProblemInstance


def peak_window_energy(d: DispatchSolution, grid: TimeGrid, window: tuple[float, float] = (13.0, 17.0)) -> float:
    """Turbine energy delivered inside ``window`` (clock hours), scenario mean, MWh."""
    if not d.has_storage:
        return 0.0
    mask = window_mask(grid, *window)
    return float(np.mean(d.p_release[:, mask].sum(axis=1)) * grid.dt_balancing)


def run_case(
    cfg: RunConfig,
    case_id: int,
    extended: bool = False,
    instance: ProblemInstance | None = None,
) -> CaseResult:
    """Dispatch one case; ``instance`` reuses data already built for another case."""
    base = instance if instance is not None else build_instance(cfg, case_id, extended)
    inst = ensure_valid(base.with_config(cfg.case_config(case_id, extended, base.wind_capacity)))
    start = time.monotonic()
    d = solve_dispatch(inst, cfg.solve_options())
    wall = time.monotonic() - start
    statuses = {s.status for s in d.stats}
    if uses_greedy(inst):
        status = "rule"
    elif statuses <= {"optimal"}:
        status = "optimal"
    else:
        status = "time_limit_best"
    profit = evaluate_profit(d, inst)
    report = CaseReport(
        case_id=case_id,
        extended=extended,
        avg_bought_power=float(d.p_bought.sum(axis=1).mean()),
        avg_sold_power=float(d.p_sold.sum(axis=1).mean()),
        profit=profit.total_profit,
        profit_increase_pct=None,
        peak_window_energy=peak_window_energy(d, inst.grid, cfg.peak_window),
        method=d.stats[0].method if d.stats else "milp",
        status=status,
        max_gap=float(max((s.gap for s in d.stats), default=0.0)),
        nodes=int(sum(s.nodes for s in d.stats)),
        wall_time=wall,
    )
    return CaseResult(report, d, inst)


def run_cases(cfg: RunConfig, case_ids=(1, 2, 3, 4), extended: bool = False) -> list[CaseResult]:
    """Run cases sequentially against one shared instance; adds profit increases when Case 1 ran."""
    ids = sorted(set(case_ids))
    if not ids:
        raise ValueError("no cases requested")
    base = build_instance(cfg, ids[0], extended)
    results = [run_case(cfg, c, extended, base) for c in ids]
    if 1 in ids:
        for res, rep in zip(results, compare_cases([r.report for r in results])):
            res.report = rep
    return results


def compare_cases(reports: list[CaseReport]) -> list[CaseReport]:
    """Reports in case order with the profit change relative to Case 1, in percent.

    The change is ``None`` for every case when Case 1's profit is zero.
    """
    by_case = {r.case_id: r for r in reports}
    if 1 not in by_case:
        raise ValueError("Case 1 is required as the comparison baseline")
    p1 = by_case[1].profit
    out = []
    for cid in sorted(by_case):
        r = by_case[cid]
        pct = None if p1 == 0 else 100.0 * (r.profit - p1) / p1
        out.append(replace(r, profit_increase_pct=pct))
    return out


# ---------------------------------------------------------------------------
# reporting
# ---------------------------------------------------------------------------

TABLE_COLUMNS = (
    "case",
    "avg_bought_power_mw",
    "avg_sold_power_mw",
    "profit_tl",
    "profit_increase_pct",
    "peak_window_energy_mwh",
)


def _r(v: float | None, digits: int = 6):
    return None if v is None else round(float(v) + 0.0, digits)


def _report_dict(r: CaseReport, timings: bool) -> dict:
    d = asdict(r)
    for key in ("avg_bought_power", "avg_sold_power", "profit", "profit_increase_pct", "peak_window_energy"):
        d[key] = _r(d[key])
    d["max_gap"] = _r(d["max_gap"], 9)
    if timings:
        d["wall_time"] = _r(d["wall_time"], 3)
    else:
        del d["wall_time"]
    return d


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _f(v: float) -> str:
    return f"{float(v) + 0.0:.6f}"


def _series_rows(d: DispatchSolution, *names):
    for s in range(d.n_scenarios):
        for t in range(d.p_sold.shape[1]):
            yield [s + 1, t + 1, *(_f(getattr(d, n)[s, t]) for n in names)]


def _plot_files(res: CaseResult, peak_window) -> dict[str, str]:
    d, grid = res.dispatch, res.instance.grid
    files = {"balancing.csv": _csv_text(("scenario", "step", "sold_mw", "bought_mw"), _series_rows(d, "p_sold", "p_bought"))}
    if d.has_storage:
        files["storage_power.csv"] = _csv_text(
            ("scenario", "step", "pump_mw", "release_mw"), _series_rows(d, "p_pump", "p_release")
        )
        files["volumes.csv"] = _csv_text(("scenario", "step", "v_upper", "v_lower"), _series_rows(d, "v_upper", "v_lower"))
    mask = window_mask(grid, *peak_window)
    clock = (grid.hours() - 1) * grid.dt_dayahead
    release = d.p_release.mean(axis=0)
    rows = [[t + 1, _f(clock[t]), _f(release[t]), _f(release[t] * grid.dt_balancing)] for t in np.flatnonzero(mask)]
    files["peak_supply.csv"] = _csv_text(("step", "clock_hour", "release_mw_mean", "energy_mwh_mean"), rows)
    return files


def emit_report(
    results: list[CaseResult],
    cfg: RunConfig,
    out_dir: str | Path,
    timings: bool = False,
) -> list[Path]:
    """Write summary, table, manifest and per-case files; returns the written paths.

    Wall times are left out unless ``timings`` is set, so reruns are byte-identical.
    """
    if not results:
        raise ValueError("no case results to report")
    out = Path(out_dir)
    files: dict[Path, str] = {}
    reports = [r.report for r in results]
    summary = {
        "seed": cfg.seed,
        "extended": reports[0].extended,
        "cases": [_report_dict(r, timings) for r in reports],
    }
    files[out / "summary.json"] = json.dumps(summary, indent=2) + "\n"
    files[out / "table3.csv"] = _csv_text(
        TABLE_COLUMNS,
        [
            [
                r.case_id,
                _f(r.avg_bought_power),
                _f(r.avg_sold_power),
                _f(r.profit),
                "" if r.profit_increase_pct is None else f"{r.profit_increase_pct + 0.0:.4f}",
                _f(r.peak_window_energy),
            ]
            for r in reports
        ],
    )
    manifest = {
        "seed": cfg.seed,
        "config_sha256": cfg.config_hash(),
        "config": cfg.model_values(),
        "cases": [r.case_id for r in reports],
        "versions": {
            "phesopt": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    files[out / "manifest.json"] = json.dumps(manifest, indent=2) + "\n"
    for res in results:
        case_dir = out / f"case_{res.report.case_id}"
        files[case_dir / "dispatch.csv"] = dispatch_csv_text(res.dispatch, res.instance)
        for name, text in _plot_files(res, cfg.peak_window).items():
            files[case_dir / name] = text
    written = []
    for path, text in files.items():
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from None
        written.append(path)
    return written
