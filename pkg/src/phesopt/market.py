"""Per-scenario dispatch models for the wind farm + pumped-hydro plant.

Every scenario is an independent MILP: the balancing decisions of one wind /
price realization never interact with another, so the stochastic problem is
solved scenario by scenario and the results are stacked.

Variable naming follows the plant roles: ``p_sold``/``p_bought`` are
balancing-market exchanges, ``p_pump``/``p_release`` electrical powers of the
storage unit, ``q_*`` the matching water flows, ``v_*`` reservoir volumes,
``p_curtail`` discarded wind and ``u_*`` the exclusivity binaries.
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lp import EQ, LE, LpProblem, Row
from .milp import MilpProblem, MilpSolution, solve_milp
from .model import ProblemInstance, sell_cap_series

__all__ = [
    "STORAGE_VARS",
    "PLAIN_VARS",
    "BuildError",
    "InternalConsistencyError",
    "NoIncumbentError",
    "VarIndexMap",
    "ScenarioStats",
    "DispatchSolution",
    "ProfitBreakdown",
    "SolveOptions",
    "big_m_constants",
    "market_big_m",
    "objective_prices",
    "build_milp",
    "build_monolithic_milp",
    "extract_solution",
    "evaluate_profit",
    "greedy_dispatch",
    "solve_dispatch",
    "write_dispatch_csv",
]

STORAGE_VARS = (
    "p_sold",
    "p_bought",
    "p_pump",
    "p_release",
    "q_pump",
    "q_release",
    "v_upper",
    "v_lower",
    "p_curtail",
    "u_ps",
    "u_dp1",
    "u_dp2",
)
PLAIN_VARS = ("p_sold", "p_bought", "p_curtail", "u_dp1")
BINARY_NAMES = ("u_ps", "u_dp1", "u_dp2")
_SERIES = STORAGE_VARS

BALANCE_TOL = 1e-6
EXCLUSIVITY_TOL = 1e-6


class BuildError(ValueError):
    pass


class InternalConsistencyError(RuntimeError):
    """A solver result violates the model it was asked to solve."""


class NoIncumbentError(RuntimeError):
    """A scenario MILP hit its limits before any feasible dispatch was found."""


@dataclass(frozen=True)
class VarIndexMap:
    """Variable-major layout: ``index(name, t) = offset + k * T + t`` (t 0-based)."""

    names: tuple[str, ...]
    n_steps: int
    offset: int = 0

    def index(self, name: str, t: int) -> int:
        return self.offset + self.names.index(name) * self.n_steps + t

    def series(self, name: str) -> np.ndarray:
        start = self.offset + self.names.index(name) * self.n_steps
        return np.arange(start, start + self.n_steps)

    def __contains__(self, name: str) -> bool:
        return name in self.names

    @property
    def n_vars(self) -> int:
        return len(self.names) * self.n_steps

    def binaries(self) -> list[int]:
        return [int(j) for name in BINARY_NAMES if name in self.names for j in self.series(name)]


@dataclass(frozen=True)
class ScenarioStats:
    method: str  # "milp" or "greedy"
    status: str
    nodes: int = 0
    gap: float = 0.0
    wall_time: float = 0.0


@dataclass
class DispatchSolution:
    """Time series of every decision variable, shape ``S x T``."""

    p_sold: np.ndarray
    p_bought: np.ndarray
    p_pump: np.ndarray
    p_release: np.ndarray
    q_pump: np.ndarray
    q_release: np.ndarray
    v_upper: np.ndarray
    v_lower: np.ndarray
    p_curtail: np.ndarray
    u_ps: np.ndarray
    u_dp1: np.ndarray
    u_dp2: np.ndarray
    has_storage: bool
    objective_value: float = 0.0
    profit: np.ndarray = field(default_factory=lambda: np.zeros(0))
    stats: list[ScenarioStats] = field(default_factory=list)

    @property
    def n_scenarios(self) -> int:
        return self.p_sold.shape[0]

    @classmethod
    def stack(cls, parts: list["DispatchSolution"]) -> "DispatchSolution":
        if not parts:
            raise ValueError("nothing to stack")
        kwargs = {name: np.vstack([getattr(p, name) for p in parts]) for name in _SERIES}
        return cls(
            **kwargs,
            has_storage=parts[0].has_storage,
            objective_value=float(sum(p.objective_value for p in parts)),
            profit=np.concatenate([p.profit for p in parts]),
            stats=[s for p in parts for s in p.stats],
        )


@dataclass(frozen=True)
class ProfitBreakdown:
    total_profit: float  # mean over scenarios
    per_scenario: np.ndarray
    dayahead_revenue: float
    balancing_revenue: np.ndarray


@dataclass(frozen=True)
class SolveOptions:
    time_limit: float | None = 60.0
    node_limit: int = 200_000
    integrality_tol: float = 1e-6
    workers: int = 1


# ---------------------------------------------------------------------------
# model assembly
# ---------------------------------------------------------------------------


def big_m_constants(inst: ProblemInstance) -> dict[str, float]:
    """Per-constraint big-M values, as tight as the plant ratings allow."""
    ph = inst.phes
    return {
        "pump": ph.pump_power_max,
        "release": ph.release_power_max,
        "market": inst.wind_capacity + ph.release_power_max + float(np.max(inst.schedule.power, initial=0.0)),
    }


def market_big_m(inst: ProblemInstance, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-step big-Ms for selling and buying in scenario ``s``.

    Selling can never exceed the surplus plus full turbine output. Buying is kept
    at or below the deficit: with pumping from purchases ruled out, extra purchases
    could only be curtailed, which never pays at nonnegative prices.
    """
    gap = inst.wind.power[s] - inst.planned_per_step()
    release = inst.phes.release_power_max if inst.config.storage_enabled else 0.0
    m_sell = np.minimum(np.maximum(gap + release, 0.0), sell_cap_series(inst.config, inst.grid))
    m_buy = np.maximum(-gap, 0.0)
    return m_sell, m_buy


def objective_prices(inst: ProblemInstance, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Balancing prices the solver optimizes against for scenario ``s``.

    Price-blind cases see each series flattened to its time average; profit is
    still evaluated at the actual prices.
    """
    sell = np.asarray(inst.prices.balancing_sell[s], dtype=float)
    buy = np.asarray(inst.prices.balancing_buy[s], dtype=float)
    if inst.config.price_aware:
        return sell.copy(), buy.copy()
    return np.full_like(sell, sell.mean()), np.full_like(buy, buy.mean())


def _check_dims(inst: ProblemInstance, s: int) -> None:
    T, H = inst.grid.total_steps, inst.grid.horizon_hours
    S = inst.n_scenarios
    if not 0 <= s < S:
        raise BuildError(f"scenario {s} outside 0..{S - 1}")
    problems = []
    if inst.wind.power.shape != (S, T):
        problems.append(f"wind power shape {inst.wind.power.shape} != {(S, T)}")
    for name in ("balancing_sell", "balancing_buy"):
        if getattr(inst.prices, name).shape != (S, T):
            problems.append(f"{name} shape {getattr(inst.prices, name).shape} != {(S, T)}")
    if inst.schedule.power.shape != (H,):
        problems.append(f"schedule length {inst.schedule.power.shape} != ({H},)")
    if inst.config.storage_enabled:
        for name in ("rain", "evap"):
            if getattr(inst.phes, name).shape != (T,):
                problems.append(f"{name} length {getattr(inst.phes, name).shape} != ({T},)")
    if problems:
        raise BuildError("; ".join(problems))


def build_milp(inst: ProblemInstance, s: int) -> tuple[MilpProblem, VarIndexMap]:
    """Assemble the MILP of scenario ``s`` (0-based).

    The constant day-ahead revenue is left out of the objective; :func:`evaluate_profit`
    adds it back. Volume rows treat the initial volume as the state before step 1,
    so step-1 flows already move water.
    """
    _check_dims(inst, s)
    cfg = inst.config
    storage = cfg.storage_enabled
    T = inst.grid.total_steps
    dt = inst.grid.dt_balancing
    vm = VarIndexMap(STORAGE_VARS if storage else PLAIN_VARS, T)
    n = vm.n_vars
    obj = np.zeros(n)
    lower = np.zeros(n)
    upper = np.full(n, np.inf)
    M = big_m_constants(inst)

    sell_obj, buy_obj = objective_prices(inst, s)
    obj[vm.series("p_sold")] = sell_obj * dt
    obj[vm.series("p_bought")] = -buy_obj * dt

    wind = inst.wind.power[s]
    planned = inst.planned_per_step()
    m_sell, m_buy = market_big_m(inst, s)
    upper[vm.series("p_sold")] = m_sell
    upper[vm.series("p_bought")] = m_buy
    for name in ("u_dp1", "u_dp2", "u_ps"):
        if name in vm:
            upper[vm.series(name)] = 1.0

    rows: list[Row] = []
    idx = vm.index
    # power balance, curtailment absorbs what cannot be sold or stored
    for t in range(T):
        coeffs = {idx("p_bought", t): 1.0, idx("p_sold", t): -1.0, idx("p_curtail", t): -1.0}
        if storage:
            coeffs[idx("p_release", t)] = 1.0
            coeffs[idx("p_pump", t)] = -1.0
        rows.append(Row(coeffs, EQ, float(planned[t] - wind[t])))
    # buy/sell exclusivity
    for t in range(T):
        rows.append(Row({idx("p_sold", t): 1.0, idx("u_dp1", t): -m_sell[t]}, LE, 0.0))
        rows.append(Row({idx("p_bought", t): 1.0, idx("u_dp1", t): m_buy[t]}, LE, m_buy[t]))

    if storage:
        ph = inst.phes
        upper[vm.series("q_pump")] = ph.q_max
        upper[vm.series("q_release")] = ph.q_max
        upper[vm.series("p_pump")] = M["pump"]
        upper[vm.series("p_release")] = M["release"]
        lower[vm.series("v_upper")] = ph.v_upper_min
        upper[vm.series("v_upper")] = ph.v_upper_max
        lower[vm.series("v_lower")] = ph.v_lower_min
        upper[vm.series("v_lower")] = ph.v_lower_max
        weather = ph.rain - ph.evap
        for t in range(T):
            rows.append(Row({idx("p_release", t): 1.0, idx("q_release", t): -ph.sigma_release}, EQ, 0.0))
            rows.append(Row({idx("p_pump", t): 1.0, idx("q_pump", t): -ph.sigma_pump}, EQ, 0.0))
        for name, inflow, outflow, init in (
            ("v_upper", "q_pump", "q_release", ph.v_upper_init),
            ("v_lower", "q_release", "q_pump", ph.v_lower_init),
        ):
            for t in range(T):
                coeffs = {idx(name, t): 1.0, idx(inflow, t): -dt, idx(outflow, t): dt}
                rhs = float(weather[t])
                if t == 0:
                    rhs += init
                else:
                    coeffs[idx(name, t - 1)] = -1.0
                rows.append(Row(coeffs, EQ, rhs))
        for t in range(T):
            rows.append(Row({idx("p_pump", t): 1.0, idx("u_ps", t): M["pump"]}, LE, M["pump"]))
            rows.append(Row({idx("p_release", t): 1.0, idx("u_ps", t): -M["release"]}, LE, 0.0))
            rows.append(Row({idx("p_bought", t): 1.0, idx("u_dp2", t): -m_buy[t]}, LE, 0.0))
            rows.append(Row({idx("p_pump", t): 1.0, idx("u_dp2", t): M["pump"]}, LE, M["pump"]))
        if cfg.extended_constraints and cfg.restore_lower_reservoir:
            coeffs = {}
            for t in range(T):
                coeffs[idx("q_release", t)] = dt
                coeffs[idx("q_pump", t)] = -dt
            rows.append(Row(coeffs, EQ, 0.0))

    lp = LpProblem(n, obj, rows, lower, upper)
    return MilpProblem(lp, vm.binaries()), vm


def build_monolithic_milp(inst: ProblemInstance) -> tuple[MilpProblem, list[VarIndexMap]]:
    """All scenarios in one block-diagonal MILP (used to check the decomposition)."""
    blocks = [build_milp(inst, s) for s in range(inst.n_scenarios)]
    offset = 0
    rows: list[Row] = []
    objs, los, his, bins, maps = [], [], [], [], []
    for milp, vm in blocks:
        lp = milp.lp
        rows.extend(Row({j + offset: a for j, a in r.coeffs.items()}, r.sense, r.rhs) for r in lp.rows)
        objs.append(lp.objective)
        los.append(lp.lower)
        his.append(lp.upper)
        bins.extend(j + offset for j in milp.binary_vars)
        maps.append(VarIndexMap(vm.names, vm.n_steps, offset))
        offset += lp.n_vars
    lp = LpProblem(offset, np.concatenate(objs), rows, np.concatenate(los), np.concatenate(his))
    return MilpProblem(lp, bins), maps


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def evaluate_profit(d: DispatchSolution, inst: ProblemInstance) -> ProfitBreakdown:
    """Scenario profits at actual prices; the reported total is their mean."""
    grid = inst.grid
    dayahead = float(
        np.sum(inst.schedule.power * inst.config.load_scale * inst.prices.dayahead) * grid.dt_dayahead
    )
    S = d.n_scenarios
    sell = inst.prices.balancing_sell[:S]
    buy = inst.prices.balancing_buy[:S]
    balancing = np.sum(d.p_sold * sell - d.p_bought * buy, axis=1) * grid.dt_balancing
    per = dayahead + balancing
    return ProfitBreakdown(float(per.mean()), per, dayahead, balancing)


def balance_residual(d: DispatchSolution, inst: ProblemInstance, scenarios=None) -> np.ndarray:
    S = d.n_scenarios
    scenarios = range(S) if scenarios is None else scenarios
    wind = inst.wind.power[list(scenarios)]
    planned = inst.planned_per_step()
    return wind + d.p_bought + d.p_release - planned - d.p_sold - d.p_pump - d.p_curtail


def _check_consistency(d: DispatchSolution, inst: ProblemInstance, scenarios) -> None:
    resid = np.abs(balance_residual(d, inst, scenarios))
    if resid.size and resid.max() > BALANCE_TOL:
        s, t = np.unravel_index(int(np.argmax(resid)), resid.shape)
        raise InternalConsistencyError(
            f"power balance off by {resid[s, t]:.3g} MW at scenario {scenarios[s] + 1}, step {t + 1}"
        )
    for a, b, label in (
        (d.p_pump, d.p_release, "pump/release"),
        (d.p_sold, d.p_bought, "sell/buy"),
        (d.p_bought, d.p_pump, "buy/pump"),
    ):
        prod = a * b
        if prod.size and prod.max() > EXCLUSIVITY_TOL:
            s, t = np.unravel_index(int(np.argmax(prod)), prod.shape)
            raise InternalConsistencyError(
                f"{label} exclusivity broken ({prod[s, t]:.3g}) at scenario {scenarios[s] + 1}, step {t + 1}"
            )


def _attach_profit(d: DispatchSolution, inst: ProblemInstance, scenarios) -> DispatchSolution:
    grid = inst.grid
    dayahead = float(
        np.sum(inst.schedule.power * inst.config.load_scale * inst.prices.dayahead) * grid.dt_dayahead
    )
    sell = inst.prices.balancing_sell[list(scenarios)]
    buy = inst.prices.balancing_buy[list(scenarios)]
    d.profit = dayahead + np.sum(d.p_sold * sell - d.p_bought * buy, axis=1) * grid.dt_balancing
    return d


def _empty_storage(T: int) -> dict[str, np.ndarray]:
    z = np.zeros((1, T))
    return {name: z.copy() for name in _SERIES if name not in PLAIN_VARS}


def extract_solution(
    ms: MilpSolution, vm: VarIndexMap, inst: ProblemInstance, s: int, stats: ScenarioStats | None = None
) -> DispatchSolution:
    """Turn a scenario MILP solution into time series and check it.

    Values within 1e-9 below zero or 1e-12 above it are cleaned to zero and binaries are rounded;
    the power balance and exclusivity products are then verified.
    """
    if ms.x is None:
        raise InternalConsistencyError(f"scenario {s + 1}: solver returned no incumbent ({ms.status})")
    T = vm.n_steps
    x = np.where((ms.x > -1e-9) & (ms.x <= 1e-12), 0.0, ms.x)
    series = {}
    for name in vm.names:
        v = x[vm.series(name)].reshape(1, T)
        if name in BINARY_NAMES:
            if np.any(np.abs(v - np.round(v)) > 1e-6):
                raise InternalConsistencyError(f"scenario {s + 1}: {name} is not integral")
            v = np.round(v)
        series[name] = v
    storage = "p_pump" in vm
    if not storage:
        series.update(_empty_storage(T))
    d = DispatchSolution(
        **series,
        has_storage=storage,
        objective_value=float(ms.objective_value),
        stats=[stats] if stats else [],
    )
    _check_consistency(d, inst, [s])
    return _attach_profit(d, inst, [s])


# ---------------------------------------------------------------------------
# price-blind rule-based dispatch
# ---------------------------------------------------------------------------


def greedy_dispatch(inst: ProblemInstance, s: int) -> DispatchSolution:
    """Rule-based storage operation that ignores balancing prices.

    Deficits are covered from the upper reservoir first and bought otherwise.
    Surpluses are sold up to the step's sell cap, pumped up to the pump rating and
    the reservoir limits, and curtailed beyond that. Buying never feeds the pump.
    When the lower reservoir must be restored, only water pumped earlier in the
    horizon may be released, so the net exchange never turns positive.
    """
    if not inst.config.storage_enabled:
        raise ValueError("greedy dispatch needs the storage unit")
    _check_dims(inst, s)
    ph = inst.phes
    T = inst.grid.total_steps
    dt = inst.grid.dt_balancing
    wind = inst.wind.power[s]
    planned = inst.planned_per_step()
    cap = sell_cap_series(inst.config, inst.grid)
    out = {name: np.zeros(T) for name in _SERIES}
    vu, vl = ph.v_upper_init, ph.v_lower_init
    restore = inst.config.extended_constraints and inst.config.restore_lower_reservoir
    budget = 0.0  # pumped minus released water, Hm3
    for t in range(T):
        weather = ph.rain[t] - ph.evap[t]
        up_avail = vu + weather
        lo_avail = vl + weather
        gap = wind[t] - planned[t]
        qp = qr = 0.0
        if gap < 0:
            need = -gap
            q_room = min(ph.q_max, (up_avail - ph.v_upper_min) / dt, (ph.v_lower_max - lo_avail) / dt)
            if restore:
                q_room = min(q_room, budget / dt)
            qr = min(need / ph.sigma_release, max(q_room, 0.0))
            release = ph.sigma_release * qr
            out["p_release"][t] = release
            out["p_bought"][t] = max(need - release, 0.0)
        elif gap > 0:
            sold = min(gap, cap[t])
            rest = gap - sold
            q_room = min(ph.q_max, (ph.v_upper_max - up_avail) / dt, (lo_avail - ph.v_lower_min) / dt)
            qp = min(rest / ph.sigma_pump, max(q_room, 0.0))
            pump = ph.sigma_pump * qp
            out["p_sold"][t] = sold
            out["p_pump"][t] = pump
            out["p_curtail"][t] = max(rest - pump, 0.0)
        out["q_pump"][t] = qp
        out["q_release"][t] = qr
        budget += (qp - qr) * dt
        vu = up_avail + (qp - qr) * dt
        vl = lo_avail + (qr - qp) * dt
        out["v_upper"][t] = vu
        out["v_lower"][t] = vl
    out["u_ps"] = (out["p_release"] > 0).astype(float)
    out["u_dp1"] = (out["p_sold"] > 0).astype(float)
    out["u_dp2"] = (out["p_bought"] > 0).astype(float)
    dt_b = inst.grid.dt_balancing
    balancing = float(np.sum(out["p_sold"] * inst.prices.balancing_sell[s] - out["p_bought"] * inst.prices.balancing_buy[s]) * dt_b)
    d = DispatchSolution(
        **{k: v.reshape(1, T) for k, v in out.items()},
        has_storage=True,
        objective_value=balancing,
        stats=[ScenarioStats("greedy", "rule")],
    )
    _check_consistency(d, inst, [s])
    return _attach_profit(d, inst, [s])


# ---------------------------------------------------------------------------
# whole-case solve
# ---------------------------------------------------------------------------


def _solve_one(inst: ProblemInstance, s: int, opts: SolveOptions) -> DispatchSolution:
    start = time.monotonic()
    milp, vm = build_milp(inst, s)
    ms = solve_milp(milp, time_limit=opts.time_limit, node_limit=opts.node_limit, integrality_tol=opts.integrality_tol)
    stats = ScenarioStats("milp", ms.status, ms.nodes_explored, ms.gap, time.monotonic() - start)
    if ms.x is None:
        what = "is infeasible" if ms.status == "infeasible" else f"has no incumbent after {ms.nodes_explored} nodes"
        raise NoIncumbentError(f"case {inst.config.case_id}, scenario {s + 1}: MILP {what}")
    return extract_solution(ms, vm, inst, s, stats)


def uses_greedy(inst: ProblemInstance) -> bool:
    cfg = inst.config
    return cfg.storage_enabled and not cfg.price_aware and cfg.case3_mode == "greedy"


def solve_dispatch(inst: ProblemInstance, opts: SolveOptions | None = None) -> DispatchSolution:
    """Dispatch every scenario of ``inst`` and stack the results in scenario order."""
    opts = opts or SolveOptions()
    S = inst.n_scenarios
    if uses_greedy(inst):
        parts = [greedy_dispatch(inst, s) for s in range(S)]
    elif opts.workers > 1 and S > 1:
        with ProcessPoolExecutor(max_workers=min(opts.workers, S)) as pool:
            parts = list(pool.map(_solve_one, [inst] * S, range(S), [opts] * S))
    else:
        parts = [_solve_one(inst, s, opts) for s in range(S)]
    return DispatchSolution.stack(parts)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

DISPATCH_COLUMNS = (
    "scenario",
    "step",
    "wind_mw",
    "planned_mw",
    "sold_mw",
    "bought_mw",
    "pump_mw",
    "release_mw",
    "q_pump",
    "q_release",
    "v_upper",
    "v_lower",
    "curtail_mw",
)


def _num(v: float) -> str:
    return f"{v + 0.0:.6f}"


def dispatch_csv_text(d: DispatchSolution, inst: ProblemInstance) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DISPATCH_COLUMNS)
    planned = inst.planned_per_step()
    for s in range(d.n_scenarios):
        for t in range(d.p_sold.shape[1]):
            vols = (
                [_num(d.v_upper[s, t]), _num(d.v_lower[s, t])] if d.has_storage else ["", ""]
            )
            w.writerow(
                [
                    s + 1,
                    t + 1,
                    _num(inst.wind.power[s, t]),
                    _num(planned[t]),
                    _num(d.p_sold[s, t]),
                    _num(d.p_bought[s, t]),
                    _num(d.p_pump[s, t]),
                    _num(d.p_release[s, t]),
                    _num(d.q_pump[s, t]),
                    _num(d.q_release[s, t]),
                    *vols,
                    _num(d.p_curtail[s, t]),
                ]
            )
    return buf.getvalue()


def write_dispatch_csv(d: DispatchSolution, inst: ProblemInstance, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(dispatch_csv_text(d, inst), encoding="utf-8")
    return path
