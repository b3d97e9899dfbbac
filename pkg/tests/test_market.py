import dataclasses

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from phesopt.lp import EQ, LpProblem, solve_lp
from phesopt.market import (
    PLAIN_VARS,
    STORAGE_VARS,
    BuildError,
    InternalConsistencyError,
    build_milp,
    build_monolithic_milp,
    dispatch_csv_text,
    evaluate_profit,
    extract_solution,
    greedy_dispatch,
    objective_prices,
    solve_dispatch,
)
from phesopt.milp import MilpSolution, solve_milp, solve_milp_bruteforce
from phesopt.model import sell_cap_series

from conftest import make_instance


def solve_case(inst, s=0):
    milp, vm = build_milp(inst, s)
    ms = solve_milp(milp)
    return extract_solution(ms, vm, inst, s), ms


def assert_dispatch_invariants(d, inst, tol=1e-6):
    planned = inst.planned_per_step()
    wind = inst.wind.power[: d.n_scenarios]
    resid = wind + d.p_bought + d.p_release - planned - d.p_sold - d.p_pump - d.p_curtail
    assert np.abs(resid).max() <= tol
    for a, b in ((d.p_pump, d.p_release), (d.p_sold, d.p_bought), (d.p_bought, d.p_pump)):
        assert (a * b).max() <= tol
    for name in STORAGE_VARS:
        if name not in ("v_upper", "v_lower"):
            assert getattr(d, name).min() >= -1e-9, name
    if d.has_storage:
        ph = inst.phes
        assert d.v_upper.min() >= ph.v_upper_min - 1e-7 and d.v_upper.max() <= ph.v_upper_max + 1e-7
        assert d.v_lower.min() >= ph.v_lower_min - 1e-7 and d.v_lower.max() <= ph.v_lower_max + 1e-7
        assert d.q_pump.max() <= ph.q_max + 1e-7 and d.q_release.max() <= ph.q_max + 1e-7
        assert np.allclose(d.p_pump, ph.sigma_pump * d.q_pump, atol=1e-7)
        assert np.allclose(d.p_release, ph.sigma_release * d.q_release, atol=1e-7)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def test_storage_disabled_layout():
    inst = make_instance([[2.0, 0.5]], [1.0, 1.0], [50.0, 60.0], case_id=1)
    milp, vm = build_milp(inst, 0)
    assert vm.names == PLAIN_VARS
    assert milp.lp.n_vars == 8
    assert len(milp.lp.rows) == 2 + 2 * 2
    assert sum(r.sense == EQ for r in milp.lp.rows) == 2
    assert milp.binary_vars == tuple(vm.series("u_dp1"))


def test_index_map_is_bijection():
    inst = make_instance(np.ones((1, 5)), 1.0, 40.0)
    milp, vm = build_milp(inst, 0)
    idx = sorted(vm.index(name, t) for name in vm.names for t in range(5))
    assert idx == list(range(milp.lp.n_vars))
    assert vm.index("p_sold", 0) == 0 and vm.index("p_bought", 0) == 5


def test_release_conversion_row():
    inst = make_instance([[1.0, 1.0]], [1.0, 1.0], [50.0, 50.0])
    milp, vm = build_milp(inst, 0)
    lp = milp.lp
    lo, hi = lp.lower.copy(), lp.upper.copy()
    j = vm.index("q_release", 0)
    lo[j] = hi[j] = 20.0
    sol = solve_lp(LpProblem(lp.n_vars, lp.objective, lp.rows, lo, hi))
    assert sol.status == "optimal"
    assert sol.x[vm.index("p_release", 0)] == pytest.approx(16.0)


def test_first_volume_row_anchored_on_initial_volume():
    inst = make_instance([[1.0, 1.0, 1.0]], [1.0, 1.0, 1.0], 50.0, phes_kw=dict(rain=0.3, evap=0.1))
    milp, vm = build_milp(inst, 0)
    vu0 = vm.index("v_upper", 0)
    vu1 = vm.index("v_upper", 1)
    rows = [r for r in milp.lp.rows if vu0 in r.coeffs and vu1 not in r.coeffs and r.sense == EQ]
    assert len(rows) == 1
    row = rows[0]
    assert row.rhs == pytest.approx(50.0 + 0.3 - 0.1)
    assert set(row.coeffs) == {vu0, vm.index("q_pump", 0), vm.index("q_release", 0)}
    later = [r for r in milp.lp.rows if vm.index("v_upper", 1) in r.coeffs and vu0 in r.coeffs]
    assert len(later) == 1 and later[0].coeffs[vu0] == -1.0


def test_idle_plant_keeps_initial_volume():
    # no surplus and an empty upper reservoir: nothing can move
    inst = make_instance([[1.0, 1.0]], [1.0, 1.0], 50.0, phes_kw=dict(v_upper_init=10.0))
    d, _ = solve_case(inst)
    assert d.v_upper[0].tolist() == pytest.approx([10.0, 10.0])
    assert d.v_lower[0].tolist() == pytest.approx([50.0, 50.0])


def test_dimension_mismatch_is_build_error():
    inst = make_instance(np.ones((2, 4)), 1.0, 40.0)
    bad = dataclasses.replace(inst, phes=inst.phes.with_weather(0.0, 0.0, 3))
    with pytest.raises(BuildError, match="rain length"):
        build_milp(bad, 0)
    with pytest.raises(BuildError, match="scenario 2 outside"):
        build_milp(inst, 2)


def test_extended_rows():
    inst = make_instance(np.full((1, 4), 3.0), 1.0, 40.0, extended=True, wind_capacity=30.0)
    milp, vm = build_milp(inst, 0)
    caps = sell_cap_series(inst.config, inst.grid)
    assert np.all(milp.lp.upper[vm.series("p_sold")] <= caps)
    restore = [r for r in milp.lp.rows if len(r.coeffs) == 2 * 4]
    assert len(restore) == 1 and restore[0].rhs == 0.0


# ---------------------------------------------------------------------------
# objective prices
# ---------------------------------------------------------------------------


def test_objective_prices_identity_when_price_aware():
    inst = make_instance([[1.0] * 4], 1.0, [10.0, 20.0, 30.0, 40.0])
    sell, buy = objective_prices(inst, 0)
    assert sell.tolist() == [10.0, 20.0, 30.0, 40.0] and buy.tolist() == sell.tolist()


def test_objective_prices_flattened_when_price_blind():
    inst = make_instance([[1.0] * 4], 1.0, [10.0, 20.0, 30.0, 40.0], case_id=3)
    sell, buy = objective_prices(inst, 0)
    assert sell.tolist() == [25.0] * 4
    assert np.var(sell) == 0.0 and np.var(buy) == 0.0


# ---------------------------------------------------------------------------
# profit evaluation and the two-step arbitrage instance
# ---------------------------------------------------------------------------


def arbitrage_oracle(n=601):
    """Grid search over how much of the hour-1 surplus is pumped and how much water is released."""
    best = -np.inf
    for pumped in np.linspace(0.0, 1.0, n):
        water = pumped / 1.2  # Hm3 above the minimum after hour 1
        for frac in np.linspace(0.0, 1.0, 61):
            release = 0.8 * water * frac
            profit = 200.0 + 10.0 * (1.0 - pumped) + 200.0 * (1.0 + release)
            best = max(best, profit)
    return best


def test_arbitrage_oracle_extreme_point():
    assert arbitrage_oracle() == pytest.approx(200.0 + 200.0 * (1.0 + 0.8 / 1.2), abs=1e-9)


def test_arbitrage_instance_case4(arbitrage_instance):
    d, ms = solve_case(arbitrage_instance)
    assert ms.status == "optimal"
    assert d.p_pump[0].tolist() == pytest.approx([1.0, 0.0], abs=1e-9)
    assert d.p_release[0].tolist() == pytest.approx([0.0, 2.0 / 3.0], abs=1e-9)
    assert d.q_pump[0, 0] == pytest.approx(1.0 / 1.2)
    assert d.p_sold[0].tolist() == pytest.approx([0.0, 5.0 / 3.0], abs=1e-9)
    profit = evaluate_profit(d, arbitrage_instance).total_profit
    assert profit == pytest.approx(533.33, abs=0.01)
    assert profit == pytest.approx(arbitrage_oracle(), abs=1e-6)
    assert_dispatch_invariants(d, arbitrage_instance)


def test_arbitrage_instance_case1(arbitrage_instance):
    inst = arbitrage_instance.with_config(dataclasses.replace(arbitrage_instance.config, case_id=1, storage_enabled=False))
    d, _ = solve_case(inst)
    assert evaluate_profit(d, inst).total_profit == pytest.approx(410.0, abs=0.01)
    assert d.p_sold[0].tolist() == pytest.approx([1.0, 1.0])


def test_profit_one_hour_four_quarters():
    inst = make_instance([[2.0] * 4], [1.0], 80.0, dayahead=[100.0], case_id=1, steps_per_hour=4)
    d = solve_dispatch(inst)
    assert d.p_sold[0].tolist() == pytest.approx([1.0] * 4)
    pb = evaluate_profit(d, inst)
    assert pb.total_profit == pytest.approx(100.0 + 4 * (1.0 * 80.0 * 0.25))
    assert pb.dayahead_revenue == pytest.approx(100.0)


def test_profit_without_balancing_activity_is_dayahead_term():
    inst = make_instance(np.full((3, 4), 1.5), [1.5], 70.0, dayahead=[120.0], case_id=1, steps_per_hour=4)
    pb = evaluate_profit(solve_dispatch(inst), inst)
    assert pb.per_scenario.tolist() == pytest.approx([1.5 * 120.0] * 3)


def test_case2_scaling_hits_both_terms():
    inst = make_instance([[2.0, 2.0]], [1.0, 1.0], 50.0, dayahead=[100.0, 100.0], case_id=2)
    d = solve_dispatch(inst)
    assert d.p_sold[0].tolist() == pytest.approx([1.2, 1.2])
    assert evaluate_profit(d, inst).total_profit == pytest.approx(2 * 80.0 + 2 * 1.2 * 50.0)


# ---------------------------------------------------------------------------
# extraction guards
# ---------------------------------------------------------------------------


def test_balance_breach_is_reported(arbitrage_instance):
    milp, vm = build_milp(arbitrage_instance, 0)
    ms = solve_milp(milp)
    x = ms.x.copy()
    x[vm.index("p_sold", 1)] += 1e-3
    broken = MilpSolution("optimal", x, ms.objective_value, 1, 0.0)
    with pytest.raises(InternalConsistencyError, match="power balance off"):
        extract_solution(broken, vm, arbitrage_instance, 0)


def test_exclusivity_breach_is_reported(arbitrage_instance):
    milp, vm = build_milp(arbitrage_instance, 0)
    ms = solve_milp(milp)
    x = ms.x.copy()
    x[vm.index("p_sold", 1)] += 0.5
    x[vm.index("p_bought", 1)] += 0.5
    with pytest.raises(InternalConsistencyError, match="sell/buy"):
        extract_solution(MilpSolution("optimal", x, 0.0, 1, 0.0), vm, arbitrage_instance, 0)


def test_missing_incumbent_is_reported(arbitrage_instance):
    milp, vm = build_milp(arbitrage_instance, 0)
    empty = MilpSolution("time_limit_best", None, -np.inf, 3, np.inf)
    with pytest.raises(InternalConsistencyError, match="no incumbent"):
        extract_solution(empty, vm, arbitrage_instance, 0)


# ---------------------------------------------------------------------------
# greedy dispatcher
# ---------------------------------------------------------------------------


def test_greedy_deficit_released_from_upper_reservoir():
    inst = make_instance([[1.0]], [2.0], 50.0, case_id=3)
    d = greedy_dispatch(inst, 0)
    assert d.q_release[0, 0] == pytest.approx(1.25)
    assert d.p_release[0, 0] == pytest.approx(1.0)
    assert d.p_bought[0, 0] == pytest.approx(0.0)


def test_greedy_surplus_sold_when_uncapped():
    inst = make_instance([[2.0]], [1.0], 50.0, case_id=3)
    d = greedy_dispatch(inst, 0)
    assert d.p_sold[0, 0] == pytest.approx(1.0) and d.p_pump[0, 0] == 0.0


def test_greedy_surplus_above_cap_pumped():
    inst = make_instance([[2.0]], [1.0], 50.0, case_id=3, extended=True)
    assert sell_cap_series(inst.config, inst.grid)[0] == 0.5
    d = greedy_dispatch(inst, 0)
    assert d.p_sold[0, 0] == pytest.approx(0.5)
    assert d.p_pump[0, 0] == pytest.approx(0.5)
    assert d.q_pump[0, 0] == pytest.approx(0.4167, abs=1e-4)


def test_greedy_buys_when_reservoir_empty_and_curtails_when_full():
    down = make_instance([[1.0, 1.0]], [3.0, 3.0], 50.0, case_id=3, phes_kw=dict(v_upper_init=10.0))
    d = greedy_dispatch(down, 0)
    assert d.p_release[0].tolist() == [0.0, 0.0] and d.p_bought[0].tolist() == pytest.approx([2.0, 2.0])
    up = make_instance(
        [[30.0]], [1.0], 50.0, case_id=3, extended=True, wind_capacity=30.0, phes_kw=dict(v_upper_init=95.0)
    )
    d = greedy_dispatch(up, 0)
    cap = sell_cap_series(up.config, up.grid)[0]
    assert d.p_sold[0, 0] == pytest.approx(cap)
    assert d.q_pump[0, 0] == pytest.approx(5.0)
    assert d.p_curtail[0, 0] == pytest.approx(29.0 - cap - 6.0)


def test_greedy_restoration_budget():
    inst = make_instance([[3.0, 0.0, 0.0]], [1.0, 1.0, 1.0], 50.0, case_id=3, extended=True)
    d = greedy_dispatch(inst, 0)
    pumped = d.q_pump[0].sum()
    assert pumped > 0
    assert d.q_release[0].sum() == pytest.approx(pumped)
    assert d.p_bought[0, 2] > 0


def test_greedy_requires_storage():
    with pytest.raises(ValueError):
        greedy_dispatch(make_instance([[1.0]], [1.0], 50.0, case_id=1), 0)


# ---------------------------------------------------------------------------
# properties on small random instances
# ---------------------------------------------------------------------------


def random_instance(seed, S=1, T=6, case_id=4, extended=False, flat=False, **kw):
    rng = np.random.default_rng(seed)
    wind = rng.uniform(0.0, 30.0, (S, T))
    planned = rng.uniform(0.0, 25.0, T)
    sell = np.full((S, T), 150.0) if flat else rng.uniform(20.0, 300.0, (S, T))
    phes_kw = kw.pop("phes_kw", dict(v_upper_init=float(rng.uniform(10, 100)), v_lower_init=float(rng.uniform(10, 100))))
    return make_instance(wind, planned, sell, case_id=case_id, extended=extended, wind_capacity=30.0, phes_kw=phes_kw, **kw)


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10_000), st.booleans())
def test_solved_dispatch_invariants(seed, extended):
    inst = random_instance(seed, S=2, T=8, extended=extended)
    d = solve_dispatch(inst)
    assert_dispatch_invariants(d, inst)
    total = d.v_upper + d.v_lower
    assert np.abs(total - total[:, :1]).max() <= 1e-9 * 100
    if extended:
        assert np.all(d.p_sold <= sell_cap_series(inst.config, inst.grid) + 1e-9)
        net = ((d.q_release - d.q_pump) * inst.grid.dt_balancing).sum(axis=1)
        assert np.abs(net).max() <= 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.booleans())
def test_greedy_invariants_and_dominance(seed, extended):
    inst = random_instance(seed, S=1, T=8, case_id=3, extended=extended)
    g = greedy_dispatch(inst, 0)
    assert_dispatch_invariants(g, inst)
    assert np.all(g.p_sold <= sell_cap_series(inst.config, inst.grid) + 1e-9)
    net = ((g.q_release - g.q_pump) * inst.grid.dt_balancing).sum()
    if extended:
        assert net <= 1e-9
    case4 = inst.with_config(dataclasses.replace(inst.config, case_id=4, price_aware=True))
    # the greedy dispatch satisfies every row and bound of the Case-4 model
    milp, vm = build_milp(case4, 0)
    x = np.zeros(milp.lp.n_vars)
    for name in vm.names:
        x[vm.series(name)] = getattr(g, name)[0]
    lp = milp.lp
    assert np.all(x >= lp.lower - 1e-9) and np.all(x <= lp.upper + 1e-9)
    for r in lp.rows:
        if extended and len(r.coeffs) == 2 * inst.grid.total_steps:
            continue  # greedy may end with pumped water still upstairs
        lhs = sum(a * x[j] for j, a in r.coeffs.items())
        slack = {"<=": r.rhs - lhs, ">=": lhs - r.rhs, "=": -abs(lhs - r.rhs)}[r.sense]
        assert slack >= -1e-7
    if not extended:
        d = solve_dispatch(case4)
        assert evaluate_profit(d, case4).total_profit >= evaluate_profit(g, inst).total_profit - 1e-6


def test_no_cycling_under_flat_prices():
    for seed in range(8):
        inst = random_instance(seed, S=2, T=8, flat=True, phes_kw=dict(v_upper_init=10.0, v_lower_init=50.0))
        d = solve_dispatch(inst)
        for name in ("p_pump", "p_release", "q_pump", "q_release"):
            assert np.abs(getattr(d, name)).max() <= 1e-9, (seed, name)


def test_no_cycling_bounds_release_by_initial_storage():
    for seed in range(6):
        inst = random_instance(seed, S=1, T=8, flat=True, phes_kw=dict(v_upper_init=30.0, v_lower_init=50.0))
        d = solve_dispatch(inst)
        released = (d.q_release * inst.grid.dt_balancing).sum()
        assert released <= 30.0 - 10.0 + 1e-7
        assert (d.p_bought * d.p_pump).max() <= 1e-9


def test_scenario_decomposition_matches_monolith():
    inst = random_instance(3, S=2, T=3)
    per_scenario = 0.0
    for s in range(2):
        milp, _ = build_milp(inst, s)
        assert len(milp.binary_vars) == 9
        per_scenario += solve_milp_bruteforce(milp).objective_value
    mono, maps = build_monolithic_milp(inst)
    assert len(mono.binary_vars) == 18 and maps[1].offset == maps[0].n_vars
    sol = solve_milp(mono)
    assert sol.objective_value == pytest.approx(per_scenario, abs=1e-6)
    d = solve_dispatch(inst)
    assert d.objective_value == pytest.approx(per_scenario, abs=1e-6)


def test_stacking_is_in_scenario_order():
    inst = random_instance(5, S=3, T=4)
    d = solve_dispatch(inst)
    for s in range(3):
        one, _ = solve_case(inst, s)
        assert d.p_sold[s].tobytes() == one.p_sold[0].tobytes()
    assert d.profit.shape == (3,)


def test_parallel_matches_serial():
    from phesopt.market import SolveOptions

    inst = random_instance(9, S=3, T=6)
    a = solve_dispatch(inst)
    b = solve_dispatch(inst, SolveOptions(workers=2))
    assert dispatch_csv_text(a, inst) == dispatch_csv_text(b, inst)


def test_dispatch_csv_layout():
    inst = make_instance(np.ones((2, 2)), [1.0, 1.0], 40.0, case_id=1)
    text = dispatch_csv_text(solve_dispatch(inst), inst).splitlines()
    assert text[0] == "scenario,step,wind_mw,planned_mw,sold_mw,bought_mw,pump_mw,release_mw,q_pump,q_release,v_upper,v_lower,curtail_mw"
    assert len(text) == 1 + 4
    assert text[1].startswith("1,1,") and text[-1].startswith("2,2,")
    assert text[1].split(",")[10:12] == ["", ""]


# ---------------------------------------------------------------------------
# independent formulation solved with HiGHS
# ---------------------------------------------------------------------------


def literal_model_optimum(inst, s, big_n=1e4):
    """The model written out with one generic big constant, solved by scipy's MILP."""
    opt = pytest.importorskip("scipy.optimize")
    T = inst.grid.total_steps
    dt = inst.grid.dt_balancing
    ph = inst.phes
    names = ["sold", "bought", "pump", "release", "qp", "qr", "vu", "vl", "curt", "ups", "u1", "u2"]
    col = {(nm, t): k * T + t for k, nm in enumerate(names) for t in range(T)}
    n = len(names) * T
    c = np.zeros(n)
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    sell, buy = inst.prices.balancing_sell[s], inst.prices.balancing_buy[s]
    caps = sell_cap_series(inst.config, inst.grid)
    planned = inst.planned_per_step()
    A, bl, bu = [], [], []

    def row(entries, low, up):
        a = np.zeros(n)
        for key, v in entries:
            a[col[key]] += v
        A.append(a)
        bl.append(low)
        bu.append(up)

    for t in range(T):
        c[col["sold", t]] = -sell[t] * dt
        c[col["bought", t]] = buy[t] * dt
        hi[col["qp", t]] = hi[col["qr", t]] = ph.q_max
        lo[col["vu", t]], hi[col["vu", t]] = ph.v_upper_min, ph.v_upper_max
        lo[col["vl", t]], hi[col["vl", t]] = ph.v_lower_min, ph.v_lower_max
        hi[col["sold", t]] = caps[t]
        for u in ("ups", "u1", "u2"):
            hi[col[u, t]] = 1.0
        rhs = planned[t] - inst.wind.power[s, t]
        row([(("bought", t), 1), (("release", t), 1), (("sold", t), -1), (("pump", t), -1), (("curt", t), -1)], rhs, rhs)
        row([(("pump", t), 1), (("qp", t), -ph.sigma_pump)], 0, 0)
        row([(("release", t), 1), (("qr", t), -ph.sigma_release)], 0, 0)
        w = ph.rain[t] - ph.evap[t]
        for v, qin, qout, init in (("vu", "qp", "qr", ph.v_upper_init), ("vl", "qr", "qp", ph.v_lower_init)):
            entries = [((v, t), 1), ((qin, t), -dt), ((qout, t), dt)]
            if t:
                entries.append(((v, t - 1), -1))
            r = w + (init if t == 0 else 0.0)
            row(entries, r, r)
        row([(("pump", t), 1), (("ups", t), big_n)], -np.inf, big_n)
        row([(("release", t), 1), (("ups", t), -big_n)], -np.inf, 0)
        row([(("sold", t), 1), (("u1", t), -big_n)], -np.inf, 0)
        row([(("bought", t), 1), (("u1", t), big_n)], -np.inf, big_n)
        row([(("bought", t), 1), (("u2", t), -big_n)], -np.inf, 0)
        row([(("pump", t), 1), (("u2", t), big_n)], -np.inf, big_n)
    if inst.config.extended_constraints and inst.config.restore_lower_reservoir:
        row([((q, t), dt if q == "qr" else -dt) for t in range(T) for q in ("qr", "qp")], 0, 0)
    integrality = np.array([1 if nm in ("ups", "u1", "u2") else 0 for nm in names for _ in range(T)])
    res = opt.milp(
        c,
        constraints=opt.LinearConstraint(np.array(A), bl, bu),
        integrality=integrality,
        bounds=opt.Bounds(lo, hi),
        options={"mip_rel_gap": 1e-9},
    )
    assert res.success, res.message
    return -res.fun


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("extended", [False, True])
def test_matches_literal_formulation(seed, extended):
    inst = random_instance(seed, S=1, T=8, extended=extended)
    _, ms = solve_case(inst)
    assert ms.status == "optimal"
    assert ms.objective_value == pytest.approx(literal_model_optimum(inst, 0), rel=1e-7, abs=1e-6)
