"""Acceptance criteria, one test per criterion, each printing a single pass/fail line."""

import dataclasses
import time

import numpy as np
import pytest

from phesopt.cli import main
from phesopt.market import build_milp, solve_dispatch
from phesopt.milp import solve_milp, solve_milp_bruteforce
from phesopt.model import PriceSet, sell_cap_series
from phesopt.runner import build_instance, load_run_config, run_case, run_cases

from test_milp import random_milp


@pytest.fixture
def report(capsys):
    def emit(number: int, title: str, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}: {title} ({detail})")
        return ok

    return emit


@pytest.fixture(scope="module")
def cfg():
    return load_run_config()


@pytest.fixture(scope="module")
def base_run(cfg):
    start = time.monotonic()
    results = run_cases(cfg)
    return results, time.monotonic() - start


@pytest.fixture(scope="module")
def extended_run(cfg):
    return run_cases(cfg, extended=True)


def by_case(results):
    return {r.report.case_id: r for r in results}


def constraint_violations(res):
    """Worst violation of each checked constraint family for one case result."""
    d, inst = res.dispatch, res.instance
    ph = inst.phes
    wind = inst.wind.power
    planned = inst.planned_per_step()
    bal = wind + d.p_bought + d.p_release - planned - d.p_sold - d.p_pump - d.p_curtail
    out = {
        "balance": float(np.abs(bal).max()),
        "pump*release": float((d.p_pump * d.p_release).max()),
        "sell*buy": float((d.p_sold * d.p_bought).max()),
        "buy*pump": float((d.p_bought * d.p_pump).max()),
    }
    if d.has_storage:
        out["volume bounds"] = float(
            max(
                ph.v_upper_min - d.v_upper.min(),
                d.v_upper.max() - ph.v_upper_max,
                ph.v_lower_min - d.v_lower.min(),
                d.v_lower.max() - ph.v_lower_max,
                0.0,
            )
        )
        out["flow caps"] = float(
            max(d.q_pump.max() - ph.q_max, d.q_release.max() - ph.q_max, -d.q_pump.min(), -d.q_release.min(), 0.0)
        )
        total = d.v_upper + d.v_lower
        out["water total"] = float(np.abs(total - (ph.v_upper_init + ph.v_lower_init)).max())
    return out


def test_criterion_1_solver_oracle_equivalence(report):
    rng = np.random.default_rng(424242)
    start = time.monotonic()
    worst = 0.0
    for _ in range(50):
        p = random_milp(rng, max_bin=8, max_cont=12)
        ours, ref = solve_milp(p), solve_milp_bruteforce(p)
        if ours.status != ref.status:
            worst = np.inf
        elif ref.status == "optimal":
            worst = max(worst, abs(ours.objective_value - ref.objective_value))
    elapsed = time.monotonic() - start
    ok = worst <= 1e-6 and elapsed < 30.0
    assert report(1, "B&B matches brute force on 50 random MILPs", ok, f"max diff {worst:.2e}, {elapsed:.1f} s")


def test_criterion_2_arbitrage_fixture(report, arbitrage_instance, cfg):
    four = run_case(cfg, 4, instance=arbitrage_instance)
    one = run_case(cfg, 1, instance=arbitrage_instance)
    d = four.dispatch
    surplus = arbitrage_instance.wind.power[0, 0] - arbitrage_instance.planned_per_step()[0]
    pumped = abs(d.p_pump[0, 0] - surplus) <= 1e-9 and d.p_pump[0, 1] <= 1e-9
    released = abs(d.q_release[0, 1] - d.q_pump[0, 0]) <= 1e-9 and d.p_release[0, 0] <= 1e-9
    ok = abs(four.report.profit - 533.33) <= 0.01 and abs(one.report.profit - 410.0) <= 0.01 and pumped and released
    detail = f"case 4 {four.report.profit:.4f} TL, case 1 {one.report.profit:.4f} TL, pump {d.p_pump[0].round(6).tolist()}"
    assert report(2, "two-step arbitrage profits and dispatch", ok, detail)


def test_criterion_3_constraint_suite(report, base_run, extended_run):
    tol = {"balance": 1e-6, "pump*release": 1e-6, "sell*buy": 1e-6, "buy*pump": 1e-6}
    tol.update({"volume bounds": 1e-9, "flow caps": 1e-9, "water total": 1e-9})
    worst: dict[str, float] = {}
    for res in base_run[0] + extended_run:
        assert res.instance.n_scenarios == 10 and res.instance.grid.total_steps == 96
        assert not res.instance.phes.rain.any() and not res.instance.phes.evap.any()
        for key, v in constraint_violations(res).items():
            worst[key] = max(worst.get(key, 0.0), v)
    failing = [k for k, v in worst.items() if v > tol[k]]
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    assert report(3, "constraints hold on every bundled dispatch", not failing, detail)


def test_criterion_4_no_cycling(report, cfg):
    inst = build_instance(cfg, 4)
    flat = np.full_like(inst.prices.balancing_sell, float(inst.prices.balancing_sell.mean()))
    inst = dataclasses.replace(
        inst,
        prices=PriceSet(inst.prices.dayahead, flat, flat.copy()),
        phes=dataclasses.replace(inst.phes, v_upper_init=inst.phes.v_upper_min),
    )
    d = solve_dispatch(inst, cfg.solve_options())
    activity = float(np.abs(np.stack([d.p_pump, d.p_release, d.q_pump, d.q_release])).max())
    ok = activity == 0.0 and all(s.status == "optimal" for s in d.stats)
    assert report(4, "flat prices with an empty upper reservoir give no storage activity", ok, f"max activity {activity:.1e}")


def test_criterion_5_orderings(report, base_run):
    r = {c: res.report for c, res in by_case(base_run[0]).items()}
    checks = {
        "profit 1<=3<=4": r[1].profit <= r[3].profit <= r[4].profit,
        "sold 2>1": r[2].avg_sold_power > r[1].avg_sold_power,
        "bought 2<1": r[2].avg_bought_power < r[1].avg_bought_power,
        "peak 4>=3": r[4].peak_window_energy >= r[3].peak_window_energy,
    }
    detail = (
        f"profits {r[1].profit:.1f}/{r[3].profit:.1f}/{r[4].profit:.1f} TL, "
        f"sold {r[1].avg_sold_power:.1f}->{r[2].avg_sold_power:.1f}, "
        f"bought {r[1].avg_bought_power:.1f}->{r[2].avg_bought_power:.1f}, "
        f"peak {r[3].peak_window_energy:.2f}/{r[4].peak_window_energy:.2f} MWh"
    )
    failed = [k for k, v in checks.items() if not v]
    assert report(5, "orderings on the bundled instance", not failed, detail + ("; failed " + ", ".join(failed) if failed else ""))


def test_criterion_6_extended_constraints(report, extended_run):
    cases = by_case(extended_run)
    cap_excess = 0.0
    for res in extended_run:
        caps = sell_cap_series(res.instance.config, res.instance.grid)
        cap_excess = max(cap_excess, float((res.dispatch.p_sold - caps).max()))
    d4, inst4 = cases[4].dispatch, cases[4].instance
    net = float(np.abs(((d4.q_release - d4.q_pump) * inst4.grid.dt_balancing).sum(axis=1)).max())
    p3, p4 = cases[3].report.profit, cases[4].report.profit
    ok = cap_excess <= 1e-9 and net <= 1e-6 and p4 >= p3
    detail = f"cap excess {cap_excess:.1e} MW, net exchange {net:.1e} Hm3, profit 4 {p4:.1f} vs 3 {p3:.1f} TL"
    assert report(6, "extended run respects caps and restoration, case 4 >= case 3", ok, detail)


def test_criterion_7_performance(report, base_run):
    results, elapsed = base_run
    case4 = by_case(results)[4]
    n_binaries = len(build_milp(case4.instance, 0)[0].binary_vars)
    gaps = [s.gap for res in results for s in res.dispatch.stats]
    proven = all(s.status == "optimal" or s.gap <= 0.005 for res in results for s in res.dispatch.stats)
    ok = elapsed < 300.0 and proven and n_binaries == 288
    detail = f"{elapsed:.1f} s for 4 cases, {n_binaries} binaries per scenario, worst gap {max(gaps, default=0.0):.1e}"
    assert report(7, "full 4-case run time and optimality", ok, detail)


def test_criterion_8_determinism(report, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--out", str(a)]) == 0
    assert main(["run", "--out", str(b)]) == 0
    files_a = {p.relative_to(a): p.read_bytes() for p in a.rglob("*") if p.is_file()}
    files_b = {p.relative_to(b): p.read_bytes() for p in b.rglob("*") if p.is_file()}
    differing = sorted(str(k) for k in files_a.keys() | files_b.keys() if files_a.get(k) != files_b.get(k))
    ok = bool(files_a) and not differing
    assert report(8, "identical config and seed give byte-identical outputs", ok, f"{len(files_a)} files, {len(differing)} differ")
