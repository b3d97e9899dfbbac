"""Shared builders for small, hand-checkable instances."""

import numpy as np
import pytest

from phesopt.model import (
    CaseConfig,
    PhesParams,
    PlannedSchedule,
    PriceSet,
    ProblemInstance,
    TimeGrid,
    WindScenarioSet,
)


def phes(T, **kw):
    base = dict(
        v_upper_init=50.0,
        v_upper_min=10.0,
        v_upper_max=100.0,
        v_lower_init=50.0,
        v_lower_min=10.0,
        v_lower_max=100.0,
        sigma_pump=1.2,
        sigma_release=0.8,
        q_max=20.0,
    )
    rain = kw.pop("rain", 0.0)
    evap = kw.pop("evap", 0.0)
    base.update(kw)
    return PhesParams(**base).with_weather(rain, evap, T)


def make_instance(
    wind,
    planned,
    sell,
    buy=None,
    dayahead=None,
    case_id=4,
    extended=False,
    steps_per_hour=1,
    wind_capacity=None,
    phes_kw=None,
    **case_kw,
):
    """Instance from per-step wind (S x T or T), hourly plan and per-step prices."""
    wind = np.atleast_2d(np.asarray(wind, dtype=float))
    S, T = wind.shape
    sell = np.broadcast_to(np.atleast_2d(np.asarray(sell, dtype=float)), (S, T)).copy()
    buy = sell.copy() if buy is None else np.broadcast_to(np.atleast_2d(np.asarray(buy, dtype=float)), (S, T)).copy()
    H = T // steps_per_hour
    planned = np.broadcast_to(np.asarray(planned, dtype=float), (H,)).copy()
    dayahead = np.full(H, 100.0) if dayahead is None else np.broadcast_to(np.asarray(dayahead, dtype=float), (H,))
    grid = TimeGrid.uniform(H, steps_per_hour)
    return ProblemInstance(
        grid=grid,
        phes=phes(T, **(phes_kw or {})),
        wind=WindScenarioSet(wind, wind[0]),
        prices=PriceSet(dayahead, sell, buy),
        schedule=PlannedSchedule(planned),
        config=CaseConfig.for_case(case_id, extended, **case_kw),
        wind_capacity=float(wind_capacity if wind_capacity is not None else max(3.0, wind.max())),
    )


@pytest.fixture
def arbitrage_instance():
    """Two hours, one step each: surplus of 1 MW, balancing price 10 then 200."""
    return make_instance(
        wind=[2.0, 2.0],
        planned=[1.0, 1.0],
        sell=[10.0, 200.0],
        dayahead=[100.0, 100.0],
        case_id=4,
        phes_kw=dict(v_upper_init=10.0, v_upper_min=10.0, v_lower_init=90.0),
    )
