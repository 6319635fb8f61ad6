import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import divider, parallel_ohms
from pilotsim import netlist
from pilotsim.circuit import (
    DEFAULT_SOURCE,
    OPEN,
    DiodeModel,
    PilotSource,
    combine_parallel,
    solve_baseline,
    solve_parallel,
    solve_serial,
)

ohms = st.floats(min_value=1.0, max_value=1e6, allow_nan=False)


def test_baseline_state_b_and_c():
    assert solve_baseline(DEFAULT_SOURCE, 2740).v_evse == pytest.approx(divider(12, 1000, 2740), abs=1e-12)
    assert solve_baseline(DEFAULT_SOURCE, 2740).v_evse == pytest.approx(8.791, abs=5e-4)
    assert solve_baseline(DEFAULT_SOURCE, 882).v_evse == pytest.approx(5.624, abs=5e-4)


def test_open_load_is_source_level():
    sol = solve_baseline(DEFAULT_SOURCE, OPEN)
    assert sol.v_evse == sol.v_ev == 12.0


def test_serial_zero_matches_baseline():
    sol = solve_serial(DEFAULT_SOURCE, 0.0, 882)
    assert sol.v_diff == 0.0
    assert sol.v_evse == solve_baseline(DEFAULT_SOURCE, 882).v_evse


def test_serial_split():
    sol = solve_serial(DEFAULT_SOURCE, 1138.26, 2740)
    i = 12 / (1000 + 1138.26 + 2740)
    assert sol.v_evse == pytest.approx(12 - 1000 * i)
    assert sol.v_ev == pytest.approx(12 - 2138.26 * i)
    assert sol.v_diff == pytest.approx(2.8, abs=1e-5)


def test_serial_open_attack_breaks_the_line():
    sol = solve_serial(DEFAULT_SOURCE, OPEN, 2740)
    assert (sol.v_evse, sol.v_ev) == (12.0, 0.0)


def test_parallel_open_attack_is_baseline():
    assert solve_parallel(DEFAULT_SOURCE, OPEN, 2740) == solve_baseline(DEFAULT_SOURCE, 2740)


def test_parallel_example_3300():
    # 3.3 kOhm against the 2740 Ohm B load lands inside state C
    sol = solve_parallel(DEFAULT_SOURCE, 3300, 2740)
    assert sol.v_evse == pytest.approx(divider(12, 1000, parallel_ohms(3300, 2740)), abs=1e-12)
    assert 4.4 < sol.v_evse < 7.8


def test_combine_parallel():
    assert combine_parallel(OPEN, OPEN) == OPEN
    assert combine_parallel(OPEN, 5.0) == 5.0
    assert combine_parallel(0.0, 10.0) == 0.0
    assert combine_parallel(100.0, 100.0) == 50.0


def test_negative_resistance_rejected():
    with pytest.raises(ValueError):
        solve_serial(DEFAULT_SOURCE, -1.0, 882)
    with pytest.raises(ValueError):
        solve_parallel(DEFAULT_SOURCE, 100.0, -5.0)


def test_diode_drop_validation():
    with pytest.raises(ValueError):
        DiodeModel(forward_drop=1.2)
    with pytest.raises(ValueError):
        DiodeModel(forward_drop=-0.1)


def test_diode_drop_lowers_current():
    ideal = solve_baseline(DEFAULT_SOURCE, 882)
    real = solve_baseline(DEFAULT_SOURCE, 882, DiodeModel(0.7))
    assert real.v_evse > ideal.v_evse


@given(r_v=ohms, r_a=ohms, r_b=ohms)
def test_serial_monotone_in_r_att(r_v, r_a, r_b):
    lo, hi = sorted((r_a, r_b))
    a, b = solve_serial(DEFAULT_SOURCE, lo, r_v), solve_serial(DEFAULT_SOURCE, hi, r_v)
    assert b.v_evse >= a.v_evse - 1e-12
    assert b.v_ev <= a.v_ev + 1e-12
    assert b.v_diff >= a.v_diff - 1e-12


@given(r_v=ohms, r_a=ohms, r_b=ohms)
def test_parallel_monotone_in_r_att(r_v, r_a, r_b):
    lo, hi = sorted((r_a, r_b))
    assert solve_parallel(DEFAULT_SOURCE, hi, r_v).v_evse >= solve_parallel(DEFAULT_SOURCE, lo, r_v).v_evse - 1e-12


@given(r_v=ohms, r_att=ohms)
def test_voltages_bounded(r_v, r_att):
    for sol in (solve_serial(DEFAULT_SOURCE, r_att, r_v), solve_parallel(DEFAULT_SOURCE, r_att, r_v)):
        assert 0.0 <= sol.v_ev <= sol.v_evse <= 12.0


def _nodal(src, r_v, r_att_s=0.0, r_att_p=math.inf, ev_drop=0.0, att_drop=0.0):
    net = netlist.pilot_netlist(src.v_high, src.r1, r_v, r_att_s, r_att_p, ev_drop, att_drop)
    volts = netlist.solve(net)
    return volts["evse"], volts["ev"]


def test_nodal_solver_simple_divider():
    net = netlist.Netlist().source("a", netlist.GROUND, 10).resistor("a", "b", 1000).resistor("b", netlist.GROUND, 3000)
    assert netlist.solve(net)["b"] == pytest.approx(7.5, abs=1e-12)


def test_nodal_solver_blocks_reverse_diode():
    net = (netlist.Netlist().source("a", netlist.GROUND, -12).resistor("a", "b", 1000)
           .diode("b", "k").resistor("k", netlist.GROUND, 882).resistor("b", netlist.GROUND, 1e15))
    assert netlist.solve(net)["b"] == pytest.approx(-12, abs=1e-9)


def test_closed_form_matches_nodal_on_random_instances():
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(10_000):
        r1 = float(rng.uniform(500, 2000))
        src = PilotSource(v_high=float(rng.uniform(6, 14)), r1=r1)
        r_v = float(10 ** rng.uniform(1.5, 4.5))
        r_att = float(10 ** rng.uniform(0.5, 5))
        drop = float(rng.choice([0.0, rng.uniform(0, 0.8)]))
        d = DiodeModel(drop)
        if rng.random() < 0.5:
            sol = solve_serial(src, r_att, r_v, d)
            ref = _nodal(src, r_v, r_att_s=r_att, ev_drop=drop)
        else:
            att_drop = drop if rng.random() < 0.5 else float(rng.uniform(0, 0.8))
            sol = solve_parallel(src, r_att, r_v, d, DiodeModel(att_drop))
            ref = _nodal(src, r_v, r_att_p=r_att, ev_drop=drop, att_drop=att_drop)
        worst = max(worst, abs(sol.v_evse - ref[0]), abs(sol.v_ev - ref[1]))
    assert worst <= 1e-9
